#include "safeqa/guardrails.hpp"

#include <algorithm>
#include <filesystem>
#include <unordered_set>

namespace safeqa::rails {

using nlohmann::json;

std::string_view to_string(Action action) {
  switch (action) {
    case Action::kAllow: return "Allow";
    case Action::kRedact: return "Redact";
    case Action::kEscalate: return "Escalate";
    case Action::kRefuse: return "Refuse";
  }
  return "Allow";
}

std::string_view to_string(Stage stage) { return stage == Stage::kInput ? "input" : "output"; }

std::string_view to_string(RuleKind kind) {
  switch (kind) {
    case RuleKind::kBlocklist: return "blocklist";
    case RuleKind::kPattern: return "pattern";
    case RuleKind::kPii: return "pii";
    case RuleKind::kTopic: return "topic";
    case RuleKind::kGrounding: return "grounding";
  }
  return "pattern";
}

Action parse_action(std::string_view text) {
  const std::string t = ascii_lower(text);
  if (t == "allow") return Action::kAllow;
  if (t == "redact") return Action::kRedact;
  if (t == "escalate") return Action::kEscalate;
  if (t == "refuse") return Action::kRefuse;
  throw Error(ErrorCode::kParse, "unknown action: " + std::string(text));
}

namespace {

Stage parse_stage(std::string_view text) {
  if (text == "input") return Stage::kInput;
  if (text == "output") return Stage::kOutput;
  throw Error(ErrorCode::kParse, "unknown stage: " + std::string(text));
}

RuleKind parse_kind(std::string_view text) {
  if (text == "blocklist") return RuleKind::kBlocklist;
  if (text == "pattern") return RuleKind::kPattern;
  if (text == "pii") return RuleKind::kPii;
  if (text == "topic") return RuleKind::kTopic;
  if (text == "grounding") return RuleKind::kGrounding;
  throw Error(ErrorCode::kParse, "unknown rule kind: " + std::string(text));
}

bool contains_phrase(const std::vector<std::string>& tokens,
                     const std::vector<std::string>& phrase) {
  if (phrase.empty() || phrase.size() > tokens.size()) return false;
  return std::search(tokens.begin(), tokens.end(), phrase.begin(), phrase.end()) !=
         tokens.end();
}

void trigger(Verdict& v, const RailRule& rule) {
  v.triggered.push_back(rule.id);
  v.action = most_severe(v.action, rule.action_on_trigger);
}

}  // namespace

Action most_severe(Action a, Action b) {
  return static_cast<int>(a) >= static_cast<int>(b) ? a : b;
}

Action compose(const std::vector<Action>& actions) {
  Action out = Action::kAllow;
  for (Action a : actions) out = most_severe(out, a);
  return out;
}

json Verdict::to_json() const {
  json j = {{"action", to_string(action)}, {"triggered", triggered}, {"notes", notes}};
  if (transformed_text) j["transformed_text"] = *transformed_text;
  if (topic_score) j["topic_score"] = *topic_score;
  if (grounding_recall) j["grounding_recall"] = *grounding_recall;
  return j;
}

json RailReport::to_json() const {
  json timings = json::object();
  for (const auto& [stage, ms] : timings_ms) timings[stage] = ms;
  return {{"input_verdict", input_verdict.to_json()},
          {"output_verdict", output_verdict ? output_verdict->to_json() : json(nullptr)},
          {"timings_ms", timings}};
}

std::string RailRejection::describe(const Verdict& verdict) {
  std::string out = "rail rejection: " + std::string(to_string(verdict.action));
  for (const auto& id : verdict.triggered) out += " " + id;
  for (const auto& note : verdict.notes) out += " (" + note + ")";
  return out;
}

text::Stopwords default_grounding_stopwords() { return text::default_stopwords(); }

std::vector<RailRule> RuleSet::default_rules() {
  json injection_patterns = json::array({
      R"(\b(ignore|disregard|forget|bhool)\b.{0,30}\b(previous|prior|above|earlier|all|your|pichle)\b.{0,20}\b(instructions?|rules|prompts?|nirdesh\w*))",
      R"(\bsystem prompt\b)",
      R"(\bpretend (you are|to be|you're)\b)",
      R"(\bact as (an? )?(unfiltered|uncensored|jailbroken|unrestricted)\b)",
      R"(\b(jailbreak|developer mode|dan mode)\b)",
      R"(\breveal (your|the) (instructions|prompt|rules|configuration)\b)",
      R"(\bnew instructions?:)",
      R"(\boverride (your|the) (safety|rules|guardrails)\b)",
  });
  json abuse_terms = json::array({
      "idiot", "stupid", "bastard", "bitch", "fuck", "fucking", "motherfucker", "asshole",
      "chutiya", "madarchod", "behenchod", "bhenchod", "harami", "kamina", "kutta",
      "kutiya", "gandu", "bhosdike", "suar", "ullu ka pattha",
  });
  json toxicity_terms = json::array({
      "slut", "whore", "bitch", "chutiya", "randi", "idiot", "stupid", "disgusting",
      "shameless", "characterless", "besharam", "you deserve it",
  });
  json grounding_stopwords = json::array();
  for (const auto& w : default_grounding_stopwords()) grounding_stopwords.push_back(w);
  std::sort(grounding_stopwords.begin(), grounding_stopwords.end());

  return {
      {"prompt_injection", Stage::kInput, RuleKind::kPattern,
       {{"patterns", injection_patterns}}, Action::kRefuse},
      {"abuse", Stage::kInput, RuleKind::kBlocklist, {{"terms", abuse_terms}}, Action::kRefuse},
      {"pii_input", Stage::kInput, RuleKind::kPii, json::object(), Action::kRedact},
      {"off_topic", Stage::kInput, RuleKind::kTopic, {{"min_score", 0.05}}, Action::kEscalate},
      {"pii_output", Stage::kOutput, RuleKind::kPii, json::object(), Action::kRedact},
      {"toxicity", Stage::kOutput, RuleKind::kBlocklist, {{"terms", toxicity_terms}},
       Action::kRefuse},
      {"grounding", Stage::kOutput, RuleKind::kGrounding,
       {{"min_recall", 0.3}, {"stopwords", grounding_stopwords}}, Action::kEscalate},
  };
}

std::vector<RailRule> RuleSet::parse(const json& j) {
  if (!j.is_array()) throw Error(ErrorCode::kParse, "rules file must be a JSON list");
  std::vector<RailRule> out;
  for (const auto& r : j) {
    try {
      RailRule rule;
      rule.id = r.at("id").get<std::string>();
      rule.stage = parse_stage(r.at("stage").get<std::string>());
      rule.kind = parse_kind(r.at("kind").get<std::string>());
      rule.payload = r.value("payload", json::object());
      rule.action_on_trigger = parse_action(r.at("action_on_trigger").get<std::string>());
      out.push_back(std::move(rule));
    } catch (const json::exception& e) {
      throw Error(ErrorCode::kParse, std::string("bad rail rule: ") + e.what());
    }
  }
  return out;
}

std::shared_ptr<const RuleSet> RuleSet::load(const std::string& path) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParse, path + ": " + e.what());
  }
  const auto dir = std::filesystem::path(path).parent_path().string();
  return std::make_shared<const RuleSet>(parse(j), dir.empty() ? "." : dir);
}

RuleSet::RuleSet(std::vector<RailRule> rules, const std::string& base_dir)
    : rules_(std::move(rules)) {
  std::unordered_set<std::string> ids;
  for (const auto& rule : rules_) {
    if (!ids.insert(rule.id).second) {
      throw Error(ErrorCode::kInvariant, "duplicate rail rule id: " + rule.id);
    }
  }
  compiled_.reserve(rules_.size());
  for (const auto& rule : rules_) {
    Compiled c{&rule, {}, {}, 0.0, {}};
    const json& p = rule.payload;
    switch (rule.kind) {
      case RuleKind::kPattern:
        for (const auto& pat : p.value("patterns", json::array())) {
          try {
            c.patterns.emplace_back(pat.get<std::string>(),
                                    std::regex::ECMAScript | std::regex::icase);
          } catch (const std::regex_error& e) {
            throw Error(ErrorCode::kParse, "bad pattern in rule " + rule.id + ": " + e.what());
          }
        }
        break;
      case RuleKind::kBlocklist: {
        std::vector<std::string> terms;
        for (const auto& t : p.value("terms", json::array())) terms.push_back(t.get<std::string>());
        if (p.contains("path")) {
          std::filesystem::path file = p.at("path").get<std::string>();
          if (file.is_relative()) file = std::filesystem::path(base_dir) / file;
          for (auto& line : read_lines(file.string())) {
            line = normalize_whitespace(line);
            if (!line.empty() && line.front() != '#') terms.push_back(line);
          }
        }
        for (const auto& t : terms) {
          auto tokens = text::tokenize(t).tokens;
          if (!tokens.empty()) c.phrases.push_back(std::move(tokens));
        }
        break;
      }
      case RuleKind::kTopic:
        c.threshold = p.value("min_score", 0.05);
        break;
      case RuleKind::kGrounding:
        c.threshold = p.value("min_recall", 0.3);
        if (p.contains("stopwords")) {
          for (const auto& w : p.at("stopwords")) c.stopwords.insert(w.get<std::string>());
        } else {
          c.stopwords = default_grounding_stopwords();
        }
        break;
      case RuleKind::kPii:
        break;
    }
    if ((rule.kind == RuleKind::kTopic || rule.kind == RuleKind::kGrounding) &&
        (c.threshold < 0.0 || c.threshold > 1.0)) {
      throw Error(ErrorCode::kInvariant, "threshold out of [0,1] in rule " + rule.id);
    }
    compiled_.push_back(std::move(c));
  }
}

Guardrails::Guardrails(const pii::Sanitizer& sanitizer, std::shared_ptr<const RuleSet> rules)
    : sanitizer_(sanitizer), rules_(std::move(rules)) {}

Verdict Guardrails::check_input(std::string_view query, const TopicScorer& topic_scorer) const {
  auto rules = rules_.load();
  Verdict v;
  const std::string normalized = normalize_whitespace(query);
  const auto tokens = text::tokenize(query).tokens;

  // Evaluation order: injection patterns, abuse lists, PII, topic.
  for (const auto& c : rules->compiled()) {
    if (c.rule->stage != Stage::kInput || c.rule->kind != RuleKind::kPattern) continue;
    const bool hit = std::any_of(c.patterns.begin(), c.patterns.end(), [&](const std::regex& re) {
      return std::regex_search(normalized, re);
    });
    if (hit) trigger(v, *c.rule);
  }
  for (const auto& c : rules->compiled()) {
    if (c.rule->stage != Stage::kInput || c.rule->kind != RuleKind::kBlocklist) continue;
    const bool hit = std::any_of(c.phrases.begin(), c.phrases.end(),
                                 [&](const auto& phrase) { return contains_phrase(tokens, phrase); });
    if (hit) trigger(v, *c.rule);
  }
  std::string working(query);
  std::optional<std::string> redacted;
  for (const auto& c : rules->compiled()) {
    if (c.rule->stage != Stage::kInput || c.rule->kind != RuleKind::kPii) continue;
    auto result = sanitizer_.redact(query);
    if (!result.clean) {
      trigger(v, *c.rule);
      redacted = result.text;
      working = result.text;
    }
  }
  if (v.action != Action::kRefuse) {
    for (const auto& c : rules->compiled()) {
      if (c.rule->stage != Stage::kInput || c.rule->kind != RuleKind::kTopic) continue;
      if (!topic_scorer) {
        v.notes.push_back("topic rule skipped: no retrieval");
        continue;
      }
      const double score = topic_scorer(working);
      v.topic_score = score;
      if (score < c.threshold) {
        trigger(v, *c.rule);
        v.notes.push_back("off-topic");
      }
    }
  }
  if (v.action == Action::kRedact) v.transformed_text = redacted.value_or(working);
  return v;
}

std::optional<double> grounding_recall(std::string_view response,
                                       const std::vector<std::string>& context,
                                       const text::Stopwords& stopwords) {
  const auto content = text::tokenize(response, stopwords).tokens;
  if (content.empty()) return std::nullopt;
  std::unordered_set<std::string> context_tokens;
  for (const auto& passage : context) {
    for (auto& t : text::tokenize(passage).tokens) context_tokens.insert(std::move(t));
  }
  std::size_t found = 0;
  for (const auto& t : content) found += context_tokens.count(t);
  return static_cast<double>(found) / static_cast<double>(content.size());
}

Verdict Guardrails::check_output(std::string_view response, const std::vector<std::string>& context,
                                 OutputOptions options) const {
  auto rules = rules_.load();
  Verdict v;
  std::optional<std::string> redacted;
  for (const auto& c : rules->compiled()) {
    if (c.rule->stage != Stage::kOutput || c.rule->kind != RuleKind::kPii) continue;
    auto result = sanitizer_.redact(response);
    if (!result.clean) {
      trigger(v, *c.rule);
      redacted = result.text;
    }
  }
  const auto tokens = text::tokenize(response).tokens;
  for (const auto& c : rules->compiled()) {
    if (c.rule->stage != Stage::kOutput || c.rule->kind != RuleKind::kBlocklist) continue;
    const bool hit = std::any_of(c.phrases.begin(), c.phrases.end(),
                                 [&](const auto& phrase) { return contains_phrase(tokens, phrase); });
    if (hit) trigger(v, *c.rule);
  }
  for (const auto& c : rules->compiled()) {
    if (c.rule->stage != Stage::kOutput || c.rule->kind != RuleKind::kGrounding) continue;
    if (!options.grounding) continue;
    if (context.empty()) {
      v.notes.push_back("ungrounded-by-construction");
      continue;
    }
    const auto recall = grounding_recall(response, context, c.stopwords);
    if (!recall) {
      v.notes.push_back("no content tokens");
      continue;
    }
    v.grounding_recall = *recall;
    if (*recall < c.threshold) {
      trigger(v, *c.rule);
      v.notes.push_back("low grounding");
    }
  }
  if (v.action == Action::kRedact) v.transformed_text = redacted.value_or(std::string(response));
  return v;
}

std::string default_refusal_template() {
  return "I'm sorry, I can't help with that request. If you need support, please call "
         "the helpline again and a trained counsellor will listen to you.";
}

std::string escalation_notice(std::string_view queue_ref) {
  return "Your question has been passed to a trained counsellor, who will record an "
         "answer for you. Reference: " +
         std::string(queue_ref);
}

std::string enforce(const Verdict& verdict, std::string_view payload,
                    std::string_view refusal_template, std::string_view queue_ref) {
  switch (verdict.action) {
    case Action::kAllow: return std::string(payload);
    case Action::kRedact: return verdict.transformed_text.value_or(std::string(payload));
    case Action::kRefuse: return std::string(refusal_template);
    case Action::kEscalate: return escalation_notice(queue_ref);
  }
  return std::string(payload);
}

}  // namespace safeqa::rails
