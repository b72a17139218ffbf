#include "safeqa/pipeline.hpp"

#include <chrono>

#include <spdlog/sinks/null_sink.h>

#include "safeqa/errors.hpp"

namespace safeqa::pipeline {

using nlohmann::json;
using rails::Action;

std::string_view to_string(Route route) {
  switch (route) {
    case Route::kRetrieval: return "retrieval";
    case Route::kGeneration: return "generation";
    case Route::kRefusal: return "refusal";
    case Route::kEscalated: return "escalated";
    case Route::kError: return "error";
  }
  return "error";
}

json AnswerEnvelope::to_json() const {
  json provenance_json = json::object();
  if (provenance.record_id) provenance_json["record_id"] = *provenance.record_id;
  if (provenance.provider_id) provenance_json["provider_id"] = *provenance.provider_id;
  if (provenance.finish_reason) provenance_json["finish_reason"] = *provenance.finish_reason;
  if (provenance.attempts) provenance_json["attempts"] = *provenance.attempts;
  provenance_json["context_ids"] = provenance.context_ids;
  json timings = json::object();
  for (const auto& [stage, ms] : timings_ms) timings[stage] = ms;
  return {{"answer_text", answer_text},
          {"answer_audio", answer_audio ? answer_audio->to_json() : json(nullptr)},
          {"route_taken", to_string(route_taken)},
          {"relevance", retrieval::to_json(relevance)},
          {"provenance", provenance_json},
          {"rail_report", rail_report.to_json()},
          {"timings_ms", timings},
          {"corpus_version", corpus_version},
          {"index_version", index_version},
          {"moderation_item_id", moderation_item_id ? json(*moderation_item_id) : json(nullptr)},
          {"warnings", warnings}};
}

namespace {

class StageClock {
 public:
  explicit StageClock(std::vector<std::pair<std::string, double>>& sink) : sink_(sink) {}

  template <typename F>
  auto run(const char* stage, F&& fn) -> decltype(fn()) {
    const auto start = std::chrono::steady_clock::now();
    struct Record {
      StageClock& self;
      const char* stage;
      std::chrono::steady_clock::time_point start;
      ~Record() {
        const auto elapsed = std::chrono::steady_clock::now() - start;
        self.sink_.emplace_back(stage,
                                std::chrono::duration<double, std::milli>(elapsed).count());
      }
    } record{*this, stage, start};
    return fn();
  }

 private:
  std::vector<std::pair<std::string, double>>& sink_;
};

bool has_rule_kind(const rails::Guardrails& guardrails, const rails::Verdict& verdict,
                   rails::RuleKind kind) {
  auto rules = guardrails.rules();
  for (const auto& id : verdict.triggered) {
    for (const auto& rule : rules->rules()) {
      if (rule.id == id && rule.kind == kind) return true;
    }
  }
  return false;
}

}  // namespace

Engine::Engine(EngineParts parts, EngineConfig config)
    : parts_(std::move(parts)), config_(std::move(config)), tau_(config_.tau) {
  if (!parts_.logger) {
    parts_.logger = std::make_shared<spdlog::logger>(
        "safeqa.pipeline", std::make_shared<spdlog::sinks::null_sink_mt>());
  }
  config_.default_route.validate();
}

void Engine::attach_index() {
  parts_.store.subscribe([this](const corpus::Event& event) {
    if (event.op == corpus::EventOp::kAdd) {
      if (event.record.status != RecordStatus::kPublished) return;
      try {
        parts_.retriever.add_document(event.record);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::kDuplicate) throw;
      }
    } else {
      parts_.retriever.rebuild(parts_.store.published());
    }
  });
  parts_.retriever.rebuild(parts_.store.published());
}

moderation::ModerationItem Engine::escalate(std::string_view query, moderation::Reason reason,
                                            std::string_view language) {
  auto item = parts_.queue.escalate(parts_.sanitizer.redact(query).text, reason, language);
  parts_.logger->info("escalated item={} reason={}", item.id, moderation::to_string(reason));
  return item;
}

AnswerEnvelope Engine::answer(const AskRequest& request) {
  AnswerEnvelope env;
  StageClock clock(env.timings_ms);
  const auto started = std::chrono::steady_clock::now();
  env.corpus_version = parts_.store.version();
  const auto snap = parts_.retriever.snapshot();
  env.index_version = snap->version;
  const double tau = tau_.load();
  env.relevance.threshold = tau;
  env.relevance.margin = -tau;
  const auto lr = request.route.value_or(config_.default_route);

  auto finish = [&](std::string text, lang::OutputProcessor* output) {
    if (output != nullptr && *output) {
      auto routed_out = clock.run("output_route", [&] { return (*output)(text); });
      env.answer_text = std::move(routed_out.text);
      env.answer_audio = std::move(routed_out.audio);
      for (auto& w : routed_out.warnings) env.warnings.push_back(std::move(w));
    } else {
      env.answer_text = std::move(text);
    }
    env.timings_ms.emplace_back(
        "total", std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started)
                     .count());
    env.rail_report.timings_ms = env.timings_ms;
    record_metrics(env);
    parts_.logger->info("answered route={} corpus_version={} index_version={}",
                        to_string(env.route_taken), env.corpus_version, env.index_version);
    return env;
  };

  // (1) input language routing
  lang::Routed routed;
  try {
    routed = clock.run("input_route", [&] {
      return lang::route(lang::QueryInput{request.query_text, request.audio}, lr, parts_.language);
    });
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kInvalidArgument) throw;
    env.route_taken = Route::kError;
    env.rail_report.input_verdict.notes.push_back("not evaluated: input unavailable");
    env.warnings.push_back(std::string("input routing failed: ") + e.what());
    lang::Providers audio_only{nullptr, nullptr, parts_.language.tts, parts_.language.retry};
    auto fallback = lang::route(lang::QueryInput{config_.error_template, std::nullopt},
                                lang::LanguageRoute::direct(lr.output_lang), audio_only);
    return finish(config_.error_template, &fallback.output);
  }
  const std::string& query = routed.input.text;

  auto escalate_to = [&](moderation::Reason reason, const std::string& text) {
    try {
      auto item = clock.run("escalate", [&] { return escalate(text, reason, lr.source_lang); });
      env.route_taken = Route::kEscalated;
      env.moderation_item_id = item.id;
      return rails::escalation_notice(item.id);
    } catch (const Error& e) {
      env.route_taken = Route::kError;
      env.warnings.push_back(std::string("escalation failed: ") + e.what());
      return config_.error_template;
    }
  };

  // (2) input rails
  std::vector<retrieval::RetrievalHit> hits;
  std::optional<std::string> searched_text;
  const auto topic_scorer = [&](std::string_view text) {
    hits = parts_.retriever.search(*snap, text, config_.retrieval_k);
    searched_text = std::string(text);
    return hits.empty() ? 0.0 : hits.front().final_score;
  };
  // An empty index says nothing about topicality; the topic rule is skipped.
  const bool can_score_topic = snap->sparse.doc_count() > 0;
  const rails::Verdict input = clock.run("input_rails", [&] {
    return parts_.guardrails.check_input(
        query, can_score_topic ? rails::TopicScorer(topic_scorer) : rails::TopicScorer{});
  });
  env.rail_report.input_verdict = input;

  if (input.action == Action::kRefuse) {
    env.route_taken = Route::kRefusal;
    return finish(config_.refusal_template, &routed.output);
  }
  const std::string working = parts_.sanitizer.redact(query).text;
  parts_.logger->debug("query (redacted): {}", working);
  if (input.action == Action::kEscalate) {
    const auto reason = has_rule_kind(parts_.guardrails, input, rails::RuleKind::kTopic)
                            ? moderation::Reason::kOffTopic
                            : moderation::Reason::kRailEscalated;
    auto notice = escalate_to(reason, working);
    return finish(std::move(notice), &routed.output);
  }

  // (3) retrieval
  if (!searched_text || *searched_text != working) {
    hits = clock.run("retrieval",
                     [&] { return parts_.retriever.search(*snap, working, config_.retrieval_k); });
  }
  env.relevance = retrieval::decide_relevance(hits, tau);
  if (env.relevance.accepted) {
    const std::string& record_id = hits.front().record_id;
    auto record = parts_.store.get(record_id);
    if (record && record->status == RecordStatus::kPublished) {
      env.provenance.record_id = record_id;
      const auto verdict = clock.run("output_rails", [&] {
        return parts_.guardrails.check_output(record->answer, {}, {.grounding = false});
      });
      env.rail_report.output_verdict = verdict;
      switch (verdict.action) {
        case Action::kAllow:
        case Action::kRedact:
          env.route_taken = Route::kRetrieval;
          return finish(rails::enforce(verdict, record->answer, config_.refusal_template),
                        &routed.output);
        case Action::kRefuse:
          env.route_taken = Route::kRefusal;
          return finish(config_.refusal_template, &routed.output);
        case Action::kEscalate: {
          auto notice = escalate_to(moderation::Reason::kOutputEscalated, working);
          return finish(std::move(notice), &routed.output);
        }
      }
    }
    env.relevance.accepted = false;
    env.warnings.push_back("top hit is not a published record");
  }

  // (4) generation
  if (!parts_.generator) {
    auto notice = escalate_to(moderation::Reason::kLowRelevanceAndGenerationUnavailable, working);
    return finish(std::move(notice), &routed.output);
  }
  const auto examples = gen::select_icl_examples(working, config_.icl_examples, parts_.retriever);
  const auto context = gen::context_from_hits(hits, *snap, config_.context_passages);
  for (const auto& c : context) env.provenance.context_ids.push_back(c.record_id);
  gen::GenerationRequest gen_request;
  gen_request.prompt = gen::build_prompt(working, examples, context,
                                         gen::PromptTemplate::defaults(routed.input.language));
  gen_request.max_tokens = config_.max_tokens;
  gen_request.temperature = config_.temperature;
  gen_request.provider_id = parts_.generator->provider_id();
  env.provenance.provider_id = parts_.generator->provider_id();

  gen::GenerationResult result;
  try {
    result = clock.run("generation", [&] { return parts_.generator->generate(gen_request); });
  } catch (const Error& e) {
    env.warnings.push_back(std::string("generation failed: ") + e.what());
    auto notice = escalate_to(moderation::Reason::kLowRelevanceAndGenerationUnavailable, working);
    return finish(std::move(notice), &routed.output);
  }
  env.provenance.finish_reason = std::string(gen::to_string(result.finish_reason));
  env.provenance.attempts = result.attempts;
  if (parts_.metrics) {
    parts_.metrics->observe_ms("provider_latency", "provider=" + gen_request.provider_id,
                               static_cast<double>(result.provider_latency.count()));
  }
  if (result.finish_reason == gen::FinishReason::kFiltered) {
    env.warnings.push_back("provider filtered the response");
    auto notice = escalate_to(moderation::Reason::kOutputEscalated, working);
    return finish(std::move(notice), &routed.output);
  }
  if (result.finish_reason == gen::FinishReason::kError) {
    auto notice = escalate_to(moderation::Reason::kLowRelevanceAndGenerationUnavailable, working);
    return finish(std::move(notice), &routed.output);
  }

  std::vector<std::string> passages;
  for (const auto& c : context) passages.push_back(c.question + "\n" + c.answer);
  const auto verdict = clock.run(
      "output_rails", [&] { return parts_.guardrails.check_output(result.text, passages); });
  env.rail_report.output_verdict = verdict;
  switch (verdict.action) {
    case Action::kAllow:
    case Action::kRedact:
      env.route_taken = Route::kGeneration;
      return finish(rails::enforce(verdict, result.text, config_.refusal_template),
                    &routed.output);
    case Action::kRefuse:
      env.route_taken = Route::kRefusal;
      return finish(config_.refusal_template, &routed.output);
    case Action::kEscalate:
      break;
  }
  auto notice = escalate_to(moderation::Reason::kOutputEscalated, working);
  return finish(std::move(notice), &routed.output);
}

void Engine::record_metrics(const AnswerEnvelope& env) {
  if (!parts_.metrics) return;
  parts_.metrics->increment("requests_total", "route=" + std::string(to_string(env.route_taken)));
  for (const auto& id : env.rail_report.input_verdict.triggered) {
    parts_.metrics->increment("rail_triggers_total", "rule=" + id);
  }
  if (env.rail_report.output_verdict) {
    for (const auto& id : env.rail_report.output_verdict->triggered) {
      parts_.metrics->increment("rail_triggers_total", "rule=" + id);
    }
  }
}

ResolveResult Engine::resolve_moderation(const std::string& item_id, const std::string& answer,
                                         const std::string& theme, const std::string& sub_theme) {
  std::lock_guard lock(resolve_mutex_);
  auto item = parts_.queue.get(item_id);
  if (!item) throw Error(ErrorCode::kNotFound, "unknown moderation item " + item_id);
  if (item->status != moderation::ItemStatus::kOpen) throw Error(ErrorCode::kConflict, "not open");
  const std::string canonical = corpus::canonical_answer(answer);
  if (canonical.empty()) throw Error(ErrorCode::kInvalidArgument, "answer is empty");
  auto verdict = parts_.guardrails.check_output(canonical, {}, {.grounding = false});
  if (verdict.action != Action::kAllow) throw rails::RailRejection(std::move(verdict));

  QARecord record;
  record.id = "rec-" + item->id;
  record.group_id = corpus::group_id_for(canonical);
  record.caller_query_transcription = item->query_text;
  record.relevant_question = item->query_text;
  record.sanitized_question = item->query_text;
  record.answer = canonical;
  record.theme = theme;
  record.sub_theme = sub_theme;
  record.language = item->language;
  record.status = RecordStatus::kPublished;
  record.created_at = format_utc(std::chrono::system_clock::now());
  record.source = RecordSource::kModeration;

  ResolveResult result;
  if (auto existing = parts_.store.get(record.id)) {
    // Publication landed before a crash that lost the queue transition.
    result.record = *existing;
    result.corpus_version = parts_.store.version();
  } else {
    result.corpus_version = parts_.store.append_record(record);
    result.record = record;
  }
  parts_.queue.mark_resolved(item_id, {canonical, theme, sub_theme, result.record.id});
  result.index_version = parts_.retriever.version();
  parts_.logger->info("resolved item={} record={} corpus_version={}", item_id, result.record.id,
                      result.corpus_version);
  return result;
}

}  // namespace safeqa::pipeline
