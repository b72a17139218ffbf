#pragma once

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <regex>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "safeqa/errors.hpp"
#include "safeqa/sanitizer.hpp"
#include "safeqa/text.hpp"
#include "safeqa/util.hpp"

namespace safeqa::rails {

/// Declared in severity order: Allow < Redact < Escalate < Refuse.
enum class Action { kAllow = 0, kRedact = 1, kEscalate = 2, kRefuse = 3 };
enum class Stage { kInput, kOutput };
enum class RuleKind { kBlocklist, kPattern, kPii, kTopic, kGrounding };

std::string_view to_string(Action action);
std::string_view to_string(Stage stage);
std::string_view to_string(RuleKind kind);
Action parse_action(std::string_view text);

Action most_severe(Action a, Action b);
Action compose(const std::vector<Action>& actions);

struct RailRule {
  std::string id;
  Stage stage = Stage::kInput;
  RuleKind kind = RuleKind::kPattern;
  nlohmann::json payload = nlohmann::json::object();
  Action action_on_trigger = Action::kRefuse;
};

struct Verdict {
  Action action = Action::kAllow;
  std::vector<std::string> triggered;
  std::optional<std::string> transformed_text;  // present iff action == Redact
  std::vector<std::string> notes;
  std::optional<double> topic_score;
  std::optional<double> grounding_recall;

  nlohmann::json to_json() const;
};

struct RailReport {
  Verdict input_verdict;
  std::optional<Verdict> output_verdict;
  std::vector<std::pair<std::string, double>> timings_ms;

  nlohmann::json to_json() const;
};

/// Thrown when a moderator answer fails the output rails.
class RailRejection : public Error {
 public:
  explicit RailRejection(Verdict verdict)
      : Error(ErrorCode::kRailRejected, describe(verdict)), verdict_(std::move(verdict)) {}

  const Verdict& verdict() const { return verdict_; }
  static std::string describe(const Verdict& verdict);

 private:
  Verdict verdict_;
};

/// Compiled, immutable rule set. Blocklist payloads are {"terms": [...]} or
/// {"path": "file"} (one term per line, resolved relative to the rules file).
class RuleSet {
 public:
  explicit RuleSet(std::vector<RailRule> rules, const std::string& base_dir = ".");

  static std::vector<RailRule> default_rules();
  static std::vector<RailRule> parse(const nlohmann::json& j);
  static std::shared_ptr<const RuleSet> load(const std::string& path);

  const std::vector<RailRule>& rules() const { return rules_; }

  struct Compiled {
    const RailRule* rule;
    std::vector<std::regex> patterns;
    std::vector<std::vector<std::string>> phrases;
    double threshold = 0.0;
    text::Stopwords stopwords;
  };
  const std::vector<Compiled>& compiled() const { return compiled_; }

 private:
  std::vector<RailRule> rules_;
  std::vector<Compiled> compiled_;
};

/// Maximum final retrieval score of a (redacted) query against the corpus.
using TopicScorer = std::function<double(std::string_view redacted_query)>;

struct OutputOptions {
  bool grounding = true;
};

class Guardrails {
 public:
  Guardrails(const pii::Sanitizer& sanitizer, std::shared_ptr<const RuleSet> rules);

  Verdict check_input(std::string_view query, const TopicScorer& topic_scorer) const;
  Verdict check_output(std::string_view response, const std::vector<std::string>& context,
                       OutputOptions options = {}) const;

  void reload(std::shared_ptr<const RuleSet> rules) { rules_.store(std::move(rules)); }
  std::shared_ptr<const RuleSet> rules() const { return rules_.load(); }

 private:
  const pii::Sanitizer& sanitizer_;
  Snapshot<RuleSet> rules_;
};

/// Lexical recall of response content tokens inside the context tokens.
/// nullopt when the response has no content tokens.
std::optional<double> grounding_recall(std::string_view response,
                                       const std::vector<std::string>& context,
                                       const text::Stopwords& stopwords);

text::Stopwords default_grounding_stopwords();

std::string default_refusal_template();
std::string escalation_notice(std::string_view queue_ref);

/// Allow: payload; Redact: transformed text; Refuse: refusal template;
/// Escalate: escalation notice with the queue reference.
std::string enforce(const Verdict& verdict, std::string_view payload,
                    std::string_view refusal_template, std::string_view queue_ref = {});

}  // namespace safeqa::rails
