#pragma once

#include <cstddef>
#include <memory>
#include <regex>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "safeqa/record.hpp"
#include "safeqa/util.hpp"

namespace safeqa::pii {

enum class Kind { kPhone, kAge, kName, kPlace, kIdNumber };

std::string_view to_string(Kind kind);
/// "[PHONE]", "[AGE]", ...
std::string placeholder(Kind kind);

/// Byte offsets into the original text; always on codepoint boundaries.
struct Span {
  Kind kind;
  std::size_t start = 0;
  std::size_t end = 0;
  std::string surface;

  bool operator==(const Span&) const = default;
};

struct RedactionResult {
  std::string text;
  std::vector<Span> spans;
  bool clean = true;
};

/// Rule and lexicon configuration. Mirrors the JSON config keys.
struct RuleConfig {
  std::vector<std::string> phone_patterns;
  std::vector<std::string> age_cues;
  std::vector<std::string> name_lexicon;
  std::vector<std::string> gazetteer;
  std::vector<std::string> id_patterns;
  std::vector<std::string> self_reference_cues;

  static RuleConfig defaults();
  static RuleConfig from_json(const nlohmann::json& j);
  static RuleConfig load(const std::string& path);
  nlohmann::json to_json() const;
};

/// Compiled, immutable form of a RuleConfig.
class RuleSet {
 public:
  explicit RuleSet(RuleConfig config);

  std::vector<Span> detect(std::string_view text) const;
  const RuleConfig& config() const { return config_; }

 private:
  struct Candidate {
    Kind kind;
    std::size_t start;
    std::size_t end;
  };

  void match_patterns(std::string_view text, Kind kind,
                      const std::vector<std::regex>& patterns,
                      std::vector<Candidate>& out) const;
  void match_ages(std::string_view text, std::string_view lowered,
                  std::vector<Candidate>& out) const;
  void match_lexicon(std::string_view text, std::string_view lowered, Kind kind,
                     const std::vector<std::string>& lexicon,
                     std::vector<Candidate>& out) const;
  void match_self_reference(std::string_view text, std::string_view lowered,
                            std::vector<Candidate>& out) const;

  RuleConfig config_;
  std::vector<std::regex> phone_;
  std::vector<std::regex> id_;
  std::vector<std::string> age_cues_;
  std::vector<std::string> names_;
  std::vector<std::string> places_;
  std::vector<std::string> self_cues_;
};

/// Thread-safe front end; the rule set can be swapped while detections run.
class Sanitizer {
 public:
  Sanitizer();
  explicit Sanitizer(RuleConfig config);

  std::vector<Span> detect_pii(std::string_view text) const;
  RedactionResult redact(std::string_view text) const;
  bool is_clean(std::string_view text) const { return detect_pii(text).empty(); }

  /// sanitized_question = redact(relevant_question).text.
  QARecord sanitize_record(QARecord record) const;

  void reload(RuleConfig config);
  std::shared_ptr<const RuleSet> rules() const { return rules_.load(); }

 private:
  Snapshot<RuleSet> rules_;
};

}  // namespace safeqa::pii
