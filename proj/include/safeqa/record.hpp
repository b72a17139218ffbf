#pragma once

#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

namespace safeqa {

enum class RecordStatus { kDraft, kPublished, kRetired };
enum class RecordSource { kIngest, kModeration };

std::string_view to_string(RecordStatus status);
std::string_view to_string(RecordSource source);
RecordStatus parse_status(std::string_view text);
RecordSource parse_source(std::string_view text);

/// One grouped, sanitized question/answer entry. Records sharing a group_id
/// are paraphrases of the same question and carry the same answer.
struct QARecord {
  std::string id;
  std::string group_id;
  std::string caller_query_transcription;
  std::string relevant_question;
  std::string sanitized_question;
  std::string answer;
  std::string theme;
  std::string sub_theme;
  std::string language = "hi";
  RecordStatus status = RecordStatus::kDraft;
  std::string created_at;
  RecordSource source = RecordSource::kIngest;

  bool operator==(const QARecord&) const = default;
};

nlohmann::json to_json(const QARecord& record);
/// Strict: throws Error(kParse) naming the first missing or mistyped field.
QARecord record_from_json(const nlohmann::json& j);

}  // namespace safeqa
