#include "safeqa/record.hpp"

#include "safeqa/errors.hpp"

namespace safeqa {

std::string_view to_string(RecordStatus status) {
  switch (status) {
    case RecordStatus::kDraft: return "draft";
    case RecordStatus::kPublished: return "published";
    case RecordStatus::kRetired: return "retired";
  }
  return "draft";
}

std::string_view to_string(RecordSource source) {
  return source == RecordSource::kModeration ? "moderation" : "ingest";
}

RecordStatus parse_status(std::string_view text) {
  if (text == "draft") return RecordStatus::kDraft;
  if (text == "published") return RecordStatus::kPublished;
  if (text == "retired") return RecordStatus::kRetired;
  throw Error(ErrorCode::kParse, "invalid field: status");
}

RecordSource parse_source(std::string_view text) {
  if (text == "ingest") return RecordSource::kIngest;
  if (text == "moderation") return RecordSource::kModeration;
  throw Error(ErrorCode::kParse, "invalid field: source");
}

nlohmann::json to_json(const QARecord& r) {
  return {
      {"id", r.id},
      {"group_id", r.group_id},
      {"caller_query_transcription", r.caller_query_transcription},
      {"relevant_question", r.relevant_question},
      {"sanitized_question", r.sanitized_question},
      {"answer", r.answer},
      {"theme", r.theme},
      {"sub_theme", r.sub_theme},
      {"language", r.language},
      {"status", to_string(r.status)},
      {"created_at", r.created_at},
      {"source", to_string(r.source)},
  };
}

namespace {

std::string required_string(const nlohmann::json& j, const char* field) {
  auto it = j.find(field);
  if (it == j.end() || it->is_null()) {
    throw Error(ErrorCode::kParse, std::string("missing field: ") + field);
  }
  if (!it->is_string()) {
    throw Error(ErrorCode::kParse, std::string("invalid field: ") + field);
  }
  return it->get<std::string>();
}

}  // namespace

QARecord record_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw Error(ErrorCode::kParse, "not a JSON object");
  QARecord r;
  r.id = required_string(j, "id");
  r.group_id = required_string(j, "group_id");
  r.caller_query_transcription = required_string(j, "caller_query_transcription");
  r.relevant_question = required_string(j, "relevant_question");
  r.sanitized_question = required_string(j, "sanitized_question");
  r.answer = required_string(j, "answer");
  r.theme = required_string(j, "theme");
  r.sub_theme = required_string(j, "sub_theme");
  r.language = required_string(j, "language");
  r.status = parse_status(required_string(j, "status"));
  r.created_at = required_string(j, "created_at");
  r.source = parse_source(required_string(j, "source"));
  return r;
}

}  // namespace safeqa
