#include "safeqa/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include "safeqa/errors.hpp"
#include "safeqa/text.hpp"

namespace safeqa::corpus {

namespace fs = std::filesystem;
using nlohmann::json;

json IngestReport::to_json() const {
  json reasons = json::array();
  for (const auto& [line, reason] : rejection_reasons) {
    reasons.push_back({{"line", line}, {"reason", reason}});
  }
  return {{"accepted", accepted},
          {"rejected", rejected},
          {"rejection_reasons", reasons},
          {"groups_formed", groups_formed}};
}

std::string canonical_answer(std::string_view answer) {
  return normalize_whitespace(answer);
}

std::string group_id_for(std::string_view answer) {
  return "g-" + to_hex(fnv1a64(canonical_answer(answer)));
}

std::map<std::string, std::string> group_paraphrases(std::vector<QARecord>& records) {
  std::map<std::string, std::string> by_hash;
  for (auto& r : records) {
    const std::string canonical = canonical_answer(r.answer);
    const std::string hash = to_hex(fnv1a64(canonical));
    r.group_id = "g-" + hash;
    by_hash.emplace(hash, r.group_id);
  }
  return by_hash;
}

namespace {

std::string_view op_name(EventOp op) {
  return op == EventOp::kAdd ? "add" : "update-status";
}

EventOp parse_op(std::string_view text) {
  if (text == "add") return EventOp::kAdd;
  if (text == "update-status") return EventOp::kUpdateStatus;
  throw Error(ErrorCode::kParse, "unknown event op: " + std::string(text));
}

const char* kEventsFile = "events.jsonl";
const char* kSnapshotFile = "snapshot.jsonl";

}  // namespace

json Event::to_json() const {
  return {{"version", version}, {"op", op_name(op)}, {"record", safeqa::to_json(record)}};
}

Event Event::from_json(const json& j) {
  Event e;
  e.version = j.at("version").get<std::uint64_t>();
  e.op = parse_op(j.at("op").get<std::string>());
  e.record = record_from_json(j.at("record"));
  return e;
}

RecordMap replay(const std::vector<Event>& events) {
  RecordMap out;
  for (const auto& e : events) out[e.record.id] = e.record;
  return out;
}

CorpusStore::CorpusStore(const pii::Sanitizer& sanitizer)
    : CorpusStore(sanitizer, Options{}) {}

CorpusStore::CorpusStore(const pii::Sanitizer& sanitizer, Options options)
    : sanitizer_(sanitizer), options_(std::move(options)) {
  if (options_.directory) {
    fs::create_directories(*options_.directory);
    load_from_disk();
  }
}

void CorpusStore::load_from_disk() {
  const fs::path dir = *options_.directory;
  std::uint64_t snapshot_version = 0;
  if (fs::exists(dir / kSnapshotFile)) {
    auto lines = read_lines((dir / kSnapshotFile).string());
    if (!lines.empty()) {
      snapshot_version = json::parse(lines.front()).at("version").get<std::uint64_t>();
      for (std::size_t i = 1; i < lines.size(); ++i) {
        if (lines[i].empty()) continue;
        QARecord r = record_from_json(json::parse(lines[i]));
        records_[r.id] = r;
      }
    }
  }
  version_ = snapshot_version;
  if (fs::exists(dir / kEventsFile)) {
    for (const auto& line : read_lines((dir / kEventsFile).string())) {
      if (line.empty()) continue;
      Event e;
      try {
        e = Event::from_json(json::parse(line));
      } catch (const json::exception&) {
        // A torn final write is the only expected corruption; stop there.
        break;
      }
      events_.push_back(e);
      if (e.version <= snapshot_version) continue;
      if (e.version != version_ + 1) {
        throw Error(ErrorCode::kInvariant, "event log gap at version " +
                                               std::to_string(e.version));
      }
      records_[e.record.id] = e.record;
      version_ = e.version;
    }
  }
  for (const auto& [id, r] : records_) {
    if (!r.group_id.empty()) group_answers_[r.group_id] = r.answer;
  }
}

void CorpusStore::validate(const QARecord& r) const {
  if (r.id.empty()) throw Error(ErrorCode::kInvariant, "missing field: id");
  if (records_.contains(r.id)) throw Error(ErrorCode::kDuplicate, "duplicate id");
  if (!sanitizer_.is_clean(r.sanitized_question)) {
    throw Error(ErrorCode::kInvariant, "sanitization invariant violated");
  }
  if (r.status == RecordStatus::kPublished) {
    if (r.answer.empty()) throw Error(ErrorCode::kInvariant, "published record without answer");
    if (r.group_id.empty()) throw Error(ErrorCode::kInvariant, "published record without group_id");
  }
  if (!r.group_id.empty()) {
    auto it = group_answers_.find(r.group_id);
    if (it != group_answers_.end() && it->second != r.answer) {
      throw Error(ErrorCode::kInvariant, "group answer mismatch");
    }
  }
}

std::uint64_t CorpusStore::commit(EventOp op, QARecord record) {
  Event event;
  {
    std::unique_lock lock(data_mutex_);
    event = Event{version_ + 1, op, std::move(record)};
    if (options_.directory) {
      std::ofstream out(*options_.directory / kEventsFile, std::ios::app);
      out << event.to_json().dump() << '\n';
      out.flush();
      if (!out) throw Error(ErrorCode::kIo, "event log write failed");
    }
    records_[event.record.id] = event.record;
    if (!event.record.group_id.empty()) {
      group_answers_[event.record.group_id] = event.record.answer;
    }
    events_.push_back(event);
    version_ = event.version;
  }
  if (options_.directory && options_.snapshot_every > 0 &&
      event.version % options_.snapshot_every == 0) {
    write_snapshot();
  }
  for (const auto& listener : listeners_) listener(event);
  return event.version;
}

std::uint64_t CorpusStore::append_record(QARecord record) {
  std::lock_guard writer(writer_);
  {
    std::shared_lock lock(data_mutex_);
    validate(record);
  }
  return commit(EventOp::kAdd, std::move(record));
}

std::uint64_t CorpusStore::update_status(const std::string& id, RecordStatus status) {
  std::lock_guard writer(writer_);
  QARecord updated;
  {
    std::shared_lock lock(data_mutex_);
    auto it = records_.find(id);
    if (it == records_.end()) throw Error(ErrorCode::kNotFound, "unknown record " + id);
    updated = it->second;
  }
  if (status == RecordStatus::kPublished &&
      (updated.answer.empty() || updated.group_id.empty())) {
    throw Error(ErrorCode::kInvariant, "published record without answer");
  }
  updated.status = status;
  return commit(EventOp::kUpdateStatus, std::move(updated));
}

QARecord CorpusStore::normalize_ingested(const json& j) const {
  if (!j.is_object()) throw Error(ErrorCode::kParse, "not a JSON object");
  auto field = [&](const char* name, bool required) -> std::string {
    auto it = j.find(name);
    if (it == j.end() || it->is_null()) {
      if (required) throw Error(ErrorCode::kParse, std::string("missing field: ") + name);
      return {};
    }
    if (!it->is_string()) throw Error(ErrorCode::kParse, std::string("invalid field: ") + name);
    return it->get<std::string>();
  };
  QARecord r;
  r.id = field("id", true);
  r.relevant_question = field("relevant_question", true);
  r.answer = field("answer", true);
  r.theme = field("theme", true);
  r.sub_theme = field("sub_theme", true);
  r.caller_query_transcription = field("caller_query_transcription", false);
  r.sanitized_question = field("sanitized_question", false);
  r.language = field("language", false);
  r.created_at = field("created_at", false);
  if (r.id.empty()) throw Error(ErrorCode::kParse, "missing field: id");
  if (r.answer.empty()) throw Error(ErrorCode::kParse, "missing field: answer");
  if (r.relevant_question.empty()) {
    throw Error(ErrorCode::kParse, "missing field: relevant_question");
  }
  for (const std::string* s : {&r.id, &r.relevant_question, &r.answer,
                               &r.caller_query_transcription, &r.sanitized_question}) {
    if (!text::is_valid_utf8(*s)) throw Error(ErrorCode::kParse, "invalid UTF-8");
  }
  if (r.language.empty()) r.language = "hi";
  if (r.created_at.empty()) {
    r.created_at = format_utc(options_.clock());
  } else {
    parse_utc(r.created_at);
  }
  if (r.sanitized_question.empty()) {
    r = sanitizer_.sanitize_record(std::move(r));
  }
  r.answer = canonical_answer(r.answer);
  r.group_id = group_id_for(r.answer);
  r.status = RecordStatus::kPublished;
  r.source = RecordSource::kIngest;
  return r;
}

IngestReport CorpusStore::ingest_lines(const std::vector<std::string>& lines) {
  IngestReport report;
  std::set<std::string> groups;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::size_t line_no = i + 1;
    auto reject = [&](std::string reason) {
      ++report.rejected;
      report.rejection_reasons.emplace_back(line_no, std::move(reason));
    };
    try {
      if (normalize_whitespace(lines[i]).empty()) {
        reject("empty line");
        continue;
      }
      json j;
      try {
        j = json::parse(lines[i]);
      } catch (const json::exception&) {
        reject("malformed JSON");
        continue;
      }
      QARecord r = normalize_ingested(j);
      const std::string group = r.group_id;
      append_record(std::move(r));
      ++report.accepted;
      groups.insert(group);
    } catch (const Error& e) {
      reject(e.what());
    }
  }
  report.groups_formed = groups.size();
  return report;
}

IngestReport CorpusStore::ingest_jsonl(const std::string& path) {
  return ingest_lines(read_lines(path));
}

IngestReport CorpusStore::ingest_text(std::string_view jsonl) {
  std::vector<std::string> lines;
  std::size_t start = 0;
  while (start < jsonl.size()) {
    std::size_t end = jsonl.find('\n', start);
    if (end == std::string_view::npos) end = jsonl.size();
    std::string line(jsonl.substr(start, end - start));
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
    start = end + 1;
  }
  return ingest_lines(lines);
}

Split CorpusStore::holdout_split(std::uint64_t seed, double fraction) const {
  if (!(fraction > 0.0 && fraction < 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "fraction must be in (0,1)");
  }
  std::map<std::string, std::vector<std::string>> groups;
  for (const auto& r : published()) groups[r.group_id].push_back(r.id);

  Split split;
  Rng rng(seed);
  bool any_multi = false;
  for (auto& [group, ids] : groups) {
    std::sort(ids.begin(), ids.end());
    const std::size_t n = ids.size();
    if (n < 2) {
      split.train.push_back(ids.front());
      continue;
    }
    any_multi = true;
    auto hold = static_cast<std::size_t>(std::llround(static_cast<double>(n) * fraction));
    hold = std::min(hold, n - 1);
    rng.shuffle(ids);
    for (std::size_t i = 0; i < n; ++i) {
      (i < hold ? split.held_out : split.train).push_back(ids[i]);
    }
  }
  if (!any_multi) throw Error(ErrorCode::kPrecondition, "nothing to hold out");
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.held_out.begin(), split.held_out.end());
  return split;
}

std::uint64_t CorpusStore::version() const {
  std::shared_lock lock(data_mutex_);
  return version_;
}

std::optional<QARecord> CorpusStore::get(const std::string& id) const {
  std::shared_lock lock(data_mutex_);
  auto it = records_.find(id);
  if (it == records_.end()) return std::nullopt;
  return it->second;
}

std::vector<QARecord> CorpusStore::records() const {
  std::shared_lock lock(data_mutex_);
  std::vector<QARecord> out;
  out.reserve(records_.size());
  for (const auto& [id, r] : records_) out.push_back(r);
  return out;
}

std::vector<QARecord> CorpusStore::published() const {
  std::shared_lock lock(data_mutex_);
  std::vector<QARecord> out;
  for (const auto& [id, r] : records_) {
    if (r.status == RecordStatus::kPublished) out.push_back(r);
  }
  return out;
}

std::vector<Event> CorpusStore::events() const {
  std::shared_lock lock(data_mutex_);
  return events_;
}

RecordMap CorpusStore::snapshot() const {
  std::shared_lock lock(data_mutex_);
  return records_;
}

void CorpusStore::subscribe(Listener listener) {
  std::lock_guard writer(writer_);
  listeners_.push_back(std::move(listener));
}

void CorpusStore::write_snapshot() const {
  if (!options_.directory) return;
  std::string body;
  {
    std::shared_lock lock(data_mutex_);
    body = json{{"version", version_}}.dump() + "\n";
    for (const auto& [id, r] : records_) body += safeqa::to_json(r).dump() + "\n";
  }
  write_file_atomic((*options_.directory / kSnapshotFile).string(), body);
}

}  // namespace safeqa::corpus
