#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "safeqa/record.hpp"
#include "safeqa/sanitizer.hpp"
#include "safeqa/util.hpp"

namespace safeqa::corpus {

struct IngestReport {
  std::size_t accepted = 0;
  std::size_t rejected = 0;
  std::vector<std::pair<std::size_t, std::string>> rejection_reasons;  // 1-based line
  std::size_t groups_formed = 0;

  nlohmann::json to_json() const;
};

/// Canonical answer form used for grouping and storage: trimmed, internal
/// whitespace runs collapsed, case preserved.
std::string canonical_answer(std::string_view answer);

/// Content-derived group id; identical canonical answers share it.
std::string group_id_for(std::string_view answer);

/// Assigns group_id on every record; returns answer-hash -> group_id.
std::map<std::string, std::string> group_paraphrases(std::vector<QARecord>& records);

enum class EventOp { kAdd, kUpdateStatus };

struct Event {
  std::uint64_t version = 0;
  EventOp op = EventOp::kAdd;
  QARecord record;

  nlohmann::json to_json() const;
  static Event from_json(const nlohmann::json& j);
};

using RecordMap = std::map<std::string, QARecord>;

/// Rebuilds the id -> record map from an event sequence.
RecordMap replay(const std::vector<Event>& events);

struct Split {
  std::vector<std::string> train;
  std::vector<std::string> held_out;
};

/// Append-only QA store. One writer at a time; readers see a consistent
/// version. With a directory, events are written ahead to events.jsonl and
/// snapshot.jsonl is refreshed every `snapshot_every` events.
class CorpusStore {
 public:
  using Listener = std::function<void(const Event&)>;

  struct Options {
    std::optional<std::filesystem::path> directory;
    std::size_t snapshot_every = 500;
    Clock clock = system_clock();
  };

  explicit CorpusStore(const pii::Sanitizer& sanitizer);
  CorpusStore(const pii::Sanitizer& sanitizer, Options options);

  CorpusStore(const CorpusStore&) = delete;
  CorpusStore& operator=(const CorpusStore&) = delete;

  /// Validates QARecord invariants; on success returns the new version.
  std::uint64_t append_record(QARecord record);
  std::uint64_t update_status(const std::string& id, RecordStatus status);

  IngestReport ingest_jsonl(const std::string& path);
  IngestReport ingest_text(std::string_view jsonl);

  Split holdout_split(std::uint64_t seed, double fraction) const;

  std::uint64_t version() const;
  std::optional<QARecord> get(const std::string& id) const;
  std::vector<QARecord> records() const;
  std::vector<QARecord> published() const;
  std::vector<Event> events() const;
  RecordMap snapshot() const;

  /// Listeners run on the writer thread, in version order.
  void subscribe(Listener listener);

  /// Writes snapshot.jsonl now (no-op for in-memory stores).
  void write_snapshot() const;

 private:
  IngestReport ingest_lines(const std::vector<std::string>& lines);
  void validate(const QARecord& record) const;
  std::uint64_t commit(EventOp op, QARecord record);
  void load_from_disk();
  QARecord normalize_ingested(const nlohmann::json& j) const;

  const pii::Sanitizer& sanitizer_;
  Options options_;

  std::mutex writer_;
  mutable std::shared_mutex data_mutex_;
  RecordMap records_;
  std::unordered_map<std::string, std::string> group_answers_;
  std::vector<Event> events_;
  std::uint64_t version_ = 0;
  std::vector<Listener> listeners_;
};

}  // namespace safeqa::corpus
