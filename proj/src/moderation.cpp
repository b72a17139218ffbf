#include "safeqa/moderation.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>

#include "safeqa/errors.hpp"

namespace safeqa::moderation {

using nlohmann::json;

std::string_view to_string(Reason reason) {
  switch (reason) {
    case Reason::kOffTopic: return "off_topic";
    case Reason::kLowRelevanceAndGenerationUnavailable:
      return "low_relevance_and_generation_unavailable";
    case Reason::kOutputEscalated: return "output_escalated";
    case Reason::kRailEscalated: return "rail_escalated";
  }
  return "rail_escalated";
}

std::string_view to_string(ItemStatus status) {
  switch (status) {
    case ItemStatus::kOpen: return "open";
    case ItemStatus::kResolved: return "resolved";
    case ItemStatus::kDismissed: return "dismissed";
  }
  return "open";
}

Reason parse_reason(std::string_view text) {
  for (Reason r : {Reason::kOffTopic, Reason::kLowRelevanceAndGenerationUnavailable,
                   Reason::kOutputEscalated, Reason::kRailEscalated}) {
    if (to_string(r) == text) return r;
  }
  throw Error(ErrorCode::kParse, "unknown moderation reason: " + std::string(text));
}

ItemStatus parse_item_status(std::string_view text) {
  for (ItemStatus s : {ItemStatus::kOpen, ItemStatus::kResolved, ItemStatus::kDismissed}) {
    if (to_string(s) == text) return s;
  }
  throw Error(ErrorCode::kInvalidArgument, "unknown item status: " + std::string(text));
}

json ModerationItem::to_json() const {
  json j = {{"id", id},
            {"query_text", query_text},
            {"language", language},
            {"reason", to_string(reason)},
            {"created_at", created_at},
            {"status", to_string(status)},
            {"sequence", sequence},
            {"resolution", nullptr}};
  if (resolution) {
    j["resolution"] = {{"answer", resolution->answer},
                       {"theme", resolution->theme},
                       {"sub_theme", resolution->sub_theme},
                       {"record_id", resolution->record_id}};
  }
  return j;
}

ModerationItem ModerationItem::from_json(const json& j) {
  ModerationItem item;
  item.id = j.at("id").get<std::string>();
  item.query_text = j.at("query_text").get<std::string>();
  item.language = j.value("language", "hi");
  item.reason = parse_reason(j.at("reason").get<std::string>());
  item.created_at = j.at("created_at").get<std::string>();
  item.status = parse_item_status(j.at("status").get<std::string>());
  item.sequence = j.at("sequence").get<std::uint64_t>();
  if (const auto& r = j.at("resolution"); !r.is_null()) {
    item.resolution = Resolution{r.at("answer").get<std::string>(), r.at("theme").get<std::string>(),
                                 r.at("sub_theme").get<std::string>(),
                                 r.value("record_id", "")};
  }
  return item;
}

ModerationQueue::ModerationQueue(const pii::Sanitizer& sanitizer,
                                 std::optional<std::filesystem::path> log_file, Clock clock)
    : sanitizer_(sanitizer), log_file_(std::move(log_file)), clock_(std::move(clock)) {
  if (!log_file_ || !std::filesystem::exists(*log_file_)) return;
  for (const auto& line : read_lines(log_file_->string())) {
    if (line.empty()) continue;
    ModerationItem item;
    try {
      item = ModerationItem::from_json(json::parse(line));
    } catch (const json::exception&) {
      break;
    }
    next_sequence_ = std::max(next_sequence_, item.sequence + 1);
    items_[item.id] = std::move(item);
  }
}

void ModerationQueue::persist(const ModerationItem& item) {
  if (!log_file_) return;
  if (log_file_->has_parent_path()) std::filesystem::create_directories(log_file_->parent_path());
  std::ofstream out(*log_file_, std::ios::app);
  out << item.to_json().dump() << '\n';
  out.flush();
  if (!out) throw Error(ErrorCode::kIo, "moderation store write failed");
}

ModerationItem ModerationQueue::escalate(std::string_view query, Reason reason,
                                         std::string_view language) {
  // Callers pass redacted text; redaction is idempotent so re-applying it
  // only matters if they did not.
  const std::string redacted = sanitizer_.redact(query).text;
  const auto now = clock_();
  const std::string base =
      "mq-" + to_hex(fnv1a64(redacted + "\n" + std::to_string(utc_day(now))));

  std::lock_guard lock(mutex_);
  std::string id = base;
  for (int n = 2;; ++n) {
    auto it = items_.find(id);
    if (it == items_.end()) break;
    if (it->second.status == ItemStatus::kOpen) return it->second;
    id = base + "-" + std::to_string(n);
  }
  ModerationItem item;
  item.id = id;
  item.query_text = redacted;
  item.language = std::string(language);
  item.reason = reason;
  item.created_at = format_utc(now);
  item.status = ItemStatus::kOpen;
  item.sequence = next_sequence_;
  persist(item);
  ++next_sequence_;
  items_[item.id] = item;
  return item;
}

std::optional<ModerationItem> ModerationQueue::get(const std::string& id) const {
  std::lock_guard lock(mutex_);
  auto it = items_.find(id);
  if (it == items_.end()) return std::nullopt;
  return it->second;
}

Page ModerationQueue::list(std::optional<ItemStatus> status, const std::optional<std::string>& cursor,
                           std::size_t limit) const {
  std::uint64_t before = UINT64_MAX;
  if (cursor && !cursor->empty()) {
    const char* first = cursor->data();
    const char* last = first + cursor->size();
    auto [ptr, ec] = std::from_chars(first, last, before);
    if (ec != std::errc() || ptr != last) {
      throw Error(ErrorCode::kInvalidArgument, "invalid cursor");
    }
  }
  if (limit == 0) limit = 50;
  std::vector<ModerationItem> matching;
  {
    std::lock_guard lock(mutex_);
    for (const auto& [id, item] : items_) {
      if (status && item.status != *status) continue;
      if (item.sequence >= before) continue;
      matching.push_back(item);
    }
  }
  std::sort(matching.begin(), matching.end(),
            [](const ModerationItem& a, const ModerationItem& b) { return a.sequence > b.sequence; });
  Page page;
  if (matching.size() > limit) {
    matching.resize(limit);
    page.next_cursor = std::to_string(matching.back().sequence);
  }
  page.items = std::move(matching);
  return page;
}

ModerationItem ModerationQueue::transition(const std::string& id, ItemStatus to,
                                           std::optional<Resolution> resolution) {
  std::lock_guard lock(mutex_);
  auto it = items_.find(id);
  if (it == items_.end()) throw Error(ErrorCode::kNotFound, "unknown moderation item " + id);
  if (it->second.status != ItemStatus::kOpen) throw Error(ErrorCode::kConflict, "not open");
  ModerationItem updated = it->second;
  updated.status = to;
  updated.resolution = std::move(resolution);
  persist(updated);
  it->second = updated;
  return updated;
}

ModerationItem ModerationQueue::mark_resolved(const std::string& id, Resolution resolution) {
  return transition(id, ItemStatus::kResolved, std::move(resolution));
}

ModerationItem ModerationQueue::dismiss(const std::string& id) {
  return transition(id, ItemStatus::kDismissed, std::nullopt);
}

std::size_t ModerationQueue::size() const {
  std::lock_guard lock(mutex_);
  return items_.size();
}

}  // namespace safeqa::moderation
