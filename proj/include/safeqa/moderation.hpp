#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "safeqa/sanitizer.hpp"
#include "safeqa/util.hpp"

namespace safeqa::moderation {

enum class Reason {
  kOffTopic,
  kLowRelevanceAndGenerationUnavailable,
  kOutputEscalated,
  kRailEscalated,
};

enum class ItemStatus { kOpen, kResolved, kDismissed };

std::string_view to_string(Reason reason);
std::string_view to_string(ItemStatus status);
Reason parse_reason(std::string_view text);
ItemStatus parse_item_status(std::string_view text);

struct Resolution {
  std::string answer;
  std::string theme;
  std::string sub_theme;
  std::string record_id;
};

struct ModerationItem {
  std::string id;
  std::string query_text;  // redacted
  std::string language = "hi";
  Reason reason = Reason::kOffTopic;
  std::string created_at;
  ItemStatus status = ItemStatus::kOpen;
  std::optional<Resolution> resolution;
  std::uint64_t sequence = 0;

  nlohmann::json to_json() const;
  static ModerationItem from_json(const nlohmann::json& j);
};

struct Page {
  std::vector<ModerationItem> items;
  std::optional<std::string> next_cursor;
};

/// Escalated queries awaiting a moderator. Items are written ahead to a
/// JSONL log (one full item per line, last write wins) when a file is given.
class ModerationQueue {
 public:
  ModerationQueue(const pii::Sanitizer& sanitizer,
                  std::optional<std::filesystem::path> log_file = std::nullopt,
                  Clock clock = system_clock());

  /// Same redacted text on the same UTC day returns the existing open item.
  ModerationItem escalate(std::string_view query, Reason reason, std::string_view language = "hi");

  std::optional<ModerationItem> get(const std::string& id) const;

  /// Newest first. The cursor is the opaque value returned as next_cursor;
  /// a malformed cursor throws kInvalidArgument.
  Page list(std::optional<ItemStatus> status, const std::optional<std::string>& cursor = {},
            std::size_t limit = 50) const;

  ModerationItem mark_resolved(const std::string& id, Resolution resolution);
  ModerationItem dismiss(const std::string& id);

  std::size_t size() const;

 private:
  void persist(const ModerationItem& item);
  ModerationItem transition(const std::string& id, ItemStatus to,
                            std::optional<Resolution> resolution);

  const pii::Sanitizer& sanitizer_;
  std::optional<std::filesystem::path> log_file_;
  Clock clock_;
  mutable std::mutex mutex_;
  std::map<std::string, ModerationItem> items_;
  std::uint64_t next_sequence_ = 1;
};

}  // namespace safeqa::moderation
