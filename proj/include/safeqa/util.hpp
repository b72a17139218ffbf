#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace safeqa {

using Clock = std::function<std::chrono::system_clock::time_point()>;

Clock system_clock();

/// 64-bit FNV-1a. Stable across platforms, used for content-derived ids.
std::uint64_t fnv1a64(std::string_view bytes,
                      std::uint64_t seed = 0xcbf29ce484222325ULL);

std::string to_hex(std::uint64_t value);

/// ISO-8601 UTC with second resolution, e.g. 2026-10-19T08:30:00Z.
std::string format_utc(std::chrono::system_clock::time_point tp);
std::chrono::system_clock::time_point parse_utc(std::string_view text);

/// Days since the Unix epoch (UTC).
std::int64_t utc_day(std::chrono::system_clock::time_point tp);

/// Trim and collapse runs of ASCII whitespace to one space.
std::string normalize_whitespace(std::string_view text);

std::string ascii_lower(std::string_view text);

std::vector<std::string> read_lines(const std::string& path);
std::string read_file(const std::string& path);
void write_file_atomic(const std::string& path, std::string_view contents);

/// Seeded generator helpers with platform-independent output (the standard
/// distributions are implementation-defined).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }
  /// Uniform integer in [0, bound). bound must be > 0.
  std::uint64_t below(std::uint64_t bound);
  /// Uniform double in [0, 1).
  double unit();

  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

/// Holder for an immutable value that can be swapped atomically. Readers get
/// a shared_ptr they can keep for the duration of a request.
template <typename T>
class Snapshot {
 public:
  explicit Snapshot(std::shared_ptr<const T> initial)
      : value_(std::move(initial)) {}

  std::shared_ptr<const T> load() const {
    std::lock_guard lock(mutex_);
    return value_;
  }

  void store(std::shared_ptr<const T> next) {
    std::lock_guard lock(mutex_);
    value_ = std::move(next);
  }

 private:
  mutable std::mutex mutex_;
  std::shared_ptr<const T> value_;
};

}  // namespace safeqa
