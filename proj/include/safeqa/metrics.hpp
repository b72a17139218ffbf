#pragma once

#include <cstdint>
#include <map>
#include <mutex>
#include <string>
#include <utility>

namespace safeqa {

/// Process counters rendered as "name{label} value" lines.
class Metrics {
 public:
  void increment(const std::string& name, const std::string& label = {}, std::uint64_t by = 1);
  void observe_ms(const std::string& name, const std::string& label, double ms);

  std::uint64_t counter(const std::string& name, const std::string& label = {}) const;
  std::string render() const;

 private:
  using Key = std::pair<std::string, std::string>;
  mutable std::mutex mutex_;
  std::map<Key, std::uint64_t> counters_;
  std::map<Key, std::pair<double, std::uint64_t>> timings_;
};

}  // namespace safeqa
