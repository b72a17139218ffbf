#include "safeqa/metrics.hpp"

#include <sstream>

namespace safeqa {

namespace {

std::string series(const std::string& name, const std::string& label) {
  return label.empty() ? name : name + "{" + label + "}";
}

}  // namespace

void Metrics::increment(const std::string& name, const std::string& label, std::uint64_t by) {
  std::lock_guard lock(mutex_);
  counters_[{name, label}] += by;
}

void Metrics::observe_ms(const std::string& name, const std::string& label, double ms) {
  std::lock_guard lock(mutex_);
  auto& [sum, count] = timings_[{name, label}];
  sum += ms;
  ++count;
}

std::uint64_t Metrics::counter(const std::string& name, const std::string& label) const {
  std::lock_guard lock(mutex_);
  auto it = counters_.find({name, label});
  return it == counters_.end() ? 0 : it->second;
}

std::string Metrics::render() const {
  std::lock_guard lock(mutex_);
  std::ostringstream out;
  for (const auto& [key, value] : counters_) {
    out << series(key.first, key.second) << ' ' << value << '\n';
  }
  for (const auto& [key, agg] : timings_) {
    out << series(key.first + "_ms_sum", key.second) << ' ' << agg.first << '\n';
    out << series(key.first + "_ms_count", key.second) << ' ' << agg.second << '\n';
  }
  return out.str();
}

}  // namespace safeqa
