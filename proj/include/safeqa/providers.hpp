#pragma once

#include <atomic>
#include <chrono>
#include <functional>
#include <memory>
#include <optional>
#include <semaphore>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "safeqa/text.hpp"

#include "safeqa/errors.hpp"

namespace safeqa::providers {

/// Shared retry contract: one attempt plus `max_retries` retries on
/// retriable failures, sleeping base * factor^i between attempts.
struct RetryPolicy {
  int max_retries = 2;
  std::chrono::milliseconds base{500};
  double factor = 2.0;
  std::function<void(std::chrono::milliseconds)> sleep =
      [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };

  static RetryPolicy no_sleep() {
    RetryPolicy p;
    p.sleep = [](std::chrono::milliseconds) {};
    return p;
  }
};

/// Runs fn under the retry policy. `attempts` (if given) receives the number
/// of calls made. Exhausted retries raise kProviderUnavailable.
template <typename F>
auto with_retry(const RetryPolicy& policy, F&& fn, int* attempts = nullptr)
    -> decltype(fn()) {
  auto delay = policy.base;
  for (int attempt = 1;; ++attempt) {
    if (attempts) *attempts = attempt;
    try {
      return fn();
    } catch (const ProviderError& e) {
      if (!e.retriable()) throw;
      if (attempt > policy.max_retries) {
        throw Error(ErrorCode::kProviderUnavailable,
                    std::string("provider unavailable: ") + e.what());
      }
    }
    policy.sleep(delay);
    delay = std::chrono::milliseconds(
        static_cast<long long>(static_cast<double>(delay.count()) * policy.factor));
  }
}

/// Bounds concurrent calls into one provider.
class PermitPool {
 public:
  explicit PermitPool(std::ptrdiff_t permits = 8) : semaphore_(permits) {}

  class Guard {
   public:
    explicit Guard(PermitPool& pool) : pool_(pool) { pool_.semaphore_.acquire(); }
    ~Guard() { pool_.semaphore_.release(); }
    Guard(const Guard&) = delete;
    Guard& operator=(const Guard&) = delete;

   private:
    PermitPool& pool_;
  };

  Guard acquire() { return Guard(*this); }

 private:
  std::counting_semaphore<4096> semaphore_;
};

/// Minimal JSON-over-HTTP client shared by every remote provider.
/// Timeouts, connection failures and 5xx are retriable ProviderErrors;
/// 4xx and undecodable bodies are not.
class HttpJsonClient {
 public:
  HttpJsonClient(std::string base_url, std::chrono::milliseconds timeout,
                 std::optional<std::string> bearer_token = std::nullopt);

  nlohmann::json post(const std::string& path, const nlohmann::json& body) const;

  const std::string& base_url() const { return base_url_; }

 private:
  std::string base_url_;
  std::string scheme_host_port_;
  std::string path_prefix_;
  std::chrono::milliseconds timeout_;
  std::optional<std::string> bearer_token_;
};

class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  virtual std::string id() const = 0;
  virtual std::size_t dimension() const = 0;
  virtual std::vector<std::vector<double>> embed(const std::vector<std::string>& texts) = 0;
};

/// Offline bag-of-words embedder: each token is hashed into one of D
/// buckets, counts are L2-normalized. Stopwords are skipped unless nothing
/// else is left. Text without tokens maps to zeros.
class MockEmbeddingProvider final : public EmbeddingProvider {
 public:
  explicit MockEmbeddingProvider(std::size_t dimension = 256,
                                 text::Stopwords stopwords = text::default_stopwords())
      : dimension_(dimension), stopwords_(std::move(stopwords)) {}

  std::string id() const override { return "mock"; }
  std::size_t dimension() const override { return dimension_; }
  std::vector<std::vector<double>> embed(const std::vector<std::string>& texts) override;

  std::size_t bucket(const std::string& token) const;

 private:
  std::size_t dimension_;
  text::Stopwords stopwords_;
};

/// POST {texts} -> {vectors}.
class HttpEmbeddingProvider final : public EmbeddingProvider {
 public:
  HttpEmbeddingProvider(HttpJsonClient client, std::size_t dimension,
                        RetryPolicy retry = {}, std::ptrdiff_t permits = 8);

  std::string id() const override { return "http:" + client_.base_url(); }
  std::size_t dimension() const override { return dimension_; }
  std::vector<std::vector<double>> embed(const std::vector<std::string>& texts) override;

 private:
  HttpJsonClient client_;
  std::size_t dimension_;
  RetryPolicy retry_;
  PermitPool permits_;
};

/// Scales to unit L2 norm; zero vectors are returned unchanged.
std::vector<double> normalized(std::vector<double> v);

}  // namespace safeqa::providers
