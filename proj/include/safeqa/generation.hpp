#pragma once

#include <atomic>
#include <chrono>
#include <cstddef>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "safeqa/providers.hpp"
#include "safeqa/retrieval.hpp"

namespace safeqa::gen {

struct PromptTemplate {
  std::string system_preamble;
  std::string language_directive = "hi";

  /// Non-judgemental sexual-health educator persona with the safety rules.
  static PromptTemplate defaults(std::string language = "hi");
};

struct Example {
  std::string question;
  std::string answer;
  bool operator==(const Example&) const = default;
};

struct ContextPassage {
  std::string record_id;
  std::string question;
  std::string answer;
};

/// The system message carries only template text; user text is confined to
/// the user message's question slot.
struct Prompt {
  std::string system;
  std::string user;

  std::string text() const { return system + "\n\n" + user; }
};

/// Top-k hits regardless of threshold, one per paraphrase group, best first.
std::vector<Example> select_icl_examples(std::string_view query, std::size_t k,
                                         const retrieval::Retriever& retriever);

std::vector<ContextPassage> context_from_hits(const std::vector<retrieval::RetrievalHit>& hits,
                                              const retrieval::IndexSnapshot& snapshot,
                                              std::size_t limit);

Prompt build_prompt(std::string_view query, const std::vector<Example>& examples,
                    const std::vector<ContextPassage>& context, const PromptTemplate& tmpl);

enum class FinishReason { kStop, kLength, kFiltered, kError };

std::string_view to_string(FinishReason reason);
FinishReason parse_finish_reason(std::string_view text);

struct TokenUsage {
  std::size_t prompt_tokens = 0;
  std::size_t completion_tokens = 0;
};

struct GenerationRequest {
  Prompt prompt;
  std::size_t max_tokens = 512;
  double temperature = 0.2;
  std::string provider_id = "mock";
  std::chrono::milliseconds timeout{10000};
  int attempt = 0;
};

struct GenerationResult {
  std::string text;
  std::chrono::milliseconds provider_latency{0};
  TokenUsage usage;
  FinishReason finish_reason = FinishReason::kStop;
  int attempts = 0;
};

class LlmProvider {
 public:
  virtual ~LlmProvider() = default;
  virtual std::string id() const = 0;
  /// One call; throws ProviderError on transport failures.
  virtual GenerationResult complete(const GenerationRequest& request) = 0;
};

/// Offline provider. Echoes the first context passage as a grounded answer
/// so output rails can be exercised deterministically.
class MockLlmProvider final : public LlmProvider {
 public:
  enum class Mode { kNormal, kAlwaysTimeout, kFiltered, kFailFirst };

  explicit MockLlmProvider(Mode mode = Mode::kNormal, int fail_first = 0)
      : mode_(mode), fail_first_(fail_first) {}

  std::string id() const override { return "mock"; }
  GenerationResult complete(const GenerationRequest& request) override;

  std::size_t calls() const { return calls_.load(); }
  void reset_calls() { calls_ = 0; }
  void set_mode(Mode mode) { mode_ = mode; }
  void set_response_override(std::string text) { override_ = std::move(text); }

  static std::string no_context_answer();

 private:
  std::atomic<Mode> mode_;
  int fail_first_;
  std::atomic<std::size_t> calls_{0};
  std::string override_;
};

/// POST {model, messages, temperature, max_tokens} -> {text, finish_reason, usage}.
class HttpLlmProvider final : public LlmProvider {
 public:
  HttpLlmProvider(providers::HttpJsonClient client, std::string model);

  std::string id() const override { return "http:" + model_; }
  GenerationResult complete(const GenerationRequest& request) override;

 private:
  providers::HttpJsonClient client_;
  std::string model_;
};

/// Wraps a provider with the retry contract and a concurrent-call limit.
class Generator {
 public:
  Generator(std::shared_ptr<LlmProvider> provider, providers::RetryPolicy retry = {},
            std::ptrdiff_t permits = 8);

  /// Exhausted retries throw Error(kProviderUnavailable, "provider unavailable ...").
  GenerationResult generate(GenerationRequest request);

  LlmProvider& provider() { return *provider_; }
  std::string provider_id() const { return provider_->id(); }

 private:
  std::shared_ptr<LlmProvider> provider_;
  providers::RetryPolicy retry_;
  providers::PermitPool permits_;
};

}  // namespace safeqa::gen
