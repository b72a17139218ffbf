#pragma once

#include <memory>

#include <spdlog/logger.h>

#include "safeqa/config.hpp"
#include "safeqa/corpus.hpp"
#include "safeqa/evaluation.hpp"
#include "safeqa/generation.hpp"
#include "safeqa/guardrails.hpp"
#include "safeqa/langbridge.hpp"
#include "safeqa/metrics.hpp"
#include "safeqa/moderation.hpp"
#include "safeqa/pipeline.hpp"
#include "safeqa/retrieval.hpp"
#include "safeqa/sanitizer.hpp"

namespace safeqa::app {

std::shared_ptr<spdlog::logger> make_logger(const config::ServiceConfig& config);

/// Rails from the configured file (or defaults) with the config's topic and
/// grounding thresholds written into the matching rules.
std::shared_ptr<const rails::RuleSet> load_rails(const config::ServiceConfig& config);

/// Everything one engine needs, wired from a ServiceConfig. Replays the
/// corpus event log and the moderation log on open.
class System {
 public:
  static std::unique_ptr<System> open(const config::ServiceConfig& config);

  System(const System&) = delete;
  System& operator=(const System&) = delete;

  const config::ServiceConfig& config() const { return config_; }
  pii::Sanitizer& sanitizer() { return *sanitizer_; }
  corpus::CorpusStore& store() { return *store_; }
  retrieval::Retriever& retriever() { return *retriever_; }
  rails::Guardrails& guardrails() { return *guardrails_; }
  moderation::ModerationQueue& queue() { return *queue_; }
  Metrics& metrics() { return metrics_; }
  pipeline::Engine& engine() { return *engine_; }
  std::shared_ptr<spdlog::logger> logger() const { return logger_; }

  /// Null when the llm provider kind is "none".
  std::shared_ptr<gen::LlmProvider> llm() const { return llm_; }
  std::shared_ptr<providers::EmbeddingProvider> embedder() const { return embedder_; }
  const lang::Providers& language() const { return language_; }
  std::unique_ptr<eval::JudgeProvider> make_judge() const;

 private:
  explicit System(config::ServiceConfig config);

  config::ServiceConfig config_;
  std::shared_ptr<spdlog::logger> logger_;
  std::unique_ptr<pii::Sanitizer> sanitizer_;
  std::unique_ptr<corpus::CorpusStore> store_;
  std::shared_ptr<providers::EmbeddingProvider> embedder_;
  std::unique_ptr<retrieval::Retriever> retriever_;
  std::unique_ptr<rails::Guardrails> guardrails_;
  std::unique_ptr<moderation::ModerationQueue> queue_;
  std::shared_ptr<gen::LlmProvider> llm_;
  lang::Providers language_;
  Metrics metrics_;
  std::unique_ptr<pipeline::Engine> engine_;
};

}  // namespace safeqa::app
