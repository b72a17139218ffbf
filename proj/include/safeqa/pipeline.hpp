#pragma once

#include <atomic>
#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>
#include <spdlog/logger.h>

#include "safeqa/corpus.hpp"
#include "safeqa/generation.hpp"
#include "safeqa/guardrails.hpp"
#include "safeqa/langbridge.hpp"
#include "safeqa/metrics.hpp"
#include "safeqa/moderation.hpp"
#include "safeqa/retrieval.hpp"
#include "safeqa/sanitizer.hpp"

namespace safeqa::pipeline {

struct AskRequest {
  std::optional<std::string> query_text;
  std::optional<lang::AudioRef> audio;
  std::string language = "hi";
  std::string session_id;
  std::optional<lang::LanguageRoute> route;
};

enum class Route { kRetrieval, kGeneration, kRefusal, kEscalated, kError };

std::string_view to_string(Route route);

struct Provenance {
  std::optional<std::string> record_id;
  std::optional<std::string> provider_id;
  std::optional<std::string> finish_reason;
  std::optional<int> attempts;
  std::vector<std::string> context_ids;
};

struct AnswerEnvelope {
  std::string answer_text;
  std::optional<lang::AudioRef> answer_audio;
  Route route_taken = Route::kError;
  retrieval::RelevanceDecision relevance;
  Provenance provenance;
  rails::RailReport rail_report;
  std::vector<std::pair<std::string, double>> timings_ms;
  std::uint64_t corpus_version = 0;
  std::uint64_t index_version = 0;
  std::optional<std::string> moderation_item_id;
  std::vector<std::string> warnings;

  nlohmann::json to_json() const;
};

struct EngineConfig {
  double tau = 0.5;
  std::size_t retrieval_k = 5;
  std::size_t icl_examples = 3;
  std::size_t context_passages = 3;
  std::size_t max_tokens = 512;
  double temperature = 0.2;
  lang::LanguageRoute default_route = lang::LanguageRoute::direct("hi");
  std::string refusal_template = rails::default_refusal_template();
  std::string error_template =
      "Sorry, we could not understand your question. Please try again.";
};

struct ResolveResult {
  QARecord record;
  std::uint64_t corpus_version = 0;
  std::uint64_t index_version = 0;
};

/// Collaborators are owned elsewhere and must outlive the engine. The
/// generator may be null (generation unavailable).
struct EngineParts {
  corpus::CorpusStore& store;
  const pii::Sanitizer& sanitizer;
  retrieval::Retriever& retriever;
  const rails::Guardrails& guardrails;
  std::shared_ptr<gen::Generator> generator;
  lang::Providers language;
  moderation::ModerationQueue& queue;
  Metrics* metrics = nullptr;
  std::shared_ptr<spdlog::logger> logger;
};

/// Input phase -> retrieve-or-generate under guardrails -> output phase.
/// answer() is safe to call concurrently; resolve_moderation() serializes.
class Engine {
 public:
  Engine(EngineParts parts, EngineConfig config = {});

  /// Loads the retriever from the store's published records and keeps it in
  /// sync with future appends.
  void attach_index();

  AnswerEnvelope answer(const AskRequest& request);

  moderation::ModerationItem escalate(std::string_view query, moderation::Reason reason,
                                      std::string_view language = "hi");

  /// Throws kNotFound, kConflict ("not open") or RailRejection.
  ResolveResult resolve_moderation(const std::string& item_id, const std::string& answer,
                                   const std::string& theme, const std::string& sub_theme);

  const EngineConfig& config() const { return config_; }
  double threshold() const { return tau_.load(); }
  void set_threshold(double tau) { tau_.store(tau); }

 private:
  void record_metrics(const AnswerEnvelope& envelope);

  EngineParts parts_;
  EngineConfig config_;
  std::atomic<double> tau_;
  std::mutex resolve_mutex_;
};

}  // namespace safeqa::pipeline
