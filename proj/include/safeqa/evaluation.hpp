#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "safeqa/providers.hpp"
#include "safeqa/record.hpp"
#include "safeqa/retrieval.hpp"

namespace safeqa::eval {

struct MetricReport {
  std::string metric;
  double value = 0.0;
  std::vector<std::pair<std::string, double>> per_item;
  nlohmann::json config = nlohmann::json::object();

  nlohmann::json to_json() const;
  static MetricReport from_json(const nlohmann::json& j);
};

/// Arithmetic mean of per_item values (0 when empty).
MetricReport make_report(std::string metric, std::vector<std::pair<std::string, double>> items,
                         nlohmann::json config = nlohmann::json::object());

struct Prf {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

/// Sentence BLEU with add-1 smoothing for n >= 2 and the closest-reference
/// brevity penalty. Empty candidate scores 0.
double bleu(std::string_view candidate, const std::vector<std::string>& references,
            std::size_t max_n = 4);

Prf rouge_l(std::string_view candidate, std::string_view reference);

/// Greedy token matching on per-token provider embeddings, no IDF weights.
/// Negative cosines count as 0 so scores stay in [0, 1].
Prf bert_score(std::string_view candidate, std::string_view reference,
               providers::EmbeddingProvider& provider);

// ---------------------------------------------------------------------------
// Hallucination polling

inline constexpr std::string_view kJudgeQuestion =
    "Does the response assert content absent from the context? Answer yes or no.";

struct JudgeQuery {
  std::string question;
  std::string response;
  std::vector<std::string> context;
};

class JudgeProvider {
 public:
  virtual ~JudgeProvider() = default;
  virtual std::string id() const = 0;
  /// true means "yes, unsupported content". Throws on provider failure.
  virtual bool judge(const JudgeQuery& query) = 0;
};

/// Says yes when lexical grounding recall falls below min_recall.
class MockJudge final : public JudgeProvider {
 public:
  explicit MockJudge(double min_recall = 0.3) : min_recall_(min_recall) {}
  std::string id() const override { return "mock-judge"; }
  bool judge(const JudgeQuery& query) override;

 private:
  double min_recall_;
};

/// POST {question, response, context} -> {"verdict": "yes"|"no"}.
class HttpJudge final : public JudgeProvider {
 public:
  HttpJudge(std::string id, providers::HttpJsonClient client);
  std::string id() const override { return id_; }
  bool judge(const JudgeQuery& query) override;

 private:
  std::string id_;
  providers::HttpJsonClient client_;
};

struct JudgePoll {
  std::size_t n = 0;
  std::vector<bool> verdicts;
  double score = 0.0;
  bool partial = false;

  nlohmann::json to_json() const;
};

JudgePoll chainpoll_hallucination(const std::string& response,
                                  const std::vector<std::string>& context, JudgeProvider& judge,
                                  std::size_t n = 5);

// ---------------------------------------------------------------------------
// Retrieval harnesses

/// Runs fn(0..count-1) on up to `parallelism` threads; results keep index order.
template <typename T>
std::vector<T> parallel_map(std::size_t count, std::size_t parallelism,
                            const std::function<T(std::size_t)>& fn);

struct RetrievalReport {
  std::size_t queries = 0;
  double top1_group_accuracy = 0.0;
  double mrr = 0.0;
  double acceptance_rate = 0.0;
  double tau = 0.0;
  std::size_t k = 0;
  std::vector<std::pair<std::string, double>> reciprocal_ranks;

  nlohmann::json to_json() const;
};

struct Holdout {
  std::vector<QARecord> train;
  std::vector<retrieval::HoldoutQuery> queries;
  std::vector<std::string> query_ids;
};

/// Holds out one seeded member of every group with at least two members.
Holdout leave_one_out(const std::vector<QARecord>& records, std::uint64_t seed);

RetrievalReport retrieval_eval(const std::vector<retrieval::HoldoutQuery>& holdout,
                               const retrieval::Retriever& retriever, std::size_t k = 5,
                               double tau = 0.5, std::size_t parallelism = 4);

/// Character-level noise: each codepoint is independently swapped with its
/// successor, dropped or duplicated with probability p.
std::string add_noise(std::string_view text, double p, std::uint64_t seed);

struct RobustnessReport {
  double p = 0.0;
  std::uint64_t seed = 0;
  RetrievalReport clean;
  RetrievalReport noisy;
  double accuracy_delta = 0.0;  // noisy - clean
  std::vector<std::string> noisy_queries;

  nlohmann::json to_json() const;
};

RobustnessReport robustness_eval(const std::vector<retrieval::HoldoutQuery>& holdout,
                                 const retrieval::Retriever& retriever, double p,
                                 std::uint64_t seed, std::size_t k = 5, double tau = 0.5,
                                 std::size_t parallelism = 4);

/// BM25 over raw token streams with no index structures.
std::vector<std::pair<std::string, double>> brute_force_bm25(
    const std::vector<std::string>& query_tokens,
    const std::vector<std::pair<std::string, std::vector<std::string>>>& docs, std::size_t k,
    retrieval::Bm25Params params = {});

struct ScalabilityRow {
  std::size_t documents = 0;
  double build_ms = 0.0;
  double p50_ms = 0.0;
  double p95_ms = 0.0;
  std::size_t probes = 0;
  std::size_t spot_checks = 0;
  std::size_t spot_checks_passed = 0;
};

struct ScalabilityReport {
  std::uint64_t seed = 0;
  std::vector<ScalabilityRow> rows;

  nlohmann::json to_json() const;
  static ScalabilityReport from_json(const nlohmann::json& j);
};

ScalabilityReport scalability_eval(const std::vector<std::size_t>& sizes, std::uint64_t seed,
                                   std::size_t probes = 1000, std::size_t spot_checks = 20);

// ---------------------------------------------------------------------------
// Reporting-only tables

struct RouteObservation {
  std::string theme;
  std::string route;
};

/// Per theme: total and the share of each route, for human inspection.
nlohmann::json theme_route_table(const std::vector<RouteObservation>& observations);

}  // namespace safeqa::eval

#include "safeqa/evaluation_impl.hpp"
