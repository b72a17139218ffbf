#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "safeqa/providers.hpp"
#include "safeqa/record.hpp"
#include "safeqa/text.hpp"
#include "safeqa/util.hpp"

namespace safeqa::retrieval {

using text::TokenStream;

struct Bm25Params {
  double k1 = 1.2;
  double b = 0.75;
  bool operator==(const Bm25Params&) const = default;
};

/// Okapi BM25 over an append-only document set. Documents get ordinals in
/// insertion order and posting lists are kept sorted by ordinal.
class InvertedIndex {
 public:
  struct Posting {
    std::uint32_t doc;
    std::uint32_t tf;
    bool operator==(const Posting&) const = default;
  };

  explicit InvertedIndex(Bm25Params params = {}) : params_(params) {}

  void add(const std::string& doc_id, const TokenStream& tokens);

  /// ln((N - n + 0.5) / (n + 0.5) + 1)
  double idf(const std::string& term) const;
  /// Sum over query tokens of the BM25 term weight; unknown doc throws.
  double score(const TokenStream& query, const std::string& doc_id) const;
  /// All documents with positive score, best first, ties by ascending id.
  std::vector<std::pair<std::string, double>> top_k(const TokenStream& query,
                                                    std::size_t k) const;

  std::size_t doc_count() const { return doc_ids_.size(); }
  double avg_doc_length() const;
  bool contains(const std::string& doc_id) const { return ordinals_.contains(doc_id); }
  std::uint32_t doc_length(const std::string& doc_id) const;
  const Bm25Params& params() const { return params_; }

  /// (doc id, tf) in posting order; empty for unknown terms.
  std::vector<std::pair<std::string, std::uint32_t>> postings(const std::string& term) const;
  std::map<std::string, std::uint32_t> doc_lengths() const;
  std::vector<std::string> terms() const;
  const std::vector<std::string>& doc_ids() const { return doc_ids_; }

  nlohmann::json to_json() const;
  static InvertedIndex from_json(const nlohmann::json& j);

  bool operator==(const InvertedIndex& other) const;

 private:
  double term_weight(double idf, std::uint32_t tf, std::uint32_t len, double avg) const;

  Bm25Params params_;
  std::unordered_map<std::string, std::vector<Posting>> postings_;
  std::vector<std::string> doc_ids_;
  std::vector<std::uint32_t> lengths_;
  std::unordered_map<std::string, std::uint32_t> ordinals_;
  std::uint64_t total_length_ = 0;
};

/// Exact cosine search over unit vectors (token-less texts store zeros).
class DenseIndex {
 public:
  DenseIndex() = default;
  DenseIndex(std::size_t dimension, std::string provider_id)
      : dimension_(dimension), provider_id_(std::move(provider_id)) {}

  void add(const std::string& doc_id, std::vector<double> vector);
  std::vector<std::pair<std::string, double>> top_k(const std::vector<double>& query,
                                                    std::size_t k) const;
  std::optional<std::vector<double>> vector(const std::string& doc_id) const;

  std::size_t dimension() const { return dimension_; }
  const std::string& provider_id() const { return provider_id_; }
  std::size_t size() const { return ids_.size(); }

  nlohmann::json to_json() const;
  static DenseIndex from_json(const nlohmann::json& j);

  bool operator==(const DenseIndex&) const = default;

 private:
  std::size_t dimension_ = 0;
  std::string provider_id_;
  std::vector<std::string> ids_;
  std::unordered_map<std::string, std::size_t> ordinals_;
  std::vector<double> data_;
};

struct DocInfo {
  std::string id;
  std::string group_id;
  std::string text;  // sanitized question
  std::string answer;
  std::string theme;
  std::string sub_theme;
  bool operator==(const DocInfo&) const = default;
};

struct RetrievalHit {
  std::string record_id;
  double sparse_score = 0.0;
  double dense_score = 0.0;
  double fused_score = 0.0;
  double final_score = 0.0;
  std::size_t rank = 0;
  bool scorer_failed = false;
};

nlohmann::json to_json(const RetrievalHit& hit);

struct RelevanceDecision {
  bool accepted = false;
  double top_score = 0.0;
  double threshold = 0.5;
  double margin = 0.0;
};

nlohmann::json to_json(const RelevanceDecision& decision);

/// Immutable view searched by requests; writers install a new one.
struct IndexSnapshot {
  std::uint64_t version = 0;
  InvertedIndex sparse;
  DenseIndex dense;
  std::unordered_map<std::string, DocInfo> docs;

  const DocInfo* doc(const std::string& id) const;
  bool has_group(const std::string& group_id) const;

  nlohmann::json to_json() const;
  static IndexSnapshot from_json(const nlohmann::json& j);
};

// ---------------------------------------------------------------------------
// Stage functions

std::vector<RetrievalHit> search_sparse(const TokenStream& query, std::size_t k,
                                        const InvertedIndex& index);

/// Provider vector re-normalized to unit length.
std::vector<double> embed(const std::string& text, providers::EmbeddingProvider& provider);

std::vector<RetrievalHit> search_dense(const std::vector<double>& query_vector, std::size_t k,
                                       const DenseIndex& index);

/// fused(d) = sum over lists containing d of 1 / (c + rank).
std::vector<RetrievalHit> fuse_rrf(const std::vector<RetrievalHit>& sparse,
                                   const std::vector<RetrievalHit>& dense, int c,
                                   std::size_t k);

using PairScorer = std::function<double(std::string_view query, const DocInfo& doc)>;

/// |Q ∩ D| / |Q ∪ D| over token sets of the query and the stored question.
PairScorer jaccard_scorer(text::Stopwords stopwords = {});

/// final = w * minmax(fused) + (1 - w) * scorer. A throwing scorer leaves
/// the fused order with final = minmax(fused) and scorer_failed set.
std::vector<RetrievalHit> rerank(std::string_view query, std::vector<RetrievalHit> hits,
                                 const PairScorer& scorer, double weight,
                                 const IndexSnapshot& snapshot);

RelevanceDecision decide_relevance(const std::vector<RetrievalHit>& hits, double threshold);

// ---------------------------------------------------------------------------

struct SearchConfig {
  std::size_t k = 5;
  std::size_t candidate_depth = 20;
  int rrf_c = 60;
  double rerank_weight = 0.3;
  text::Stopwords stopwords = text::default_stopwords();
};

/// Hybrid retriever over a versioned snapshot. Searches are lock-free on a
/// snapshot; add_document copies, mutates and swaps (single writer).
class Retriever {
 public:
  Retriever(std::shared_ptr<providers::EmbeddingProvider> embedder, SearchConfig config = {},
            PairScorer scorer = nullptr);

  /// Bulk build from published records; version = number of documents.
  void rebuild(const std::vector<QARecord>& records);
  void install(IndexSnapshot snapshot);

  /// Duplicate id throws kDuplicate. Returns the new index version.
  std::uint64_t add_document(const QARecord& record);

  std::shared_ptr<const IndexSnapshot> snapshot() const { return current_.load(); }
  std::uint64_t version() const { return snapshot()->version; }

  std::vector<RetrievalHit> search(std::string_view query, std::size_t k) const;
  std::vector<RetrievalHit> search(const IndexSnapshot& snapshot, std::string_view query,
                                   std::size_t k) const;

  const SearchConfig& config() const { return config_; }
  providers::EmbeddingProvider& embedder() const { return *embedder_; }

  static IndexSnapshot build_snapshot(const std::vector<QARecord>& records,
                                      providers::EmbeddingProvider& embedder,
                                      const text::Stopwords& stopwords = {});

 private:
  std::shared_ptr<providers::EmbeddingProvider> embedder_;
  SearchConfig config_;
  PairScorer scorer_;
  std::mutex writer_;
  Snapshot<IndexSnapshot> current_;
};

// ---------------------------------------------------------------------------
// Threshold calibration

struct HoldoutQuery {
  std::string query;
  std::string group_id;
};

struct SweepRow {
  double tau;
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  double f1 = 0.0;
};

struct Calibration {
  double tau = std::numeric_limits<double>::infinity();
  double f1 = 0.0;
  std::vector<SweepRow> sweep;

  nlohmann::json to_json() const;
};

/// Observed top-1 of one holdout query: final score and whether it is in
/// the query's group. No hit means never predicted relevant.
struct TopOne {
  std::optional<double> score;
  bool in_group = false;
};

/// Sweeps tau over observed top-1 scores plus +inf and keeps the best F1
/// (ties go to the larger tau).
Calibration sweep_threshold(const std::vector<TopOne>& observations);

Calibration calibrate_threshold(const std::vector<HoldoutQuery>& holdout,
                                const Retriever& retriever);

/// JSON-safe threshold encoding: +inf is written as the string "+inf".
nlohmann::json threshold_to_json(double tau);
double threshold_from_json(const nlohmann::json& j);

}  // namespace safeqa::retrieval
