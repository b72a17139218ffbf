#include "safeqa/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <unordered_set>

#include "safeqa/errors.hpp"

namespace safeqa::retrieval {

using nlohmann::json;

namespace {

bool better(const std::pair<std::string, double>& a, const std::pair<std::string, double>& b) {
  if (a.second != b.second) return a.second > b.second;
  return a.first < b.first;
}

void assign_ranks(std::vector<RetrievalHit>& hits) {
  for (std::size_t i = 0; i < hits.size(); ++i) hits[i].rank = i + 1;
}

}  // namespace

// ---------------------------------------------------------------------------
// InvertedIndex

void InvertedIndex::add(const std::string& doc_id, const TokenStream& tokens) {
  if (ordinals_.contains(doc_id)) {
    throw Error(ErrorCode::kDuplicate, "duplicate doc id: " + doc_id);
  }
  const auto ordinal = static_cast<std::uint32_t>(doc_ids_.size());
  std::vector<std::pair<std::string, std::uint32_t>> counts;
  std::unordered_map<std::string, std::size_t> slot;
  for (const auto& t : tokens.tokens) {
    auto [it, inserted] = slot.emplace(t, counts.size());
    if (inserted) {
      counts.emplace_back(t, 1);
    } else {
      ++counts[it->second].second;
    }
  }
  for (const auto& [term, tf] : counts) postings_[term].push_back({ordinal, tf});
  doc_ids_.push_back(doc_id);
  lengths_.push_back(static_cast<std::uint32_t>(tokens.size()));
  ordinals_.emplace(doc_id, ordinal);
  total_length_ += tokens.size();
}

double InvertedIndex::avg_doc_length() const {
  if (doc_ids_.empty()) return 0.0;
  return static_cast<double>(total_length_) / static_cast<double>(doc_ids_.size());
}

std::uint32_t InvertedIndex::doc_length(const std::string& doc_id) const {
  auto it = ordinals_.find(doc_id);
  if (it == ordinals_.end()) throw Error(ErrorCode::kNotFound, "unknown doc: " + doc_id);
  return lengths_[it->second];
}

double InvertedIndex::idf(const std::string& term) const {
  const double n_docs = static_cast<double>(doc_ids_.size());
  auto it = postings_.find(term);
  const double df = it == postings_.end() ? 0.0 : static_cast<double>(it->second.size());
  return std::log((n_docs - df + 0.5) / (df + 0.5) + 1.0);
}

double InvertedIndex::term_weight(double idf, std::uint32_t tf, std::uint32_t len,
                                  double avg) const {
  const double ratio = avg > 0.0 ? static_cast<double>(len) / avg : 0.0;
  const double f = static_cast<double>(tf);
  return idf * f * (params_.k1 + 1.0) / (f + params_.k1 * (1.0 - params_.b + params_.b * ratio));
}

double InvertedIndex::score(const TokenStream& query, const std::string& doc_id) const {
  auto it = ordinals_.find(doc_id);
  if (it == ordinals_.end()) throw Error(ErrorCode::kNotFound, "unknown doc: " + doc_id);
  const std::uint32_t ordinal = it->second;
  const double avg = avg_doc_length();
  double total = 0.0;
  for (const auto& term : query.tokens) {
    auto p = postings_.find(term);
    if (p == postings_.end()) continue;
    const auto& list = p->second;
    auto pos = std::lower_bound(list.begin(), list.end(), ordinal,
                                [](const Posting& a, std::uint32_t d) { return a.doc < d; });
    if (pos == list.end() || pos->doc != ordinal) continue;
    total += term_weight(idf(term), pos->tf, lengths_[ordinal], avg);
  }
  return total;
}

std::vector<std::pair<std::string, double>> InvertedIndex::top_k(const TokenStream& query,
                                                                 std::size_t k) const {
  std::vector<double> scores(doc_ids_.size(), 0.0);
  std::vector<char> seen(doc_ids_.size(), 0);
  std::vector<std::uint32_t> touched;
  const double avg = avg_doc_length();
  for (const auto& term : query.tokens) {
    auto p = postings_.find(term);
    if (p == postings_.end()) continue;
    const double term_idf = idf(term);
    for (const auto& posting : p->second) {
      if (!seen[posting.doc]) {
        seen[posting.doc] = 1;
        touched.push_back(posting.doc);
      }
      scores[posting.doc] += term_weight(term_idf, posting.tf, lengths_[posting.doc], avg);
    }
  }
  std::vector<std::pair<std::string, double>> out;
  out.reserve(touched.size());
  for (auto d : touched) {
    if (scores[d] > 0.0) out.emplace_back(doc_ids_[d], scores[d]);
  }
  const std::size_t keep = std::min(k, out.size());
  std::partial_sort(out.begin(), out.begin() + static_cast<std::ptrdiff_t>(keep), out.end(),
                    better);
  out.resize(keep);
  return out;
}

std::vector<std::pair<std::string, std::uint32_t>> InvertedIndex::postings(
    const std::string& term) const {
  std::vector<std::pair<std::string, std::uint32_t>> out;
  auto it = postings_.find(term);
  if (it == postings_.end()) return out;
  for (const auto& p : it->second) out.emplace_back(doc_ids_[p.doc], p.tf);
  return out;
}

std::map<std::string, std::uint32_t> InvertedIndex::doc_lengths() const {
  std::map<std::string, std::uint32_t> out;
  for (std::size_t i = 0; i < doc_ids_.size(); ++i) out.emplace(doc_ids_[i], lengths_[i]);
  return out;
}

std::vector<std::string> InvertedIndex::terms() const {
  std::vector<std::string> out;
  out.reserve(postings_.size());
  for (const auto& [term, list] : postings_) out.push_back(term);
  std::sort(out.begin(), out.end());
  return out;
}

bool InvertedIndex::operator==(const InvertedIndex& other) const {
  return params_ == other.params_ && doc_ids_ == other.doc_ids_ &&
         lengths_ == other.lengths_ && total_length_ == other.total_length_ &&
         postings_ == other.postings_;
}

json InvertedIndex::to_json() const {
  json docs = json::array();
  for (std::size_t i = 0; i < doc_ids_.size(); ++i) {
    docs.push_back({{"id", doc_ids_[i]}, {"length", lengths_[i]}});
  }
  json postings = json::object();
  for (const auto& term : terms()) {
    json list = json::array();
    for (const auto& p : postings_.at(term)) list.push_back({doc_ids_[p.doc], p.tf});
    postings[term] = std::move(list);
  }
  return {{"params", {{"k1", params_.k1}, {"b", params_.b}}},
          {"docs", docs},
          {"postings", postings}};
}

InvertedIndex InvertedIndex::from_json(const json& j) {
  InvertedIndex index(Bm25Params{j.at("params").at("k1").get<double>(),
                                 j.at("params").at("b").get<double>()});
  for (const auto& d : j.at("docs")) {
    const auto id = d.at("id").get<std::string>();
    const auto len = d.at("length").get<std::uint32_t>();
    index.ordinals_.emplace(id, static_cast<std::uint32_t>(index.doc_ids_.size()));
    index.doc_ids_.push_back(id);
    index.lengths_.push_back(len);
    index.total_length_ += len;
  }
  for (const auto& [term, list] : j.at("postings").items()) {
    auto& out = index.postings_[term];
    for (const auto& entry : list) {
      const auto id = entry.at(0).get<std::string>();
      auto it = index.ordinals_.find(id);
      if (it == index.ordinals_.end()) {
        throw Error(ErrorCode::kParse, "posting references unknown doc " + id);
      }
      out.push_back({it->second, entry.at(1).get<std::uint32_t>()});
    }
    std::sort(out.begin(), out.end(),
              [](const Posting& a, const Posting& b) { return a.doc < b.doc; });
  }
  return index;
}

// ---------------------------------------------------------------------------
// DenseIndex

void DenseIndex::add(const std::string& doc_id, std::vector<double> vector) {
  if (ordinals_.contains(doc_id)) {
    throw Error(ErrorCode::kDuplicate, "duplicate doc id: " + doc_id);
  }
  if (dimension_ == 0) dimension_ = vector.size();
  if (vector.size() != dimension_) {
    throw Error(ErrorCode::kInvariant, "embedding dimension mismatch");
  }
  double sum = 0.0;
  for (double x : vector) sum += x * x;
  const double norm = std::sqrt(sum);
  if (norm != 0.0 && std::abs(norm - 1.0) > 1e-6) {
    throw Error(ErrorCode::kInvariant, "embedding is not unit norm");
  }
  ordinals_.emplace(doc_id, ids_.size());
  ids_.push_back(doc_id);
  data_.insert(data_.end(), vector.begin(), vector.end());
}

std::optional<std::vector<double>> DenseIndex::vector(const std::string& doc_id) const {
  auto it = ordinals_.find(doc_id);
  if (it == ordinals_.end()) return std::nullopt;
  auto first = data_.begin() + static_cast<std::ptrdiff_t>(it->second * dimension_);
  return std::vector<double>(first, first + static_cast<std::ptrdiff_t>(dimension_));
}

std::vector<std::pair<std::string, double>> DenseIndex::top_k(const std::vector<double>& query,
                                                              std::size_t k) const {
  std::vector<std::pair<std::string, double>> out;
  if (ids_.empty() || query.size() != dimension_) return out;
  for (std::size_t i = 0; i < ids_.size(); ++i) {
    const double* row = data_.data() + i * dimension_;
    double dot = 0.0;
    for (std::size_t d = 0; d < dimension_; ++d) dot += row[d] * query[d];
    if (dot > 0.0) out.emplace_back(ids_[i], dot);
  }
  const std::size_t keep = std::min(k, out.size());
  std::partial_sort(out.begin(), out.begin() + static_cast<std::ptrdiff_t>(keep), out.end(),
                    better);
  out.resize(keep);
  return out;
}

json DenseIndex::to_json() const {
  json vectors = json::array();
  for (const auto& id : ids_) vectors.push_back({{"id", id}, {"vector", *vector(id)}});
  return {{"dimension", dimension_}, {"provider_id", provider_id_}, {"vectors", vectors}};
}

DenseIndex DenseIndex::from_json(const json& j) {
  DenseIndex index(j.at("dimension").get<std::size_t>(), j.at("provider_id").get<std::string>());
  for (const auto& v : j.at("vectors")) {
    index.add(v.at("id").get<std::string>(), v.at("vector").get<std::vector<double>>());
  }
  return index;
}

// ---------------------------------------------------------------------------
// Snapshot

const DocInfo* IndexSnapshot::doc(const std::string& id) const {
  auto it = docs.find(id);
  return it == docs.end() ? nullptr : &it->second;
}

bool IndexSnapshot::has_group(const std::string& group_id) const {
  return std::any_of(docs.begin(), docs.end(),
                     [&](const auto& kv) { return kv.second.group_id == group_id; });
}

json IndexSnapshot::to_json() const {
  json doc_list = json::array();
  for (const auto& id : sparse.doc_ids()) {
    const DocInfo& d = docs.at(id);
    doc_list.push_back({{"id", d.id},
                        {"group_id", d.group_id},
                        {"text", d.text},
                        {"answer", d.answer},
                        {"theme", d.theme},
                        {"sub_theme", d.sub_theme}});
  }
  return {{"version", version},
          {"documents", doc_list},
          {"sparse", sparse.to_json()},
          {"dense", dense.to_json()}};
}

IndexSnapshot IndexSnapshot::from_json(const json& j) {
  IndexSnapshot s;
  s.version = j.at("version").get<std::uint64_t>();
  s.sparse = InvertedIndex::from_json(j.at("sparse"));
  s.dense = DenseIndex::from_json(j.at("dense"));
  for (const auto& d : j.at("documents")) {
    DocInfo info{d.at("id").get<std::string>(),     d.at("group_id").get<std::string>(),
                 d.at("text").get<std::string>(),   d.at("answer").get<std::string>(),
                 d.at("theme").get<std::string>(),  d.at("sub_theme").get<std::string>()};
    s.docs.emplace(info.id, std::move(info));
  }
  return s;
}

json to_json(const RetrievalHit& hit) {
  return {{"record_id", hit.record_id},     {"sparse_score", hit.sparse_score},
          {"dense_score", hit.dense_score}, {"fused_score", hit.fused_score},
          {"final_score", hit.final_score}, {"rank", hit.rank},
          {"scorer_failed", hit.scorer_failed}};
}

json threshold_to_json(double tau) {
  if (std::isinf(tau)) return "+inf";
  return tau;
}

double threshold_from_json(const json& j) {
  if (j.is_string()) {
    if (j.get<std::string>() == "+inf") return std::numeric_limits<double>::infinity();
    throw Error(ErrorCode::kParse, "bad threshold");
  }
  return j.get<double>();
}

json to_json(const RelevanceDecision& d) {
  return {{"accepted", d.accepted},
          {"top_score", d.top_score},
          {"threshold", threshold_to_json(d.threshold)},
          {"margin", std::isinf(d.margin) ? json(nullptr) : json(d.margin)}};
}

// ---------------------------------------------------------------------------
// Stage functions

std::vector<RetrievalHit> search_sparse(const TokenStream& query, std::size_t k,
                                        const InvertedIndex& index) {
  if (k == 0) throw Error(ErrorCode::kInvalidArgument, "k must be >= 1");
  std::vector<RetrievalHit> hits;
  for (auto& [id, score] : index.top_k(query, k)) {
    RetrievalHit h;
    h.record_id = id;
    h.sparse_score = score;
    h.fused_score = score;
    h.final_score = score;
    hits.push_back(std::move(h));
  }
  assign_ranks(hits);
  return hits;
}

std::vector<double> embed(const std::string& text, providers::EmbeddingProvider& provider) {
  auto vectors = provider.embed({text});
  if (vectors.size() != 1) throw ProviderError("embedding count mismatch", false);
  return providers::normalized(std::move(vectors.front()));
}

std::vector<RetrievalHit> search_dense(const std::vector<double>& query_vector, std::size_t k,
                                       const DenseIndex& index) {
  if (k == 0) throw Error(ErrorCode::kInvalidArgument, "k must be >= 1");
  std::vector<RetrievalHit> hits;
  for (auto& [id, score] : index.top_k(query_vector, k)) {
    RetrievalHit h;
    h.record_id = id;
    h.dense_score = score;
    h.fused_score = score;
    h.final_score = score;
    hits.push_back(std::move(h));
  }
  assign_ranks(hits);
  return hits;
}

std::vector<RetrievalHit> fuse_rrf(const std::vector<RetrievalHit>& sparse,
                                   const std::vector<RetrievalHit>& dense, int c,
                                   std::size_t k) {
  std::map<std::string, RetrievalHit> merged;
  auto take = [&](const std::vector<RetrievalHit>& list, bool is_sparse) {
    for (const auto& h : list) {
      auto& m = merged[h.record_id];
      m.record_id = h.record_id;
      if (is_sparse) {
        m.sparse_score = h.sparse_score;
      } else {
        m.dense_score = h.dense_score;
      }
      m.fused_score += 1.0 / (static_cast<double>(c) + static_cast<double>(h.rank));
    }
  };
  take(sparse, true);
  take(dense, false);
  std::vector<RetrievalHit> out;
  out.reserve(merged.size());
  for (auto& [id, h] : merged) {
    h.final_score = h.fused_score;
    out.push_back(std::move(h));
  }
  std::stable_sort(out.begin(), out.end(), [](const RetrievalHit& a, const RetrievalHit& b) {
    if (a.fused_score != b.fused_score) return a.fused_score > b.fused_score;
    return a.record_id < b.record_id;
  });
  if (out.size() > k) out.resize(k);
  assign_ranks(out);
  return out;
}

PairScorer jaccard_scorer(text::Stopwords stopwords) {
  return [stopwords = std::move(stopwords)](std::string_view query, const DocInfo& doc) {
    const auto q = text::tokenize(query, stopwords).tokens;
    const auto d = text::tokenize(doc.text, stopwords).tokens;
    std::set<std::string> qs(q.begin(), q.end());
    std::set<std::string> ds(d.begin(), d.end());
    if (qs.empty() && ds.empty()) return 0.0;
    std::size_t common = 0;
    for (const auto& t : qs) common += ds.count(t);
    const std::size_t unions = qs.size() + ds.size() - common;
    return static_cast<double>(common) / static_cast<double>(unions);
  };
}

std::vector<RetrievalHit> rerank(std::string_view query, std::vector<RetrievalHit> hits,
                                 const PairScorer& scorer, double weight,
                                 const IndexSnapshot& snapshot) {
  if (hits.empty()) return hits;
  if (weight < 0.0 || weight > 1.0) {
    throw Error(ErrorCode::kInvalidArgument, "rerank weight must be in [0,1]");
  }
  const auto [lo_it, hi_it] = std::minmax_element(
      hits.begin(), hits.end(),
      [](const RetrievalHit& a, const RetrievalHit& b) { return a.fused_score < b.fused_score; });
  const double lo = lo_it->fused_score;
  const double hi = hi_it->fused_score;
  auto norm = [&](double x) { return hi > lo ? (x - lo) / (hi - lo) : 0.5; };

  std::vector<double> pair_scores(hits.size(), 0.0);
  bool failed = false;
  try {
    for (std::size_t i = 0; i < hits.size(); ++i) {
      const DocInfo* doc = snapshot.doc(hits[i].record_id);
      if (doc == nullptr) throw Error(ErrorCode::kNotFound, "hit not in snapshot");
      pair_scores[i] = std::clamp(scorer(query, *doc), 0.0, 1.0);
    }
  } catch (const std::exception&) {
    failed = true;
  }
  for (std::size_t i = 0; i < hits.size(); ++i) {
    if (failed) {
      hits[i].final_score = norm(hits[i].fused_score);
      hits[i].scorer_failed = true;
    } else {
      hits[i].final_score = weight * norm(hits[i].fused_score) + (1.0 - weight) * pair_scores[i];
    }
  }
  std::stable_sort(hits.begin(), hits.end(), [](const RetrievalHit& a, const RetrievalHit& b) {
    if (a.final_score != b.final_score) return a.final_score > b.final_score;
    if (a.fused_score != b.fused_score) return a.fused_score > b.fused_score;
    return a.record_id < b.record_id;
  });
  assign_ranks(hits);
  return hits;
}

RelevanceDecision decide_relevance(const std::vector<RetrievalHit>& hits, double threshold) {
  RelevanceDecision d;
  d.threshold = threshold;
  d.top_score = hits.empty() ? 0.0 : hits.front().final_score;
  d.accepted = !hits.empty() && d.top_score >= threshold;
  d.margin = d.top_score - threshold;
  return d;
}

// ---------------------------------------------------------------------------
// Retriever

Retriever::Retriever(std::shared_ptr<providers::EmbeddingProvider> embedder, SearchConfig config,
                     PairScorer scorer)
    : embedder_(std::move(embedder)),
      config_(std::move(config)),
      scorer_(scorer ? std::move(scorer) : jaccard_scorer(config_.stopwords)),
      current_(std::make_shared<const IndexSnapshot>()) {
  if (!embedder_) throw Error(ErrorCode::kInvalidArgument, "retriever needs an embedder");
}

IndexSnapshot Retriever::build_snapshot(const std::vector<QARecord>& records,
                                        providers::EmbeddingProvider& embedder,
                                        const text::Stopwords& stopwords) {
  IndexSnapshot s;
  s.dense = DenseIndex(embedder.dimension(), embedder.id());
  constexpr std::size_t kBatch = 256;
  for (std::size_t start = 0; start < records.size(); start += kBatch) {
    const std::size_t end = std::min(records.size(), start + kBatch);
    std::vector<std::string> texts;
    for (std::size_t i = start; i < end; ++i) texts.push_back(records[i].sanitized_question);
    auto vectors = embedder.embed(texts);
    if (vectors.size() != texts.size()) throw ProviderError("embedding count mismatch", false);
    for (std::size_t i = start; i < end; ++i) {
      const QARecord& r = records[i];
      s.sparse.add(r.id, text::tokenize(r.sanitized_question, stopwords));
      s.dense.add(r.id, providers::normalized(std::move(vectors[i - start])));
      s.docs.emplace(r.id, DocInfo{r.id, r.group_id, r.sanitized_question, r.answer, r.theme,
                                   r.sub_theme});
    }
  }
  s.version = records.size();
  return s;
}

void Retriever::rebuild(const std::vector<QARecord>& records) {
  std::lock_guard lock(writer_);
  current_.store(std::make_shared<const IndexSnapshot>(
      build_snapshot(records, *embedder_, config_.stopwords)));
}

void Retriever::install(IndexSnapshot snapshot) {
  std::lock_guard lock(writer_);
  current_.store(std::make_shared<const IndexSnapshot>(std::move(snapshot)));
}

std::uint64_t Retriever::add_document(const QARecord& record) {
  if (record.status != RecordStatus::kPublished) {
    throw Error(ErrorCode::kPrecondition, "only published records are indexed");
  }
  std::lock_guard lock(writer_);
  auto current = current_.load();
  if (current->docs.contains(record.id)) {
    throw Error(ErrorCode::kDuplicate, "duplicate doc id: " + record.id);
  }
  auto vector = embed(record.sanitized_question, *embedder_);
  auto next = std::make_shared<IndexSnapshot>(*current);
  if (next->dense.size() == 0 && next->dense.dimension() == 0) {
    next->dense = DenseIndex(embedder_->dimension(), embedder_->id());
  }
  next->sparse.add(record.id, text::tokenize(record.sanitized_question, config_.stopwords));
  next->dense.add(record.id, std::move(vector));
  next->docs.emplace(record.id, DocInfo{record.id, record.group_id, record.sanitized_question,
                                        record.answer, record.theme, record.sub_theme});
  next->version = current->version + 1;
  const auto version = next->version;
  current_.store(std::move(next));
  return version;
}

std::vector<RetrievalHit> Retriever::search(std::string_view query, std::size_t k) const {
  auto snap = snapshot();
  return search(*snap, query, k);
}

std::vector<RetrievalHit> Retriever::search(const IndexSnapshot& snap, std::string_view query,
                                            std::size_t k) const {
  if (k == 0) throw Error(ErrorCode::kInvalidArgument, "k must be >= 1");
  if (snap.sparse.doc_count() == 0) return {};
  const std::size_t depth = std::max(k, config_.candidate_depth);
  const auto tokens = text::tokenize(query, config_.stopwords);
  auto sparse = search_sparse(tokens, depth, snap.sparse);
  std::vector<RetrievalHit> dense;
  if (!tokens.empty()) {
    try {
      dense = search_dense(embed(std::string(query), *embedder_), depth, snap.dense);
    } catch (const Error&) {
      // Dense channel unavailable: fall back to sparse-only fusion.
      dense.clear();
    }
  }
  // Rerank the whole candidate union so a strong single-channel hit is not
  // cut before the pair scorer sees it.
  auto fused = fuse_rrf(sparse, dense, config_.rrf_c, sparse.size() + dense.size());
  auto ranked = rerank(query, std::move(fused), scorer_, config_.rerank_weight, snap);
  if (ranked.size() > k) ranked.resize(k);
  return ranked;
}

// ---------------------------------------------------------------------------
// Calibration

json Calibration::to_json() const {
  json rows = json::array();
  for (const auto& r : sweep) {
    rows.push_back({{"tau", threshold_to_json(r.tau)},
                    {"tp", r.tp},
                    {"fp", r.fp},
                    {"fn", r.fn},
                    {"f1", r.f1}});
  }
  return {{"tau", threshold_to_json(tau)}, {"f1", f1}, {"sweep", rows}};
}

Calibration sweep_threshold(const std::vector<TopOne>& observations) {
  std::set<double> observed;
  for (const auto& o : observations) {
    if (o.score) observed.insert(*o.score);
  }
  std::vector<double> candidates(observed.begin(), observed.end());
  candidates.push_back(std::numeric_limits<double>::infinity());

  Calibration best;
  bool first = true;
  for (double tau : candidates) {
    SweepRow row{tau};
    for (const auto& o : observations) {
      const bool predicted = o.score && *o.score >= tau;
      if (predicted && o.in_group) ++row.tp;
      if (predicted && !o.in_group) ++row.fp;
      if (!predicted && o.in_group) ++row.fn;
    }
    const std::size_t denom = 2 * row.tp + row.fp + row.fn;
    row.f1 = denom == 0 ? 0.0 : 2.0 * static_cast<double>(row.tp) / static_cast<double>(denom);
    best.sweep.push_back(row);
    // Ascending sweep with >= keeps the larger tau on ties.
    if (first || row.f1 >= best.f1) {
      best.tau = tau;
      best.f1 = row.f1;
      first = false;
    }
  }
  return best;
}

Calibration calibrate_threshold(const std::vector<HoldoutQuery>& holdout,
                                const Retriever& retriever) {
  if (holdout.empty()) throw Error(ErrorCode::kPrecondition, "empty holdout");
  auto snap = retriever.snapshot();
  std::vector<TopOne> observations;
  observations.reserve(holdout.size());
  for (const auto& q : holdout) {
    if (!snap->has_group(q.group_id)) {
      throw Error(ErrorCode::kPrecondition, "holdout group without indexed member: " + q.group_id);
    }
    auto hits = retriever.search(*snap, q.query, 1);
    TopOne o;
    if (!hits.empty()) {
      o.score = hits.front().final_score;
      const DocInfo* doc = snap->doc(hits.front().record_id);
      o.in_group = doc != nullptr && doc->group_id == q.group_id;
    }
    observations.push_back(o);
  }
  return sweep_threshold(observations);
}

}  // namespace safeqa::retrieval
