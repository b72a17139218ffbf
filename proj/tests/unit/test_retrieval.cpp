#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "harness.hpp"
#include "safeqa/providers.hpp"
#include "safeqa/retrieval.hpp"

using namespace safeqa;
using namespace safeqa::retrieval;
using safeqa::testing::make_record;

namespace {

using Doc = std::pair<std::string, std::vector<std::string>>;

// Straight transcription of the scoring formula, no shared code.
std::vector<std::pair<std::string, double>> oracle_bm25(const std::vector<std::string>& query,
                                                        const std::vector<Doc>& docs) {
  const double k1 = 1.2, b = 0.75;
  const double n_docs = static_cast<double>(docs.size());
  double total = 0;
  for (const auto& d : docs) total += static_cast<double>(d.second.size());
  const double avg = total / n_docs;
  std::vector<std::pair<std::string, double>> out;
  for (const auto& [id, toks] : docs) {
    double score = 0;
    for (const auto& q : query) {
      double n = 0;
      for (const auto& other : docs) {
        if (std::find(other.second.begin(), other.second.end(), q) != other.second.end()) n += 1;
      }
      const double tf = static_cast<double>(std::count(toks.begin(), toks.end(), q));
      if (tf == 0) continue;
      const double idf = std::log((n_docs - n + 0.5) / (n + 0.5) + 1.0);
      const double len = static_cast<double>(toks.size());
      score += idf * tf * (k1 + 1) / (tf + k1 * (1 - b + b * len / avg));
    }
    if (score > 0) out.emplace_back(id, score);
  }
  std::sort(out.begin(), out.end(), [](const auto& x, const auto& y) {
    if (x.second != y.second) return x.second > y.second;
    return x.first < y.first;
  });
  return out;
}

std::vector<Doc> random_corpus(Rng& rng, std::size_t n_docs) {
  std::vector<Doc> docs;
  for (std::size_t i = 0; i < n_docs; ++i) {
    std::vector<std::string> toks;
    const auto len = 1 + rng.below(12);
    for (std::uint64_t t = 0; t < len; ++t) toks.push_back("w" + std::to_string(rng.below(30)));
    char id[32];
    std::snprintf(id, sizeof id, "d%03zu", i);
    docs.emplace_back(id, toks);
  }
  return docs;
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

std::shared_ptr<providers::MockEmbeddingProvider> mock_embedder() {
  return std::make_shared<providers::MockEmbeddingProvider>();
}

}  // namespace

TEST_CASE("bm25 examples") {
  InvertedIndex idx;
  idx.add("d1", text::tokenize("a b"));
  idx.add("d2", text::tokenize("a a b"));
  CHECK(idx.score(text::tokenize("a"), "d2") > idx.score(text::tokenize("a"), "d1"));
  CHECK(idx.score(text::tokenize("zzz"), "d1") == 0.0);
  CHECK_THROWS_AS(idx.score(text::tokenize("a"), "nope"), Error);
  CHECK(idx.avg_doc_length() == doctest::Approx(2.5));
  CHECK(idx.idf("a") == doctest::Approx(std::log((2 - 2 + 0.5) / (2 + 0.5) + 1)));
}

TEST_CASE("search_sparse edge cases") {
  InvertedIndex empty;
  CHECK(search_sparse(text::tokenize("a"), 5, empty).empty());
  InvertedIndex idx;
  idx.add("x", text::tokenize("a b"));
  idx.add("y", text::tokenize("c"));
  CHECK(search_sparse(text::TokenStream{}, 5, idx).empty());
  auto hits = search_sparse(text::tokenize("a c"), 10, idx);
  CHECK(hits.size() == 2);
  CHECK_THROWS_AS(search_sparse(text::tokenize("a"), 0, idx), Error);
}

TEST_CASE("property: search_sparse matches the brute-force oracle") {
  Rng rng(2024);
  for (int round = 0; round < 20; ++round) {
    auto docs = random_corpus(rng, 1 + rng.below(100));
    InvertedIndex idx;
    for (const auto& [id, toks] : docs) idx.add(id, text::TokenStream{toks});
    for (int q = 0; q < 10; ++q) {
      std::vector<std::string> query;
      const auto len = 1 + rng.below(4);
      for (std::uint64_t t = 0; t < len; ++t) query.push_back("w" + std::to_string(rng.below(35)));
      auto want = oracle_bm25(query, docs);
      auto got = search_sparse(text::TokenStream{query}, docs.size(), idx);
      REQUIRE(got.size() == want.size());
      for (std::size_t i = 0; i < got.size(); ++i) {
        CHECK(got[i].record_id == want[i].first);
        CHECK(std::abs(got[i].sparse_score - want[i].second) < 1e-9);
        CHECK(got[i].rank == i + 1);
      }
    }
  }
}

TEST_CASE("property: an exact duplicate document scores highest") {
  Rng rng(77);
  for (int round = 0; round < 50; ++round) {
    auto docs = random_corpus(rng, 2 + rng.below(40));
    InvertedIndex idx;
    for (const auto& [id, toks] : docs) idx.add(id, text::TokenStream{toks});
    const auto& target = docs[rng.below(docs.size())];
    const double best = idx.score(text::TokenStream{target.second}, target.first);
    for (const auto& [id, toks] : docs) {
      auto a = toks, b = target.second;
      std::sort(a.begin(), a.end());
      std::sort(b.begin(), b.end());
      if (a == b) continue;
      CHECK(idx.score(text::TokenStream{target.second}, id) <= best);
    }
  }
}

TEST_CASE("mock embedder contract") {
  providers::MockEmbeddingProvider emb;
  auto v1 = embed("kya yeh safe hai", emb);
  CHECK(v1 == embed("kya yeh safe hai", emb));
  CHECK(embed("condom use", emb) == embed("use condom", emb));
  CHECK(dot(v1, v1) == doctest::Approx(1.0).epsilon(1e-9));

  // Find two tokens hashing into different buckets: cosine 0.
  std::string a = "alpha", b;
  for (int i = 0; i < 100; ++i) {
    b = "beta" + std::to_string(i);
    if (emb.bucket(b) != emb.bucket(a)) break;
  }
  REQUIRE(emb.bucket(a) != emb.bucket(b));
  CHECK(dot(embed(a, emb), embed(b, emb)) == 0.0);
}

TEST_CASE("search_dense follows brute-force cosine") {
  providers::MockEmbeddingProvider emb;
  DenseIndex idx(emb.dimension(), emb.id());
  CHECK(search_dense(embed("x", emb), 3, idx).empty());
  const std::vector<std::string> texts = {"periods pain relief", "condom safe use",
                                          "pain during periods cramps"};
  for (std::size_t i = 0; i < texts.size(); ++i) idx.add("d" + std::to_string(i), embed(texts[i], emb));
  const auto q = embed("periods pain", emb);
  std::vector<std::pair<double, std::string>> oracle;
  for (std::size_t i = 0; i < texts.size(); ++i) {
    oracle.emplace_back(-dot(q, embed(texts[i], emb)), "d" + std::to_string(i));
  }
  std::sort(oracle.begin(), oracle.end());
  auto hits = search_dense(q, 3, idx);
  for (std::size_t i = 0; i < hits.size(); ++i) {
    CHECK(hits[i].record_id == oracle[i].second);
    CHECK(hits[i].dense_score == doctest::Approx(-oracle[i].first).epsilon(1e-12));
  }
  auto self = search_dense(embed(texts[1], emb), 1, idx);
  CHECK(self[0].record_id == "d1");
  CHECK(self[0].dense_score == doctest::Approx(1.0));
}

TEST_CASE("fuse_rrf") {
  auto list = [](std::vector<std::string> ids) {
    std::vector<RetrievalHit> out;
    for (std::size_t i = 0; i < ids.size(); ++i) {
      RetrievalHit h;
      h.record_id = ids[i];
      h.rank = i + 1;
      out.push_back(h);
    }
    return out;
  };
  auto same = fuse_rrf(list({"a", "b", "c"}), list({"a", "b", "c"}), 60, 10);
  CHECK(same[0].record_id == "a");
  CHECK(same[2].record_id == "c");

  // d: sparse rank 1 only; e: rank 2 in both lists.
  auto fused = fuse_rrf(list({"d", "e"}), list({"x", "e"}), 60, 10);
  CHECK(fused[0].record_id == "e");
  CHECK(fused[0].fused_score == doctest::Approx(2.0 / 62.0).epsilon(1e-15));
  auto d = std::find_if(fused.begin(), fused.end(), [](auto& h) { return h.record_id == "d"; });
  CHECK(d->fused_score == doctest::Approx(1.0 / 61.0).epsilon(1e-15));

  auto one = fuse_rrf(list({"q", "p", "r"}), {}, 60, 10);
  CHECK(one[0].record_id == "q");
  CHECK(one[1].record_id == "p");
  CHECK(one[2].record_id == "r");

  CHECK(fuse_rrf(list({"a", "b", "c"}), {}, 60, 2).size() == 2);
}

TEST_CASE("rerank with the Jaccard scorer") {
  std::vector<QARecord> recs = {make_record("r1", "b c d", "A1"), make_record("r2", "a b c", "A2"),
                                make_record("r3", "x y", "A3")};
  providers::MockEmbeddingProvider emb;
  auto snap = Retriever::build_snapshot(recs, emb);
  auto scorer = jaccard_scorer();

  // Hand values for query "a b c": {b,c}/{a,b,c,d} = 0.5, 3/3 = 1, 0.
  CHECK(scorer("a b c", *snap.doc("r1")) == doctest::Approx(0.5));
  CHECK(scorer("a b c", *snap.doc("r2")) == doctest::Approx(1.0));
  CHECK(scorer("a b c", *snap.doc("r3")) == doctest::Approx(0.0));

  std::vector<RetrievalHit> hits(3);
  hits[0].record_id = "r1";
  hits[0].fused_score = 0.04;
  hits[1].record_id = "r3";
  hits[1].fused_score = 0.03;
  hits[2].record_id = "r2";
  hits[2].fused_score = 0.02;
  auto out = rerank("a b c", hits, scorer, 0.3, snap);
  // r2: 0.3*0 + 0.7*1 = 0.7; r1: 0.3*1 + 0.7*0.5 = 0.65; r3: 0.3*0.5 + 0 = 0.15.
  REQUIRE(out.size() == 3);
  CHECK(out[0].record_id == "r2");
  CHECK(out[0].final_score == doctest::Approx(0.7));
  CHECK(out[1].record_id == "r1");
  CHECK(out[1].final_score == doctest::Approx(0.65));
  CHECK(out[2].final_score == doctest::Approx(0.15));
  CHECK(out[2].rank == 3);

  auto fused_order = rerank("a b c", hits, scorer, 1.0, snap);
  CHECK(fused_order[0].record_id == "r1");
  CHECK(fused_order[1].record_id == "r3");

  auto single = rerank("a b c", {hits[0]}, scorer, 0.3, snap);
  CHECK(single[0].final_score == doctest::Approx(0.3 * 0.5 + 0.7 * 0.5));

  PairScorer broken = [](std::string_view, const DocInfo&) -> double {
    throw std::runtime_error("down");
  };
  auto fallback = rerank("a b c", hits, broken, 0.3, snap);
  CHECK(fallback[0].record_id == "r1");
  CHECK(fallback[0].scorer_failed);
}

TEST_CASE("decide_relevance") {
  CHECK_FALSE(decide_relevance({}, 0.0).accepted);
  RetrievalHit h;
  h.final_score = 0.42;
  CHECK(decide_relevance({h}, 0.0).accepted);
  CHECK(decide_relevance({h}, 0.42).accepted);
  CHECK_FALSE(decide_relevance({h}, 1.01).accepted);
  auto d = decide_relevance({h}, 0.5);
  CHECK(d.margin == doctest::Approx(-0.08));

  // Monotone in tau.
  for (double tau = 0.0; tau <= 1.0; tau += 0.01) {
    if (decide_relevance({h}, tau).accepted) {
      for (double lower = 0.0; lower <= tau; lower += 0.01) {
        CHECK(decide_relevance({h}, lower).accepted);
      }
    }
  }
}

TEST_CASE("add_document: arithmetic, visibility and duplicates") {
  Retriever r(mock_embedder());
  CHECK(r.add_document(make_record("a", "garbh nirodhak goli", "x")) == 1);
  CHECK(r.snapshot()->sparse.doc_count() == 1);
  const double old_avg = r.snapshot()->sparse.avg_doc_length();
  r.add_document(make_record("b", "condom kaise use karein please", "y"));
  const double new_len = static_cast<double>(text::tokenize("condom kaise use karein please",
                                                            r.config().stopwords).size());
  CHECK(r.snapshot()->sparse.avg_doc_length() == doctest::Approx((old_avg + new_len) / 2.0));

  auto hits = r.search("condom kaise use karein please", 5);
  REQUIRE_FALSE(hits.empty());
  CHECK(hits[0].record_id == "b");
  CHECK_THROWS_AS(r.add_document(make_record("b", "dup", "y")), Error);

  auto draft = make_record("c", "q", "z");
  draft.status = RecordStatus::kDraft;
  CHECK_THROWS_AS(r.add_document(draft), Error);
}

TEST_CASE("property: incremental indexing equals bulk indexing") {
  Rng rng(31337);
  for (int round = 0; round < 20; ++round) {
    std::vector<QARecord> recs;
    const auto n = 1 + rng.below(30);
    for (std::uint64_t i = 0; i < n; ++i) {
      std::string q;
      const auto len = 1 + rng.below(8);
      for (std::uint64_t t = 0; t < len; ++t) q += "t" + std::to_string(rng.below(20)) + " ";
      recs.push_back(make_record("id" + std::to_string(i), q, "ans" + std::to_string(rng.below(6))));
    }
    Retriever bulk(mock_embedder()), incremental(mock_embedder());
    bulk.rebuild(recs);
    for (const auto& rec : recs) incremental.add_document(rec);
    auto a = bulk.snapshot();
    auto b = incremental.snapshot();
    CHECK(a->sparse == b->sparse);
    CHECK(a->dense == b->dense);
    CHECK(a->version == b->version);
    for (int p = 0; p < 5; ++p) {
      std::string q = "t" + std::to_string(rng.below(20)) + " t" + std::to_string(rng.below(20));
      auto x = bulk.search(q, 10);
      auto y = incremental.search(q, 10);
      REQUIRE(x.size() == y.size());
      for (std::size_t i = 0; i < x.size(); ++i) {
        CHECK(x[i].record_id == y[i].record_id);
        CHECK(x[i].final_score == y[i].final_score);
      }
    }
  }
}

TEST_CASE("hybrid search ranks are 1..k and final scores never increase") {
  auto recs = std::vector<QARecord>{
      make_record("a", "periods me dard", "A"), make_record("b", "periods late kyon", "B"),
      make_record("c", "condom phat gaya", "C"), make_record("d", "periods dard dawa", "A")};
  Retriever r(mock_embedder());
  r.rebuild(recs);
  auto hits = r.search("periods dard", 3);
  REQUIRE(hits.size() == 3);
  for (std::size_t i = 0; i < hits.size(); ++i) {
    CHECK(hits[i].rank == i + 1);
    if (i > 0) CHECK(hits[i].final_score <= hits[i - 1].final_score);
    CHECK(hits[i].final_score >= 0.0);
    CHECK(hits[i].final_score <= 1.0);
  }
  auto exact = r.search("condom phat gaya", 1);
  CHECK(exact[0].record_id == "c");
  CHECK(exact[0].final_score >= 0.5);
}

TEST_CASE("snapshot json round trip") {
  Retriever r(mock_embedder());
  r.rebuild({make_record("a", "periods me dard", "A"), make_record("b", "गर्भ निरोधक", "B")});
  auto snap = r.snapshot();
  auto back = IndexSnapshot::from_json(snap->to_json());
  CHECK(back.sparse == snap->sparse);
  CHECK(back.dense == snap->dense);
  CHECK(back.version == snap->version);
  CHECK(back.docs == snap->docs);
}
