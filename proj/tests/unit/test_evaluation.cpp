#include <doctest.h>

#include <cmath>
#include <set>
#include <string>
#include <vector>

#include "harness.hpp"
#include "safeqa/evaluation.hpp"
#include "safeqa/synthetic.hpp"

using namespace safeqa;
using namespace safeqa::eval;
using safeqa::testing::make_record;

namespace {

class ScriptedJudge final : public JudgeProvider {
 public:
  explicit ScriptedJudge(std::vector<int> script) : script_(std::move(script)) {}
  std::string id() const override { return "scripted"; }
  bool judge(const JudgeQuery& q) override {
    CHECK(q.question == kJudgeQuestion);
    const int v = script_.at(i_++);
    if (v < 0) throw ProviderError("judge down", true);
    return v == 1;
  }

 private:
  std::vector<int> script_;
  std::size_t i_ = 0;
};

std::string random_sentence(Rng& rng) {
  std::string s;
  const auto n = rng.below(12);
  for (std::uint64_t i = 0; i < n; ++i) s += "t" + std::to_string(rng.below(15)) + " ";
  return s;
}

}  // namespace

TEST_CASE("identical and disjoint pairs") {
  providers::MockEmbeddingProvider emb;
  const std::string s = "garam paani ki bottle pet par rakhein";
  CHECK(bleu(s, {s}) == doctest::Approx(1.0).epsilon(1e-12));
  auto r = rouge_l(s, s);
  CHECK(r.precision == 1.0);
  CHECK(r.recall == 1.0);
  CHECK(r.f1 == 1.0);
  auto b = bert_score(s, s, emb);
  CHECK(b.f1 == doctest::Approx(1.0).epsilon(1e-12));

  CHECK(bleu("xx yy zz", {"aa bb cc"}) == 0.0);
  CHECK(rouge_l("xx yy", "aa bb").f1 == 0.0);
  CHECK(bleu("", {"aa"}) == 0.0);
  CHECK(rouge_l("", "aa").f1 == 0.0);
  CHECK_THROWS_AS(bleu("aa", {"", "  "}), Error);
}

TEST_CASE("committed hand-derived fixtures") {
  providers::MockEmbeddingProvider emb;
  auto cases = nlohmann::json::parse(read_file(safeqa::testing::source_path("data/fixtures/metric_cases.json")));
  REQUIRE(cases.size() == 3);
  for (const auto& c : cases) {
    const std::string metric = c["metric"];
    const std::string cand = c["candidate"];
    const auto refs = c["references"].get<std::vector<std::string>>();
    const double expected = c["expected"];
    double got = -1;
    if (metric == "bleu") got = bleu(cand, refs);
    if (metric == "rouge_l_f1") got = rouge_l(cand, refs[0]).f1;
    if (metric == "bert_score_f1") {
      std::set<std::size_t> buckets;
      for (const auto& t : {"alpha", "beta", "gamma"}) buckets.insert(emb.bucket(t));
      REQUIRE(buckets.size() == 3);
      got = bert_score(cand, refs[0], emb).f1;
    }
    INFO(metric);
    CHECK(std::abs(got - expected) < 1e-9);
  }
  auto r = rouge_l("a b c d", "a c d");
  CHECK(r.precision == 0.75);
  CHECK(r.recall == 1.0);
}

TEST_CASE("bert score orthogonal and asymmetric fixtures") {
  providers::MockEmbeddingProvider emb;
  // Pick tokens with distinct buckets.
  std::vector<std::string> toks;
  std::set<std::size_t> used;
  for (int i = 0; toks.size() < 4; ++i) {
    std::string t = "tok" + std::to_string(i);
    if (used.insert(emb.bucket(t)).second) toks.push_back(t);
  }
  auto ortho = bert_score(toks[0] + " " + toks[1], toks[2] + " " + toks[3], emb);
  CHECK(ortho.precision == 0.0);
  CHECK(ortho.recall == 0.0);
  CHECK(ortho.f1 == 0.0);

  // Candidate covers the reference plus two extra tokens: P = 1/3, R = 1.
  auto asym = bert_score(toks[0] + " " + toks[1] + " " + toks[2], toks[0], emb);
  CHECK(asym.precision == doctest::Approx(1.0 / 3.0));
  CHECK(asym.recall == doctest::Approx(1.0));
  CHECK(asym.f1 == doctest::Approx(0.5));
}

TEST_CASE("bleu uses the closest reference length") {
  // Candidate of 3 tokens; references of 2 and 6 tokens: closest is 2, no penalty.
  CHECK(bleu("aa bb cc", {"aa bb", "aa bb cc dd ee ff"}) > bleu("aa bb cc", {"aa bb cc dd ee ff"}));
}

TEST_CASE("property: metrics stay in [0,1] and ROUGE-L F1 is symmetric") {
  providers::MockEmbeddingProvider emb;
  Rng rng(1000);
  for (int i = 0; i < 1000; ++i) {
    const auto a = random_sentence(rng);
    auto b = random_sentence(rng);
    if (text::tokenize(b).empty()) b = "t1";
    const double bl = bleu(a, {b});
    CHECK(bl >= 0.0);
    CHECK(bl <= 1.0);
    const auto r = rouge_l(a, b);
    CHECK(r.f1 >= 0.0);
    CHECK(r.f1 <= 1.0);
    CHECK(std::abs(r.f1 - rouge_l(b, a).f1) < 1e-12);
    const auto bs = bert_score(a, b, emb);
    for (double v : {bs.precision, bs.recall, bs.f1}) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0 + 1e-12);
    }
  }
}

TEST_CASE("chainpoll hallucination") {
  const std::string ctx = "garam paani ki bottle pet par rakhein";
  MockJudge judge;
  CHECK(chainpoll_hallucination(ctx, {ctx}, judge).score == 0.0);
  CHECK(chainpoll_hallucination("football stadium tickets", {ctx}, judge).score == 1.0);

  ScriptedJudge mixed({1, 0, 1, 0, 0});
  auto poll = chainpoll_hallucination("r", {ctx}, mixed, 5);
  CHECK(poll.score == doctest::Approx(0.4));
  CHECK(poll.verdicts.size() == 5);
  CHECK_FALSE(poll.partial);

  ScriptedJudge flaky({1, -1, 0, -1, 1});
  auto partial = chainpoll_hallucination("r", {ctx}, flaky, 5);
  CHECK(partial.partial);
  CHECK(partial.verdicts.size() == 3);
  CHECK(partial.score == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("reports round trip") {
  auto report = make_report("bleu", {{"a", 0.5}, {"b", 1.0}}, {{"max_n", 4}});
  CHECK(report.value == 0.75);
  auto back = MetricReport::from_json(report.to_json());
  CHECK(back.metric == "bleu");
  CHECK(back.per_item == report.per_item);
  CHECK(back.config == report.config);
  CHECK(make_report("x", {}).value == 0.0);
}

TEST_CASE("parallel_map keeps index order") {
  std::function<std::size_t(std::size_t)> square = [](std::size_t i) { return i * i; };
  auto out = parallel_map<std::size_t>(1000, 8, square);
  for (std::size_t i = 0; i < out.size(); ++i) CHECK(out[i] == i * i);
  CHECK(parallel_map<std::size_t>(0, 4, square).empty());
}

TEST_CASE("retrieval_eval examples") {
  std::vector<QARecord> recs = {make_record("a1", "periods dard ilaj", "A"),
                                make_record("a2", "periods pet dard", "A"),
                                make_record("b1", "condom kaise pehne", "B"),
                                make_record("c1", "nightfall kya hai", "C")};
  retrieval::Retriever r(std::make_shared<providers::MockEmbeddingProvider>());
  r.rebuild(recs);
  std::vector<retrieval::HoldoutQuery> dup;
  for (const auto& rec : recs) dup.push_back({rec.sanitized_question, rec.group_id});
  auto perfect = retrieval_eval(dup, r);
  CHECK(perfect.top1_group_accuracy == 1.0);
  CHECK(perfect.mrr == 1.0);

  retrieval::Retriever stripped(std::make_shared<providers::MockEmbeddingProvider>());
  stripped.rebuild({recs[2], recs[3]});
  auto none = retrieval_eval({{"periods dard", recs[0].group_id}}, stripped);
  CHECK(none.top1_group_accuracy == 0.0);
  CHECK(none.mrr == 0.0);

  CHECK_THROWS_AS(retrieval_eval({}, r), Error);

  // Ten queries scored by walking the result lists directly.
  std::vector<retrieval::HoldoutQuery> ten = {
      {"periods", recs[0].group_id},   {"dard", recs[0].group_id},
      {"condom", recs[2].group_id},    {"kya hai", recs[3].group_id},
      {"pet dard", recs[0].group_id},  {"condom dard", recs[2].group_id},
      {"nightfall", recs[3].group_id}, {"pehne periods", recs[2].group_id},
      {"ilaj", recs[0].group_id},      {"kaise", recs[3].group_id}};
  double top1 = 0, rr = 0;
  auto snap = r.snapshot();
  for (const auto& q : ten) {
    auto hits = r.search(q.query, 5);
    for (std::size_t i = 0; i < hits.size(); ++i) {
      if (snap->doc(hits[i].record_id)->group_id == q.group_id) {
        rr += 1.0 / static_cast<double>(i + 1);
        top1 += i == 0;
        break;
      }
    }
  }
  auto report = retrieval_eval(ten, r, 5, 0.5, 3);
  CHECK(report.top1_group_accuracy == doctest::Approx(top1 / 10));
  CHECK(report.mrr == doctest::Approx(rr / 10));
  CHECK(report.queries == 10);
}

TEST_CASE("leave_one_out holds one member per multi-member group") {
  auto corpus = synth::generate_corpus({.groups = 30});
  auto h = leave_one_out(corpus, 3);
  std::set<std::string> groups;
  for (const auto& q : h.queries) CHECK(groups.insert(q.group_id).second);
  CHECK(h.train.size() + h.queries.size() == corpus.size());
  CHECK(groups.size() == 30);
  auto again = leave_one_out(corpus, 3);
  CHECK(again.query_ids == h.query_ids);
}

TEST_CASE("add_noise") {
  CHECK(add_noise("periods me dard", 0.0, 1) == "periods me dard");
  CHECK(add_noise("periods me dard", 0.2, 9) == add_noise("periods me dard", 0.2, 9));
  CHECK_THROWS_AS(add_noise("x", 0.31, 1), Error);
  CHECK_THROWS_AS(add_noise("x", -0.1, 1), Error);
  Rng rng(4);
  for (int i = 0; i < 200; ++i) {
    auto noisy = add_noise("गर्भ निरोधक goli kab", 0.3, rng.next());
    CHECK(text::is_valid_utf8(noisy));
  }
}

TEST_CASE("robustness_eval at p=0 has zero delta") {
  auto corpus = synth::generate_corpus({.groups = 40});
  auto h = leave_one_out(corpus, 1);
  retrieval::Retriever r(std::make_shared<providers::MockEmbeddingProvider>());
  r.rebuild(h.train);
  auto clean = robustness_eval(h.queries, r, 0.0, 5);
  CHECK(clean.accuracy_delta == 0.0);
  auto a = robustness_eval(h.queries, r, 0.1, 5);
  auto b = robustness_eval(h.queries, r, 0.1, 5);
  CHECK(a.noisy_queries == b.noisy_queries);
  CHECK(a.accuracy_delta == b.accuracy_delta);
}

TEST_CASE("scalability harness on small sizes") {
  auto report = scalability_eval({200, 500}, 17, 50, 10);
  REQUIRE(report.rows.size() == 2);
  CHECK(report.rows[0].documents == 200);
  CHECK(report.rows[1].documents == 500);
  for (const auto& row : report.rows) {
    CHECK(row.spot_checks == 10);
    CHECK(row.spot_checks_passed == 10);
    CHECK(row.p50_ms <= row.p95_ms);
  }
  auto back = ScalabilityReport::from_json(report.to_json());
  CHECK(back.to_json() == report.to_json());
}

TEST_CASE("brute-force bm25 agrees with the index") {
  std::vector<std::pair<std::string, std::vector<std::string>>> docs = {
      {"d1", {"a", "b"}}, {"d2", {"a", "a", "b"}}, {"d3", {"c"}}};
  retrieval::InvertedIndex idx;
  for (const auto& [id, toks] : docs) idx.add(id, text::TokenStream{toks});
  auto bf = brute_force_bm25({"a"}, docs, 10);
  REQUIRE(bf.size() == 2);
  CHECK(bf[0].first == "d2");
  CHECK(std::abs(bf[0].second - idx.score(text::TokenStream{{"a"}}, "d2")) < 1e-12);
}

TEST_CASE("theme route table") {
  auto t = theme_route_table({{"sti", "retrieval"}, {"sti", "generation"}, {"pain", "retrieval"}});
  CHECK(t["sti"]["total"] == 2);
  CHECK(t["sti"]["retrieval_rate"] == 0.5);
  CHECK(t["pain"]["retrieval_rate"] == 1.0);
}
