#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <string>
#include <vector>

#include "harness.hpp"
#include "safeqa/retrieval.hpp"

using namespace safeqa;
using namespace safeqa::retrieval;
using safeqa::testing::make_record;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Observed {
  double score;
  bool in_group;
};

// F1 of "accept and in group" at every candidate threshold, computed from
// the raw observations; returns (best f1, largest tau reaching it).
std::pair<double, double> oracle_sweep(const std::vector<Observed>& obs) {
  std::set<double> candidates{kInf};
  for (const auto& o : obs) candidates.insert(o.score);
  // Midpoints never beat the observed points; include them as a check.
  std::vector<double> sorted(candidates.begin(), candidates.end());
  for (std::size_t i = 0; i + 1 < sorted.size() && std::isfinite(sorted[i + 1]); ++i) {
    candidates.insert((sorted[i] + sorted[i + 1]) / 2);
  }
  double best_f1 = -1, best_tau = 0;
  for (double tau : candidates) {
    int tp = 0, fp = 0, fn = 0;
    for (const auto& o : obs) {
      bool accept = o.score >= tau;
      tp += accept && o.in_group;
      fp += accept && !o.in_group;
      fn += !accept && o.in_group;
    }
    double f1 = (2 * tp + fp + fn) == 0 ? 0.0 : 2.0 * tp / (2.0 * tp + fp + fn);
    if (f1 > best_f1 || (f1 == best_f1 && tau > best_tau)) {
      best_f1 = f1;
      best_tau = tau;
    }
  }
  return {best_f1, best_tau};
}

struct Fixture {
  Retriever retriever{std::make_shared<providers::MockEmbeddingProvider>()};
  std::vector<QARecord> records;

  Fixture() {
    const std::vector<std::string> topics = {"periods dard",   "condom phat",   "nightfall dhat",
                                             "garbh nirodhak", "hiv test kahan", "pimple chehra",
                                             "breast size",    "masturbation",  "first night",
                                             "white discharge"};
    for (std::size_t g = 0; g < topics.size(); ++g) {
      const std::string answer = "answer " + std::to_string(g);
      records.push_back(make_record("g" + std::to_string(g) + "a", topics[g] + " kya karein", answer));
      records.push_back(make_record("g" + std::to_string(g) + "b", topics[g] + " ka ilaj", answer));
    }
    retriever.rebuild(records);
  }

  std::vector<Observed> observe(const std::vector<HoldoutQuery>& holdout) const {
    std::vector<Observed> out;
    auto snap = retriever.snapshot();
    for (const auto& q : holdout) {
      auto hits = retriever.search(q.query, 1);
      REQUIRE_FALSE(hits.empty());
      out.push_back({hits[0].final_score, snap->doc(hits[0].record_id)->group_id == q.group_id});
    }
    return out;
  }
};

}  // namespace

TEST_CASE("all-in-group holdout: tau is the minimum top-1 score with F1 1") {
  Fixture f;
  std::vector<HoldoutQuery> holdout;
  for (std::size_t i = 0; i < 10; ++i) {
    holdout.push_back({f.records[2 * i].sanitized_question, f.records[2 * i].group_id});
  }
  auto obs = f.observe(holdout);
  double min_score = kInf;
  for (const auto& o : obs) {
    REQUIRE(o.in_group);
    min_score = std::min(min_score, o.score);
  }
  auto cal = calibrate_threshold(holdout, f.retriever);
  CHECK(cal.tau == min_score);
  CHECK(cal.f1 == 1.0);
  auto [f1, tau] = oracle_sweep(obs);
  CHECK(cal.tau == tau);
  CHECK(cal.f1 == f1);
}

TEST_CASE("none-in-group holdout: tau is +inf") {
  Fixture f;
  std::vector<HoldoutQuery> holdout;
  for (std::size_t i = 0; i < 10; ++i) {
    // Label each query with the next group's id.
    holdout.push_back({f.records[2 * i].sanitized_question, f.records[(2 * i + 2) % 20].group_id});
  }
  auto cal = calibrate_threshold(holdout, f.retriever);
  CHECK(std::isinf(cal.tau));
  CHECK(cal.f1 == 0.0);
  auto [f1, tau] = oracle_sweep(f.observe(holdout));
  CHECK(cal.tau == tau);
}

TEST_CASE("mixed holdout matches the exhaustive oracle") {
  Fixture f;
  std::vector<HoldoutQuery> holdout;
  Rng rng(8);
  for (std::size_t i = 0; i < 20; ++i) {
    const auto& rec = f.records[i];
    std::string query = rec.sanitized_question;
    if (i % 3 == 0) query = query.substr(0, query.find(' '));  // weaker match
    const bool mislabel = rng.below(3) == 0;
    holdout.push_back({query, mislabel ? f.records[(i + 4) % 20].group_id : rec.group_id});
  }
  auto obs = f.observe(holdout);
  auto cal = calibrate_threshold(holdout, f.retriever);
  auto [f1, tau] = oracle_sweep(obs);
  CHECK(cal.tau == tau);
  CHECK(cal.f1 == doctest::Approx(f1).epsilon(1e-12));
  CHECK(cal.sweep.size() >= 2);
}

TEST_CASE("sweep ties go to the larger threshold") {
  std::vector<TopOne> obs = {{0.9, true}, {0.8, false}, {0.7, true}};
  // tau 0.7: tp 2 fp 1 -> 0.8; tau 0.8: tp 1 fp 1 fn 1 -> 0.5; tau 0.9: tp 1 fn 1 -> 0.667.
  auto cal = sweep_threshold(obs);
  CHECK(cal.tau == 0.7);
  CHECK(cal.f1 == doctest::Approx(0.8));

  std::vector<TopOne> tied = {{0.9, true}, {0.5, false}, {0.4, true}};
  // tau 0.4 -> 0.8, tau 0.9 -> 0.667; add a case where 0.4 and 0.9 tie.
  std::vector<TopOne> tie2 = {{0.9, true}, {0.4, false}};
  auto c2 = sweep_threshold(tie2);
  CHECK(c2.tau == 0.9);
  CHECK(c2.f1 == 1.0);
  CHECK(sweep_threshold(tied).tau == 0.4);
}

TEST_CASE("calibration preconditions and encoding") {
  Fixture f;
  CHECK_THROWS_AS(calibrate_threshold({}, f.retriever), Error);
  CHECK_THROWS_AS(calibrate_threshold({{"periods", "no-such-group"}}, f.retriever), Error);
  CHECK(threshold_to_json(kInf) == "+inf");
  CHECK(std::isinf(threshold_from_json(threshold_to_json(kInf))));
  CHECK(threshold_from_json(threshold_to_json(0.25)) == 0.25);
}
