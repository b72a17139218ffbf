#include "safeqa/evaluation.hpp"

#include <chrono>
#include <cmath>
#include <map>
#include <numeric>
#include <unordered_map>

#include "safeqa/errors.hpp"
#include "safeqa/guardrails.hpp"
#include "safeqa/synthetic.hpp"
#include "safeqa/text.hpp"

namespace safeqa::eval {

using nlohmann::json;

namespace {

std::vector<std::string> tokens_of(std::string_view text) {
  return text::tokenize(text).tokens;
}

json items_to_json(const std::vector<std::pair<std::string, double>>& items) {
  json out = json::array();
  for (const auto& [id, v] : items) out.push_back({{"id", id}, {"value", v}});
  return out;
}

std::vector<std::pair<std::string, double>> items_from_json(const json& j) {
  std::vector<std::pair<std::string, double>> out;
  for (const auto& item : j) out.emplace_back(item.at("id"), item.at("value").get<double>());
  return out;
}

double mean(const std::vector<std::pair<std::string, double>>& items) {
  if (items.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& [id, v] : items) sum += v;
  return sum / static_cast<double>(items.size());
}

double harmonic(double p, double r) { return p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0; }

}  // namespace

json MetricReport::to_json() const {
  return {{"metric", metric}, {"value", value}, {"per_item", items_to_json(per_item)},
          {"config", config}};
}

MetricReport MetricReport::from_json(const json& j) {
  MetricReport r;
  r.metric = j.at("metric").get<std::string>();
  r.value = j.at("value").get<double>();
  r.per_item = items_from_json(j.at("per_item"));
  r.config = j.value("config", json::object());
  return r;
}

MetricReport make_report(std::string metric, std::vector<std::pair<std::string, double>> items,
                         json config) {
  MetricReport r;
  r.metric = std::move(metric);
  r.value = mean(items);
  r.per_item = std::move(items);
  r.config = std::move(config);
  return r;
}

// ---------------------------------------------------------------------------

double bleu(std::string_view candidate, const std::vector<std::string>& references,
            std::size_t max_n) {
  if (max_n == 0) throw Error(ErrorCode::kInvalidArgument, "max_n must be >= 1");
  std::vector<std::vector<std::string>> refs;
  for (const auto& r : references) {
    auto t = tokens_of(r);
    if (!t.empty()) refs.push_back(std::move(t));
  }
  if (refs.empty()) throw Error(ErrorCode::kInvalidArgument, "no tokenizable reference");
  const auto cand = tokens_of(candidate);
  if (cand.empty()) return 0.0;

  using Counts = std::map<std::vector<std::string>, std::size_t>;
  auto ngrams = [](const std::vector<std::string>& toks, std::size_t n) {
    Counts c;
    for (std::size_t i = 0; i + n <= toks.size(); ++i) {
      ++c[std::vector<std::string>(toks.begin() + i, toks.begin() + i + n)];
    }
    return c;
  };

  double log_sum = 0.0;
  for (std::size_t n = 1; n <= max_n; ++n) {
    const Counts cand_counts = ngrams(cand, n);
    Counts max_ref;
    for (const auto& r : refs) {
      for (const auto& [g, c] : ngrams(r, n)) max_ref[g] = std::max(max_ref[g], c);
    }
    std::size_t matched = 0;
    std::size_t total = 0;
    for (const auto& [g, c] : cand_counts) {
      total += c;
      auto it = max_ref.find(g);
      if (it != max_ref.end()) matched += std::min(c, it->second);
    }
    double p;
    if (n == 1) {
      p = static_cast<double>(matched) / static_cast<double>(total);
    } else {
      p = static_cast<double>(matched + 1) / static_cast<double>(total + 1);
    }
    if (p == 0.0) return 0.0;
    log_sum += std::log(p);
  }

  const double c = static_cast<double>(cand.size());
  std::size_t r = refs.front().size();
  for (const auto& ref : refs) {
    const auto d = [&](std::size_t len) {
      return std::abs(static_cast<double>(len) - c);
    };
    if (d(ref.size()) < d(r) || (d(ref.size()) == d(r) && ref.size() < r)) r = ref.size();
  }
  const double bp = c < static_cast<double>(r) ? std::exp(1.0 - static_cast<double>(r) / c) : 1.0;
  return std::clamp(bp * std::exp(log_sum / static_cast<double>(max_n)), 0.0, 1.0);
}

Prf rouge_l(std::string_view candidate, std::string_view reference) {
  const auto a = tokens_of(candidate);
  const auto b = tokens_of(reference);
  if (a.empty() || b.empty()) return {};
  std::vector<std::size_t> prev(b.size() + 1, 0);
  std::vector<std::size_t> cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  const double lcs = static_cast<double>(prev[b.size()]);
  Prf out;
  out.precision = lcs / static_cast<double>(a.size());
  out.recall = lcs / static_cast<double>(b.size());
  out.f1 = harmonic(out.precision, out.recall);
  return out;
}

Prf bert_score(std::string_view candidate, std::string_view reference,
               providers::EmbeddingProvider& provider) {
  const auto a = tokens_of(candidate);
  const auto b = tokens_of(reference);
  if (a.empty() || b.empty()) return {};
  auto unit = [&](const std::vector<std::string>& toks) {
    auto vecs = provider.embed(toks);
    if (vecs.size() != toks.size()) {
      throw Error(ErrorCode::kProviderRejected, "embedding count mismatch");
    }
    for (auto& v : vecs) {
      double norm = 0.0;
      for (double x : v) norm += x * x;
      norm = std::sqrt(norm);
      if (norm > 0.0) {
        for (double& x : v) x /= norm;
      }
    }
    return vecs;
  };
  const auto va = unit(a);
  const auto vb = unit(b);
  std::vector<std::vector<double>> sim(a.size(), std::vector<double>(b.size(), 0.0));
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < b.size(); ++j) {
      double dot = 0.0;
      for (std::size_t d = 0; d < va[i].size() && d < vb[j].size(); ++d) dot += va[i][d] * vb[j][d];
      sim[i][j] = std::clamp(dot, 0.0, 1.0);
    }
  }
  double p = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) p += *std::max_element(sim[i].begin(), sim[i].end());
  double r = 0.0;
  for (std::size_t j = 0; j < b.size(); ++j) {
    double best = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) best = std::max(best, sim[i][j]);
    r += best;
  }
  Prf out;
  out.precision = p / static_cast<double>(a.size());
  out.recall = r / static_cast<double>(b.size());
  out.f1 = harmonic(out.precision, out.recall);
  return out;
}

// ---------------------------------------------------------------------------

bool MockJudge::judge(const JudgeQuery& query) {
  const auto recall = rails::grounding_recall(query.response, query.context,
                                              rails::default_grounding_stopwords());
  return recall.has_value() && *recall < min_recall_;
}

HttpJudge::HttpJudge(std::string id, providers::HttpJsonClient client)
    : id_(std::move(id)), client_(std::move(client)) {}

bool HttpJudge::judge(const JudgeQuery& query) {
  const json reply = client_.post(
      "", {{"question", query.question}, {"response", query.response}, {"context", query.context}});
  const std::string verdict = ascii_lower(reply.value("verdict", ""));
  if (verdict == "yes") return true;
  if (verdict == "no") return false;
  throw ProviderError("judge returned no yes/no verdict", false);
}

json JudgePoll::to_json() const {
  return {{"n", n}, {"verdicts", verdicts}, {"score", score}, {"partial", partial}};
}

JudgePoll chainpoll_hallucination(const std::string& response,
                                  const std::vector<std::string>& context, JudgeProvider& judge,
                                  std::size_t n) {
  if (n == 0) throw Error(ErrorCode::kInvalidArgument, "poll count must be >= 1");
  const JudgeQuery query{std::string(kJudgeQuestion), response, context};
  JudgePoll poll;
  poll.n = n;
  for (std::size_t i = 0; i < n; ++i) {
    try {
      poll.verdicts.push_back(judge.judge(query));
    } catch (const std::exception&) {
      poll.partial = true;
    }
  }
  if (!poll.verdicts.empty()) {
    const auto yes = std::count(poll.verdicts.begin(), poll.verdicts.end(), true);
    poll.score = static_cast<double>(yes) / static_cast<double>(poll.verdicts.size());
  }
  return poll;
}

// ---------------------------------------------------------------------------

json RetrievalReport::to_json() const {
  return {{"queries", queries},
          {"top1_group_accuracy", top1_group_accuracy},
          {"mrr", mrr},
          {"acceptance_rate_at_tau", acceptance_rate},
          {"tau", retrieval::threshold_to_json(tau)},
          {"k", k},
          {"per_item", items_to_json(reciprocal_ranks)}};
}

Holdout leave_one_out(const std::vector<QARecord>& records, std::uint64_t seed) {
  std::map<std::string, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < records.size(); ++i) groups[records[i].group_id].push_back(i);
  Rng rng(seed);
  std::vector<bool> held(records.size(), false);
  for (const auto& [group, members] : groups) {
    if (members.size() < 2) continue;
    held[members[rng.below(members.size())]] = true;
  }
  Holdout out;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (held[i]) {
      out.queries.push_back({records[i].sanitized_question, records[i].group_id});
      out.query_ids.push_back(records[i].id);
    } else {
      out.train.push_back(records[i]);
    }
  }
  return out;
}

RetrievalReport retrieval_eval(const std::vector<retrieval::HoldoutQuery>& holdout,
                               const retrieval::Retriever& retriever, std::size_t k, double tau,
                               std::size_t parallelism) {
  if (holdout.empty()) throw Error(ErrorCode::kPrecondition, "empty holdout");
  const auto snap = retriever.snapshot();
  struct Outcome {
    bool top1 = false;
    bool accepted = false;
    double rr = 0.0;
  };
  const auto outcomes = parallel_map<Outcome>(
      holdout.size(), parallelism, [&](std::size_t i) {
        const auto hits = retriever.search(*snap, holdout[i].query, k);
        Outcome o;
        for (std::size_t r = 0; r < hits.size(); ++r) {
          const auto* doc = snap->doc(hits[r].record_id);
          if (doc != nullptr && doc->group_id == holdout[i].group_id) {
            o.rr = 1.0 / static_cast<double>(r + 1);
            o.top1 = r == 0;
            break;
          }
        }
        o.accepted = retrieval::decide_relevance(hits, tau).accepted;
        return o;
      });
  RetrievalReport report;
  report.queries = holdout.size();
  report.tau = tau;
  report.k = k;
  std::size_t top1 = 0;
  std::size_t accepted = 0;
  double rr_sum = 0.0;
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    top1 += outcomes[i].top1 ? 1 : 0;
    accepted += outcomes[i].accepted ? 1 : 0;
    rr_sum += outcomes[i].rr;
    report.reciprocal_ranks.emplace_back(std::to_string(i), outcomes[i].rr);
  }
  const double n = static_cast<double>(holdout.size());
  report.top1_group_accuracy = static_cast<double>(top1) / n;
  report.mrr = rr_sum / n;
  report.acceptance_rate = static_cast<double>(accepted) / n;
  return report;
}

std::string add_noise(std::string_view text, double p, std::uint64_t seed) {
  if (!(p >= 0.0 && p <= 0.3)) throw Error(ErrorCode::kInvalidArgument, "noise p must be in [0, 0.3]");
  std::vector<std::string> cps;
  for (std::size_t pos = 0; pos < text.size();) {
    const std::size_t start = pos;
    text::next_codepoint(text, pos);
    cps.emplace_back(text.substr(start, pos - start));
  }
  if (p == 0.0) return std::string(text);
  Rng rng(seed);
  std::string out;
  for (std::size_t i = 0; i < cps.size(); ++i) {
    if (rng.unit() >= p) {
      out += cps[i];
      continue;
    }
    switch (rng.below(3)) {
      case 0:
        if (i + 1 < cps.size()) {
          out += cps[i + 1];
          out += cps[i];
          ++i;
        } else {
          out += cps[i];
        }
        break;
      case 1:
        break;
      default:
        out += cps[i];
        out += cps[i];
        break;
    }
  }
  return out;
}

json RobustnessReport::to_json() const {
  return {{"p", p},
          {"seed", seed},
          {"clean", clean.to_json()},
          {"noisy", noisy.to_json()},
          {"accuracy_delta", accuracy_delta},
          {"noisy_queries", noisy_queries}};
}

RobustnessReport robustness_eval(const std::vector<retrieval::HoldoutQuery>& holdout,
                                 const retrieval::Retriever& retriever, double p,
                                 std::uint64_t seed, std::size_t k, double tau,
                                 std::size_t parallelism) {
  RobustnessReport report;
  report.p = p;
  report.seed = seed;
  std::vector<retrieval::HoldoutQuery> noisy = holdout;
  for (std::size_t i = 0; i < noisy.size(); ++i) {
    noisy[i].query = add_noise(holdout[i].query, p, seed + 0x9E3779B97F4A7C15ULL * (i + 1));
    report.noisy_queries.push_back(noisy[i].query);
  }
  report.clean = retrieval_eval(holdout, retriever, k, tau, parallelism);
  report.noisy = retrieval_eval(noisy, retriever, k, tau, parallelism);
  report.accuracy_delta = report.noisy.top1_group_accuracy - report.clean.top1_group_accuracy;
  return report;
}

// ---------------------------------------------------------------------------

std::vector<std::pair<std::string, double>> brute_force_bm25(
    const std::vector<std::string>& query_tokens,
    const std::vector<std::pair<std::string, std::vector<std::string>>>& docs, std::size_t k,
    retrieval::Bm25Params params) {
  const double n = static_cast<double>(docs.size());
  double total_len = 0.0;
  for (const auto& d : docs) total_len += static_cast<double>(d.second.size());
  const double avgdl = docs.empty() ? 0.0 : total_len / n;
  std::unordered_map<std::string, double> df;
  for (const auto& term : query_tokens) {
    if (df.count(term) != 0) continue;
    double count = 0.0;
    for (const auto& d : docs) {
      if (std::find(d.second.begin(), d.second.end(), term) != d.second.end()) count += 1.0;
    }
    df[term] = count;
  }
  std::vector<std::pair<std::string, double>> scored;
  for (const auto& [id, toks] : docs) {
    double score = 0.0;
    for (const auto& term : query_tokens) {
      const double tf = static_cast<double>(std::count(toks.begin(), toks.end(), term));
      if (tf == 0.0) continue;
      const double idf = std::log((n - df[term] + 0.5) / (df[term] + 0.5) + 1.0);
      const double dl = static_cast<double>(toks.size());
      score += idf * tf * (params.k1 + 1.0) /
               (tf + params.k1 * (1.0 - params.b + params.b * dl / avgdl));
    }
    if (score > 0.0) scored.emplace_back(id, score);
  }
  std::sort(scored.begin(), scored.end(), [](const auto& x, const auto& y) {
    return x.second != y.second ? x.second > y.second : x.first < y.first;
  });
  if (scored.size() > k) scored.resize(k);
  return scored;
}

json ScalabilityReport::to_json() const {
  json rows_json = json::array();
  for (const auto& r : rows) {
    rows_json.push_back({{"documents", r.documents},
                         {"build_ms", r.build_ms},
                         {"p50_ms", r.p50_ms},
                         {"p95_ms", r.p95_ms},
                         {"probes", r.probes},
                         {"spot_checks", r.spot_checks},
                         {"spot_checks_passed", r.spot_checks_passed}});
  }
  return {{"seed", seed}, {"rows", rows_json}};
}

ScalabilityReport ScalabilityReport::from_json(const json& j) {
  ScalabilityReport r;
  r.seed = j.at("seed").get<std::uint64_t>();
  for (const auto& row : j.at("rows")) {
    ScalabilityRow s;
    s.documents = row.at("documents").get<std::size_t>();
    s.build_ms = row.at("build_ms").get<double>();
    s.p50_ms = row.at("p50_ms").get<double>();
    s.p95_ms = row.at("p95_ms").get<double>();
    s.probes = row.at("probes").get<std::size_t>();
    s.spot_checks = row.at("spot_checks").get<std::size_t>();
    s.spot_checks_passed = row.at("spot_checks_passed").get<std::size_t>();
    r.rows.push_back(s);
  }
  return r;
}

namespace {

double percentile(std::vector<double> values, double q) {
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  const auto rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(values.size())));
  return values[std::clamp<std::size_t>(rank, 1, values.size()) - 1];
}

}  // namespace

ScalabilityReport scalability_eval(const std::vector<std::size_t>& sizes, std::uint64_t seed,
                                   std::size_t probes, std::size_t spot_checks) {
  using Clock = std::chrono::steady_clock;
  auto ms_since = [](Clock::time_point t) {
    return std::chrono::duration<double, std::milli>(Clock::now() - t).count();
  };
  ScalabilityReport report;
  report.seed = seed;
  for (std::size_t size : sizes) {
    const auto records = synth::generate_documents(size, seed);
    retrieval::Retriever retriever(std::make_shared<providers::MockEmbeddingProvider>());
    ScalabilityRow row;
    row.documents = records.size();
    const auto build_start = Clock::now();
    retriever.rebuild(records);
    row.build_ms = ms_since(build_start);

    Rng rng(seed ^ size);
    std::vector<std::string> queries;
    for (std::size_t i = 0; i < probes; ++i) {
      queries.push_back(synth::perturb_question(
          records[rng.below(records.size())].sanitized_question, rng));
    }
    const auto snap = retriever.snapshot();
    std::vector<double> latencies;
    latencies.reserve(queries.size());
    for (const auto& q : queries) {
      const auto t = Clock::now();
      (void)retriever.search(*snap, q, retriever.config().k);
      latencies.push_back(ms_since(t));
    }
    row.probes = queries.size();
    row.p50_ms = percentile(latencies, 0.50);
    row.p95_ms = percentile(latencies, 0.95);

    std::vector<std::pair<std::string, std::vector<std::string>>> docs;
    for (const auto& [id, d] : snap->docs) {
      docs.emplace_back(id, text::tokenize(d.text, retriever.config().stopwords).tokens);
    }
    for (std::size_t i = 0; i < spot_checks && !queries.empty(); ++i) {
      const auto& q = queries[(i * queries.size()) / spot_checks];
      const auto tokens = text::tokenize(q, retriever.config().stopwords);
      const auto got = retrieval::search_sparse(tokens, 10, snap->sparse);
      const auto want = brute_force_bm25(tokens.tokens, docs, 10);
      bool same = got.size() == want.size();
      for (std::size_t r = 0; same && r < got.size(); ++r) {
        same = got[r].record_id == want[r].first &&
               std::abs(got[r].sparse_score - want[r].second) <= 1e-9;
      }
      ++row.spot_checks;
      row.spot_checks_passed += same ? 1 : 0;
    }
    report.rows.push_back(row);
  }
  return report;
}

// ---------------------------------------------------------------------------

json theme_route_table(const std::vector<RouteObservation>& observations) {
  std::map<std::string, std::map<std::string, std::size_t>> counts;
  std::map<std::string, std::size_t> totals;
  for (const auto& o : observations) {
    ++counts[o.theme][o.route];
    ++totals[o.theme];
  }
  json out = json::object();
  for (const auto& [theme, routes] : counts) {
    json row = {{"total", totals[theme]}};
    for (const char* route : {"retrieval", "generation", "refusal", "escalated", "error"}) {
      auto it = routes.find(route);
      const double c = it == routes.end() ? 0.0 : static_cast<double>(it->second);
      row[std::string(route) + "_rate"] = c / static_cast<double>(totals[theme]);
    }
    out[theme] = row;
  }
  return out;
}

}  // namespace safeqa::eval
