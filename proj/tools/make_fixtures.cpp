// Writes the seeded synthetic fixtures: a paraphrase-group corpus and
// annotated PII sentences.
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "safeqa/synthetic.hpp"

using namespace safeqa;
using nlohmann::json;

int main(int argc, char** argv) {
  CLI::App app{"Generate synthetic fixtures"};
  std::string corpus_out;
  std::string pii_out;
  std::uint64_t seed = 20240611;
  std::size_t groups = 200;
  std::size_t per_kind = 100;
  app.add_option("--corpus", corpus_out, "Write the paraphrase corpus JSONL here");
  app.add_option("--pii", pii_out, "Write annotated PII sentences JSONL here");
  app.add_option("--seed", seed);
  app.add_option("--groups", groups);
  app.add_option("--per-kind", per_kind);
  CLI11_PARSE(app, argc, argv);

  if (!corpus_out.empty()) {
    std::ofstream out(corpus_out);
    for (const auto& r : synth::generate_corpus({.groups = groups, .seed = seed})) {
      out << to_json(r).dump() << "\n";
    }
    if (!out) {
      std::cerr << "cannot write " << corpus_out << "\n";
      return 1;
    }
  }
  if (!pii_out.empty()) {
    std::ofstream out(pii_out);
    for (auto kind : {pii::Kind::kPhone, pii::Kind::kAge, pii::Kind::kName, pii::Kind::kPlace,
                      pii::Kind::kIdNumber}) {
      for (const auto& f : synth::generate_pii_fixtures(kind, per_kind, seed)) {
        json spans = json::array();
        for (const auto& s : f.spans) {
          spans.push_back({{"kind", pii::to_string(s.kind)},
                           {"start", s.start},
                           {"end", s.end},
                           {"surface", s.surface}});
        }
        out << json{{"text", f.text}, {"spans", spans}}.dump() << "\n";
      }
    }
    if (!out) {
      std::cerr << "cannot write " << pii_out << "\n";
      return 1;
    }
  }
  return 0;
}
