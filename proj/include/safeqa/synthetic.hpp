#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "safeqa/record.hpp"
#include "safeqa/sanitizer.hpp"
#include "safeqa/util.hpp"

// Seeded generators for offline fixtures. Output depends only on the seed.
namespace safeqa::synth {

struct CorpusOptions {
  std::size_t groups = 200;
  std::size_t min_paraphrases = 2;
  std::size_t max_paraphrases = 4;
  std::uint64_t seed = 20240611;
};

/// Paraphrase groups of published records. Every member of a group shares
/// one answer; questions differ by synonym swaps, dropped or reordered terms
/// and filler phrases.
std::vector<QARecord> generate_corpus(const CorpusOptions& options);

/// Exactly `count` records, grouped as generate_corpus does.
std::vector<QARecord> generate_documents(std::size_t count, std::uint64_t seed);

/// One more lexical perturbation of an existing question (probe queries).
std::string perturb_question(std::string_view question, Rng& rng);

struct PiiFixture {
  std::string text;
  std::vector<pii::Span> spans;  // expected detections, sorted by start
};

std::vector<PiiFixture> generate_pii_fixtures(pii::Kind kind, std::size_t count,
                                              std::uint64_t seed);

}  // namespace safeqa::synth
