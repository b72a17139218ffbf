#include <doctest.h>

#include <map>
#include <set>
#include <string>

#include "safeqa/corpus.hpp"
#include "safeqa/sanitizer.hpp"
#include "safeqa/synthetic.hpp"

using namespace safeqa;

TEST_CASE("synthetic corpus shape") {
  auto corpus = synth::generate_corpus({});
  std::map<std::string, std::size_t> sizes;
  std::map<std::string, std::string> answers;
  std::set<std::string> ids;
  pii::Sanitizer san;
  for (const auto& r : corpus) {
    ++sizes[r.group_id];
    CHECK(ids.insert(r.id).second);
    CHECK(r.status == RecordStatus::kPublished);
    CHECK(san.is_clean(r.sanitized_question));
    CHECK(r.group_id == corpus::group_id_for(r.answer));
    auto [it, fresh] = answers.emplace(r.group_id, r.answer);
    if (!fresh) CHECK(it->second == r.answer);
  }
  CHECK(sizes.size() >= 200);
  for (const auto& [g, n] : sizes) {
    CHECK(n >= 2);
    CHECK(n <= 4);
  }
}

TEST_CASE("generators depend only on the seed") {
  CHECK(synth::generate_corpus({.seed = 3}) == synth::generate_corpus({.seed = 3}));
  CHECK_FALSE(synth::generate_corpus({.seed = 3}) == synth::generate_corpus({.seed = 4}));
  CHECK(synth::generate_documents(137, 5).size() == 137);
  auto a = synth::generate_pii_fixtures(pii::Kind::kPhone, 20, 1);
  auto b = synth::generate_pii_fixtures(pii::Kind::kPhone, 20, 1);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].text == b[i].text);
}

TEST_CASE("committed fixture files match the generator") {
  // The files are written by safeqa_fixtures with default options.
  auto lines = read_lines(std::string(SAFEQA_SOURCE_DIR) + "/data/fixtures/synthetic_corpus.jsonl");
  auto corpus = synth::generate_corpus({});
  std::size_t n = 0;
  for (const auto& line : lines) {
    if (line.empty()) continue;
    REQUIRE(n < corpus.size());
    CHECK(record_from_json(nlohmann::json::parse(line)) == corpus[n]);
    ++n;
  }
  CHECK(n == corpus.size());
}

TEST_CASE("pii fixture spans point into their text") {
  for (auto kind : {pii::Kind::kPhone, pii::Kind::kAge, pii::Kind::kName, pii::Kind::kPlace,
                    pii::Kind::kIdNumber}) {
    for (const auto& f : synth::generate_pii_fixtures(kind, 100, 2)) {
      REQUIRE_FALSE(f.spans.empty());
      for (const auto& s : f.spans) {
        CHECK(f.text.substr(s.start, s.end - s.start) == s.surface);
      }
    }
  }
}
