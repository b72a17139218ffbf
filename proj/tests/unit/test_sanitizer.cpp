#include <doctest.h>

#include <string>
#include <vector>

#include "harness.hpp"
#include "safeqa/sanitizer.hpp"
#include "safeqa/synthetic.hpp"
#include "safeqa/text.hpp"

using namespace safeqa;
using pii::Kind;
using pii::Span;

namespace {

// Rebuilds the redacted text from the original and the spans alone.
std::string splice(const std::string& original, const std::vector<Span>& spans) {
  std::string out;
  std::size_t at = 0;
  for (const auto& s : spans) {
    out += original.substr(at, s.start - at);
    out += pii::placeholder(s.kind);
    at = s.end;
  }
  return out + original.substr(at);
}

std::string random_text(Rng& rng) {
  static const std::vector<std::string> pieces = {
      "call ", "98765", " ", "43210", "+91 ", "0", "mera naam ", "Sita", " ", "16", " years",
      "saal ", "Patna", "1234", "-", "5678", "9", "hai", "?", "[PHONE]", "[AGE", "]", "साल",
      "सीता", "my name is ", "Ravi", "x", "7", "\n", "é"};
  std::string s;
  const auto n = rng.below(14);
  for (std::uint64_t i = 0; i < n; ++i) s += pieces[rng.below(pieces.size())];
  return s;
}

}  // namespace

TEST_CASE("detect_pii examples") {
  pii::Sanitizer san;
  CHECK(san.detect_pii("").empty());

  auto phone = san.detect_pii("call me at 98765 43210");
  REQUIRE(phone.size() == 1);
  CHECK(phone[0] == Span{Kind::kPhone, 11, 22, "98765 43210"});

  auto mixed = san.detect_pii("mera naam Sita hai, I am 16 years old");
  REQUIRE(mixed.size() == 2);
  CHECK(mixed[0] == Span{Kind::kName, 10, 14, "Sita"});
  CHECK(mixed[1] == Span{Kind::kAge, 25, 27, "16"});
}

TEST_CASE("phone variants and id numbers") {
  pii::Sanitizer san;
  for (std::string p : {"9876543210", "+91 9876543210", "+91-98765-43210", "09876543210"}) {
    auto spans = san.detect_pii("number " + p + " hai");
    REQUIRE(spans.size() == 1);
    CHECK(spans[0].kind == Kind::kPhone);
    CHECK(spans[0].surface == p);
  }
  // Starts with 5: not a mobile number.
  CHECK(san.detect_pii("code 5876543210").empty());

  auto id = san.detect_pii("aadhaar 1234 5678 9012 hai");
  REQUIRE(id.size() == 1);
  CHECK(id[0].kind == Kind::kIdNumber);
  CHECK(id[0].surface == "1234 5678 9012");

  // Longest match wins over the phone inside the 12-digit run.
  auto longest = san.detect_pii("id 987654321012");
  REQUIRE(longest.size() == 1);
  CHECK(longest[0].kind == Kind::kIdNumber);
}

TEST_CASE("age needs a cue and a 5..99 value") {
  pii::Sanitizer san;
  CHECK(san.detect_pii("meri umar 16 hai").size() == 1);
  CHECK(san.detect_pii("16 saal ki hoon").size() == 1);
  CHECK(san.detect_pii("take 16 tablets").empty());
  CHECK(san.detect_pii("4 years").empty());
  CHECK(san.detect_pii("100 years").empty());
}

TEST_CASE("place gazetteer and Devanagari offsets") {
  pii::Sanitizer san;
  auto spans = san.detect_pii("main Patna se hoon");
  REQUIRE(spans.size() == 1);
  CHECK(spans[0].kind == Kind::kPlace);
  CHECK(spans[0].surface == "Patna");

  const std::string hi = "मेरा नाम सीता है";
  auto dev = san.detect_pii(hi);
  REQUIRE(dev.size() == 1);
  CHECK(dev[0].kind == Kind::kName);
  CHECK(hi.substr(dev[0].start, dev[0].end - dev[0].start) == "सीता");
}

TEST_CASE("redact examples") {
  pii::Sanitizer san;
  auto r = san.redact("call 9876543210");
  CHECK(r.text == "call [PHONE]");
  CHECK_FALSE(r.clean);
  REQUIRE(r.spans.size() == 1);
  CHECK(r.spans[0].start == 5);
  CHECK(r.spans[0].end == 15);

  auto clean = san.redact("periods me dard ho to kya karein");
  CHECK(clean.clean);
  CHECK(clean.text == "periods me dard ho to kya karein");
}

TEST_CASE("sanitize_record") {
  pii::Sanitizer san;
  QARecord r;
  r.relevant_question = "is it safe at 16 years";
  r.answer = "a";
  auto out = san.sanitize_record(r);
  CHECK(out.sanitized_question == "is it safe at [AGE] years");
  CHECK(out.relevant_question == r.relevant_question);
  CHECK(out.answer == r.answer);

  r.relevant_question = "already clean";
  CHECK(san.sanitize_record(r).sanitized_question == "already clean");

  r.relevant_question.clear();
  CHECK_THROWS_WITH_AS(san.sanitize_record(r), "nothing to sanitize", Error);
}

TEST_CASE("property: idempotence, non-destruction and span shape on random strings") {
  pii::Sanitizer san;
  Rng rng(1234);
  for (int i = 0; i < 1000; ++i) {
    const std::string s = random_text(rng);
    auto once = san.redact(s);
    CHECK(san.redact(once.text).text == once.text);
    CHECK(once.text == splice(s, once.spans));
    CHECK(once.clean == once.spans.empty());
    std::size_t prev_end = 0;
    for (const auto& span : once.spans) {
      CHECK(span.start < span.end);
      CHECK(span.end <= s.size());
      CHECK(span.start >= prev_end);
      CHECK(s.substr(span.start, span.end - span.start) == span.surface);
      CHECK(text::is_valid_utf8(span.surface));
      prev_end = span.end;
    }
  }
}

TEST_CASE("seeded fixtures: every annotated span is found") {
  pii::Sanitizer san;
  for (Kind kind : {Kind::kPhone, Kind::kAge, Kind::kName, Kind::kPlace, Kind::kIdNumber}) {
    auto fixtures = synth::generate_pii_fixtures(kind, 100, 99);
    REQUIRE(fixtures.size() == 100);
    std::size_t found = 0, expected = 0;
    for (const auto& f : fixtures) {
      auto spans = san.detect_pii(f.text);
      for (const auto& want : f.spans) {
        ++expected;
        for (const auto& got : spans) {
          if (got == want) {
            ++found;
            break;
          }
        }
      }
    }
    INFO("kind " << pii::to_string(kind));
    CHECK(found == expected);
  }
}

TEST_CASE("rule config round trip and reload") {
  auto config = pii::RuleConfig::defaults();
  auto back = pii::RuleConfig::from_json(config.to_json());
  CHECK(back.name_lexicon == config.name_lexicon);
  CHECK(back.gazetteer == config.gazetteer);

  pii::Sanitizer san;
  CHECK(san.is_clean("Zorbania se hoon"));
  config.gazetteer.push_back("Zorbania");
  san.reload(config);
  CHECK_FALSE(san.is_clean("Zorbania se hoon"));
}
