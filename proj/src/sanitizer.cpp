#include "safeqa/sanitizer.hpp"

#include <algorithm>
#include <optional>

#include "safeqa/errors.hpp"
#include "safeqa/text.hpp"

namespace safeqa::pii {

std::string_view to_string(Kind kind) {
  switch (kind) {
    case Kind::kPhone: return "PHONE";
    case Kind::kAge: return "AGE";
    case Kind::kName: return "NAME";
    case Kind::kPlace: return "PLACE";
    case Kind::kIdNumber: return "ID_NUMBER";
  }
  return "PII";
}

std::string placeholder(Kind kind) {
  return "[" + std::string(to_string(kind)) + "]";
}

RuleConfig RuleConfig::defaults() {
  RuleConfig c;
  c.phone_patterns = {R"((?:\+91[ -]?|0)?[6-9](?:[ -]?[0-9]){9})"};
  c.id_patterns = {R"([0-9]{12})", R"([0-9]{4}[ -][0-9]{4}[ -][0-9]{4})"};
  c.age_cues = {"years old", "years", "year old", "year", "yrs", "yr",
                "saal",      "sal",   "baras",    "varsh", "age", "aged",
                "umar",      "umr",   "साल",      "वर्ष",   "बरस", "उम्र",
                "आयु"};
  c.name_lexicon = {
      "Sita",   "Gita",   "Radha",  "Priya",  "Pooja",  "Anjali", "Sunita",
      "Kavita", "Rekha",  "Meena",  "Asha",   "Lakshmi", "Neha",  "Rani",
      "Savitri", "Ramesh", "Suresh", "Mahesh", "Rajesh", "Dinesh", "Mukesh",
      "Rahul",  "Amit",   "Sunil",  "Anil",   "Vijay",  "Sanjay", "Manoj",
      "Ravi",   "Arjun",  "Karan",  "Rohit",  "Deepak", "Pankaj", "Raju",
      "Shyam",  "Gopal",  "Mohan",  "Sohan",  "Kishan", "सीता",   "गीता",
      "राधा",   "रमेश",   "सुरेश"};
  c.gazetteer = {
      "Uttar Pradesh", "Madhya Pradesh", "Bihar",     "Jharkhand",
      "Rajasthan",     "Chhattisgarh",   "Odisha",    "Haryana",
      "Delhi",         "Lucknow",        "Patna",     "Ranchi",
      "Jaipur",        "Bhopal",         "Indore",    "Varanasi",
      "Kanpur",        "Gorakhpur",      "Gaya",      "Muzaffarpur",
      "Darbhanga",     "Bhagalpur",      "Dhanbad",   "Bokaro",
      "Jodhpur",       "Udaipur",        "Ajmer",     "Gwalior",
      "Jabalpur",      "Raipur",         "Bilaspur",  "Agra",
      "Meerut",        "Allahabad",      "Prayagraj", "Mathura",
      "Sitapur",       "Barabanki",      "Bahraich",  "Mumbai",
      "बिहार",          "पटना",            "लखनऊ",       "दिल्ली"};
  c.self_reference_cues = {"my name is", "mera naam", "mera nam",
                           "main hoon", "मेरा नाम"};
  return c;
}

namespace {

std::vector<std::string> string_list(const nlohmann::json& j, const char* key,
                                     bool required) {
  auto it = j.find(key);
  if (it == j.end()) {
    if (required) {
      throw Error(ErrorCode::kParse, std::string("missing key: ") + key);
    }
    return {};
  }
  if (!it->is_array()) {
    throw Error(ErrorCode::kParse, std::string("expected list: ") + key);
  }
  std::vector<std::string> out;
  for (const auto& v : *it) out.push_back(v.get<std::string>());
  return out;
}

bool is_digit(char c) { return c >= '0' && c <= '9'; }

bool word_char_before(std::string_view text, std::size_t pos) {
  if (pos == 0) return false;
  std::size_t start = text::prev_codepoint_start(text, pos);
  return text::is_word_codepoint(text::next_codepoint(text, start));
}

bool word_char_at(std::string_view text, std::size_t pos) {
  if (pos >= text.size()) return false;
  return text::is_word_codepoint(text::next_codepoint(text, pos));
}

bool is_upper_or_devanagari(std::uint32_t cp) {
  return (cp >= 'A' && cp <= 'Z') || (cp >= 0x0900 && cp <= 0x097F);
}

bool is_letter_codepoint(std::uint32_t cp) {
  if (cp < 0x80) return (cp >= 'a' && cp <= 'z') || (cp >= 'A' && cp <= 'Z');
  return text::is_word_codepoint(cp) && !(cp >= 0x0966 && cp <= 0x096F);
}

// Placeholders emitted by redact(); matches inside them are ignored so
// redaction is idempotent.
std::vector<std::pair<std::size_t, std::size_t>> placeholder_regions(
    std::string_view text) {
  static const Kind kinds[] = {Kind::kPhone, Kind::kAge, Kind::kName,
                               Kind::kPlace, Kind::kIdNumber};
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (Kind kind : kinds) {
    const std::string token = placeholder(kind);
    for (std::size_t pos = text.find(token); pos != std::string_view::npos;
         pos = text.find(token, pos + 1)) {
      out.emplace_back(pos, pos + token.size());
    }
  }
  return out;
}

}  // namespace

RuleConfig RuleConfig::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw Error(ErrorCode::kParse, "PII config must be an object");
  RuleConfig c;
  c.phone_patterns = string_list(j, "phone_patterns", true);
  c.age_cues = string_list(j, "age_cues", true);
  c.name_lexicon = string_list(j, "name_lexicon", true);
  c.gazetteer = string_list(j, "gazetteer", true);
  c.id_patterns = string_list(j, "id_patterns", true);
  c.self_reference_cues = string_list(j, "self_reference_cues", false);
  if (c.self_reference_cues.empty()) {
    c.self_reference_cues = defaults().self_reference_cues;
  }
  return c;
}

RuleConfig RuleConfig::load(const std::string& path) {
  try {
    return from_json(nlohmann::json::parse(read_file(path)));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParse, path + ": " + e.what());
  }
}

nlohmann::json RuleConfig::to_json() const {
  return {{"phone_patterns", phone_patterns},
          {"age_cues", age_cues},
          {"name_lexicon", name_lexicon},
          {"gazetteer", gazetteer},
          {"id_patterns", id_patterns},
          {"self_reference_cues", self_reference_cues}};
}

RuleSet::RuleSet(RuleConfig config) : config_(std::move(config)) {
  auto compile = [](const std::vector<std::string>& patterns) {
    std::vector<std::regex> out;
    for (const auto& p : patterns) {
      try {
        out.emplace_back(p, std::regex::ECMAScript | std::regex::optimize);
      } catch (const std::regex_error& e) {
        throw Error(ErrorCode::kParse, "bad PII pattern '" + p + "': " + e.what());
      }
    }
    return out;
  };
  phone_ = compile(config_.phone_patterns);
  id_ = compile(config_.id_patterns);
  auto lowered = [](const std::vector<std::string>& words) {
    std::vector<std::string> out;
    for (const auto& w : words) {
      std::string n = ascii_lower(normalize_whitespace(text::nfc(w)));
      if (!n.empty()) out.push_back(std::move(n));
    }
    // Longest first so "years old" is tried before "years".
    std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
      return a.size() > b.size();
    });
    return out;
  };
  age_cues_ = lowered(config_.age_cues);
  names_ = lowered(config_.name_lexicon);
  places_ = lowered(config_.gazetteer);
  self_cues_ = lowered(config_.self_reference_cues);
}

void RuleSet::match_patterns(std::string_view text, Kind kind,
                             const std::vector<std::regex>& patterns,
                             std::vector<Candidate>& out) const {
  for (const auto& re : patterns) {
    auto begin = text.begin();
    auto search_from = text.begin();
    std::match_results<std::string_view::const_iterator> m;
    auto flags = std::regex_constants::match_default;
    while (search_from != text.end() &&
           std::regex_search(search_from, text.end(), m, re, flags)) {
      const auto start = static_cast<std::size_t>(m[0].first - begin);
      const auto end = static_cast<std::size_t>(m[0].second - begin);
      if (end == start) {
        search_from = m[0].first + 1;
        flags |= std::regex_constants::match_prev_avail;
        continue;
      }
      // Digit runs must be maximal: a match glued to further digits is part
      // of a longer number.
      const bool digit_before = start > 0 && is_digit(text[start - 1]);
      const bool digit_after = end < text.size() && is_digit(text[end]);
      if (!digit_before && !digit_after) {
        out.push_back({kind, start, end});
      }
      search_from = m[0].first + 1;
      flags |= std::regex_constants::match_prev_avail;
    }
  }
}

void RuleSet::match_ages(std::string_view text, std::string_view lowered,
                         std::vector<Candidate>& out) const {
  auto cue_at = [&](std::size_t pos) {
    for (const auto& cue : age_cues_) {
      if (lowered.substr(pos, cue.size()) == cue &&
          !word_char_at(text, pos + cue.size())) {
        return true;
      }
    }
    return false;
  };
  auto cue_ending_at = [&](std::size_t pos) {
    for (const auto& cue : age_cues_) {
      if (cue.size() > pos) continue;
      const std::size_t start = pos - cue.size();
      if (lowered.substr(start, cue.size()) == cue &&
          !word_char_before(text, start)) {
        return true;
      }
    }
    return false;
  };

  std::size_t i = 0;
  while (i < text.size()) {
    if (!is_digit(text[i])) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < text.size() && is_digit(text[j])) ++j;
    const std::size_t len = j - i;
    const bool glued = word_char_before(text, i) || word_char_at(text, j);
    if (len <= 2 && !glued) {
      const int value = std::stoi(std::string(text.substr(i, len)));
      if (value >= 5 && value <= 99) {
        std::size_t after = j;
        while (after < text.size() && (text[after] == ' ' || text[after] == '-')) {
          ++after;
        }
        std::size_t before = i;
        while (before > 0 && (text[before - 1] == ' ' || text[before - 1] == ':' ||
                              text[before - 1] == '-')) {
          --before;
        }
        if (cue_at(after) || (before < i && cue_ending_at(before))) {
          out.push_back({Kind::kAge, i, j});
        }
      }
    }
    i = j;
  }
}

void RuleSet::match_lexicon(std::string_view text, std::string_view lowered,
                            Kind kind, const std::vector<std::string>& lexicon,
                            std::vector<Candidate>& out) const {
  for (const auto& entry : lexicon) {
    for (std::size_t pos = lowered.find(entry); pos != std::string_view::npos;
         pos = lowered.find(entry, pos + 1)) {
      const std::size_t end = pos + entry.size();
      if (!word_char_before(text, pos) && !word_char_at(text, end)) {
        out.push_back({kind, pos, end});
      }
    }
  }
}

void RuleSet::match_self_reference(std::string_view text,
                                   std::string_view lowered,
                                   std::vector<Candidate>& out) const {
  for (const auto& cue : self_cues_) {
    for (std::size_t pos = lowered.find(cue); pos != std::string_view::npos;
         pos = lowered.find(cue, pos + 1)) {
      std::size_t cursor = pos + cue.size();
      if (word_char_before(text, pos) || word_char_at(text, cursor)) continue;
      while (cursor < text.size() && text[cursor] == ' ') ++cursor;
      std::size_t probe = cursor;
      if (probe >= text.size()) continue;
      if (!is_upper_or_devanagari(text::next_codepoint(text, probe))) continue;
      std::size_t end = cursor;
      while (end < text.size()) {
        std::size_t next = end;
        if (!is_letter_codepoint(text::next_codepoint(text, next))) break;
        end = next;
      }
      if (end > cursor && !word_char_at(text, end)) {
        out.push_back({Kind::kName, cursor, end});
      }
    }
  }
}

std::vector<Span> RuleSet::detect(std::string_view input) const {
  if (input.empty()) return {};
  const std::string lowered_storage = ascii_lower(input);
  const std::string_view lowered = lowered_storage;

  std::vector<Candidate> candidates;
  match_patterns(input, Kind::kPhone, phone_, candidates);
  match_patterns(input, Kind::kIdNumber, id_, candidates);
  match_ages(input, lowered, candidates);
  match_lexicon(input, lowered, Kind::kName, names_, candidates);
  match_lexicon(input, lowered, Kind::kPlace, places_, candidates);
  match_self_reference(input, lowered, candidates);

  const auto protected_regions = placeholder_regions(input);
  auto overlaps = [](std::size_t a0, std::size_t a1, std::size_t b0,
                     std::size_t b1) { return a0 < b1 && b0 < a1; };

  // Longest match wins, then leftmost.
  std::stable_sort(candidates.begin(), candidates.end(),
                   [](const Candidate& a, const Candidate& b) {
                     const auto la = a.end - a.start;
                     const auto lb = b.end - b.start;
                     if (la != lb) return la > lb;
                     return a.start < b.start;
                   });
  std::vector<Span> accepted;
  for (const auto& c : candidates) {
    bool blocked = std::any_of(
        protected_regions.begin(), protected_regions.end(),
        [&](const auto& r) { return overlaps(c.start, c.end, r.first, r.second); });
    blocked = blocked || std::any_of(accepted.begin(), accepted.end(),
                                     [&](const Span& s) {
                                       return overlaps(c.start, c.end, s.start, s.end);
                                     });
    if (blocked) continue;
    accepted.push_back(
        {c.kind, c.start, c.end, std::string(input.substr(c.start, c.end - c.start))});
  }
  std::sort(accepted.begin(), accepted.end(),
            [](const Span& a, const Span& b) { return a.start < b.start; });
  return accepted;
}

Sanitizer::Sanitizer() : Sanitizer(RuleConfig::defaults()) {}

Sanitizer::Sanitizer(RuleConfig config)
    : rules_(std::make_shared<const RuleSet>(std::move(config))) {}

namespace {

struct Segment {
  std::size_t original;  // start in the original text
  std::size_t redacted;  // start in the redacted text
  std::size_t length;
};

std::string splice(std::string_view text, const std::vector<Span>& spans,
                   std::vector<Segment>* segments) {
  std::string out;
  std::size_t cursor = 0;
  auto keep = [&](std::size_t from, std::size_t to) {
    if (segments) segments->push_back({from, out.size(), to - from});
    out.append(text.substr(from, to - from));
  };
  for (const auto& span : spans) {
    keep(cursor, span.start);
    out.append(placeholder(span.kind));
    cursor = span.end;
  }
  keep(cursor, text.size());
  return out;
}

// Maps a redacted-text offset that falls inside kept text back to the
// original text.
std::optional<std::size_t> to_original(const std::vector<Segment>& segments, std::size_t pos,
                                       bool is_end) {
  for (const auto& s : segments) {
    const bool inside = is_end ? (pos > s.redacted && pos <= s.redacted + s.length)
                               : (pos >= s.redacted && pos < s.redacted + s.length);
    if (inside) return s.original + (pos - s.redacted);
  }
  return std::nullopt;
}

}  // namespace

// A placeholder can open a word boundary that the original text lacked
// ("सीता9876543210" -> "सीता[PHONE]"), so detection repeats on the redacted
// text until nothing new appears. This keeps redact idempotent.
std::vector<Span> Sanitizer::detect_pii(std::string_view text) const {
  const auto rules = rules_.load();
  std::vector<Span> spans = rules->detect(text);
  for (std::size_t round = 0; round < text.size() + 1; ++round) {
    std::vector<Segment> segments;
    const std::string redacted = splice(text, spans, &segments);
    bool grew = false;
    for (const auto& found : rules->detect(redacted)) {
      auto start = to_original(segments, found.start, false);
      auto end = to_original(segments, found.end, true);
      if (!start || !end || *end <= *start) continue;
      std::erase_if(spans, [&](const Span& s) { return s.start >= *start && s.end <= *end; });
      spans.push_back(Span{found.kind, *start, *end, std::string(text.substr(*start, *end - *start))});
      grew = true;
    }
    if (!grew) break;
    std::sort(spans.begin(), spans.end(),
              [](const Span& a, const Span& b) { return a.start < b.start; });
  }
  return spans;
}

RedactionResult Sanitizer::redact(std::string_view text) const {
  RedactionResult result;
  result.spans = detect_pii(text);
  result.clean = result.spans.empty();
  result.text = splice(text, result.spans, nullptr);
  return result;
}

QARecord Sanitizer::sanitize_record(QARecord record) const {
  if (record.relevant_question.empty()) {
    throw Error(ErrorCode::kPrecondition, "nothing to sanitize");
  }
  record.sanitized_question = redact(record.relevant_question).text;
  return record;
}

void Sanitizer::reload(RuleConfig config) {
  rules_.store(std::make_shared<const RuleSet>(std::move(config)));
}

}  // namespace safeqa::pii
