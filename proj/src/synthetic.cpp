#include "safeqa/synthetic.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <map>
#include <set>

#include "safeqa/corpus.hpp"
#include "safeqa/errors.hpp"

namespace safeqa::synth {
namespace {

struct Term {
  const char* word;
  const char* synonym;  // nullptr when the term has none
};

// Domain vocabulary. Synonyms are the romanized Hindi or colloquial forms
// callers actually use.
constexpr std::array<Term, 64> kTerms{{
    {"periods", "mahwari"},      {"pregnancy", "garbh"},       {"condom", "nirodh"},
    {"contraception", "bachav"}, {"pill", "goli"},             {"puberty", "kishoravastha"},
    {"masturbation", "hastmaithun"}, {"nightfall", "swapnadosh"}, {"discharge", "safed-pani"},
    {"infection", "sankraman"},  {"hiv", "aids"},              {"consent", "sahmati"},
    {"marriage", "shaadi"},      {"hygiene", "safai"},         {"pad", "napkin"},
    {"cramps", "ainthan"},       {"bleeding", "khoon"},        {"sperm", "veerya"},
    {"ovulation", "andotsarg"},  {"fertility", "urvarata"},    {"abortion", "garbhpat"},
    {"vaccine", "teeka"},        {"breast", "stan"},           {"testicle", "andkosh"},
    {"erection", "tanaav"},      {"hormones", "harmon"},       {"acne", "muhase"},
    {"voice", "awaaz"},          {"hair", "baal"},             {"anxiety", "ghabrahat"},
    {"doctor", "daktar"},        {"clinic", "aspatal"},        {"itching", "khujli"},
    {"burning", "jalan"},        {"urine", "peshab"},          {"smell", "badbu"},
    {"partner", "saathi"},       {"kiss", nullptr},            {"touch", "chhuna"},
    {"weight", "vajan"},         {"height", "lambai"},         {"pain", "dard"},
    {"delay", "deri"},           {"irregular", "aniyamit"},    {"heavy", nullptr},
    {"tampon", nullptr},         {"cup", nullptr},             {"ultrasound", nullptr},
    {"semen", nullptr},          {"penis", "ling"},            {"vagina", "yoni"},
    {"uterus", "bachedani"},     {"ovary", "andashay"},        {"menopause", "rajonivritti"},
    {"hepatitis", "piliya"},     {"syphilis", nullptr},        {"herpes", nullptr},
    {"wart", "massa"},           {"rash", "chakatte"},         {"fever", "bukhar"},
    {"tiredness", "thakaan"},    {"stress", "tanav"},          {"exam", "pariksha"},
    {"friendship", "dosti"},
}};

constexpr std::array<const char*, 24> kOnsets{"b", "ch", "d", "g", "h", "j", "k", "kh",
                                              "l", "m", "n", "p", "ph", "r", "s", "sh",
                                              "t", "th", "v", "y", "z", "bh", "dh", "gh"};
constexpr std::array<const char*, 8> kVowels{"a", "e", "i", "o", "u", "aa", "ee", "oo"};

// Question frames; {0}, {1}, {2} are the group's content terms.
constexpr std::array<const char*, 8> kFrames{
    "kya {0} ke saath {1} aur {2} normal hai",
    "what should i do about {0} {1} and {2}",
    "mujhe {0} {1} {2} ke baare mein batao",
    "is {0} related to {1} or {2}",
    "{0} ke baad {1} aur {2} kyon hota hai",
    "how does {0} affect {1} and {2}",
    "{0} {1} {2} ka kya matlab hai",
    "can {0} cause {1} with {2}",
};

constexpr std::array<const char*, 10> kFillers{
    "please", "sir", "didi", "actually", "ek sawal", "jaldi batao",
    "thoda", "really", "mujhe dar lag raha hai", "kripya",
};

std::string pseudo_word(Rng& rng) {
  std::string w;
  const std::size_t syllables = 2 + rng.below(2);
  for (std::size_t s = 0; s < syllables; ++s) {
    w += kOnsets[rng.below(kOnsets.size())];
    w += kVowels[rng.below(kVowels.size())];
  }
  return w;
}

struct Vocabulary {
  std::vector<std::string> words;
  std::map<std::string, std::string> synonyms;
};

Vocabulary build_vocabulary(std::size_t pseudo_count, Rng& rng) {
  Vocabulary v;
  std::set<std::string> seen;
  // Keep generated words clear of the PII lexicons so records stay clean.
  const auto rules = pii::RuleConfig::defaults();
  for (const auto* list : {&rules.name_lexicon, &rules.gazetteer, &rules.age_cues}) {
    for (const auto& w : *list) seen.insert(ascii_lower(w));
  }
  for (const auto& t : kTerms) {
    v.words.emplace_back(t.word);
    seen.insert(t.word);
    if (t.synonym != nullptr) {
      v.synonyms[t.word] = t.synonym;
      seen.insert(t.synonym);
    }
  }
  while (v.words.size() < kTerms.size() + pseudo_count) {
    std::string w = pseudo_word(rng);
    if (seen.insert(w).second) v.words.push_back(std::move(w));
  }
  return v;
}

std::string fill_frame(std::string_view frame, const std::vector<std::string>& slots) {
  std::string out;
  for (std::size_t i = 0; i < frame.size(); ++i) {
    if (frame[i] == '{' && i + 2 < frame.size() && frame[i + 2] == '}') {
      const std::size_t slot = static_cast<std::size_t>(frame[i + 1] - '0');
      out += slot < slots.size() ? slots[slot] : std::string();
      i += 2;
    } else {
      out += frame[i];
    }
  }
  return normalize_whitespace(out);
}

// Perturbs the group's base question: synonym swaps, a dropped or moved
// term, occasionally a different frame, and filler words.
std::string paraphrase(std::size_t base_frame, const std::vector<std::string>& terms,
                       const Vocabulary& vocab, Rng& rng) {
  std::vector<std::string> slots = terms;
  for (auto& s : slots) {
    auto it = vocab.synonyms.find(s);
    if (it != vocab.synonyms.end() && rng.unit() < 0.35) s = it->second;
  }
  if (rng.unit() < 0.25) slots[rng.below(slots.size())].clear();
  if (rng.unit() < 0.3) std::swap(slots[0], slots[1 + rng.below(slots.size() - 1)]);
  const std::size_t frame = rng.unit() < 0.3 ? rng.below(kFrames.size()) : base_frame;
  std::string q = fill_frame(kFrames[frame], slots);
  if (rng.unit() < 0.4) {
    const std::string filler = kFillers[rng.below(kFillers.size())];
    q = rng.unit() < 0.5 ? filler + " " + q : q + " " + filler;
  }
  return q;
}

QARecord make_record(std::size_t group, std::size_t member, std::string question,
                     const std::string& answer, const std::vector<std::string>& terms) {
  QARecord r;
  char id[64];
  std::snprintf(id, sizeof(id), "syn-%05zu-%zu", group, member);
  r.id = id;
  r.caller_query_transcription = question;
  r.relevant_question = question;
  r.sanitized_question = std::move(question);
  r.answer = answer;
  r.group_id = corpus::group_id_for(answer);
  r.theme = "theme-" + std::to_string(group % 7);
  r.sub_theme = terms.front();
  r.status = RecordStatus::kPublished;
  r.created_at = "2024-01-01T00:00:00Z";
  return r;
}

std::vector<QARecord> generate(std::size_t groups, std::size_t min_members,
                               std::size_t max_members, std::size_t max_records,
                               std::uint64_t seed) {
  Rng rng(seed);
  const Vocabulary vocab = build_vocabulary(std::max<std::size_t>(400, groups), rng);
  std::vector<QARecord> out;
  for (std::size_t g = 0; g < groups && out.size() < max_records; ++g) {
    std::vector<std::string> terms;
    while (terms.size() < 3) {
      const std::string& w = vocab.words[rng.below(vocab.words.size())];
      if (std::find(terms.begin(), terms.end(), w) == terms.end()) terms.push_back(w);
    }
    const std::string answer = "Guide entry " + std::to_string(g) + ": about " + terms[0] +
                               ", " + terms[1] + " and " + terms[2] +
                               ", talk openly with a counsellor or visit the nearest clinic.";
    const std::size_t base_frame = rng.below(kFrames.size());
    const std::size_t members =
        min_members + rng.below(max_members - min_members + 1);
    for (std::size_t m = 0; m < members && out.size() < max_records; ++m) {
      std::string q = m == 0 ? fill_frame(kFrames[base_frame], terms)
                             : paraphrase(base_frame, terms, vocab, rng);
      out.push_back(make_record(g, m, std::move(q), answer, terms));
    }
  }
  return out;
}

}  // namespace

std::vector<QARecord> generate_corpus(const CorpusOptions& options) {
  if (options.min_paraphrases == 0 || options.min_paraphrases > options.max_paraphrases) {
    throw Error(ErrorCode::kInvalidArgument, "bad paraphrase range");
  }
  return generate(options.groups, options.min_paraphrases, options.max_paraphrases,
                  static_cast<std::size_t>(-1), options.seed);
}

std::vector<QARecord> generate_documents(std::size_t count, std::uint64_t seed) {
  return generate(count, 2, 4, count, seed);
}

std::string perturb_question(std::string_view question, Rng& rng) {
  std::vector<std::string> words;
  std::size_t start = 0;
  const std::string q(question);
  while (start < q.size()) {
    std::size_t end = q.find(' ', start);
    if (end == std::string::npos) end = q.size();
    if (end > start) words.push_back(q.substr(start, end - start));
    start = end + 1;
  }
  if (words.size() > 2 && rng.unit() < 0.5) words.erase(words.begin() + rng.below(words.size()));
  if (words.size() > 1 && rng.unit() < 0.5) {
    const std::size_t i = rng.below(words.size() - 1);
    std::swap(words[i], words[i + 1]);
  }
  if (rng.unit() < 0.5) words.emplace_back(kFillers[rng.below(kFillers.size())]);
  std::string out;
  for (const auto& w : words) {
    if (!out.empty()) out += ' ';
    out += w;
  }
  return out;
}

// ---------------------------------------------------------------------------
// PII fixtures

namespace {

// Frames carry exactly one "{}" and no digits, names or places of their own.
const std::map<pii::Kind, std::vector<std::string>>& pii_frames() {
  static const std::map<pii::Kind, std::vector<std::string>> frames{
      {pii::Kind::kPhone,
       {"call me at {} please", "mera number {} hai", "whatsapp {} tonight",
        "{} is my brother's phone", "kya aap {} par baat kar sakte ho",
        "message me on {} about periods", "number: {}"}},
      {pii::Kind::kAge,
       {"I am {} and worried about periods", "meri behen {} hai, kya ye normal hai",
        "my son is {} now", "ladki {} ki hai", "{}, is puberty late?",
        "I turned {} last month"}},
      {pii::Kind::kName,
       {"{} asked me about contraception", "I am asking for my friend {}",
        "please tell {} the answer", "{} ko periods nahi aaye",
        "my cousin {} is pregnant"}},
      {pii::Kind::kPlace,
       {"I live in {}", "{} mein clinic kahan hai", "we moved to {} last year",
        "is there a counsellor near {}", "main {} se hoon"}},
      {pii::Kind::kIdNumber,
       {"my aadhaar is {}", "card number {} lost", "id {} for the clinic form",
        "{} is written on my card"}},
  };
  return frames;
}

std::string digits(Rng& rng, std::size_t n, char first_min = '0') {
  std::string s;
  s += static_cast<char>(first_min + rng.below(static_cast<std::uint64_t>('9' - first_min + 1)));
  for (std::size_t i = 1; i < n; ++i) s += static_cast<char>('0' + rng.below(10));
  return s;
}

struct Surface {
  std::string text;
  std::size_t span_offset = 0;  // offset of the expected span inside text
  std::size_t span_length = 0;
};

Surface make_surface(pii::Kind kind, Rng& rng, const pii::RuleConfig& rules) {
  switch (kind) {
    case pii::Kind::kPhone: {
      const std::string d = digits(rng, 10, '6');
      static const std::array<const char*, 5> prefixes{"", "+91 ", "+91-", "0", "+91"};
      std::string body;
      if (rng.below(2) == 0) {
        body = d;
      } else {
        body = d.substr(0, 5) + " " + d.substr(5);
      }
      std::string s = prefixes[rng.below(prefixes.size())] + body;
      return {s, 0, s.size()};
    }
    case pii::Kind::kAge: {
      const std::string n = std::to_string(5 + rng.below(95));
      switch (rng.below(6)) {
        case 0: return {n + " years old", 0, n.size()};
        case 1: return {n + " saal", 0, n.size()};
        case 2: return {"umar " + n, 5, n.size()};
        case 3: return {"age: " + n, 5, n.size()};
        case 4: return {n + " yrs", 0, n.size()};
        default: return {n + " साल", 0, n.size()};
      }
    }
    case pii::Kind::kName: {
      if (rng.below(2) == 0) {
        const std::string& name = rules.name_lexicon[rng.below(rules.name_lexicon.size())];
        return {name, 0, name.size()};
      }
      std::string name = pseudo_word(rng);
      name[0] = static_cast<char>(name[0] - 'a' + 'A');
      const std::string cue = rng.below(2) == 0 ? "my name is " : "mera naam ";
      return {cue + name, cue.size(), name.size()};
    }
    case pii::Kind::kPlace: {
      const std::string& place = rules.gazetteer[rng.below(rules.gazetteer.size())];
      return {place, 0, place.size()};
    }
    case pii::Kind::kIdNumber: {
      const std::string d = digits(rng, 12, '2');
      std::string s;
      switch (rng.below(3)) {
        case 0: s = d; break;
        case 1: s = d.substr(0, 4) + " " + d.substr(4, 4) + " " + d.substr(8); break;
        default: s = d.substr(0, 4) + "-" + d.substr(4, 4) + "-" + d.substr(8); break;
      }
      return {s, 0, s.size()};
    }
  }
  return {};
}

}  // namespace

std::vector<PiiFixture> generate_pii_fixtures(pii::Kind kind, std::size_t count,
                                              std::uint64_t seed) {
  Rng rng(seed ^ (static_cast<std::uint64_t>(kind) + 1) * 0x9E3779B97F4A7C15ULL);
  const auto rules = pii::RuleConfig::defaults();
  const auto& frames = pii_frames().at(kind);
  std::vector<PiiFixture> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const std::string& frame = frames[i % frames.size()];
    const Surface surface = make_surface(kind, rng, rules);
    const std::size_t hole = frame.find("{}");
    PiiFixture f;
    f.text = frame.substr(0, hole) + surface.text + frame.substr(hole + 2);
    const std::size_t start = hole + surface.span_offset;
    f.spans.push_back({kind, start, start + surface.span_length,
                       f.text.substr(start, surface.span_length)});
    out.push_back(std::move(f));
  }
  return out;
}

}  // namespace safeqa::synth
