#include "safeqa/text.hpp"

#include <unicode/normalizer2.h>
#include <unicode/uchar.h>
#include <unicode/unistr.h>
#include <unicode/utf8.h>

#include "safeqa/errors.hpp"

namespace safeqa::text {

bool is_valid_utf8(std::string_view text) {
  std::int32_t i = 0;
  const auto length = static_cast<std::int32_t>(text.size());
  const auto* bytes = reinterpret_cast<const std::uint8_t*>(text.data());
  while (i < length) {
    UChar32 c;
    U8_NEXT(bytes, i, length, c);
    if (c < 0) return false;
  }
  return true;
}

std::string nfc(std::string_view text) {
  UErrorCode status = U_ZERO_ERROR;
  const icu::Normalizer2* normalizer = icu::Normalizer2::getNFCInstance(status);
  if (U_FAILURE(status)) {
    throw Error(ErrorCode::kNotInitialized, "ICU NFC normalizer unavailable");
  }
  icu::UnicodeString source = icu::UnicodeString::fromUTF8(
      icu::StringPiece(text.data(), static_cast<std::int32_t>(text.size())));
  if (normalizer->isNormalized(source, status) && U_SUCCESS(status)) {
    return std::string(text);
  }
  status = U_ZERO_ERROR;
  icu::UnicodeString normalized = normalizer->normalize(source, status);
  if (U_FAILURE(status)) return std::string(text);
  std::string out;
  normalized.toUTF8String(out);
  return out;
}

bool is_word_codepoint(std::uint32_t cp) {
  if (cp < 0x80) {
    return (cp >= '0' && cp <= '9') || (cp >= 'a' && cp <= 'z') ||
           (cp >= 'A' && cp <= 'Z');
  }
  if (cp >= 0x0900 && cp <= 0x097F) return true;
  return u_isalnum(static_cast<UChar32>(cp)) != 0;
}

std::uint32_t next_codepoint(std::string_view text, std::size_t& pos) {
  auto i = static_cast<std::int32_t>(pos);
  const auto length = static_cast<std::int32_t>(text.size());
  const auto* bytes = reinterpret_cast<const std::uint8_t*>(text.data());
  UChar32 c;
  U8_NEXT(bytes, i, length, c);
  pos = static_cast<std::size_t>(i);
  return c < 0 ? 0xFFFD : static_cast<std::uint32_t>(c);
}

std::size_t prev_codepoint_start(std::string_view text, std::size_t pos) {
  if (pos == 0) return 0;
  std::size_t i = pos - 1;
  while (i > 0 && (static_cast<unsigned char>(text[i]) & 0xC0) == 0x80 &&
         pos - i < 4) {
    --i;
  }
  return i;
}

TokenStream tokenize(std::string_view input, const Stopwords& stopwords) {
  const std::string normalized = nfc(input);
  const std::string_view text = normalized;
  TokenStream out;
  std::string current;
  auto flush = [&] {
    if (!current.empty() && !stopwords.contains(current)) {
      out.tokens.push_back(current);
    }
    current.clear();
  };
  std::size_t pos = 0;
  while (pos < text.size()) {
    const std::size_t start = pos;
    const std::uint32_t cp = next_codepoint(text, pos);
    if (!is_word_codepoint(cp)) {
      flush();
      continue;
    }
    if (cp >= 'A' && cp <= 'Z') {
      current.push_back(static_cast<char>(cp - 'A' + 'a'));
    } else {
      current.append(text.substr(start, pos - start));
    }
  }
  flush();
  return out;
}

Stopwords default_stopwords() {
  // English and romanized Hindi function words.
  return {"a",    "an",   "the",  "is",   "are",  "was",  "were", "be",   "been", "to",
          "of",   "in",   "on",   "at",   "for",  "and",  "or",   "but",  "it",   "this",
          "that", "with", "as",   "by",   "from", "can",  "do",   "does", "you",  "your",
          "i",    "me",   "my",   "we",   "they", "he",   "she",  "if",   "so",   "not",
          "no",   "yes",  "should", "will", "would", "could", "may", "what", "how", "why",
          "when", "which", "who", "hai",  "ka",   "ki",   "ke",   "ko",   "se",   "me",
          "mein", "aur",  "ya",   "kya",  "to",   "bhi",  "nahi", "na",   "ho",   "hota",
          "hoti", "hote", "kaise", "kyun", "par"};
}

}  // namespace safeqa::text
