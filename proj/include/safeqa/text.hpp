#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

namespace safeqa::text {

/// Ordered normalized terms. Tokens never contain whitespace.
struct TokenStream {
  std::vector<std::string> tokens;

  bool empty() const { return tokens.empty(); }
  std::size_t size() const { return tokens.size(); }
  bool operator==(const TokenStream&) const = default;
};

using Stopwords = std::unordered_set<std::string>;

bool is_valid_utf8(std::string_view text);

std::string nfc(std::string_view text);

/// Word characters: Unicode alphanumerics plus the whole Devanagari block
/// (U+0900..U+097F), so vowel signs and viramas stay inside tokens.
bool is_word_codepoint(std::uint32_t cp);

/// Decodes the codepoint starting at `pos`, advancing `pos`. Invalid bytes
/// decode as U+FFFD and advance by one.
std::uint32_t next_codepoint(std::string_view text, std::size_t& pos);

/// Offset of the codepoint that ends right before `pos`.
std::size_t prev_codepoint_start(std::string_view text, std::size_t pos);

/// NFC, ASCII lowercase, split on non-word characters, drop stopwords.
/// Function words dropped by the retrieval and grounding defaults.
Stopwords default_stopwords();

TokenStream tokenize(std::string_view text, const Stopwords& stopwords = {});

}  // namespace safeqa::text
