#include "pgpt/text.hpp"

#include <cctype>

namespace pgpt::text {

namespace {

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }

// Non-ASCII bytes are treated as word characters so accented words survive.
bool is_word_byte(char c) {
  const auto u = static_cast<unsigned char>(c);
  return u >= 0x80 || std::isalnum(u) != 0;
}

constexpr std::string_view kCurlyApostrophe = "\xE2\x80\x99";

}  // namespace

std::string to_lower_ascii(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::string_view trim(std::string_view s) noexcept {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && is_space(s[b])) ++b;
  while (e > b && is_space(s[e - 1])) --e;
  return s.substr(b, e - b);
}

std::vector<std::string> tokenize_words(std::string_view s) {
  std::vector<std::string> tokens;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && is_space(s[i])) ++i;
    if (i >= s.size()) break;
    std::size_t end = i;
    while (end < s.size() && !is_space(s[end])) ++end;

    // Fold U+2019 into ASCII apostrophe before filtering.
    std::string raw;
    for (std::size_t k = i; k < end;) {
      if (s.substr(k, kCurlyApostrophe.size()) == kCurlyApostrophe) {
        raw.push_back('\'');
        k += kCurlyApostrophe.size();
      } else {
        raw.push_back(s[k++]);
      }
    }

    std::string word;
    for (std::size_t k = 0; k < raw.size(); ++k) {
      const char c = raw[k];
      if (is_word_byte(c)) {
        word.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
      } else if (c == '\'' && !word.empty() && k + 1 < raw.size() && is_word_byte(raw[k + 1])) {
        word.push_back('\'');
      }
    }
    if (!word.empty()) tokens.push_back(std::move(word));
    i = end;
  }
  return tokens;
}

std::size_t find_phrase(const std::vector<std::string>& tokens, const std::vector<std::string>& phrase,
                        std::size_t from) noexcept {
  if (phrase.empty() || tokens.size() < phrase.size()) return std::string::npos;
  for (std::size_t i = from; i + phrase.size() <= tokens.size(); ++i) {
    bool hit = true;
    for (std::size_t k = 0; k < phrase.size(); ++k) {
      if (tokens[i + k] != phrase[k]) {
        hit = false;
        break;
      }
    }
    if (hit) return i;
  }
  return std::string::npos;
}

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out.append(sep);
    out.append(parts[i]);
  }
  return out;
}

}  // namespace pgpt::text
