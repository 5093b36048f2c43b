#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace pgpt::text {

std::string to_lower_ascii(std::string_view s);
std::string_view trim(std::string_view s) noexcept;

// Word tokenization shared by WER scoring and keyword matching:
// lowercase, drop punctuation except apostrophes between word characters,
// split on whitespace. A typographic apostrophe (U+2019) counts as '.
std::vector<std::string> tokenize_words(std::string_view s);

// Human-readable statement of the tokenization policy, written into report
// headers.
inline constexpr std::string_view kNormalizationPolicy =
    "lowercase; strip punctuation except intra-word apostrophes; collapse whitespace";

// Index of the first occurrence of `phrase` as a contiguous token run in
// `tokens` at or after `from`, or npos.
std::size_t find_phrase(const std::vector<std::string>& tokens, const std::vector<std::string>& phrase,
                        std::size_t from = 0) noexcept;

std::string join(const std::vector<std::string>& parts, std::string_view sep);

}  // namespace pgpt::text
