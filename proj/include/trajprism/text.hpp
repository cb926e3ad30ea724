#ifndef TRAJPRISM_TEXT_HPP
#define TRAJPRISM_TEXT_HPP

#include <string>
#include <string_view>
#include <vector>

namespace trajprism {

/// Canonical form used by every name matcher: lowercase, Latin diacritics
/// stripped, runs of whitespace collapsed to one space, trimmed.
std::string normalize_name(std::string_view s);

/// Word tokens of the normalized text. A token is a maximal run of ASCII
/// alphanumerics or non-ASCII code points; everything else separates.
std::vector<std::string> word_tokens(std::string_view s);

std::string trim(std::string_view s);

std::string join(const std::vector<std::string>& parts, std::string_view sep);

bool starts_with_word(std::string_view text, std::string_view word);

/// Replace every occurrence of `from` with `to`.
std::string replace_all(std::string s, std::string_view from, std::string_view to);

/// Index of the first element of `needle` inside `haystack`, or npos.
std::size_t find_token_run(const std::vector<std::string>& haystack,
                           const std::vector<std::string>& needle,
                           std::size_t from = 0);

/// Number of whitespace-separated tokens.
std::size_t count_words(std::string_view s);

} // namespace trajprism

#endif // TRAJPRISM_TEXT_HPP
