#pragma once

#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

namespace planexec::text {

/// Collapse runs of ASCII whitespace to single spaces and trim the ends.
std::string collapse_ws(std::string_view s);

/// Lowercase an ASCII string (multibyte UTF-8 sequences pass through).
std::string to_lower(std::string_view s);

/// Case-insensitive substring search; returns npos when absent.
std::size_t ifind(std::string_view haystack, std::string_view needle,
                  std::size_t from = 0);

/// Split into lowercased alphanumeric tokens.
std::vector<std::string> tokenize(std::string_view s);

/// Built-in English stop-word list used by the lexical filters.
const std::unordered_set<std::string>& stopwords();

/// Lowercased alphabetic tokens with stop-words removed.
std::vector<std::string> content_words(std::string_view s);

/// Jaccard similarity of two content-word sets. Both empty -> 1.0.
double jaccard(const std::vector<std::string>& a,
               const std::vector<std::string>& b);

bool starts_with(std::string_view s, std::string_view prefix);
bool ends_with(std::string_view s, std::string_view suffix);

}  // namespace planexec::text
