#include "qexp/analyzer.hpp"

#include <algorithm>
#include <array>

namespace qexp {

namespace {

// Lucene EnglishAnalyzer.ENGLISH_STOP_WORDS_SET, kept sorted for binary search.
constexpr std::array<std::string_view, 33> kStopwords = {
    "a",    "an",   "and",   "are",  "as",    "at",   "be",   "but",   "by",
    "for",  "if",   "in",    "into", "is",    "it",   "no",   "not",   "of",
    "on",   "or",   "such",  "that", "the",   "their", "then", "there", "these",
    "they", "this", "to",    "was",  "will",  "with",
};
static_assert(std::is_sorted(kStopwords.begin(), kStopwords.end()));

bool is_token_byte(unsigned char c)
{
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c >= 0x80;
}

char lower(unsigned char c)
{
    return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : static_cast<char>(c);
}

}  // namespace

bool is_stopword(std::string_view term)
{
    return std::binary_search(kStopwords.begin(), kStopwords.end(), term);
}

std::vector<std::string> analyze(std::string_view text)
{
    std::vector<std::string> terms;
    std::string token;
    std::size_t i = 0;
    const std::size_t n = text.size();
    while (i < n) {
        while (i < n && !is_token_byte(static_cast<unsigned char>(text[i]))) {
            ++i;
        }
        token.clear();
        while (i < n && is_token_byte(static_cast<unsigned char>(text[i]))) {
            token.push_back(lower(static_cast<unsigned char>(text[i])));
            ++i;
        }
        if (token.empty()) {
            continue;
        }
        // possessive: "gray's" -> "gray"
        if (i + 1 < n && text[i] == '\'' && (text[i + 1] == 's' || text[i + 1] == 'S')
            && (i + 2 == n || !is_token_byte(static_cast<unsigned char>(text[i + 2])))) {
            i += 2;
        }
        if (is_stopword(token)) {
            continue;
        }
        terms.push_back(porter_stem(token));
    }
    return terms;
}

}  // namespace qexp
