#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace qexp {

/// Porter stemmer, following Martin Porter's reference C implementation
/// (including its "bli" -> "ble" and "logi" -> "log" departures).
/// Expects a lowercase word; words of length <= 2 are returned unchanged.
std::string porter_stem(std::string_view word);

/// Lucene's default English stopword set.
bool is_stopword(std::string_view term);

/// Lowercase, split on non-alphanumeric boundaries (bytes >= 0x80 are kept
/// inside tokens), drop English possessive "'s", remove stopwords, stem.
std::vector<std::string> analyze(std::string_view text);

}  // namespace qexp
