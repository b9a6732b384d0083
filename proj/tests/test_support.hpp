#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "qexp/analyzer.hpp"
#include "qexp/corpus.hpp"
#include "qexp/index.hpp"

namespace qexp::testing {

inline std::filesystem::path data_dir()
{
    return QEXP_TEST_DATA_DIR;
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& prefix = "qexp")
    {
        std::random_device rd;
        path_ = std::filesystem::temp_directory_path() / (prefix + "-" + std::to_string(rd()) + std::to_string(rd()));
        std::filesystem::create_directories(path_);
    }
    ~TempDir()
    {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    [[nodiscard]] const std::filesystem::path& path() const { return path_; }
    [[nodiscard]] std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

inline void write_text(const std::filesystem::path& path, const std::string& text)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << text;
}

inline std::string read_text(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

/// Words that survive the analyzer unchanged ("w<n>x" has no suffix rules).
inline std::string vocab_word(std::size_t i)
{
    return "w" + std::to_string(i) + "x";
}

inline Corpus random_corpus(std::mt19937_64& rng, std::size_t max_docs, std::size_t vocab)
{
    std::uniform_int_distribution<std::size_t> n_docs(1, max_docs);
    std::uniform_int_distribution<std::size_t> length(0, 30);
    std::uniform_int_distribution<std::size_t> word(0, vocab - 1);
    std::vector<Document> docs;
    const std::size_t n = n_docs(rng);
    for (std::size_t d = 0; d < n; ++d) {
        std::string text;
        const std::size_t len = length(rng);
        for (std::size_t i = 0; i < len; ++i) {
            // Skewed draw so some terms are frequent and scores tie often.
            std::size_t w = std::min(word(rng), word(rng));
            text += vocab_word(w) + " ";
        }
        docs.push_back(Document{"doc" + std::to_string(1000 + (d * 7919) % 9973), text});
    }
    return Corpus(std::move(docs));
}

inline std::string random_query(std::mt19937_64& rng, std::size_t vocab)
{
    std::uniform_int_distribution<std::size_t> terms(1, 5);
    std::uniform_int_distribution<std::size_t> word(0, vocab + 5);
    std::string q;
    const std::size_t n = terms(rng);
    for (std::size_t i = 0; i < n; ++i) {
        q += vocab_word(word(rng)) + " ";
    }
    return q;
}

struct OracleHit {
    std::string doc_id;
    double score;
};

/// Exhaustive BM25 straight from the analyzed corpus text: no index, no
/// posting lists, long double accumulation. Ties (relative 1e-12 from the
/// first score of a run of near-equal scores) are ordered by doc id.
inline std::vector<OracleHit> brute_force_bm25(const Corpus& corpus,
                                               const std::string& query,
                                               double k1,
                                               double b,
                                               std::size_t k)
{
    using real = long double;
    std::vector<std::map<std::string, int>> tf(corpus.doc_count());
    std::vector<real> len(corpus.doc_count());
    std::map<std::string, int> df;
    real total = 0;
    for (std::size_t d = 0; d < corpus.doc_count(); ++d) {
        for (const auto& t : analyze(corpus[d].text)) {
            ++tf[d][t];
        }
        len[d] = 0;
        for (const auto& [t, c] : tf[d]) {
            len[d] += c;
            ++df[t];
        }
        total += len[d];
    }
    const real n = static_cast<real>(corpus.doc_count());
    const real avg = total / n;
    const auto q = analyze(query);
    std::vector<std::pair<std::string, real>> scored;
    for (std::size_t d = 0; d < corpus.doc_count(); ++d) {
        real score = 0;
        for (const auto& t : q) {
            auto it = tf[d].find(t);
            if (it == tf[d].end()) {
                continue;
            }
            real f = it->second;
            real idf = std::log(1.0L + (n - df[t] + 0.5L) / (df[t] + 0.5L));
            score += idf * f * (k1 + 1) / (f + k1 * (1 - b + b * len[d] / avg));
        }
        if (score > 0) {
            scored.emplace_back(corpus[d].doc_id, score);
        }
    }
    std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& c) { return a.second > c.second; });
    std::vector<OracleHit> hits;
    std::size_t i = 0;
    while (i < scored.size()) {
        std::size_t j = i;
        while (j < scored.size() && scored[j].second >= scored[i].second * (1 - 1e-12L)) {
            ++j;
        }
        std::vector<std::pair<std::string, real>> group(scored.begin() + i, scored.begin() + j);
        std::sort(group.begin(), group.end());
        for (const auto& [id, score] : group) {
            hits.push_back({id, static_cast<double>(score)});
        }
        i = j;
    }
    if (hits.size() > k) {
        hits.resize(k);
    }
    return hits;
}

inline bool relatively_close(double a, double b, double rel)
{
    return std::abs(a - b) <= rel * std::max({std::abs(a), std::abs(b), 1e-300});
}

}  // namespace qexp::testing
