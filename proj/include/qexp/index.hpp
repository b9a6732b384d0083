#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "qexp/corpus.hpp"

namespace qexp {

class IndexError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Okapi BM25 free parameters. Defaults are the Anserini/Pyserini ones.
struct Bm25Params {
    double k1 = 0.9;
    double b = 0.4;

    void validate() const;
};

struct Posting {
    std::uint32_t doc;
    std::uint32_t tf;

    friend bool operator==(const Posting&, const Posting&) = default;
};

struct ScoredHit {
    std::string doc_id;
    double score = 0.0;
    std::size_t rank = 0;  // 1-based
};

/// Immutable inverted index with per-document lengths.
///
/// Term ids are assigned in lexicographic term order, so two indexes built
/// from the same corpus are identical regardless of how they were built.
class PostingIndex {
public:
    PostingIndex() = default;
    /// Validates every structural invariant; throws IndexError otherwise.
    PostingIndex(std::vector<std::string> doc_ids,
                 std::vector<std::uint32_t> doc_lengths,
                 std::vector<std::string> terms,
                 std::vector<std::vector<Posting>> postings,
                 Bm25Params params);

    [[nodiscard]] std::size_t doc_count() const noexcept { return doc_ids_.size(); }
    [[nodiscard]] std::size_t term_count() const noexcept { return terms_.size(); }
    [[nodiscard]] double avg_doc_length() const noexcept { return avg_doc_length_; }
    [[nodiscard]] const Bm25Params& params() const noexcept { return params_; }
    [[nodiscard]] const std::vector<std::string>& doc_ids() const noexcept { return doc_ids_; }
    [[nodiscard]] const std::vector<std::uint32_t>& doc_lengths() const noexcept { return doc_lengths_; }
    [[nodiscard]] const std::vector<std::string>& terms() const noexcept { return terms_; }

    [[nodiscard]] std::optional<std::uint32_t> term_id(std::string_view term) const;
    [[nodiscard]] std::span<const Posting> postings(std::uint32_t term_id) const { return postings_.at(term_id); }
    [[nodiscard]] std::size_t doc_frequency(std::uint32_t term_id) const { return postings_.at(term_id).size(); }

    /// ln(1 + (N - df + 0.5) / (df + 0.5))
    [[nodiscard]] double idf(std::uint32_t term_id) const;
    /// Single-occurrence BM25 contribution of `term_id` to document `doc`
    /// that contains it `tf` times.
    [[nodiscard]] double term_weight(std::uint32_t term_id, std::uint32_t doc, std::uint32_t tf) const;

    void save(const std::filesystem::path& path) const;
    static PostingIndex load(const std::filesystem::path& path);

    friend bool operator==(const PostingIndex& a, const PostingIndex& b);

private:
    std::vector<std::string> doc_ids_;
    std::vector<std::uint32_t> doc_lengths_;
    std::vector<std::string> terms_;
    std::vector<std::vector<Posting>> postings_;
    std::unordered_map<std::string, std::uint32_t> term_ids_;
    double avg_doc_length_ = 0.0;
    Bm25Params params_;
};

/// A query reduced to distinct known terms with their multiplicity, in
/// first-occurrence order. Unknown terms are dropped (they score 0).
struct WeightedQuery {
    std::vector<std::uint32_t> term_ids;
    std::vector<std::uint32_t> counts;
};

WeightedQuery weigh_query(const PostingIndex& index, std::span<const std::string> query_terms);

/// Builds the index, analyzing documents in parallel. Throws IndexError on
/// an empty corpus.
PostingIndex build_index(const Corpus& corpus, const Bm25Params& params = {});

/// BM25 score of one document for an analyzed query. Duplicate query terms
/// count with multiplicity.
double bm25_score(const PostingIndex& index, std::span<const std::string> query_terms, std::size_t doc_ordinal);

/// Scores this close (relative) rank as ties. Mathematically equal scores
/// reached through different arithmetic can differ in the last bits.
inline constexpr double kTieTolerance = 1e-12;

/// Top-k documents with score > 0, ordered by score descending, ties by
/// external doc id ascending. Scoring is parallel over document ranges.
std::vector<ScoredHit> search_topk(const PostingIndex& index, std::string_view query_text, std::size_t k);

/// Orders hits by score descending and assigns ranks. Walking down the
/// sorted list, each hit within kTieTolerance of the first score of the
/// current group joins it; groups are ordered by doc id ascending.
void rank_hits(std::vector<ScoredHit>& hits);

/// Drops hits that cannot reach the top k under rank_hits, keeping at
/// least k (all near-ties of the k-th score survive). Does not sort.
void select_candidates(std::vector<ScoredHit>& hits, std::size_t k);

namespace serial {

/// Single-threaded reference build.
PostingIndex build_index(const Corpus& corpus, const Bm25Params& params = {});

/// Exhaustive reference search: bm25_score on every document, then sort.
std::vector<ScoredHit> search_topk(const PostingIndex& index, std::string_view query_text, std::size_t k);

}  // namespace serial

}  // namespace qexp
