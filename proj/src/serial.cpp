// Single-threaded reference implementations used by tests and benchmarks.

#include <algorithm>
#include <map>

#include "qexp/analyzer.hpp"
#include "qexp/index.hpp"

namespace qexp::serial {

PostingIndex build_index(const Corpus& corpus, const Bm25Params& params)
{
    params.validate();
    if (corpus.empty()) {
        throw IndexError("cannot build an index over an empty corpus");
    }
    std::map<std::string, std::vector<Posting>> inverted;
    std::vector<std::uint32_t> lengths;
    std::vector<std::string> doc_ids;
    for (std::size_t d = 0; d < corpus.doc_count(); ++d) {
        const auto terms = analyze(corpus[d].text);
        lengths.push_back(static_cast<std::uint32_t>(terms.size()));
        doc_ids.push_back(corpus[d].doc_id);
        std::map<std::string, std::uint32_t> tf;
        for (const auto& t : terms) {
            ++tf[t];
        }
        for (const auto& [term, count] : tf) {
            inverted[term].push_back(Posting{static_cast<std::uint32_t>(d), count});
        }
    }
    std::vector<std::string> terms;
    std::vector<std::vector<Posting>> postings;
    for (auto& [term, list] : inverted) {
        terms.push_back(term);
        postings.push_back(std::move(list));
    }
    return PostingIndex(std::move(doc_ids), std::move(lengths), std::move(terms), std::move(postings), params);
}

std::vector<ScoredHit> search_topk(const PostingIndex& index, std::string_view query_text, std::size_t k)
{
    if (k == 0) {
        throw std::invalid_argument("k must be at least 1");
    }
    const auto terms = analyze(query_text);
    std::vector<ScoredHit> hits;
    for (std::size_t d = 0; d < index.doc_count(); ++d) {
        double score = bm25_score(index, terms, d);
        if (score > 0.0) {
            hits.push_back(ScoredHit{index.doc_ids()[d], score, 0});
        }
    }
    rank_hits(hits);
    if (hits.size() > k) {
        hits.resize(k);
    }
    return hits;
}

}  // namespace qexp::serial
