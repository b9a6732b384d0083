// OpenMP kernels for index construction and top-k BM25 search. Results are
// bit-identical to the serial reference in serial.cpp: every document's
// score is accumulated by one thread in query-term order.

#include <algorithm>
#include <functional>
#include <map>

#include <omp.h>

#include "qexp/analyzer.hpp"
#include "qexp/index.hpp"

namespace qexp {

namespace {

using TermCounts = std::vector<std::pair<std::string, std::uint32_t>>;

TermCounts count_terms(const std::string& text, std::uint32_t& length)
{
    auto terms = analyze(text);
    length = static_cast<std::uint32_t>(terms.size());
    std::sort(terms.begin(), terms.end());
    TermCounts counts;
    for (auto& t : terms) {
        if (!counts.empty() && counts.back().first == t) {
            ++counts.back().second;
        } else {
            counts.emplace_back(std::move(t), 1);
        }
    }
    return counts;
}

}  // namespace

PostingIndex build_index(const Corpus& corpus, const Bm25Params& params)
{
    params.validate();
    if (corpus.empty()) {
        throw IndexError("cannot build an index over an empty corpus");
    }
    const auto n = static_cast<std::int64_t>(corpus.doc_count());
    std::vector<TermCounts> per_doc(corpus.doc_count());
    std::vector<std::uint32_t> lengths(corpus.doc_count());

#pragma omp parallel for schedule(dynamic, 64)
    for (std::int64_t d = 0; d < n; ++d) {
        const auto i = static_cast<std::size_t>(d);
        per_doc[i] = count_terms(corpus[i].text, lengths[i]);
    }

    // Each thread owns the terms hashing to its shard and walks documents in
    // order, so every posting list comes out sorted by ordinal.
    const int shards = std::max(1, omp_get_max_threads());
    std::vector<std::map<std::string, std::vector<Posting>>> sharded(static_cast<std::size_t>(shards));
#pragma omp parallel for schedule(static, 1) num_threads(shards)
    for (int s = 0; s < shards; ++s) {
        auto& mine = sharded[static_cast<std::size_t>(s)];
        std::hash<std::string> hasher;
        for (std::size_t d = 0; d < per_doc.size(); ++d) {
            for (const auto& [term, tf] : per_doc[d]) {
                if (static_cast<int>(hasher(term) % static_cast<std::size_t>(shards)) == s) {
                    mine[term].push_back(Posting{static_cast<std::uint32_t>(d), tf});
                }
            }
        }
    }

    std::vector<std::pair<std::string, std::vector<Posting>>> merged;
    for (auto& shard : sharded) {
        for (auto& entry : shard) {
            merged.emplace_back(entry.first, std::move(entry.second));
        }
    }
    std::sort(merged.begin(), merged.end(), [](const auto& a, const auto& b) { return a.first < b.first; });

    std::vector<std::string> terms;
    std::vector<std::vector<Posting>> postings;
    terms.reserve(merged.size());
    postings.reserve(merged.size());
    for (auto& [term, list] : merged) {
        terms.push_back(std::move(term));
        postings.push_back(std::move(list));
    }
    std::vector<std::string> doc_ids;
    doc_ids.reserve(corpus.doc_count());
    for (const auto& doc : corpus.docs()) {
        doc_ids.push_back(doc.doc_id);
    }
    return PostingIndex(std::move(doc_ids), std::move(lengths), std::move(terms), std::move(postings), params);
}

std::vector<ScoredHit> search_topk(const PostingIndex& index, std::string_view query_text, std::size_t k)
{
    if (k == 0) {
        throw std::invalid_argument("k must be at least 1");
    }
    const auto query_terms = analyze(query_text);
    const WeightedQuery q = weigh_query(index, query_terms);
    if (q.term_ids.empty()) {
        return {};
    }

    const std::size_t n_docs = index.doc_count();
    const int n_threads = std::max(1, omp_get_max_threads());
    const std::size_t block = (n_docs + static_cast<std::size_t>(n_threads) - 1) / static_cast<std::size_t>(n_threads);
    std::vector<std::vector<ScoredHit>> partial(static_cast<std::size_t>(n_threads));

#pragma omp parallel num_threads(n_threads)
    {
        const auto tid = static_cast<std::size_t>(omp_get_thread_num());
        const std::size_t lo = std::min(n_docs, tid * block);
        const std::size_t hi = std::min(n_docs, lo + block);
        if (lo < hi) {
            std::vector<double> acc(hi - lo, 0.0);
            for (std::size_t i = 0; i < q.term_ids.size(); ++i) {
                auto list = index.postings(q.term_ids[i]);
                auto it = std::lower_bound(list.begin(), list.end(), static_cast<std::uint32_t>(lo),
                                           [](const Posting& p, std::uint32_t d) { return p.doc < d; });
                const double count = static_cast<double>(q.counts[i]);
                for (; it != list.end() && it->doc < hi; ++it) {
                    acc[it->doc - lo] += count * index.term_weight(q.term_ids[i], it->doc, it->tf);
                }
            }
            auto& local = partial[tid];
            for (std::size_t d = lo; d < hi; ++d) {
                if (acc[d - lo] > 0.0) {
                    local.push_back(ScoredHit{index.doc_ids()[d], acc[d - lo], 0});
                }
            }
            select_candidates(local, k);
        }
    }

    std::vector<ScoredHit> hits;
    for (auto& local : partial) {
        std::move(local.begin(), local.end(), std::back_inserter(hits));
    }
    select_candidates(hits, k);
    rank_hits(hits);
    if (hits.size() > k) {
        hits.resize(k);
    }
    return hits;
}

}  // namespace qexp
