#include "qexp/index.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

namespace qexp {

namespace {

constexpr std::string_view kIndexMagic = "qexp-index";
constexpr int kIndexVersion = 1;

[[noreturn]] void bad_index(const std::filesystem::path& path, std::size_t line_no, std::string_view why)
{
    std::ostringstream os;
    os << path.string() << ":" << line_no << ": invalid index file: " << why;
    throw IndexError(os.str());
}

}  // namespace

void Bm25Params::validate() const
{
    if (!(k1 >= 0.0) || !std::isfinite(k1)) {
        throw std::invalid_argument("bm25 k1 must be a non-negative number");
    }
    if (!(b >= 0.0 && b <= 1.0)) {
        throw std::invalid_argument("bm25 b must lie in [0, 1]");
    }
}

PostingIndex::PostingIndex(std::vector<std::string> doc_ids,
                           std::vector<std::uint32_t> doc_lengths,
                           std::vector<std::string> terms,
                           std::vector<std::vector<Posting>> postings,
                           Bm25Params params)
    : doc_ids_(std::move(doc_ids)),
      doc_lengths_(std::move(doc_lengths)),
      terms_(std::move(terms)),
      postings_(std::move(postings)),
      params_(params)
{
    params_.validate();
    if (doc_ids_.empty()) {
        throw IndexError("index must contain at least one document");
    }
    if (doc_lengths_.size() != doc_ids_.size()) {
        throw IndexError("doc length table does not match doc id table");
    }
    if (terms_.size() != postings_.size()) {
        throw IndexError("term table does not match posting lists");
    }
    term_ids_.reserve(terms_.size());
    for (std::size_t t = 0; t < terms_.size(); ++t) {
        if (t > 0 && !(terms_[t - 1] < terms_[t])) {
            throw IndexError("terms must be unique and sorted: " + terms_[t]);
        }
        term_ids_.emplace(terms_[t], static_cast<std::uint32_t>(t));
        const auto& list = postings_[t];
        if (list.empty()) {
            throw IndexError("empty posting list for term " + terms_[t]);
        }
        for (std::size_t i = 0; i < list.size(); ++i) {
            const Posting& p = list[i];
            if (p.doc >= doc_ids_.size()) {
                throw IndexError("posting references unknown document for term " + terms_[t]);
            }
            if (i > 0 && list[i - 1].doc >= p.doc) {
                throw IndexError("postings not strictly ascending for term " + terms_[t]);
            }
            if (p.tf < 1 || p.tf > doc_lengths_[p.doc]) {
                throw IndexError("term frequency out of range for term " + terms_[t]);
            }
        }
    }
    double total = std::accumulate(doc_lengths_.begin(), doc_lengths_.end(), 0.0);
    avg_doc_length_ = total / static_cast<double>(doc_ids_.size());
}

std::optional<std::uint32_t> PostingIndex::term_id(std::string_view term) const
{
    auto it = term_ids_.find(std::string(term));
    if (it == term_ids_.end()) {
        return std::nullopt;
    }
    return it->second;
}

double PostingIndex::idf(std::uint32_t term_id) const
{
    const double n = static_cast<double>(doc_count());
    const double df = static_cast<double>(doc_frequency(term_id));
    return std::log(1.0 + (n - df + 0.5) / (df + 0.5));
}

double PostingIndex::term_weight(std::uint32_t term_id, std::uint32_t doc, std::uint32_t tf) const
{
    const double f = static_cast<double>(tf);
    const double norm = 1.0 - params_.b + params_.b * static_cast<double>(doc_lengths_[doc]) / avg_doc_length_;
    return idf(term_id) * (f * (params_.k1 + 1.0)) / (f + params_.k1 * norm);
}

bool operator==(const PostingIndex& a, const PostingIndex& b)
{
    return a.doc_ids_ == b.doc_ids_ && a.doc_lengths_ == b.doc_lengths_ && a.terms_ == b.terms_
        && a.postings_ == b.postings_ && a.params_.k1 == b.params_.k1 && a.params_.b == b.params_.b;
}

void PostingIndex::save(const std::filesystem::path& path) const
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw IndexError("cannot write index file: " + path.string());
    }
    out.precision(17);
    out << kIndexMagic << '\t' << kIndexVersion << '\n';
    out << "params\t" << params_.k1 << '\t' << params_.b << '\n';
    out << "docs\t" << doc_ids_.size() << '\n';
    for (std::size_t d = 0; d < doc_ids_.size(); ++d) {
        out << nlohmann::json(doc_ids_[d]).dump() << '\t' << doc_lengths_[d] << '\n';
    }
    out << "terms\t" << terms_.size() << '\n';
    for (std::size_t t = 0; t < terms_.size(); ++t) {
        out << terms_[t] << '\t' << postings_[t].size() << '\t';
        bool first = true;
        for (const Posting& p : postings_[t]) {
            if (!first) {
                out << ' ';
            }
            first = false;
            out << p.doc << ':' << p.tf;
        }
        out << '\n';
    }
    out << "end\n";
    if (!out) {
        throw IndexError("failed writing index file: " + path.string());
    }
}

PostingIndex PostingIndex::load(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IndexError("cannot open index file: " + path.string());
    }
    std::string line;
    std::size_t line_no = 0;
    auto next_line = [&]() -> std::string& {
        if (!std::getline(in, line)) {
            bad_index(path, line_no + 1, "unexpected end of file");
        }
        ++line_no;
        return line;
    };
    auto header_count = [&](std::string_view keyword) -> std::size_t {
        std::istringstream fields(next_line());
        std::string key;
        std::size_t count = 0;
        if (!(fields >> key >> count) || key != keyword) {
            bad_index(path, line_no, "expected \"" + std::string(keyword) + "\" header");
        }
        return count;
    };

    {
        std::istringstream fields(next_line());
        std::string magic;
        int version = 0;
        if (!(fields >> magic >> version) || magic != kIndexMagic) {
            bad_index(path, line_no, "missing qexp-index header");
        }
        if (version != kIndexVersion) {
            bad_index(path, line_no, "unsupported index version " + std::to_string(version));
        }
    }
    Bm25Params params;
    {
        std::istringstream fields(next_line());
        std::string key;
        if (!(fields >> key >> params.k1 >> params.b) || key != "params") {
            bad_index(path, line_no, "expected params line");
        }
    }

    const std::size_t n_docs = header_count("docs");
    std::vector<std::string> doc_ids;
    std::vector<std::uint32_t> doc_lengths;
    doc_ids.reserve(n_docs);
    doc_lengths.reserve(n_docs);
    for (std::size_t d = 0; d < n_docs; ++d) {
        const std::string& l = next_line();
        auto tab = l.rfind('\t');
        if (tab == std::string::npos) {
            bad_index(path, line_no, "expected doc id and length");
        }
        try {
            doc_ids.push_back(nlohmann::json::parse(l.substr(0, tab)).get<std::string>());
            doc_lengths.push_back(static_cast<std::uint32_t>(std::stoul(l.substr(tab + 1))));
        } catch (const std::exception& e) {
            bad_index(path, line_no, e.what());
        }
    }

    const std::size_t n_terms = header_count("terms");
    std::vector<std::string> terms;
    std::vector<std::vector<Posting>> postings;
    terms.reserve(n_terms);
    postings.reserve(n_terms);
    for (std::size_t t = 0; t < n_terms; ++t) {
        std::istringstream fields(next_line());
        std::string term;
        std::size_t df = 0;
        if (!(fields >> term >> df)) {
            bad_index(path, line_no, "expected term and document frequency");
        }
        std::vector<Posting> list;
        list.reserve(df);
        std::string entry;
        while (fields >> entry) {
            auto colon = entry.find(':');
            if (colon == std::string::npos) {
                bad_index(path, line_no, "bad posting \"" + entry + "\"");
            }
            try {
                list.push_back(Posting{static_cast<std::uint32_t>(std::stoul(entry.substr(0, colon))),
                                       static_cast<std::uint32_t>(std::stoul(entry.substr(colon + 1)))});
            } catch (const std::exception&) {
                bad_index(path, line_no, "bad posting \"" + entry + "\"");
            }
        }
        if (list.size() != df) {
            bad_index(path, line_no, "posting count does not match document frequency");
        }
        terms.push_back(std::move(term));
        postings.push_back(std::move(list));
    }
    if (next_line() != "end") {
        bad_index(path, line_no, "expected end marker");
    }
    return PostingIndex(std::move(doc_ids), std::move(doc_lengths), std::move(terms), std::move(postings), params);
}

WeightedQuery weigh_query(const PostingIndex& index, std::span<const std::string> query_terms)
{
    WeightedQuery q;
    for (const auto& term : query_terms) {
        auto id = index.term_id(term);
        if (!id) {
            continue;
        }
        auto it = std::find(q.term_ids.begin(), q.term_ids.end(), *id);
        if (it == q.term_ids.end()) {
            q.term_ids.push_back(*id);
            q.counts.push_back(1);
        } else {
            ++q.counts[static_cast<std::size_t>(it - q.term_ids.begin())];
        }
    }
    return q;
}

double bm25_score(const PostingIndex& index, std::span<const std::string> query_terms, std::size_t doc_ordinal)
{
    if (doc_ordinal >= index.doc_count()) {
        throw std::out_of_range("document ordinal out of range");
    }
    const auto doc = static_cast<std::uint32_t>(doc_ordinal);
    const WeightedQuery q = weigh_query(index, query_terms);
    double score = 0.0;
    for (std::size_t i = 0; i < q.term_ids.size(); ++i) {
        auto list = index.postings(q.term_ids[i]);
        auto it = std::lower_bound(list.begin(), list.end(), doc,
                                   [](const Posting& p, std::uint32_t d) { return p.doc < d; });
        if (it != list.end() && it->doc == doc) {
            score += static_cast<double>(q.counts[i]) * index.term_weight(q.term_ids[i], doc, it->tf);
        }
    }
    return score;
}

namespace {

bool score_before(const ScoredHit& a, const ScoredHit& b)
{
    if (a.score != b.score) {
        return a.score > b.score;
    }
    return a.doc_id < b.doc_id;
}

double tie_floor(double score)
{
    return score - std::abs(score) * kTieTolerance;
}

}  // namespace

void rank_hits(std::vector<ScoredHit>& hits)
{
    std::sort(hits.begin(), hits.end(), score_before);
    for (auto group = hits.begin(); group != hits.end();) {
        const double floor = tie_floor(group->score);
        auto end = std::find_if(group, hits.end(), [floor](const ScoredHit& h) { return h.score < floor; });
        std::sort(group, end, [](const ScoredHit& a, const ScoredHit& b) { return a.doc_id < b.doc_id; });
        group = end;
    }
    for (std::size_t i = 0; i < hits.size(); ++i) {
        hits[i].rank = i + 1;
    }
}

void select_candidates(std::vector<ScoredHit>& hits, std::size_t k)
{
    if (k == 0 || hits.size() <= k) {
        return;
    }
    const auto kth = hits.begin() + static_cast<std::ptrdiff_t>(k - 1);
    std::nth_element(hits.begin(), kth, hits.end(), score_before);
    // Any tie group reaching the top k has every member at or above this.
    const double floor = tie_floor(kth->score);
    auto keep = std::partition(kth + 1, hits.end(), [floor](const ScoredHit& h) { return h.score >= floor; });
    hits.erase(keep, hits.end());
}

}  // namespace qexp
