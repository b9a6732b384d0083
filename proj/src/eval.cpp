#include "qexp/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "qexp/corpus.hpp"

namespace qexp {

namespace {

std::string slurp(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw EvalFormatError("cannot open " + path.string());
    }
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

template <typename Fn>
void for_each_line(std::string_view text, Fn&& fn)
{
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos < text.size()) {
        auto end = text.find('\n', pos);
        if (end == std::string_view::npos) {
            end = text.size();
        }
        ++line_no;
        auto fields = split_whitespace(text.substr(pos, end - pos));
        if (!fields.empty()) {
            fn(line_no, fields);
        }
        pos = end + 1;
    }
}

[[noreturn]] void bad_line(std::string_view source, std::size_t line_no, std::string_view why)
{
    std::ostringstream os;
    os << source << ":" << line_no << ": " << why;
    throw EvalFormatError(os.str());
}

double gain_of(int grade, Gain gain)
{
    if (grade <= 0) {
        return 0.0;
    }
    return gain == Gain::exponential ? std::exp2(static_cast<double>(grade)) - 1.0 : static_cast<double>(grade);
}

std::vector<std::string> trec_order(const std::vector<RunEntry>& entries)
{
    std::vector<const RunEntry*> sorted;
    sorted.reserve(entries.size());
    for (const auto& e : entries) {
        sorted.push_back(&e);
    }
    std::stable_sort(sorted.begin(), sorted.end(), [](const RunEntry* a, const RunEntry* b) {
        if (a->score != b->score) {
            return a->score > b->score;
        }
        return a->doc_id > b->doc_id;
    });
    std::vector<std::string> ranking;
    ranking.reserve(sorted.size());
    for (const auto* e : sorted) {
        ranking.push_back(e->doc_id);
    }
    return ranking;
}

}  // namespace

int Qrels::grade(const std::string& qid, const std::string& doc_id) const
{
    auto q = judgments.find(qid);
    if (q == judgments.end()) {
        return 0;
    }
    auto d = q->second.find(doc_id);
    return d == q->second.end() ? 0 : d->second;
}

Qrels parse_qrels(std::string_view text, std::string_view source)
{
    Qrels qrels;
    for_each_line(text, [&](std::size_t line_no, const std::vector<std::string_view>& f) {
        if (f.size() != 4) {
            bad_line(source, line_no, "expected \"qid 0 docid grade\"");
        }
        int grade = 0;
        try {
            std::size_t used = 0;
            grade = std::stoi(std::string(f[3]), &used);
            if (used != f[3].size()) {
                throw std::invalid_argument("trailing characters");
            }
        } catch (const std::exception&) {
            bad_line(source, line_no, "grade is not an integer");
        }
        if (grade < 0) {
            bad_line(source, line_no, "negative grade");
        }
        qrels.judgments[std::string(f[0])][std::string(f[2])] = grade;
    });
    return qrels;
}

Qrels read_qrels(const std::filesystem::path& path)
{
    return parse_qrels(slurp(path), path.string());
}

RunFile parse_run(std::string_view text, std::string_view source)
{
    RunFile run;
    std::map<std::string, std::set<std::string>> seen;
    for_each_line(text, [&](std::size_t line_no, const std::vector<std::string_view>& f) {
        if (f.size() != 6) {
            bad_line(source, line_no, "expected \"qid Q0 docid rank score tag\"");
        }
        double score = 0.0;
        try {
            std::size_t used = 0;
            score = std::stod(std::string(f[4]), &used);
            if (used != f[4].size()) {
                throw std::invalid_argument("trailing characters");
            }
            (void)std::stol(std::string(f[3]));
        } catch (const std::exception&) {
            bad_line(source, line_no, "rank or score is not numeric");
        }
        std::string qid(f[0]);
        std::string doc(f[2]);
        if (!seen[qid].insert(doc).second) {
            bad_line(source, line_no, "duplicate document " + doc + " for query " + qid);
        }
        run.queries[qid].push_back(RunEntry{std::move(doc), score});
    });
    return run;
}

RunFile read_run(const std::filesystem::path& path)
{
    return parse_run(slurp(path), path.string());
}

std::string format_run_lines(std::string_view qid, std::span<const RunEntry> ranking, std::string_view tag)
{
    std::string out;
    char score[64];
    for (std::size_t i = 0; i < ranking.size(); ++i) {
        std::snprintf(score, sizeof score, "%.6f", ranking[i].score);
        out.append(qid).append(" Q0 ").append(ranking[i].doc_id).append(" ");
        out.append(std::to_string(i + 1)).append(" ").append(score).append(" ").append(tag).append("\n");
    }
    return out;
}

Gain parse_gain(std::string_view name)
{
    if (name == "exponential" || name == "exp") {
        return Gain::exponential;
    }
    if (name == "linear") {
        return Gain::linear;
    }
    throw std::invalid_argument("unknown gain function: " + std::string(name));
}

std::string_view to_string(Gain gain)
{
    return gain == Gain::exponential ? "exponential" : "linear";
}

double ndcg_at_k(std::span<const std::string> ranking,
                 const std::unordered_map<std::string, int>& grades,
                 std::size_t k,
                 Gain gain)
{
    if (k == 0) {
        throw std::invalid_argument("k must be at least 1");
    }
    std::vector<int> ideal;
    for (const auto& [_, g] : grades) {
        if (g > 0) {
            ideal.push_back(g);
        }
    }
    if (ideal.empty()) {
        return 0.0;
    }
    std::sort(ideal.begin(), ideal.end(), std::greater<>());
    double idcg = 0.0;
    for (std::size_t i = 0; i < ideal.size() && i < k; ++i) {
        idcg += gain_of(ideal[i], gain) / std::log2(static_cast<double>(i) + 2.0);
    }
    double dcg = 0.0;
    for (std::size_t i = 0; i < ranking.size() && i < k; ++i) {
        auto it = grades.find(ranking[i]);
        if (it != grades.end()) {
            dcg += gain_of(it->second, gain) / std::log2(static_cast<double>(i) + 2.0);
        }
    }
    return dcg / idcg;
}

double average_precision(std::span<const std::string> ranking, const std::set<std::string>& relevant)
{
    if (relevant.empty()) {
        return 0.0;
    }
    double sum = 0.0;
    std::size_t hits = 0;
    for (std::size_t i = 0; i < ranking.size(); ++i) {
        if (relevant.contains(ranking[i])) {
            ++hits;
            sum += static_cast<double>(hits) / static_cast<double>(i + 1);
        }
    }
    return sum / static_cast<double>(relevant.size());
}

double recall_at_k(std::span<const std::string> ranking, const std::set<std::string>& relevant, std::size_t k)
{
    if (k == 0) {
        throw std::invalid_argument("k must be at least 1");
    }
    if (relevant.empty()) {
        return 0.0;
    }
    std::size_t found = 0;
    for (std::size_t i = 0; i < ranking.size() && i < k; ++i) {
        if (relevant.contains(ranking[i])) {
            ++found;
        }
    }
    return static_cast<double>(found) / static_cast<double>(relevant.size());
}

EvalReport evaluate_run(const RunFile& run, const Qrels& qrels, const EvalOptions& options)
{
    bool shared = false;
    for (const auto& [qid, _] : qrels.judgments) {
        if (run.queries.contains(qid)) {
            shared = true;
            break;
        }
    }
    if (!shared) {
        throw std::invalid_argument("run and qrels have no query in common");
    }

    std::vector<const std::string*> qids;
    for (const auto& [qid, _] : qrels.judgments) {
        qids.push_back(&qid);
    }
    EvalReport report;
    report.per_query.resize(qids.size());

#pragma omp parallel for schedule(dynamic)
    for (std::int64_t i = 0; i < static_cast<std::int64_t>(qids.size()); ++i) {
        const std::string& qid = *qids[static_cast<std::size_t>(i)];
        QueryMetrics& m = report.per_query[static_cast<std::size_t>(i)];
        m.qid = qid;
        auto found = run.queries.find(qid);
        if (found == run.queries.end()) {
            continue;
        }
        m.in_run = true;
        const auto& grades = qrels.judgments.at(qid);
        std::set<std::string> relevant;
        for (const auto& [doc, g] : grades) {
            if (g >= options.binary_threshold) {
                relevant.insert(doc);
            }
        }
        const auto ranking = trec_order(found->second);
        m.map = average_precision(ranking, relevant);
        m.ndcg10 = ndcg_at_k(ranking, grades, 10, options.gain);
        m.recall1000 = recall_at_k(ranking, relevant, 1000);
    }

    for (const auto& m : report.per_query) {
        report.mean_map += m.map;
        report.mean_ndcg10 += m.ndcg10;
        report.mean_recall1000 += m.recall1000;
    }
    const auto n = static_cast<double>(report.per_query.size());
    report.mean_map /= n;
    report.mean_ndcg10 /= n;
    report.mean_recall1000 /= n;
    return report;
}

nlohmann::json EvalReport::to_json() const
{
    nlohmann::json queries = nlohmann::json::array();
    for (const auto& m : per_query) {
        queries.push_back({{"qid", m.qid},
                           {"map", m.map},
                           {"ndcg_cut_10", m.ndcg10},
                           {"recall_1000", m.recall1000},
                           {"in_run", m.in_run}});
    }
    return {{"queries", std::move(queries)},
            {"mean", {{"map", mean_map}, {"ndcg_cut_10", mean_ndcg10}, {"recall_1000", mean_recall1000}}},
            {"num_queries", per_query.size()}};
}

std::string EvalReport::to_table() const
{
    std::size_t width = 5;
    for (const auto& m : per_query) {
        width = std::max(width, m.qid.size());
    }
    std::ostringstream os;
    os << std::fixed << std::setprecision(4);
    os << std::left << std::setw(static_cast<int>(width)) << "qid" << "  mAP     nDCG@10 R@1000\n";
    for (const auto& m : per_query) {
        os << std::left << std::setw(static_cast<int>(width)) << m.qid << "  " << m.map << "  " << m.ndcg10 << "  "
           << m.recall1000 << (m.in_run ? "" : "  (missing from run)") << '\n';
    }
    os << std::left << std::setw(static_cast<int>(width)) << "all" << "  " << mean_map << "  " << mean_ndcg10 << "  "
       << mean_recall1000 << '\n';
    return os.str();
}

}  // namespace qexp
