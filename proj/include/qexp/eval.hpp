#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

namespace qexp {

class EvalFormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// qid -> doc_id -> grade. Unjudged pairs have grade 0.
struct Qrels {
    std::map<std::string, std::unordered_map<std::string, int>> judgments;

    [[nodiscard]] int grade(const std::string& qid, const std::string& doc_id) const;
};

struct RunEntry {
    std::string doc_id;
    double score = 0.0;
};

/// qid -> entries in file order.
struct RunFile {
    std::map<std::string, std::vector<RunEntry>> queries;
};

/// "qid 0 docid grade" per line; throws EvalFormatError naming the line.
Qrels read_qrels(const std::filesystem::path& path);
Qrels parse_qrels(std::string_view text, std::string_view source = "<qrels>");

/// "qid Q0 docid rank score tag" per line; the rank column is ignored.
RunFile read_run(const std::filesystem::path& path);
RunFile parse_run(std::string_view text, std::string_view source = "<run>");

/// One query's ranked list as TREC run lines: "qid Q0 docid rank score tag"
/// with the score printed to six decimals.
std::string format_run_lines(std::string_view qid, std::span<const RunEntry> ranking, std::string_view tag);

enum class Gain { exponential, linear };

Gain parse_gain(std::string_view name);
std::string_view to_string(Gain gain);

/// DCG over the top k with gain(g) and discount log2(i + 1), divided by the
/// ideal DCG of all judged grades. 0 when nothing is relevant.
double ndcg_at_k(std::span<const std::string> ranking,
                 const std::unordered_map<std::string, int>& grades,
                 std::size_t k,
                 Gain gain = Gain::exponential);

/// Sum of precision at each relevant rank, over the number of relevant docs.
double average_precision(std::span<const std::string> ranking, const std::set<std::string>& relevant);

double recall_at_k(std::span<const std::string> ranking, const std::set<std::string>& relevant, std::size_t k);

struct QueryMetrics {
    std::string qid;
    double map = 0.0;
    double ndcg10 = 0.0;
    double recall1000 = 0.0;
    bool in_run = false;
};

struct EvalOptions {
    /// Minimum grade counted as relevant by mAP and recall.
    int binary_threshold = 1;
    Gain gain = Gain::exponential;
};

struct EvalReport {
    std::vector<QueryMetrics> per_query;  // qrels order
    double mean_map = 0.0;
    double mean_ndcg10 = 0.0;
    double mean_recall1000 = 0.0;

    [[nodiscard]] nlohmann::json to_json() const;
    [[nodiscard]] std::string to_table() const;
};

/// Evaluates every qrels query (absent ones score 0). Each query's run is
/// ranked by score descending, ties by doc id descending, as trec_eval does.
/// Throws std::invalid_argument when run and qrels share no query.
EvalReport evaluate_run(const RunFile& run, const Qrels& qrels, const EvalOptions& options = {});

}  // namespace qexp
