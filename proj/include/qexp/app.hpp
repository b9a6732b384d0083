#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "qexp/corpus.hpp"
#include "qexp/expansion.hpp"
#include "qexp/index.hpp"
#include "qexp/pipeline.hpp"

namespace qexp {

struct Query {
    std::string qid;
    std::string text;
};

/// "qid<TAB>text" per line.
std::vector<Query> read_queries(const std::filesystem::path& path);

struct BackendSettings {
    std::string base_url = "http://localhost:8000/v1";
    std::string model = "deepseek-ai/DeepSeek-R1-Distill-Qwen-14B";
    std::string api_key_env = "OPENAI_API_KEY";
    /// "none" selects the HTTP backend.
    std::string mock = "none";
    std::string mock_text;
    double requests_per_second = 0.0;
    int max_attempts = 3;
    int initial_backoff_ms = 500;
};

struct RunConfig {
    std::filesystem::path corpus;
    CorpusFormat corpus_format = CorpusFormat::jsonl;
    std::filesystem::path index;
    std::filesystem::path queries;
    std::filesystem::path qrels;  // optional
    std::filesystem::path output_dir = ".";
    std::string tag = "run";
    BackendSettings backend;
    PipelineConfig pipeline;
    std::uint64_t seed = 0;
    int parallelism = 1;
    int binary_threshold = 1;
    bool log_generations = false;

    /// Throws std::invalid_argument naming the first missing path.
    void validate() const;
    [[nodiscard]] nlohmann::json to_json() const;
};

std::shared_ptr<ExpansionBackend> make_backend(const BackendSettings& settings);

struct QueryOutcome {
    std::string qid;
    std::optional<PipelineResult> result;
    std::string error;
};

/// Runs the pipeline for every query with up to `parallelism` queries in
/// flight. Outcomes come back ordered by query id (numeric ids numerically).
std::vector<QueryOutcome> run_batch(const std::vector<Query>& queries,
                                    RetrievalContext ctx,
                                    const PipelineConfig& config,
                                    std::uint64_t seed,
                                    int parallelism);

/// Entry point shared by the qexp binary and the tests. `args` excludes the
/// program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace qexp
