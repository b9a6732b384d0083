#pragma once

#include <cstddef>
#include <cstdint>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "qexp/corpus.hpp"
#include "qexp/expansion.hpp"
#include "qexp/index.hpp"

namespace qexp {

/// interaction: expansions spread over rounds, each fed by a fresh
/// retrieval. parallel: all generations issued at once from the initial
/// retrieval (the compute-matched baseline).
enum class ScalingMode { interaction, parallel };

ScalingMode parse_scaling_mode(std::string_view name);
std::string_view to_string(ScalingMode mode);

struct PipelineConfig {
    int rounds = 3;
    int top_k_feedback = 5;
    /// Whitespace tokens kept per feedback passage (512 for BRIGHT-style corpora).
    int prompt_doc_truncation = 128;
    int samples_per_round = 2;
    double lambda = 3.0;
    ScalingMode mode = ScalingMode::interaction;
    bool accumulation_enabled = true;
    bool filter_enabled = true;
    int retrieval_depth = 1000;
    /// num_samples is ignored; samples_per_round governs it.
    GenerationParams generation;

    void validate() const;
};

struct QueryState {
    std::string q0;
    std::vector<std::string> expansions;
    std::set<std::string> blacklist;
    std::vector<std::string> prev_feedback;
    int round = 0;

    static QueryState initial(std::string q0);
};

struct RoundRecord {
    int round = 0;
    std::vector<ScoredHit> retrieved;
    std::vector<std::string> feedback_docs;
    std::string rendered_query;
    std::string expansion_segment;
    std::vector<std::string> thinking_traces;
    /// Query after this round's update; for the last round, the final query.
    std::string query_after;
    std::size_t expansion_count = 0;
    std::size_t blacklist_size = 0;
};

struct FeedbackSelection {
    std::vector<std::string> feedback;
    std::set<std::string> blacklist;
};

/// max(1, floor(words(expansions) / (words(q0) * lambda)))
std::size_t repetition_count(std::string_view q0, std::span<const std::string> expansions, double lambda);

/// q0 repeated repetition_count times, then every expansion segment in
/// order, joined by single spaces. Without expansions, q0 verbatim.
std::string render_query(const QueryState& state, double lambda);

/// First k retrieved ids outside blacklist ∪ prev_feedback. Every retrieved
/// id rejected by that set test joins the returned blacklist.
FeedbackSelection filter_feedback(std::span<const ScoredHit> retrieved,
                                  const std::set<std::string>& blacklist,
                                  std::span<const std::string> prev_feedback,
                                  std::size_t k);

/// Everything a pipeline run needs besides its configuration.
struct RetrievalContext {
    const PostingIndex& index;
    const Corpus& corpus;
    ExpansionClient& client;
};

/// One retrieve / filter / expand / update step.
std::pair<QueryState, RoundRecord> run_round(const QueryState& state,
                                             RetrievalContext ctx,
                                             const PipelineConfig& config,
                                             std::uint64_t seed = 0);

struct PipelineResult {
    std::vector<ScoredHit> final_hits;
    std::vector<RoundRecord> trace;
    std::string final_query;
    std::uint64_t generation_calls = 0;
};

PipelineResult run_pipeline(std::string_view q0,
                            RetrievalContext ctx,
                            const PipelineConfig& config,
                            std::uint64_t seed = 0);

nlohmann::json to_json(const RoundRecord& record, std::string_view query_id);

}  // namespace qexp
