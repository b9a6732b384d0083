#include "qexp/pipeline.hpp"

#include <algorithm>
#include <cmath>

#include "qexp/util.hpp"

namespace qexp {

namespace {

std::uint64_t round_seed(std::uint64_t seed, int round)
{
    return mix64(seed ^ (0x51ed2701ULL * static_cast<std::uint64_t>(round + 1)));
}

std::vector<std::string> feedback_passages(const Corpus& corpus,
                                           std::span<const std::string> doc_ids,
                                           int truncation)
{
    std::vector<std::string> passages;
    passages.reserve(doc_ids.size());
    for (const auto& id : doc_ids) {
        const std::string* text = corpus.find_text(id);
        if (text == nullptr) {
            throw std::runtime_error("retrieved document " + id + " is missing from the corpus");
        }
        passages.push_back(truncate_text(*text, static_cast<std::size_t>(truncation)));
    }
    return passages;
}

std::vector<std::string> top_ids(std::span<const ScoredHit> hits, std::size_t k)
{
    std::vector<std::string> ids;
    for (std::size_t i = 0; i < hits.size() && i < k; ++i) {
        ids.push_back(hits[i].doc_id);
    }
    return ids;
}

// Answers are joined into one segment; traces are kept but never queried.
void absorb_responses(const std::vector<ExpansionResponse>& responses, RoundRecord& record)
{
    for (const auto& r : responses) {
        if (!r.answer_text.empty()) {
            if (!record.expansion_segment.empty()) {
                record.expansion_segment.push_back(' ');
            }
            record.expansion_segment += r.answer_text;
        }
        record.thinking_traces.push_back(r.thinking_trace);
    }
}

void require_positive(int value, const char* name)
{
    if (value < 1) {
        throw std::invalid_argument(std::string(name) + " must be at least 1");
    }
}

}  // namespace

ScalingMode parse_scaling_mode(std::string_view name)
{
    if (name == "interaction") {
        return ScalingMode::interaction;
    }
    if (name == "parallel") {
        return ScalingMode::parallel;
    }
    throw std::invalid_argument("unknown scaling mode: " + std::string(name));
}

std::string_view to_string(ScalingMode mode)
{
    return mode == ScalingMode::interaction ? "interaction" : "parallel";
}

void PipelineConfig::validate() const
{
    if (rounds < 0) {
        throw std::invalid_argument("rounds must be non-negative");
    }
    require_positive(top_k_feedback, "top_k_feedback");
    require_positive(prompt_doc_truncation, "prompt_doc_truncation");
    require_positive(samples_per_round, "samples_per_round");
    require_positive(retrieval_depth, "retrieval_depth");
    if (!(lambda > 0.0) || !std::isfinite(lambda)) {
        throw std::invalid_argument("lambda must be positive");
    }
    GenerationParams g = generation;
    g.num_samples = samples_per_round;
    g.validate();
}

QueryState QueryState::initial(std::string q0)
{
    QueryState state;
    state.q0 = std::move(q0);
    return state;
}

std::size_t repetition_count(std::string_view q0, std::span<const std::string> expansions, double lambda)
{
    const std::size_t q_words = word_count(q0);
    if (q_words == 0) {
        throw std::invalid_argument("original query has no words");
    }
    if (!(lambda > 0.0)) {
        throw std::invalid_argument("lambda must be positive");
    }
    std::size_t e_words = 0;
    for (const auto& e : expansions) {
        e_words += word_count(e);
    }
    const double n = std::floor(static_cast<double>(e_words) / (static_cast<double>(q_words) * lambda));
    return std::max<std::size_t>(1, static_cast<std::size_t>(n));
}

std::string render_query(const QueryState& state, double lambda)
{
    if (state.expansions.empty()) {
        return state.q0;
    }
    const std::size_t n = repetition_count(state.q0, state.expansions, lambda);
    std::string query;
    for (std::size_t i = 0; i < n; ++i) {
        if (i > 0) {
            query.push_back(' ');
        }
        query += state.q0;
    }
    for (const auto& segment : state.expansions) {
        if (!segment.empty()) {
            query.push_back(' ');
            query += segment;
        }
    }
    return query;
}

FeedbackSelection filter_feedback(std::span<const ScoredHit> retrieved,
                                  const std::set<std::string>& blacklist,
                                  std::span<const std::string> prev_feedback,
                                  std::size_t k)
{
    FeedbackSelection out;
    out.blacklist = blacklist;
    const std::set<std::string> prev(prev_feedback.begin(), prev_feedback.end());
    for (const auto& hit : retrieved) {
        if (blacklist.contains(hit.doc_id) || prev.contains(hit.doc_id)) {
            out.blacklist.insert(hit.doc_id);
        } else if (out.feedback.size() < k) {
            out.feedback.push_back(hit.doc_id);
        }
    }
    return out;
}

std::pair<QueryState, RoundRecord> run_round(const QueryState& state,
                                             RetrievalContext ctx,
                                             const PipelineConfig& config,
                                             std::uint64_t seed)
{
    config.validate();
    if (state.round >= config.rounds) {
        throw std::logic_error("run_round called after the final round");
    }
    RoundRecord record;
    record.round = state.round;
    record.rendered_query = render_query(state, config.lambda);
    record.retrieved = search_topk(ctx.index, record.rendered_query, static_cast<std::size_t>(config.retrieval_depth));

    QueryState next = state;
    const auto k = static_cast<std::size_t>(config.top_k_feedback);
    if (config.filter_enabled) {
        auto selection = filter_feedback(record.retrieved, state.blacklist, state.prev_feedback, k);
        record.feedback_docs = std::move(selection.feedback);
        next.blacklist = std::move(selection.blacklist);
    } else {
        record.feedback_docs = top_ids(record.retrieved, k);
    }
    if (record.feedback_docs.empty()) {
        log_warning("round " + std::to_string(state.round) + ": no feedback documents for query \"" + state.q0 + "\"");
    }

    PromptInputs inputs{state.q0, feedback_passages(ctx.corpus, record.feedback_docs, config.prompt_doc_truncation)};
    GenerationParams params = config.generation;
    params.num_samples = config.samples_per_round;
    auto responses = ctx.client.generate_expansions(inputs, params, round_seed(seed, state.round));

    absorb_responses(responses, record);

    if (config.accumulation_enabled) {
        next.expansions.push_back(record.expansion_segment);
    } else {
        next.expansions.assign(1, record.expansion_segment);
    }
    next.prev_feedback = record.feedback_docs;
    next.round = state.round + 1;

    record.query_after = render_query(next, config.lambda);
    record.expansion_count = next.expansions.size();
    record.blacklist_size = next.blacklist.size();
    return {std::move(next), std::move(record)};
}

PipelineResult run_pipeline(std::string_view q0, RetrievalContext ctx, const PipelineConfig& config, std::uint64_t seed)
{
    config.validate();
    if (trim(q0).empty()) {
        throw std::invalid_argument("query must not be empty");
    }
    PipelineResult result;
    QueryState state = QueryState::initial(std::string(q0));

    if (config.mode == ScalingMode::interaction || config.rounds == 0) {
        for (int t = 0; t < config.rounds; ++t) {
            auto [next, record] = run_round(state, ctx, config, seed);
            result.generation_calls += static_cast<std::uint64_t>(config.samples_per_round);
            state = std::move(next);
            result.trace.push_back(std::move(record));
        }
    } else {
        RoundRecord record;
        record.round = 0;
        record.rendered_query = state.q0;
        record.retrieved = search_topk(ctx.index, state.q0, static_cast<std::size_t>(config.retrieval_depth));
        record.feedback_docs = top_ids(record.retrieved, static_cast<std::size_t>(config.top_k_feedback));
        PromptInputs inputs{state.q0,
                            feedback_passages(ctx.corpus, record.feedback_docs, config.prompt_doc_truncation)};
        GenerationParams params = config.generation;
        params.num_samples = config.rounds * config.samples_per_round;
        auto responses = ctx.client.generate_expansions(inputs, params, round_seed(seed, 0));
        result.generation_calls += static_cast<std::uint64_t>(params.num_samples);
        absorb_responses(responses, record);
        state.expansions.push_back(record.expansion_segment);
        state.prev_feedback = record.feedback_docs;
        state.round = config.rounds;
        record.query_after = render_query(state, config.lambda);
        record.expansion_count = state.expansions.size();
        result.trace.push_back(std::move(record));
    }

    result.final_query = render_query(state, config.lambda);
    result.final_hits = search_topk(ctx.index, result.final_query, static_cast<std::size_t>(config.retrieval_depth));
    return result;
}

nlohmann::json to_json(const RoundRecord& record, std::string_view query_id)
{
    nlohmann::json retrieved = nlohmann::json::array();
    for (const auto& hit : record.retrieved) {
        retrieved.push_back({{"doc_id", hit.doc_id}, {"score", hit.score}, {"rank", hit.rank}});
    }
    return {
        {"query_id", query_id},
        {"round", record.round},
        {"rendered_query", record.rendered_query},
        {"retrieved", std::move(retrieved)},
        {"feedback_docs", record.feedback_docs},
        {"expansion_segment", record.expansion_segment},
        {"thinking_traces", record.thinking_traces},
        {"query_after", record.query_after},
        {"expansion_count", record.expansion_count},
        {"blacklist_size", record.blacklist_size},
    };
}

}  // namespace qexp
