#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace qexp {

enum class ThinkingMode { think, no_think_prefill, base_model };

ThinkingMode parse_thinking_mode(std::string_view name);
std::string_view to_string(ThinkingMode mode);

/// Assistant prefill that closes the reasoning phase before it starts.
inline constexpr std::string_view kNoThinkingPrefill = "<think>Okay, I think I have finished thinking.</think>";

struct GenerationParams {
    double temperature = 0.7;
    int num_samples = 2;
    int max_output_tokens = 1024;
    ThinkingMode thinking_mode = ThinkingMode::think;

    void validate() const;
};

struct ExpansionResponse {
    std::string thinking_trace;
    std::string answer_text;
    std::string raw_text;
    /// Set when the output opened a thinking block and never closed it.
    bool degenerate = false;
};

struct PromptInputs {
    std::string query;
    std::vector<std::string> passages;
};

/// The expansion prompt with "{query}" and "{passages}" placeholders.
std::string_view prompt_template();

/// Fills the prompt template. Passages are enumerated "1. p1;\n2. p2" and
/// substituted literally.
std::string build_prompt(const PromptInputs& inputs);

/// Splits a generator output into its <think>...</think> trace and answer.
/// An output with only a closing tag (the opening one was part of the chat
/// template) treats everything before it as the trace.
ExpansionResponse strip_thinking(std::string_view raw);

/// Transport or protocol failure. `status` is the HTTP status, or 0 when no
/// response was received.
class GenerationError : public std::runtime_error {
public:
    GenerationError(const std::string& what, int status = 0) : std::runtime_error(what), status_(status) {}
    [[nodiscard]] int status() const noexcept { return status_; }

private:
    int status_;
};

/// Every sample came back with an empty answer.
class DegenerateGenerationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct GenerationRequest {
    const PromptInputs* inputs = nullptr;
    std::string prompt;
    std::optional<std::string> assistant_prefill;
    double temperature = 0.7;
    int num_samples = 1;
    int max_output_tokens = 1024;
    std::uint64_t seed = 0;
};

struct GenerationReply {
    /// Raw generated text per sample; with a prefill, only the continuation.
    std::vector<std::string> outputs;
    int requests = 0;
    /// The backend refused assistant prefill and the dummy block was moved
    /// into the user prompt instead.
    bool prefill_fallback = false;
};

class ExpansionBackend {
public:
    virtual ~ExpansionBackend() = default;
    virtual GenerationReply complete(const GenerationRequest& request) = 0;
    [[nodiscard]] virtual std::string identity() const = 0;
};

enum class MockMode { echo_terms, fixed_text };

MockMode parse_mock_mode(std::string_view name);
std::string_view to_string(MockMode mode);

/// Deterministic stand-in for a generator.
///
/// echo_terms answers with the most frequent non-stopword terms of the
/// passages (the query when there are none), in first-occurrence order;
/// ties at the cut-off are broken by a seed-dependent hash. fixed_text
/// answers with `fixed_text`.
std::vector<ExpansionResponse> mock_generate(const PromptInputs& inputs,
                                             std::uint64_t seed,
                                             MockMode mode,
                                             int num_samples = 1,
                                             std::string_view fixed_text = {});

class MockBackend final : public ExpansionBackend {
public:
    explicit MockBackend(MockMode mode, std::string fixed_text = {});

    GenerationReply complete(const GenerationRequest& request) override;
    [[nodiscard]] std::string identity() const override;

private:
    MockMode mode_;
    std::string fixed_text_;
};

/// Thread-safe JSONL log of request/response pairs.
class TraceLog {
public:
    explicit TraceLog(const std::filesystem::path& path);
    void append(const GenerationRequest& request, const GenerationReply& reply, double latency_ms);

private:
    std::mutex mutex_;
    std::ofstream out_;
};

/// Wraps a backend with thinking-mode handling, cardinality checks, call
/// accounting and optional tracing. Safe to share across threads.
class ExpansionClient {
public:
    explicit ExpansionClient(std::shared_ptr<ExpansionBackend> backend, std::shared_ptr<TraceLog> trace = nullptr);

    /// Returns exactly params.num_samples responses or throws.
    std::vector<ExpansionResponse> generate_expansions(const PromptInputs& inputs,
                                                       const GenerationParams& params,
                                                       std::uint64_t seed = 0);

    [[nodiscard]] std::uint64_t generation_calls() const noexcept { return generation_calls_.load(); }
    [[nodiscard]] std::uint64_t requests() const noexcept { return requests_.load(); }
    [[nodiscard]] std::uint64_t prefill_fallbacks() const noexcept { return prefill_fallbacks_.load(); }
    [[nodiscard]] const ExpansionBackend& backend() const noexcept { return *backend_; }

private:
    std::shared_ptr<ExpansionBackend> backend_;
    std::shared_ptr<TraceLog> trace_;
    std::atomic<std::uint64_t> generation_calls_{0};
    std::atomic<std::uint64_t> requests_{0};
    std::atomic<std::uint64_t> prefill_fallbacks_{0};
};

}  // namespace qexp
