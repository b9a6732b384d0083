#include "qexp/expansion.hpp"

#include <algorithm>
#include <chrono>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

#include "qexp/analyzer.hpp"
#include "qexp/util.hpp"

namespace qexp {

namespace {

constexpr std::string_view kTemplate =
    "Given a question \"{query}\" and its possible answering passages (most of these passages are wrong) "
    "enumerated as:\n"
    "{passages}\n"
    "please write a correct answering passage. Use your own knowledge, not just the example passages!";

constexpr std::string_view kThinkOpen = "<think>";
constexpr std::string_view kThinkClose = "</think>";
constexpr std::size_t kEchoTerms = 32;

std::string join_nonempty(std::string_view a, std::string_view b)
{
    std::string out(a);
    if (!a.empty() && !b.empty()) {
        out.push_back(' ');
    }
    out.append(b);
    return out;
}

std::vector<std::string> plain_words(std::string_view text)
{
    std::vector<std::string> words;
    std::string word;
    auto flush = [&] {
        if (word.size() >= 2 && !is_stopword(word)) {
            words.push_back(word);
        }
        word.clear();
    };
    for (char ch : text) {
        auto c = static_cast<unsigned char>(ch);
        if ((c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c >= 0x80) {
            word.push_back(ch);
        } else if (c >= 'A' && c <= 'Z') {
            word.push_back(static_cast<char>(c - 'A' + 'a'));
        } else {
            flush();
        }
    }
    flush();
    return words;
}

std::string echo_terms(const PromptInputs& inputs, std::uint64_t seed)
{
    std::vector<std::string> words;
    for (const auto& passage : inputs.passages) {
        auto w = plain_words(passage);
        words.insert(words.end(), w.begin(), w.end());
    }
    if (words.empty()) {
        words = plain_words(inputs.query);
    }
    std::unordered_map<std::string, std::size_t> freq;
    for (const auto& w : words) {
        ++freq[w];
    }
    std::vector<std::pair<std::string, std::size_t>> ranked(freq.begin(), freq.end());
    std::sort(ranked.begin(), ranked.end(), [seed](const auto& a, const auto& b) {
        if (a.second != b.second) {
            return a.second > b.second;
        }
        auto ha = mix64(fnv1a64(a.first) ^ seed);
        auto hb = mix64(fnv1a64(b.first) ^ seed);
        return ha != hb ? ha < hb : a.first < b.first;
    });
    if (ranked.size() > kEchoTerms) {
        ranked.resize(kEchoTerms);
    }
    std::unordered_set<std::string> selected;
    for (const auto& [w, _] : ranked) {
        selected.insert(w);
    }
    std::string answer;
    for (const auto& w : words) {
        if (selected.erase(w) > 0) {
            answer = join_nonempty(answer, w);
        }
    }
    return answer;
}

}  // namespace

ThinkingMode parse_thinking_mode(std::string_view name)
{
    if (name == "think") {
        return ThinkingMode::think;
    }
    if (name == "no_think_prefill") {
        return ThinkingMode::no_think_prefill;
    }
    if (name == "base_model") {
        return ThinkingMode::base_model;
    }
    throw std::invalid_argument("unknown thinking mode: " + std::string(name));
}

std::string_view to_string(ThinkingMode mode)
{
    switch (mode) {
    case ThinkingMode::think:
        return "think";
    case ThinkingMode::no_think_prefill:
        return "no_think_prefill";
    case ThinkingMode::base_model:
        return "base_model";
    }
    return "think";
}

MockMode parse_mock_mode(std::string_view name)
{
    if (name == "echo_terms") {
        return MockMode::echo_terms;
    }
    if (name == "fixed_text") {
        return MockMode::fixed_text;
    }
    throw std::invalid_argument("unknown mock mode: " + std::string(name));
}

std::string_view to_string(MockMode mode)
{
    return mode == MockMode::echo_terms ? "echo_terms" : "fixed_text";
}

void GenerationParams::validate() const
{
    if (!(temperature >= 0.0)) {
        throw std::invalid_argument("temperature must be non-negative");
    }
    if (num_samples < 1) {
        throw std::invalid_argument("num_samples must be at least 1");
    }
    if (max_output_tokens < 1) {
        throw std::invalid_argument("max_output_tokens must be at least 1");
    }
}

std::string_view prompt_template()
{
    return kTemplate;
}

std::string build_prompt(const PromptInputs& inputs)
{
    if (inputs.query.empty()) {
        throw std::invalid_argument("prompt query must not be empty");
    }
    std::string enumeration;
    for (std::size_t i = 0; i < inputs.passages.size(); ++i) {
        if (i > 0) {
            enumeration += ";\n";
        }
        enumeration += std::to_string(i + 1);
        enumeration += ". ";
        enumeration += inputs.passages[i];
    }
    if (inputs.passages.empty()) {
        log_warning("building expansion prompt with no passages");
    }

    // Placeholders are located in the template, never in substituted text.
    const std::string_view tpl = kTemplate;
    const auto q = tpl.find("{query}");
    const auto p = tpl.find("{passages}");
    std::string prompt;
    prompt.reserve(tpl.size() + inputs.query.size() + enumeration.size());
    prompt.append(tpl.substr(0, q));
    prompt.append(inputs.query);
    prompt.append(tpl.substr(q + 7, p - q - 7));
    if (enumeration.empty()) {
        prompt.append(tpl.substr(p + 11));
    } else {
        prompt.append(enumeration);
        prompt.append(tpl.substr(p + 10));
    }
    return prompt;
}

ExpansionResponse strip_thinking(std::string_view raw)
{
    ExpansionResponse response;
    response.raw_text = std::string(raw);
    const auto open = raw.find(kThinkOpen);
    const auto close = raw.find(kThinkClose, open == std::string_view::npos ? 0 : open + kThinkOpen.size());

    if (open != std::string_view::npos && close != std::string_view::npos) {
        response.thinking_trace = std::string(raw.substr(open + kThinkOpen.size(), close - open - kThinkOpen.size()));
        response.answer_text =
            join_nonempty(trim(raw.substr(0, open)), trim(raw.substr(close + kThinkClose.size())));
    } else if (open != std::string_view::npos) {
        response.thinking_trace = std::string(raw.substr(open + kThinkOpen.size()));
        response.degenerate = true;
    } else if (close != std::string_view::npos) {
        response.thinking_trace = std::string(trim(raw.substr(0, close)));
        response.answer_text = std::string(trim(raw.substr(close + kThinkClose.size())));
    } else {
        response.answer_text = std::string(trim(raw));
    }
    return response;
}

std::vector<ExpansionResponse> mock_generate(const PromptInputs& inputs,
                                             std::uint64_t seed,
                                             MockMode mode,
                                             int num_samples,
                                             std::string_view fixed_text)
{
    std::vector<ExpansionResponse> out;
    for (int i = 0; i < num_samples; ++i) {
        std::string text = mode == MockMode::fixed_text
            ? std::string(fixed_text)
            : echo_terms(inputs, mix64(seed + static_cast<std::uint64_t>(i)));
        out.push_back(strip_thinking(text));
    }
    return out;
}

MockBackend::MockBackend(MockMode mode, std::string fixed_text) : mode_(mode), fixed_text_(std::move(fixed_text)) {}

GenerationReply MockBackend::complete(const GenerationRequest& request)
{
    static const PromptInputs kNoInputs;
    GenerationReply reply;
    reply.requests = 1;
    for (auto& r : mock_generate(request.inputs ? *request.inputs : kNoInputs, request.seed, mode_,
                                 request.num_samples, fixed_text_)) {
        reply.outputs.push_back(std::move(r.raw_text));
    }
    return reply;
}

std::string MockBackend::identity() const
{
    std::string id = "mock:" + std::string(to_string(mode_));
    if (mode_ == MockMode::fixed_text) {
        id += ":" + nlohmann::json(fixed_text_).dump();
    }
    return id;
}

TraceLog::TraceLog(const std::filesystem::path& path) : out_(path, std::ios::binary | std::ios::app)
{
    if (!out_) {
        throw std::runtime_error("cannot open generation trace log: " + path.string());
    }
}

void TraceLog::append(const GenerationRequest& request, const GenerationReply& reply, double latency_ms)
{
    nlohmann::json line = {
        {"prompt", request.prompt},
        {"prefill", request.assistant_prefill ? nlohmann::json(*request.assistant_prefill) : nlohmann::json()},
        {"temperature", request.temperature},
        {"num_samples", request.num_samples},
        {"seed", request.seed},
        {"outputs", reply.outputs},
        {"requests", reply.requests},
        {"prefill_fallback", reply.prefill_fallback},
        {"latency_ms", latency_ms},
    };
    std::lock_guard lock(mutex_);
    out_ << line.dump() << '\n';
    out_.flush();
}

ExpansionClient::ExpansionClient(std::shared_ptr<ExpansionBackend> backend, std::shared_ptr<TraceLog> trace)
    : backend_(std::move(backend)), trace_(std::move(trace))
{
    if (!backend_) {
        throw std::invalid_argument("expansion client needs a backend");
    }
}

std::vector<ExpansionResponse> ExpansionClient::generate_expansions(const PromptInputs& inputs,
                                                                    const GenerationParams& params,
                                                                    std::uint64_t seed)
{
    params.validate();
    GenerationRequest request;
    request.inputs = &inputs;
    request.prompt = build_prompt(inputs);
    request.temperature = params.temperature;
    request.num_samples = params.num_samples;
    request.max_output_tokens = params.max_output_tokens;
    request.seed = seed;
    if (params.thinking_mode == ThinkingMode::no_think_prefill) {
        request.assistant_prefill = std::string(kNoThinkingPrefill);
    }

    const auto start = std::chrono::steady_clock::now();
    GenerationReply reply = backend_->complete(request);
    const double latency_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    requests_ += static_cast<std::uint64_t>(reply.requests);
    if (reply.prefill_fallback) {
        ++prefill_fallbacks_;
    }
    if (trace_) {
        trace_->append(request, reply, latency_ms);
    }
    if (reply.outputs.size() != static_cast<std::size_t>(params.num_samples)) {
        std::ostringstream os;
        os << "backend " << backend_->identity() << " returned " << reply.outputs.size() << " of "
           << params.num_samples << " requested samples";
        throw GenerationError(os.str());
    }
    generation_calls_ += static_cast<std::uint64_t>(params.num_samples);

    std::vector<ExpansionResponse> responses;
    responses.reserve(reply.outputs.size());
    bool any_answer = false;
    for (auto& raw : reply.outputs) {
        ExpansionResponse r;
        if (params.thinking_mode == ThinkingMode::no_think_prefill) {
            std::string_view body = raw;
            auto trimmed = trim(body);
            if (trimmed.starts_with(kNoThinkingPrefill)) {
                body = trimmed.substr(kNoThinkingPrefill.size());
            }
            r = strip_thinking(body);
            r.thinking_trace.clear();
            r.raw_text = raw;
        } else {
            r = strip_thinking(raw);
        }
        if (r.degenerate) {
            log_warning("generation opened a thinking block without closing it");
        }
        any_answer = any_answer || !r.answer_text.empty();
        responses.push_back(std::move(r));
    }
    if (!any_answer) {
        throw DegenerateGenerationError("all " + std::to_string(params.num_samples)
                                        + " samples produced an empty answer");
    }
    return responses;
}

}  // namespace qexp
