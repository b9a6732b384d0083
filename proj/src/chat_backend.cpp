#include "qexp/chat_backend.hpp"

#include <algorithm>
#include <thread>

#include <httplib.h>

#include "qexp/util.hpp"

namespace qexp {

namespace {

constexpr std::string_view kPrefillFallbackInstruction =
    "\n\nYour reasoning is already complete. Do not think again; continue directly with the answer.";

bool retryable(int status)
{
    return status == 0 || status == 408 || status == 429 || status >= 500;
}

}  // namespace

RateLimiter::RateLimiter(double requests_per_second, double burst)
    : rate_(requests_per_second),
      capacity_(std::max(1.0, burst)),
      tokens_(std::max(1.0, burst)),
      last_(std::chrono::steady_clock::now())
{}

void RateLimiter::acquire()
{
    if (rate_ <= 0.0) {
        return;
    }
    std::unique_lock lock(mutex_);
    while (true) {
        auto now = std::chrono::steady_clock::now();
        tokens_ = std::min(capacity_, tokens_ + std::chrono::duration<double>(now - last_).count() * rate_);
        last_ = now;
        if (tokens_ >= 1.0) {
            tokens_ -= 1.0;
            return;
        }
        auto wait = std::chrono::duration<double>((1.0 - tokens_) / rate_);
        lock.unlock();
        std::this_thread::sleep_for(wait);
        lock.lock();
    }
}

nlohmann::json build_chat_request(const std::string& model, const GenerationRequest& request, bool prefill_in_prompt)
{
    nlohmann::json messages = nlohmann::json::array();
    nlohmann::json body = {
        {"model", model},
        {"temperature", request.temperature},
        {"n", request.num_samples},
        {"max_tokens", request.max_output_tokens},
        {"seed", request.seed},
    };
    if (request.assistant_prefill && prefill_in_prompt) {
        messages.push_back({{"role", "user"},
                            {"content", *request.assistant_prefill + "\n\n" + request.prompt
                                            + std::string(kPrefillFallbackInstruction)}});
    } else {
        messages.push_back({{"role", "user"}, {"content", request.prompt}});
        if (request.assistant_prefill) {
            messages.push_back({{"role", "assistant"}, {"content", *request.assistant_prefill}});
            body["continue_final_message"] = true;
            body["add_generation_prompt"] = false;
        }
    }
    body["messages"] = std::move(messages);
    return body;
}

std::vector<std::string> parse_chat_response(const nlohmann::json& body)
{
    auto choices = body.find("choices");
    if (choices == body.end() || !choices->is_array()) {
        throw GenerationError("chat response has no choices array");
    }
    std::vector<std::pair<int, std::string>> indexed;
    int position = 0;
    for (const auto& choice : *choices) {
        int index = choice.value("index", position);
        ++position;
        const auto& message = choice.at("message");
        std::string text;
        // Some servers return the reasoning separately from the answer.
        if (message.contains("reasoning_content") && message["reasoning_content"].is_string()) {
            text = "<think>" + message["reasoning_content"].get<std::string>() + "</think>";
        }
        if (message.contains("content") && message["content"].is_string()) {
            text += message["content"].get<std::string>();
        }
        indexed.emplace_back(index, std::move(text));
    }
    std::stable_sort(indexed.begin(), indexed.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    std::vector<std::string> out;
    for (auto& [_, text] : indexed) {
        out.push_back(std::move(text));
    }
    return out;
}

ChatCompletionsBackend::ChatCompletionsBackend(ChatBackendConfig config)
    : config_(std::move(config)), limiter_(config_.requests_per_second)
{
    const std::string& url = config_.base_url;
    auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) {
        throw std::invalid_argument("backend base URL must include a scheme: " + url);
    }
    auto path_start = url.find('/', scheme_end + 3);
    scheme_host_port_ = url.substr(0, path_start);
    path_ = path_start == std::string::npos ? std::string() : url.substr(path_start);
    while (!path_.empty() && path_.back() == '/') {
        path_.pop_back();
    }
    path_ += "/chat/completions";
    if (config_.retry.max_attempts < 1) {
        throw std::invalid_argument("retry policy needs at least one attempt");
    }
}

std::string ChatCompletionsBackend::identity() const
{
    return "chat-completions:" + config_.model + "@" + config_.base_url;
}

nlohmann::json ChatCompletionsBackend::post_with_retries(const nlohmann::json& body, int& requests)
{
    httplib::Client client(scheme_host_port_);
    client.set_connection_timeout(std::chrono::seconds(30));
    client.set_read_timeout(config_.timeout);
    client.set_write_timeout(std::chrono::seconds(60));
    httplib::Headers headers;
    if (!config_.api_key.empty()) {
        headers.emplace("Authorization", "Bearer " + config_.api_key);
    }
    const std::string payload = body.dump();

    auto backoff = config_.retry.initial_backoff;
    std::string last_error;
    int last_status = 0;
    for (int attempt = 1; attempt <= config_.retry.max_attempts; ++attempt) {
        limiter_.acquire();
        ++requests;
        auto result = client.Post(path_, headers, payload, "application/json");
        if (result) {
            last_status = result->status;
            if (result->status >= 200 && result->status < 300) {
                try {
                    return nlohmann::json::parse(result->body);
                } catch (const nlohmann::json::parse_error& e) {
                    throw GenerationError(std::string("unparseable chat response: ") + e.what(), result->status);
                }
            }
            last_error = "HTTP " + std::to_string(result->status) + ": " + result->body.substr(0, 512);
        } else {
            last_status = 0;
            last_error = "transport error: " + httplib::to_string(result.error());
        }
        if (!retryable(last_status) || attempt == config_.retry.max_attempts) {
            break;
        }
        log_warning("chat request failed (" + last_error + "), retrying");
        std::this_thread::sleep_for(backoff);
        backoff = std::chrono::milliseconds(
            static_cast<std::int64_t>(static_cast<double>(backoff.count()) * config_.retry.backoff_factor));
    }
    throw GenerationError("chat completion failed at " + scheme_host_port_ + path_ + ": " + last_error, last_status);
}

GenerationReply ChatCompletionsBackend::complete(const GenerationRequest& request)
{
    GenerationReply reply;
    // Servers may return fewer choices than asked for; top up, bounded.
    for (int round = 0; round < request.num_samples
         && static_cast<int>(reply.outputs.size()) < request.num_samples;
         ++round) {
        GenerationRequest part = request;
        part.num_samples = request.num_samples - static_cast<int>(reply.outputs.size());
        part.seed = request.seed + static_cast<std::uint64_t>(round);
        bool in_prompt = request.assistant_prefill && prefill_rejected_.load();
        nlohmann::json body;
        try {
            body = post_with_retries(build_chat_request(config_.model, part, in_prompt), reply.requests);
        } catch (const GenerationError& e) {
            bool client_error = e.status() >= 400 && e.status() < 500 && e.status() != 408 && e.status() != 429;
            if (!request.assistant_prefill || in_prompt || !client_error) {
                throw;
            }
            log_warning("backend rejected assistant prefill; moving the dummy thinking block into the prompt");
            prefill_rejected_ = true;
            in_prompt = true;
            body = post_with_retries(build_chat_request(config_.model, part, true), reply.requests);
        }
        reply.prefill_fallback = reply.prefill_fallback || in_prompt;
        for (auto& text : parse_chat_response(body)) {
            if (static_cast<int>(reply.outputs.size()) < request.num_samples) {
                reply.outputs.push_back(std::move(text));
            }
        }
    }
    return reply;
}

}  // namespace qexp
