#pragma once

#include <atomic>
#include <chrono>
#include <mutex>
#include <string>

#include <json.hpp>

#include "qexp/expansion.hpp"

namespace qexp {

struct RetryPolicy {
    int max_attempts = 3;
    std::chrono::milliseconds initial_backoff{500};
    double backoff_factor = 2.0;
};

/// Token bucket limiting request starts. A non-positive rate disables it.
class RateLimiter {
public:
    explicit RateLimiter(double requests_per_second = 0.0, double burst = 1.0);
    void acquire();

private:
    std::mutex mutex_;
    double rate_;
    double capacity_;
    double tokens_;
    std::chrono::steady_clock::time_point last_;
};

struct ChatBackendConfig {
    /// e.g. "http://localhost:8000/v1"; requests go to <base_url>/chat/completions.
    std::string base_url;
    std::string model;
    std::string api_key;
    RetryPolicy retry;
    double requests_per_second = 0.0;
    std::chrono::seconds timeout{600};
};

/// Request body for an OpenAI-style chat completion. The prompt is sent as
/// a single user message; a prefill becomes a trailing assistant message
/// with the vLLM continuation flags set.
nlohmann::json build_chat_request(const std::string& model, const GenerationRequest& request, bool prefill_in_prompt);

/// Text of every choice, in choice-index order.
std::vector<std::string> parse_chat_response(const nlohmann::json& body);

class ChatCompletionsBackend final : public ExpansionBackend {
public:
    explicit ChatCompletionsBackend(ChatBackendConfig config);

    GenerationReply complete(const GenerationRequest& request) override;
    [[nodiscard]] std::string identity() const override;

private:
    nlohmann::json post_with_retries(const nlohmann::json& body, int& requests);

    ChatBackendConfig config_;
    std::string scheme_host_port_;
    std::string path_;
    RateLimiter limiter_;
    std::atomic<bool> prefill_rejected_{false};
};

}  // namespace qexp
