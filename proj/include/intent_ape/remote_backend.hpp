#pragma once

#include <atomic>
#include <memory>
#include <string>

#include "intent_ape/backend.hpp"
#include "intent_ape/http_transport.hpp"

namespace intent_ape {

inline constexpr const char* kApiKeyEnv = "INTENT_APE_API_KEY";

/// Reads the API key from INTENT_APE_API_KEY; throws ConfigError when unset or empty.
[[nodiscard]] std::string api_key_from_env();

struct RemoteChatConfig {
    std::string endpoint;
    std::string model_name;
    bool supports_logprobs = true;
    int max_inflight = 4;
    int top_logprobs = 5;
    int max_tokens = 512;
    /// Empty in replay mode.
    std::string api_key;
    RetryPolicy retry;
};

/// OpenAI-compatible chat-completions request body for a vision query.
[[nodiscard]] std::string build_chat_request(const RemoteChatConfig& config, const VisionQuery& query);

/// Probability mass on YES/NO read from the answer token's log-probabilities.
struct AnswerTokenProbability {
    double prob_crossing = 0.5;
    bool found = false;
};

/// Locates the last yes/no token in `choices[0].logprobs.content` and renormalises
/// over the YES/NO alternatives in its top_logprobs when both appear.
[[nodiscard]] AnswerTokenProbability answer_token_probability(const std::string& response_body);

/// Converts a chat-completions response into a Prediction. Throws ParseFailure
/// when the content has no recognisable answer.
[[nodiscard]] Prediction interpret_chat_response(const std::string& response_body, bool supports_logprobs);

/// Maps a non-2xx status to the matching exception and throws it.
[[noreturn]] void throw_for_status(const HttpResponse& response);

class RemoteChatBackend final : public VisionBackend {
  public:
    RemoteChatBackend(RemoteChatConfig config, std::shared_ptr<HttpTransport> transport,
                      Sleeper sleeper = real_sleep);

    [[nodiscard]] Prediction predict(const VisionQuery& query) override;
    [[nodiscard]] BackendDescriptor descriptor() const override;
    [[nodiscard]] int attempts() const noexcept { return attempts_; }

  private:
    RemoteChatConfig config_;
    std::shared_ptr<HttpTransport> transport_;
    Sleeper sleeper_;
    std::atomic<int> attempts_{0};
};

}  // namespace intent_ape
