#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <string>
#include <string_view>

#include "intent_ape/dataset.hpp"
#include "intent_ape/frames.hpp"

namespace intent_ape {

struct VisionQuery {
    std::string system_text;
    std::string user_text;
    /// Shared because one payload serves every prompt evaluated on the sample.
    std::shared_ptr<const VisualPayload> payload;
    double temperature = 0.0;
    bool request_logprobs = true;
    /// Identifies the sample behind the payload; backends may use it for tracing.
    std::string sample_id;
};

/// Throws ValidationError when the payload is empty or temperature is negative.
void validate(const VisionQuery& query);

struct Prediction {
    Label label = Label::NotCrossing;
    double prob_crossing = 0.0;
    std::string raw_text;
    bool has_true_logprobs = false;
    std::int64_t latency_ms = 0;

    [[nodiscard]] double prob_not_crossing() const noexcept { return 1.0 - prob_crossing; }
    [[nodiscard]] double prob_of(Label label) const noexcept {
        return label == Label::Crossing ? prob_crossing : prob_not_crossing();
    }
};

/// Label implied by a crossing probability; exactly 0.5 maps to Crossing.
[[nodiscard]] constexpr Label label_for(double prob_crossing) noexcept {
    return prob_crossing >= 0.5 ? Label::Crossing : Label::NotCrossing;
}

/// Fixed confidences reported for backends that cannot return log-probabilities.
inline constexpr double kPseudoConfidenceCrossing = 0.75;
inline constexpr double kPseudoConfidenceNotCrossing = 0.25;

enum class BackendKind { RemoteChat, MockOracle };

[[nodiscard]] std::string_view to_string(BackendKind kind);

struct BackendDescriptor {
    BackendKind kind = BackendKind::MockOracle;
    std::optional<std::string> endpoint;
    std::string model_name = "mock-oracle";
    bool supports_logprobs = true;
    int max_inflight = 4;

    /// Stable identifier used in cache keys and reports.
    [[nodiscard]] std::string id() const;
};

void validate(const BackendDescriptor& descriptor);

class TransportError : public RuntimeFailure {
  public:
    TransportError(int status, bool retriable, const std::string& detail)
        : RuntimeFailure("transport error (status " + std::to_string(status) + "): " + detail),
          status_(status),
          retriable_(retriable) {}
    [[nodiscard]] int status() const noexcept { return status_; }
    [[nodiscard]] bool retriable() const noexcept { return retriable_; }

  private:
    int status_;
    bool retriable_;
};

class RateLimited : public TransportError {
  public:
    explicit RateLimited(std::chrono::milliseconds retry_after)
        : TransportError(429, true, "rate limited"), retry_after_(retry_after) {}
    [[nodiscard]] std::chrono::milliseconds retry_after() const noexcept { return retry_after_; }

  private:
    std::chrono::milliseconds retry_after_;
};

class ParseFailure : public RuntimeFailure {
  public:
    explicit ParseFailure(std::string raw_text)
        : RuntimeFailure("could not extract a YES/NO answer"), raw_text_(std::move(raw_text)) {}
    [[nodiscard]] const std::string& raw_text() const noexcept { return raw_text_; }

  private:
    std::string raw_text_;
};

/// Extracts the crossing decision from free text. Scans lines from the last
/// for "answer:" followed by yes/no (case-insensitive); otherwise accepts a
/// lone yes/no word or a lone "will cross"/"will not cross" phrase.
[[nodiscard]] Label parse_label(std::string_view raw_text);
[[nodiscard]] std::optional<Label> try_parse_label(std::string_view raw_text) noexcept;

/// A vision-language model endpoint. Implementations must be safe for
/// concurrent predict() calls up to descriptor().max_inflight.
class VisionBackend {
  public:
    virtual ~VisionBackend() = default;
    /// Throws TransportError, RateLimited or ParseFailure.
    [[nodiscard]] virtual Prediction predict(const VisionQuery& query) = 0;
    [[nodiscard]] virtual BackendDescriptor descriptor() const = 0;
};

/// Token bucket; acquire() blocks until a token is available.
class TokenBucket {
  public:
    using Clock = std::chrono::steady_clock;

    TokenBucket(double rate_per_second, double burst);
    void acquire();

  private:
    std::mutex mutex_;
    double rate_;
    double capacity_;
    double tokens_;
    Clock::time_point last_;
};

/// Enforces the in-flight cap and, when rate > 0, a request rate on an inner backend.
class GatedBackend final : public VisionBackend {
  public:
    GatedBackend(std::shared_ptr<VisionBackend> inner, double requests_per_second = 0.0);

    [[nodiscard]] Prediction predict(const VisionQuery& query) override;
    [[nodiscard]] BackendDescriptor descriptor() const override { return inner_->descriptor(); }
    [[nodiscard]] int peak_inflight() const noexcept { return peak_; }

  private:
    std::shared_ptr<VisionBackend> inner_;
    std::counting_semaphore<1024> slots_;
    std::optional<TokenBucket> bucket_;
    std::mutex mutex_;
    int inflight_ = 0;
    int peak_ = 0;
};

struct RetryPolicy {
    int max_attempts = 5;
    std::chrono::milliseconds base_delay{1000};
    double factor = 2.0;
    /// Fraction of the delay added as jitter, drawn uniformly from [0, jitter].
    double jitter = 0.25;
};

using Sleeper = std::function<void(std::chrono::milliseconds)>;

/// Default sleeper; tests substitute a recording no-op.
void real_sleep(std::chrono::milliseconds delay);

/// Runs `attempt` until it succeeds, a non-retriable error is thrown, or
/// policy.max_attempts is reached. RateLimited waits at least retry_after.
template <typename Fn>
auto with_retries(const RetryPolicy& policy, const Sleeper& sleep, std::uint64_t jitter_seed, Fn&& attempt)
    -> decltype(attempt());

[[nodiscard]] std::chrono::milliseconds backoff_delay(const RetryPolicy& policy, int attempt,
                                                      std::uint64_t jitter_seed);

template <typename Fn>
auto with_retries(const RetryPolicy& policy, const Sleeper& sleep, std::uint64_t jitter_seed, Fn&& attempt)
    -> decltype(attempt()) {
    for (int i = 1;; ++i) {
        try {
            return attempt();
        } catch (const RateLimited& e) {
            if (i >= policy.max_attempts) throw;
            sleep(std::max(e.retry_after(), backoff_delay(policy, i, jitter_seed)));
        } catch (const TransportError& e) {
            if (!e.retriable() || i >= policy.max_attempts) throw;
            sleep(backoff_delay(policy, i, jitter_seed));
        }
    }
}

}  // namespace intent_ape
