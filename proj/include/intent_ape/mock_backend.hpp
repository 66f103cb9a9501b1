#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "intent_ape/backend.hpp"

namespace intent_ape {

struct OracleKeyword {
    std::string term;
    double weight = 0.0;
};

struct OracleTruth {
    Label label = Label::NotCrossing;
    /// d_i in [-2, 2]; larger is harder.
    double difficulty = 0.0;
};

/// Planted-weight oracle. For a prompt whose user text matches keyword set K
/// (case-insensitive substring, each term counted once):
///   s = sum_{k in K} w(k) + bias,  p_correct = logistic(s - d_i)
/// and prob_crossing is p_correct for Crossing samples, 1 - p_correct otherwise.
struct MockOracleConfig {
    std::vector<OracleKeyword> weights = default_weights();
    double bias = -1.0;
    std::uint64_t seed = 0;
    std::map<std::string, OracleTruth> samples;
    std::string model_name = "mock-oracle";

    [[nodiscard]] static std::vector<OracleKeyword> default_weights();

    /// Registers a sample; without an explicit difficulty one is derived from (seed, id).
    void add_sample(const std::string& id, Label label, std::optional<double> difficulty = std::nullopt);
    void add_samples(const std::vector<Sample>& samples);
};

[[nodiscard]] double logistic(double x) noexcept;

/// Difficulty in [-2, 2] derived deterministically from (seed, sample id).
[[nodiscard]] double derived_difficulty(std::uint64_t seed, const std::string& sample_id);

/// s before subtracting difficulty.
[[nodiscard]] double keyword_score(const MockOracleConfig& config, std::string_view user_text);

[[nodiscard]] Prediction mock_predict(const MockOracleConfig& config, const VisionQuery& query);

class MockOracleBackend final : public VisionBackend {
  public:
    explicit MockOracleBackend(MockOracleConfig config, int max_inflight = 4)
        : config_(std::move(config)), max_inflight_(max_inflight) {}

    [[nodiscard]] Prediction predict(const VisionQuery& query) override { return mock_predict(config_, query); }
    [[nodiscard]] BackendDescriptor descriptor() const override;
    [[nodiscard]] const MockOracleConfig& config() const noexcept { return config_; }

  private:
    MockOracleConfig config_;
    int max_inflight_;
};

}  // namespace intent_ape
