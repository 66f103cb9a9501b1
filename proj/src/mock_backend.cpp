#include "intent_ape/mock_backend.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>

#include "intent_ape/encoding.hpp"

namespace intent_ape {

std::vector<OracleKeyword> MockOracleConfig::default_weights() {
    return {
        {"posture", 0.8},     {"movement", 0.8}, {"orientation", 0.8}, {"crosswalk", 0.8},
        {"proximity to the", 0.8}, {"over the past", 0.6}, {"seconds", 0.6}, {"acting", -0.9},
        {"behaving", -0.9},   {"tendency", -0.9}, {"desire", -0.9},     {"feel", -0.9},
    };
}

double derived_difficulty(std::uint64_t seed, const std::string& sample_id) {
    const std::uint64_t h = mix_seed(seed, "difficulty:" + sample_id);
    const double unit = static_cast<double>(h >> 11) / static_cast<double>(1ULL << 53);
    return -2.0 + 4.0 * unit;
}

void MockOracleConfig::add_sample(const std::string& id, Label label, std::optional<double> difficulty) {
    const double d = difficulty.value_or(derived_difficulty(seed, id));
    if (!(d >= -2.0 && d <= 2.0)) {
        throw ValidationError("oracle difficulty for '" + id + "' must lie in [-2, 2]");
    }
    samples[id] = OracleTruth{label, d};
}

void MockOracleConfig::add_samples(const std::vector<Sample>& list) {
    for (const auto& s : list) {
        add_sample(s.id, s.label);
    }
}

double logistic(double x) noexcept {
    return 1.0 / (1.0 + std::exp(-x));
}

double keyword_score(const MockOracleConfig& config, std::string_view user_text) {
    std::string text(user_text);
    std::transform(text.begin(), text.end(), text.begin(),
                   [](char c) { return static_cast<char>(std::tolower(static_cast<unsigned char>(c))); });
    double s = config.bias;
    for (const auto& kw : config.weights) {
        std::string term = kw.term;
        std::transform(term.begin(), term.end(), term.begin(),
                       [](char c) { return static_cast<char>(std::tolower(static_cast<unsigned char>(c))); });
        if (!term.empty() && text.find(term) != std::string::npos) {
            s += kw.weight;
        }
    }
    return s;
}

Prediction mock_predict(const MockOracleConfig& config, const VisionQuery& query) {
    validate(query);
    auto it = config.samples.find(query.sample_id);
    if (it == config.samples.end()) {
        throw ValidationError("mock oracle has no truth for sample '" + query.sample_id + "'");
    }
    const auto& truth = it->second;
    const double p_correct = logistic(keyword_score(config, query.user_text) - truth.difficulty);

    Prediction out;
    out.prob_crossing = truth.label == Label::Crossing ? p_correct : 1.0 - p_correct;
    out.label = label_for(out.prob_crossing);
    out.has_true_logprobs = true;
    out.latency_ms = 0;
    char buf[96];
    std::snprintf(buf, sizeof buf, "Mock oracle estimate p(crossing)=%.6f\nAnswer: %s", out.prob_crossing,
                  out.label == Label::Crossing ? "YES" : "NO");
    out.raw_text = buf;
    return out;
}

BackendDescriptor MockOracleBackend::descriptor() const {
    BackendDescriptor d;
    d.kind = BackendKind::MockOracle;
    d.model_name = config_.model_name;
    d.supports_logprobs = true;
    d.max_inflight = max_inflight_;
    return d;
}

}  // namespace intent_ape
