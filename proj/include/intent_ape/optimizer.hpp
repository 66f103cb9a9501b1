#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "intent_ape/backend.hpp"
#include "intent_ape/frames.hpp"
#include "intent_ape/ledger.hpp"
#include "intent_ape/metrics.hpp"
#include "intent_ape/paraphrase.hpp"
#include "intent_ape/templates.hpp"

namespace intent_ape {

/// Floor applied to true-label probabilities before taking the log.
inline constexpr double kProbabilityFloor = 1e-6;

struct ApeConfig {
    double alpha = 0.7;
    int iterations = 40;
    int top_k = 5;
    int perturb_per_parent = 3;
    /// 0 means every available validation sample.
    int eval_samples = 0;
    int convergence_patience = 6;
    double convergence_eps = 1e-3;
    std::uint64_t seed = 0;
};

void validate(const ApeConfig& config);

class AllSamplesExcluded : public ValidationError {
  public:
    explicit AllSamplesExcluded(const std::string& stack_id)
        : ValidationError("no sample can render stack '" + stack_id + "'") {}
};

class IterationFailed : public RuntimeFailure {
  public:
    IterationFailed(int iteration, const std::string& detail)
        : RuntimeFailure("every candidate failed in iteration " + std::to_string(iteration) + ": " + detail) {}
};

/// (ŷ, y) pairs; unparsed predictions count as incorrect.
[[nodiscard]] double exec_accuracy(std::span<const LabelPair> predictions);

/// Mean natural log of the true-label probability, floored at kProbabilityFloor.
[[nodiscard]] double avg_logprob(std::span<const double> true_label_probabilities);

[[nodiscard]] double score(double alpha, double f_exec, double f_logprob);

enum class CandidateStatus { Ok, Failed };

struct CandidateOrigin {
    bool seed = true;
    std::string parent;  // stack id of the parent when perturbed
    int iteration = 0;
};

struct Candidate {
    PromptStack stack;
    double f_exec = 0.0;
    double f_logprob = 0.0;
    double f_score = 0.0;
    int eval_count = 0;
    CandidateOrigin origin;
    CandidateStatus status = CandidateStatus::Ok;
    std::string error;

    std::size_t excluded = 0;
    std::size_t backend_calls = 0;
    std::size_t cache_hits = 0;
    std::size_t parse_failures = 0;
    ConfusionCounts counts;

    [[nodiscard]] std::string id() const { return stack.id(); }
};

/// Per-sample backend outcome. `predicted` is empty when the answer was unparseable.
struct SampleOutcome {
    std::optional<Label> predicted;
    double prob_crossing = 0.5;
    bool has_true_logprobs = false;
};

/// Thread-safe map from (stack content hash, sample id, backend id) to outcomes.
class EvaluationCache {
  public:
    using Key = std::tuple<std::string, std::string, std::string>;

    [[nodiscard]] std::optional<SampleOutcome> find(const Key& key) const;
    void store(const Key& key, const SampleOutcome& outcome);
    [[nodiscard]] std::size_t size() const;

  private:
    mutable std::mutex mutex_;
    std::map<Key, SampleOutcome> entries_;
};

/// Builds each sample's annotated frames once and shares them across prompts.
class PayloadCache {
  public:
    explicit PayloadCache(FrameSettings settings = {}) : settings_(settings) {}
    [[nodiscard]] std::shared_ptr<const VisualPayload> get(const Sample& sample);
    [[nodiscard]] const FrameSettings& settings() const noexcept { return settings_; }

  private:
    FrameSettings settings_;
    std::mutex mutex_;
    std::map<std::string, std::shared_ptr<const VisualPayload>> entries_;
};

/// Everything an evaluation needs besides the stack and samples.
struct EvalContext {
    VisionBackend* backend = nullptr;
    EvaluationCache* cache = nullptr;
    PayloadCache* payloads = nullptr;
    RenderOptions render;
    double temperature = 0.0;
};

/// Per-sample outcomes for every renderable sample, in ascending sample-id
/// order, plus call accounting. Transport errors end the sweep and are
/// reported in `transport_error`; anything else propagates.
struct SampleSweep {
    std::vector<const Sample*> scored;
    std::vector<SampleOutcome> outcomes;
    std::size_t excluded = 0;
    std::size_t backend_calls = 0;
    std::size_t cache_hits = 0;
    std::size_t parse_failures = 0;
    /// Set when a transport error (after retries) stopped the sweep early.
    std::optional<std::string> transport_error;
};

[[nodiscard]] SampleSweep run_samples(const PromptStack& stack, std::span<const Sample> samples,
                                      const EvalContext& context);

/// Renders, queries and aggregates. Transport errors mark the candidate Failed
/// instead of propagating; AllSamplesExcluded propagates.
[[nodiscard]] Candidate evaluate_candidate(const PromptStack& stack, std::span<const Sample> samples,
                                           const EvalContext& context, double alpha);

/// Ordered by f_score desc, f_exec desc, stack id asc; Failed candidates dropped.
[[nodiscard]] std::vector<Candidate> select_top_k(std::vector<Candidate> candidates, int k);

/// Seeded, label-stratified subset of `n` samples (all when n is 0 or covers the set), sorted by id.
[[nodiscard]] std::vector<Sample> stratified_subsample(std::span<const Sample> samples, int n, std::uint64_t seed);

struct SearchResult {
    std::vector<Candidate> ranked;  // every successful candidate, best first
    RunLedger ledger;
    std::string stop_reason;
    /// Wall-clock seconds per iteration; kept out of the ledger so ledgers stay reproducible.
    std::vector<double> iteration_seconds;

    [[nodiscard]] const Candidate& best() const { return ranked.at(0); }
};

struct SearchSettings {
    std::string stage = "R";
    /// Extra fields recorded in the config record (frame settings, conventions).
    nlohmann::ordered_json annotations = nlohmann::ordered_json::object();
};

[[nodiscard]] SearchResult monte_carlo_search(std::span<const PromptStack> seeds, std::span<const Sample> samples,
                                              const EvalContext& context, Paraphraser& paraphraser,
                                              const ApeConfig& config, const SearchSettings& settings = {});

/// JSON form of a stack's templates as stored in ledgers and best-prompt files.
[[nodiscard]] nlohmann::ordered_json stack_to_json(const PromptStack& stack);
[[nodiscard]] PromptStack stack_from_json(const nlohmann::ordered_json& templates);

// ---------------------------------------------------------------------------
// Staged hierarchy

struct StageResult {
    TemplateLevel level = TemplateLevel::Role;
    SearchResult search;
};

struct HierarchyResult {
    std::vector<StageResult> stages;  // R, B, then whichever of Ds, Dd, Dt ran

    [[nodiscard]] const StageResult* find(TemplateLevel level) const;
};

/// Stage 1 searches the role pool; stage 2 crosses its top K with the
/// physical-cue pool; stage 3 crosses stage 2's top K with each dynamics
/// pool. A dynamics stage runs only when at least one sample can render it.
[[nodiscard]] HierarchyResult run_hierarchy(const PoolSet& pools, std::span<const Sample> samples,
                                            const EvalContext& context, Paraphraser& paraphraser,
                                            const ApeConfig& config, const SearchSettings& settings = {});

/// Per-stage summary table (best prompt, scores, iterations) built from stage ledgers alone.
[[nodiscard]] std::string stage_table_markdown(std::span<const RunLedger> ledgers);

// ---------------------------------------------------------------------------
// Test-set evaluation

struct TestsetEvaluation {
    MetricReport report;
    std::vector<SampleResult> per_sample;
    std::size_t excluded = 0;
};

/// One prediction per renderable sample; unanswerable samples count as wrong.
[[nodiscard]] TestsetEvaluation evaluate_testset(const PromptStack& stack, std::span<const Sample> samples,
                                                 const EvalContext& context);

}  // namespace intent_ape
