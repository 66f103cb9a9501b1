#pragma once

#include <exception>
#include <filesystem>
#include <memory>
#include <ostream>
#include <string>
#include <vector>

#include "intent_ape/config.hpp"
#include "intent_ape/dataset.hpp"
#include "intent_ape/metrics.hpp"
#include "intent_ape/optimizer.hpp"

namespace intent_ape {

/// 0 success, 1 configuration error, 2 runtime/backend error, 3 validation error.
[[nodiscard]] int exit_code_for(const std::exception& error) noexcept;

struct IngestResult {
    std::filesystem::path manifest;
    std::size_t validation = 0;
    std::size_t test = 0;
    ImportStats stats;
};

[[nodiscard]] IngestResult cmd_ingest(const std::filesystem::path& source, DatasetId adapter,
                                      const std::filesystem::path& out, const ImportOptions& options = {});

/// Backend, paraphraser and caches assembled from a RunConfig.
struct Runtime {
    std::shared_ptr<VisionBackend> backend;
    std::unique_ptr<Paraphraser> paraphraser;
    std::unique_ptr<EvaluationCache> cache;
    std::unique_ptr<PayloadCache> payloads;
    RenderOptions render;
    double temperature = 0.0;

    [[nodiscard]] EvalContext context() const;
};

/// Builds the runtime. Mock backends learn the truth of every sample in
/// `samples`; remote backends read the API key unless replaying.
[[nodiscard]] Runtime make_runtime(const RunConfig& config, const std::vector<Sample>& samples);

/// Every sample of the configured manifests, both splits, ordered by id.
[[nodiscard]] std::vector<Sample> load_all_samples(const RunConfig& config);

/// Runs the staged search and writes a run directory:
///   config.json, ledgers/<stage>.jsonl, curves/<stage>.csv, best_prompts.json,
///   summary.md and timings.json. Returns the run directory.
[[nodiscard]] std::filesystem::path cmd_optimize(const RunConfig& config, std::ostream* log = nullptr);

struct EvaluationRow {
    std::string prompt;  // candidate id, or "mean of top N"
    std::string stage;
    DatasetId dataset = DatasetId::Custom;
    MetricSummary metrics;
    std::size_t excluded = 0;
    bool averaged = false;

    friend bool operator==(const EvaluationRow&, const EvaluationRow&) = default;
};

struct EvaluationOutput {
    std::filesystem::path directory;
    std::vector<EvaluationRow> rows;
    std::string model_name;
    bool has_true_logprobs = true;
};

/// Evaluates the top-K prompts of the deepest stage that can render each
/// test dataset; writes per-sample CSVs, report.md and report.json. The
/// output directory defaults to `<run dir>/evaluation`.
[[nodiscard]] EvaluationOutput cmd_evaluate(const RunConfig& config, const std::filesystem::path& best_prompts,
                                            const std::filesystem::path& out_dir = {});

/// Rebuilds curves, best_prompts.json and summary.md from the run's ledgers.
void cmd_report(const std::filesystem::path& run_dir);

/// Writes the annotated frames that would be sent for each sample to out/<sample id>/NN.png.
[[nodiscard]] std::size_t cmd_render_frames(const RunConfig& config, const std::vector<std::string>& sample_ids,
                                            const std::filesystem::path& out);

/// Stage order used for run directories and reports.
[[nodiscard]] const std::vector<TemplateLevel>& stage_order();

}  // namespace intent_ape
