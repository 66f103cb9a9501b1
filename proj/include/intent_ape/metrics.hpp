#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "intent_ape/dataset.hpp"

namespace intent_ape {

class EmptyEvaluation : public RuntimeFailure {
  public:
    EmptyEvaluation() : RuntimeFailure("evaluation over zero samples") {}
};

class SingleClass : public ValidationError {
  public:
    SingleClass() : ValidationError("AUC needs at least one positive and one negative label") {}
};

/// Predicted label (nullopt when the answer could not be parsed) and ground truth.
using LabelPair = std::pair<std::optional<Label>, Label>;

/// Crossing is the positive class. An unparsed prediction is scored as the
/// opposite of the truth (fn for a Crossing sample, fp for a NotCrossing one).
struct ConfusionCounts {
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t tn = 0;
    std::size_t fn = 0;

    [[nodiscard]] std::size_t total() const noexcept { return tp + fp + tn + fn; }
    friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
};

[[nodiscard]] ConfusionCounts confusion(std::span<const LabelPair> pairs);

/// Ratio metric; zero denominators yield 0 with `degenerate` set.
struct MetricValue {
    double value = 0.0;
    bool degenerate = false;
};

[[nodiscard]] MetricValue precision(const ConfusionCounts& c);
[[nodiscard]] MetricValue recall(const ConfusionCounts& c);
[[nodiscard]] MetricValue f1_score(const ConfusionCounts& c);
[[nodiscard]] MetricValue accuracy(const ConfusionCounts& c);
/// Harmonic mean of already-computed precision and recall.
[[nodiscard]] double f1_from(double precision, double recall);

using ScoredLabel = std::pair<double, Label>;  // (prob_crossing, truth)

/// Mann-Whitney statistic: fraction of (positive, negative) pairs ranked
/// correctly, ties counting one half.
[[nodiscard]] double auc(std::span<const ScoredLabel> scored);
/// Area under the ROC curve traced over distinct thresholds, by trapezoids.
[[nodiscard]] double auc_trapezoid(std::span<const ScoredLabel> scored);

struct MetricSummary {
    double acc = 0.0;
    std::optional<double> auc;  // nullopt when only one class is present
    double f1 = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    std::size_t n = 0;
    ConfusionCounts counts;
    bool degenerate = false;
};

struct SampleResult {
    std::string sample_id;
    DatasetId dataset = DatasetId::Custom;
    double prob_crossing = 0.5;
    std::optional<Label> predicted;
    Label label = Label::NotCrossing;
    bool has_true_logprobs = false;

    [[nodiscard]] bool parse_ok() const noexcept { return predicted.has_value(); }
};

[[nodiscard]] MetricSummary summarize(std::span<const SampleResult> results);

struct MetricReport {
    MetricSummary overall;
    std::map<DatasetId, MetricSummary> per_dataset;
    std::string model_name;
    bool has_true_logprobs = true;
    std::string positive_class = "crossing";
};

[[nodiscard]] MetricReport make_report(std::span<const SampleResult> results, const std::string& model_name);

/// Columns: sample_id,dataset,prob_crossing,predicted,label,parse_ok
[[nodiscard]] std::string per_sample_csv(std::span<const SampleResult> results);

/// Two-decimal markdown table in the column order Acc, AUC, F1, Pr, Re.
struct ReportRow {
    std::string name;
    std::string dataset;
    MetricSummary metrics;
};
[[nodiscard]] std::string metrics_markdown_table(std::span<const ReportRow> rows);
/// Row whose every metric is the unweighted mean of the inputs' metrics.
[[nodiscard]] MetricSummary mean_summary(std::span<const MetricSummary> summaries);

}  // namespace intent_ape
