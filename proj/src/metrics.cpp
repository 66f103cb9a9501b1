#include "intent_ape/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

namespace intent_ape {

namespace {

MetricValue ratio(std::size_t num, std::size_t den) {
    if (den == 0) {
        return {0.0, true};
    }
    return {static_cast<double>(num) / static_cast<double>(den), false};
}

std::pair<std::size_t, std::size_t> class_counts(std::span<const ScoredLabel> scored) {
    std::size_t pos = 0;
    for (const auto& s : scored) {
        pos += s.second == Label::Crossing;
    }
    return {pos, scored.size() - pos};
}

std::string two_decimals(double v) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

}  // namespace

ConfusionCounts confusion(std::span<const LabelPair> pairs) {
    if (pairs.empty()) {
        throw EmptyEvaluation();
    }
    ConfusionCounts c;
    for (const auto& [predicted, truth] : pairs) {
        const Label p = predicted.value_or(opposite(truth));
        if (truth == Label::Crossing) {
            (p == Label::Crossing ? c.tp : c.fn) += 1;
        } else {
            (p == Label::Crossing ? c.fp : c.tn) += 1;
        }
    }
    return c;
}

MetricValue precision(const ConfusionCounts& c) { return ratio(c.tp, c.tp + c.fp); }
MetricValue recall(const ConfusionCounts& c) { return ratio(c.tp, c.tp + c.fn); }
MetricValue accuracy(const ConfusionCounts& c) { return ratio(c.tp + c.tn, c.total()); }

double f1_from(double pr, double re) {
    return pr + re > 0 ? 2.0 * pr * re / (pr + re) : 0.0;
}

MetricValue f1_score(const ConfusionCounts& c) {
    const auto pr = precision(c);
    const auto re = recall(c);
    if (pr.value + re.value == 0) {
        return {0.0, true};
    }
    return {f1_from(pr.value, re.value), pr.degenerate || re.degenerate};
}

double auc(std::span<const ScoredLabel> scored) {
    const auto [n_pos, n_neg] = class_counts(scored);
    if (n_pos == 0 || n_neg == 0) {
        throw SingleClass();
    }
    // Sort once and count, per negative, positives strictly above and tied.
    std::vector<double> negatives;
    std::vector<double> positives;
    for (const auto& [p, y] : scored) {
        (y == Label::Crossing ? positives : negatives).push_back(p);
    }
    std::sort(positives.begin(), positives.end());
    double wins = 0.0;
    for (double neg : negatives) {
        const auto lo = std::lower_bound(positives.begin(), positives.end(), neg);
        const auto hi = std::upper_bound(positives.begin(), positives.end(), neg);
        wins += static_cast<double>(positives.end() - hi) + 0.5 * static_cast<double>(hi - lo);
    }
    return wins / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

double auc_trapezoid(std::span<const ScoredLabel> scored) {
    const auto [n_pos, n_neg] = class_counts(scored);
    if (n_pos == 0 || n_neg == 0) {
        throw SingleClass();
    }
    std::vector<ScoredLabel> sorted(scored.begin(), scored.end());
    std::sort(sorted.begin(), sorted.end(), [](const ScoredLabel& a, const ScoredLabel& b) { return a.first > b.first; });
    // Integer counts keep the area exact; normalise once at the end.
    double area = 0.0;
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t i = 0;
    while (i < sorted.size()) {
        const double threshold = sorted[i].first;
        std::size_t tp_step = 0;
        std::size_t fp_step = 0;
        while (i < sorted.size() && sorted[i].first == threshold) {
            (sorted[i].second == Label::Crossing ? tp_step : fp_step) += 1;
            ++i;
        }
        area += static_cast<double>(fp_step) * (2.0 * static_cast<double>(tp) + static_cast<double>(tp_step)) / 2.0;
        tp += tp_step;
        fp += fp_step;
    }
    return area / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

MetricSummary summarize(std::span<const SampleResult> results) {
    if (results.empty()) {
        throw EmptyEvaluation();
    }
    std::vector<LabelPair> pairs;
    std::vector<ScoredLabel> scored;
    for (const auto& r : results) {
        pairs.emplace_back(r.predicted, r.label);
        scored.emplace_back(r.prob_crossing, r.label);
    }
    MetricSummary s;
    s.counts = confusion(pairs);
    s.n = results.size();
    const auto acc = accuracy(s.counts);
    const auto pr = precision(s.counts);
    const auto re = recall(s.counts);
    const auto f1 = f1_score(s.counts);
    s.acc = acc.value;
    s.precision = pr.value;
    s.recall = re.value;
    s.f1 = f1.value;
    s.degenerate = acc.degenerate || pr.degenerate || re.degenerate || f1.degenerate;
    const auto [n_pos, n_neg] = class_counts(scored);
    if (n_pos > 0 && n_neg > 0) {
        s.auc = auc(scored);
    } else {
        s.degenerate = true;
    }
    return s;
}

MetricReport make_report(std::span<const SampleResult> results, const std::string& model_name) {
    MetricReport report;
    report.model_name = model_name;
    report.overall = summarize(results);
    std::map<DatasetId, std::vector<SampleResult>> groups;
    for (const auto& r : results) {
        groups[r.dataset].push_back(r);
        report.has_true_logprobs = report.has_true_logprobs && r.has_true_logprobs;
    }
    for (const auto& [dataset, group] : groups) {
        report.per_dataset[dataset] = summarize(group);
    }
    return report;
}

std::string per_sample_csv(std::span<const SampleResult> results) {
    std::ostringstream out;
    out << "sample_id,dataset,prob_crossing,predicted,label,parse_ok\n";
    for (const auto& r : results) {
        char prob[32];
        std::snprintf(prob, sizeof prob, "%.6f", r.prob_crossing);
        out << r.sample_id << ',' << to_string(r.dataset) << ',' << prob << ','
            << (r.predicted ? std::string(to_string(*r.predicted)) : std::string("unparsed")) << ','
            << to_string(r.label) << ',' << (r.parse_ok() ? "true" : "false") << '\n';
    }
    return out.str();
}

std::string metrics_markdown_table(std::span<const ReportRow> rows) {
    std::ostringstream out;
    out << "| Prompt | Dataset | Acc | AUC | F1 | Pr | Re | n |\n";
    out << "|---|---|---|---|---|---|---|---|\n";
    for (const auto& row : rows) {
        const auto& m = row.metrics;
        out << "| " << row.name << " | " << row.dataset << " | " << two_decimals(m.acc) << " | "
            << (m.auc ? two_decimals(*m.auc) : std::string("n/a")) << " | " << two_decimals(m.f1) << " | "
            << two_decimals(m.precision) << " | " << two_decimals(m.recall) << " | " << m.n << " |\n";
    }
    return out.str();
}

MetricSummary mean_summary(std::span<const MetricSummary> summaries) {
    if (summaries.empty()) {
        throw EmptyEvaluation();
    }
    MetricSummary out;
    double auc_sum = 0.0;
    std::size_t auc_n = 0;
    for (const auto& s : summaries) {
        out.acc += s.acc;
        out.f1 += s.f1;
        out.precision += s.precision;
        out.recall += s.recall;
        out.n += s.n;
        out.degenerate = out.degenerate || s.degenerate;
        if (s.auc) {
            auc_sum += *s.auc;
            ++auc_n;
        }
    }
    const double k = static_cast<double>(summaries.size());
    out.acc /= k;
    out.f1 /= k;
    out.precision /= k;
    out.recall /= k;
    out.n = static_cast<std::size_t>(static_cast<double>(out.n) / k);
    if (auc_n == summaries.size()) {
        out.auc = auc_sum / static_cast<double>(auc_n);
    }
    return out;
}

}  // namespace intent_ape
