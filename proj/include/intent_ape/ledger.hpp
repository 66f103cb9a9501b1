#pragma once

#include <filesystem>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "intent_ape/error.hpp"

namespace intent_ape {

class MissingLedger : public ConfigError {
  public:
    explicit MissingLedger(const std::filesystem::path& path) : ConfigError("missing ledger: " + path.string()) {}
};

/// Append-only event log of one search. Records are JSON objects carrying at
/// least "type" (config, seed, perturb, eval, retain, converged) and
/// "iteration". Appends are serialized; the text form is one record per line.
class RunLedger {
  public:
    RunLedger() = default;
    explicit RunLedger(std::string stage) : stage_(std::move(stage)) {}
    RunLedger(const RunLedger& other);
    RunLedger& operator=(const RunLedger& other);

    void append(nlohmann::ordered_json record);

    [[nodiscard]] const std::string& stage() const noexcept { return stage_; }
    [[nodiscard]] std::vector<nlohmann::ordered_json> records() const;
    [[nodiscard]] std::vector<nlohmann::ordered_json> records_of(const std::string& type) const;
    [[nodiscard]] std::size_t size() const;

    [[nodiscard]] std::string to_jsonl() const;
    void write(const std::filesystem::path& path) const;
    [[nodiscard]] static RunLedger parse(const std::string& jsonl, std::string stage = {});
    [[nodiscard]] static RunLedger read(const std::filesystem::path& path, std::string stage = {});

  private:
    std::string stage_;
    mutable std::mutex mutex_;
    std::vector<nlohmann::ordered_json> records_;
};

struct CurvePoint {
    int iteration = 0;
    double best_f_score = 0.0;
    double best_f_exec = 0.0;
};

/// Best-so-far trace read from the ledger's retain records.
[[nodiscard]] std::vector<CurvePoint> curve(const RunLedger& ledger);
/// "iteration,best_f_score,best_f_exec" followed by one row per iteration.
[[nodiscard]] std::string curve_csv(const RunLedger& ledger);

struct LedgerTotals {
    std::size_t candidates = 0;
    std::size_t backend_calls = 0;
    std::size_t cache_hits = 0;
    std::size_t excluded = 0;
    std::size_t parse_failures = 0;
    std::size_t failed_candidates = 0;
    int iterations = 0;  // number of retain records
    std::size_t eval_samples = 0;
};

[[nodiscard]] LedgerTotals totals(const RunLedger& ledger);

/// Stage outcome as recorded by the final "converged" record.
struct StageBest {
    std::string stage;
    std::string candidate;
    double f_exec = 0.0;
    double f_logprob = 0.0;
    double f_score = 0.0;
    int iterations = 0;
    std::string reason;
    nlohmann::ordered_json templates;
};

[[nodiscard]] std::optional<StageBest> stage_best(const RunLedger& ledger);

}  // namespace intent_ape
