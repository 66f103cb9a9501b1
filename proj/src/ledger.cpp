#include "intent_ape/ledger.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace intent_ape {

using json = nlohmann::ordered_json;

RunLedger::RunLedger(const RunLedger& other) {
    std::lock_guard lock(other.mutex_);
    stage_ = other.stage_;
    records_ = other.records_;
}

RunLedger& RunLedger::operator=(const RunLedger& other) {
    if (this != &other) {
        std::scoped_lock lock(mutex_, other.mutex_);
        stage_ = other.stage_;
        records_ = other.records_;
    }
    return *this;
}

void RunLedger::append(json record) {
    if (!record.is_object() || !record.contains("type") || !record.contains("iteration")) {
        throw ValidationError("ledger record needs 'type' and 'iteration'");
    }
    std::lock_guard lock(mutex_);
    records_.push_back(std::move(record));
}

std::vector<json> RunLedger::records() const {
    std::lock_guard lock(mutex_);
    return records_;
}

std::vector<json> RunLedger::records_of(const std::string& type) const {
    std::lock_guard lock(mutex_);
    std::vector<json> out;
    for (const auto& r : records_) {
        if (r.at("type") == type) out.push_back(r);
    }
    return out;
}

std::size_t RunLedger::size() const {
    std::lock_guard lock(mutex_);
    return records_.size();
}

std::string RunLedger::to_jsonl() const {
    std::lock_guard lock(mutex_);
    std::string out;
    for (const auto& r : records_) {
        out += r.dump();
        out += '\n';
    }
    return out;
}

void RunLedger::write(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw RuntimeFailure("cannot write ledger " + path.string());
    }
    out << to_jsonl();
}

RunLedger RunLedger::parse(const std::string& jsonl, std::string stage) {
    RunLedger ledger(std::move(stage));
    std::istringstream in(jsonl);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        try {
            ledger.append(json::parse(line));
        } catch (const json::exception& e) {
            throw ValidationError("ledger line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    if (ledger.stage_.empty()) {
        for (const auto& r : ledger.records_) {
            if (r.at("type") == "config" && r.contains("stage")) {
                ledger.stage_ = r.at("stage").get<std::string>();
                break;
            }
        }
    }
    return ledger;
}

RunLedger RunLedger::read(const std::filesystem::path& path, std::string stage) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw MissingLedger(path);
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse(buf.str(), std::move(stage));
}

std::vector<CurvePoint> curve(const RunLedger& ledger) {
    std::vector<CurvePoint> out;
    for (const auto& r : ledger.records_of("retain")) {
        out.push_back({r.at("iteration").get<int>(), r.at("best_f_score").get<double>(),
                       r.at("best_f_exec").get<double>()});
    }
    return out;
}

std::string curve_csv(const RunLedger& ledger) {
    std::string out = "iteration,best_f_score,best_f_exec\n";
    char row[96];
    for (const auto& p : curve(ledger)) {
        std::snprintf(row, sizeof row, "%d,%.6f,%.6f\n", p.iteration, p.best_f_score, p.best_f_exec);
        out += row;
    }
    return out;
}

LedgerTotals totals(const RunLedger& ledger) {
    LedgerTotals t;
    for (const auto& r : ledger.records()) {
        const auto& type = r.at("type");
        if (type == "eval") {
            ++t.candidates;
            t.backend_calls += r.at("backend_calls").get<std::size_t>();
            t.cache_hits += r.at("cache_hits").get<std::size_t>();
            t.excluded += r.at("excluded").get<std::size_t>();
            t.parse_failures += r.at("parse_failures").get<std::size_t>();
            t.failed_candidates += r.at("status") == "failed";
        } else if (type == "retain") {
            ++t.iterations;
        } else if (type == "config") {
            t.eval_samples = r.at("eval_samples").get<std::size_t>();
        }
    }
    return t;
}

std::optional<StageBest> stage_best(const RunLedger& ledger) {
    const auto done = ledger.records_of("converged");
    if (done.empty()) {
        return std::nullopt;
    }
    const auto& r = done.back();
    StageBest best;
    best.stage = ledger.stage();
    best.candidate = r.at("candidate").get<std::string>();
    best.f_exec = r.at("f_exec").get<double>();
    best.f_logprob = r.at("f_logprob").get<double>();
    best.f_score = r.at("f_score").get<double>();
    best.iterations = r.at("iterations").get<int>();
    best.reason = r.at("reason").get<std::string>();
    best.templates = r.at("templates");
    return best;
}

}  // namespace intent_ape
