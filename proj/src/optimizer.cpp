#include "intent_ape/optimizer.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <random>
#include <set>
#include <thread>

#include "intent_ape/encoding.hpp"

namespace intent_ape {

using json = nlohmann::ordered_json;

void validate(const ApeConfig& c) {
    if (!(c.alpha >= 0.0 && c.alpha <= 1.0)) throw ConfigError("alpha must lie in [0, 1]");
    if (c.iterations < 0) throw ConfigError("iterations must be >= 0");
    if (c.top_k < 1) throw ConfigError("top_k must be >= 1");
    if (c.perturb_per_parent < 0) throw ConfigError("perturb_per_parent must be >= 0");
    if (c.eval_samples < 0) throw ConfigError("eval_samples must be >= 0");
    if (c.convergence_patience < 1) throw ConfigError("convergence_patience must be >= 1");
    if (!(c.convergence_eps >= 0.0)) throw ConfigError("convergence_eps must be >= 0");
}

double exec_accuracy(std::span<const LabelPair> predictions) {
    if (predictions.empty()) throw EmptyEvaluation();
    std::size_t correct = 0;
    for (const auto& [predicted, truth] : predictions) {
        correct += predicted.has_value() && *predicted == truth;
    }
    return static_cast<double>(correct) / static_cast<double>(predictions.size());
}

double avg_logprob(std::span<const double> probabilities) {
    if (probabilities.empty()) throw EmptyEvaluation();
    double sum = 0.0;
    for (double p : probabilities) {
        sum += std::log(std::max(p, kProbabilityFloor));
    }
    return sum / static_cast<double>(probabilities.size());
}

double score(double alpha, double f_exec, double f_logprob) {
    return alpha * f_exec + (1.0 - alpha) * f_logprob;
}

std::optional<SampleOutcome> EvaluationCache::find(const Key& key) const {
    std::lock_guard lock(mutex_);
    auto it = entries_.find(key);
    if (it == entries_.end()) return std::nullopt;
    return it->second;
}

void EvaluationCache::store(const Key& key, const SampleOutcome& outcome) {
    std::lock_guard lock(mutex_);
    entries_.insert_or_assign(key, outcome);
}

std::size_t EvaluationCache::size() const {
    std::lock_guard lock(mutex_);
    return entries_.size();
}

std::shared_ptr<const VisualPayload> PayloadCache::get(const Sample& sample) {
    {
        std::lock_guard lock(mutex_);
        auto it = entries_.find(sample.id);
        if (it != entries_.end()) return it->second;
    }
    auto built = std::make_shared<const VisualPayload>(build_visual_payload(sample, {}, settings_));
    std::lock_guard lock(mutex_);
    return entries_.try_emplace(sample.id, std::move(built)).first->second;
}

namespace {

std::string delivery_tag(const RenderOptions& options) {
    return options.role_delivery == RoleDelivery::SystemMessage ? "system" : "prepend";
}

double true_label_probability(const SampleOutcome& outcome, Label truth) {
    if (!outcome.predicted) return kProbabilityFloor;
    return truth == Label::Crossing ? outcome.prob_crossing : 1.0 - outcome.prob_crossing;
}

}  // namespace

SampleSweep run_samples(const PromptStack& stack, std::span<const Sample> samples, const EvalContext& context) {
    if (context.backend == nullptr || context.payloads == nullptr) {
        throw ConfigError("evaluation context needs a backend and a payload cache");
    }
    SampleSweep sweep;
    for (const auto& s : samples) {
        if (renderable(stack, s)) {
            sweep.scored.push_back(&s);
        } else {
            ++sweep.excluded;
        }
    }
    std::sort(sweep.scored.begin(), sweep.scored.end(), [](const Sample* a, const Sample* b) { return a->id < b->id; });
    if (sweep.scored.empty()) {
        throw AllSamplesExcluded(stack.id());
    }

    const auto descriptor = context.backend->descriptor();
    const std::string backend_id = descriptor.id();
    const std::string hash = stack.content_hash() + ":" + delivery_tag(context.render);

    sweep.outcomes.resize(sweep.scored.size());
    std::vector<std::size_t> misses;
    for (std::size_t i = 0; i < sweep.scored.size(); ++i) {
        std::optional<SampleOutcome> hit;
        if (context.cache != nullptr) {
            hit = context.cache->find({hash, sweep.scored[i]->id, backend_id});
        }
        if (hit) {
            sweep.outcomes[i] = *hit;
            ++sweep.cache_hits;
        } else {
            misses.push_back(i);
        }
    }

    std::atomic<std::size_t> next{0};
    std::atomic<std::size_t> calls{0};
    std::atomic<bool> abort{false};
    std::mutex error_mutex;
    std::exception_ptr first_error;
    std::optional<std::string> transport_error;

    auto worker = [&] {
        while (!abort.load()) {
            const std::size_t m = next.fetch_add(1);
            if (m >= misses.size()) return;
            const std::size_t i = misses[m];
            const Sample& sample = *sweep.scored[i];
            try {
                const auto rendered = render(stack, sample, context.render);
                VisionQuery query;
                query.system_text = rendered.system_text;
                query.user_text = rendered.user_text;
                query.payload = context.payloads->get(sample);
                query.temperature = context.temperature;
                query.request_logprobs = descriptor.supports_logprobs;
                query.sample_id = sample.id;
                SampleOutcome outcome;
                calls.fetch_add(1);
                try {
                    const auto prediction = context.backend->predict(query);
                    outcome.predicted = prediction.label;
                    outcome.prob_crossing = prediction.prob_crossing;
                    outcome.has_true_logprobs = prediction.has_true_logprobs;
                } catch (const ParseFailure&) {
                    outcome.predicted.reset();
                    outcome.prob_crossing = 0.5;
                }
                sweep.outcomes[i] = outcome;
                if (context.cache != nullptr) {
                    context.cache->store({hash, sample.id, backend_id}, outcome);
                }
            } catch (const TransportError& e) {
                std::lock_guard lock(error_mutex);
                if (!transport_error) transport_error = e.what();
                abort.store(true);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
                abort.store(true);
            }
        }
    };

    const std::size_t workers =
        std::min<std::size_t>(misses.size(), static_cast<std::size_t>(std::max(1, descriptor.max_inflight)));
    if (workers <= 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        pool.reserve(workers);
        for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
    }
    sweep.backend_calls = calls.load();
    if (first_error) {
        std::rethrow_exception(first_error);
    }
    if (transport_error) {
        sweep.transport_error = transport_error;
        return sweep;
    }
    for (const auto& o : sweep.outcomes) {
        sweep.parse_failures += !o.predicted.has_value();
    }
    return sweep;
}

Candidate evaluate_candidate(const PromptStack& stack, std::span<const Sample> samples, const EvalContext& context,
                             double alpha) {
    Candidate c{.stack = stack, .origin = {}, .error = {}, .counts = {}};
    const SampleSweep sweep = run_samples(stack, samples, context);
    if (sweep.transport_error) {
        c.status = CandidateStatus::Failed;
        c.error = *sweep.transport_error;
        c.excluded = sweep.excluded;
        c.backend_calls = sweep.backend_calls;
        c.cache_hits = sweep.cache_hits;
        return c;
    }

    std::vector<LabelPair> pairs;
    std::vector<double> probabilities;
    pairs.reserve(sweep.scored.size());
    probabilities.reserve(sweep.scored.size());
    for (std::size_t i = 0; i < sweep.scored.size(); ++i) {
        const Label truth = sweep.scored[i]->label;
        pairs.emplace_back(sweep.outcomes[i].predicted, truth);
        probabilities.push_back(true_label_probability(sweep.outcomes[i], truth));
    }
    c.f_exec = exec_accuracy(pairs);
    c.f_logprob = avg_logprob(probabilities);
    c.f_score = score(alpha, c.f_exec, c.f_logprob);
    c.eval_count = static_cast<int>(sweep.scored.size());
    c.excluded = sweep.excluded;
    c.backend_calls = sweep.backend_calls;
    c.cache_hits = sweep.cache_hits;
    c.parse_failures = sweep.parse_failures;
    c.counts = confusion(pairs);
    return c;
}

std::vector<Candidate> select_top_k(std::vector<Candidate> candidates, int k) {
    if (k < 1) throw ValidationError("top_k must be >= 1");
    std::erase_if(candidates, [](const Candidate& c) { return c.status == CandidateStatus::Failed; });
    std::vector<std::pair<std::string, std::size_t>> keyed;
    keyed.reserve(candidates.size());
    for (std::size_t i = 0; i < candidates.size(); ++i) keyed.emplace_back(candidates[i].id(), i);
    std::sort(keyed.begin(), keyed.end(), [&](const auto& a, const auto& b) {
        const auto& x = candidates[a.second];
        const auto& y = candidates[b.second];
        if (x.f_score != y.f_score) return x.f_score > y.f_score;
        if (x.f_exec != y.f_exec) return x.f_exec > y.f_exec;
        return a.first < b.first;
    });
    std::vector<Candidate> out;
    const std::size_t n = std::min<std::size_t>(keyed.size(), static_cast<std::size_t>(k));
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) out.push_back(std::move(candidates[keyed[i].second]));
    return out;
}

std::vector<Sample> stratified_subsample(std::span<const Sample> samples, int n, std::uint64_t seed) {
    std::vector<Sample> all(samples.begin(), samples.end());
    std::sort(all.begin(), all.end(), [](const Sample& a, const Sample& b) { return a.id < b.id; });
    if (n <= 0 || static_cast<std::size_t>(n) >= all.size()) {
        return all;
    }
    std::vector<Sample> pos;
    std::vector<Sample> neg;
    for (auto& s : all) (s.label == Label::Crossing ? pos : neg).push_back(std::move(s));

    const double share = static_cast<double>(pos.size()) / static_cast<double>(pos.size() + neg.size());
    auto take_pos = static_cast<std::size_t>(std::llround(share * n));
    take_pos = std::min(take_pos, pos.size());
    std::size_t take_neg = static_cast<std::size_t>(n) - take_pos;
    if (take_neg > neg.size()) {
        take_neg = neg.size();
        take_pos = static_cast<std::size_t>(n) - take_neg;
    }

    std::mt19937_64 rng(mix_seed(seed, "subsample"));
    auto draw = [&](std::vector<Sample>& group, std::size_t k) {
        // Partial Fisher-Yates with modulo reduction; stable across standard libraries.
        for (std::size_t i = 0; i < k; ++i) {
            const std::size_t j = i + static_cast<std::size_t>(rng() % (group.size() - i));
            std::swap(group[i], group[j]);
        }
        group.resize(k);
    };
    draw(pos, take_pos);
    draw(neg, take_neg);
    std::vector<Sample> out;
    out.reserve(static_cast<std::size_t>(n));
    for (auto& s : pos) out.push_back(std::move(s));
    for (auto& s : neg) out.push_back(std::move(s));
    std::sort(out.begin(), out.end(), [](const Sample& a, const Sample& b) { return a.id < b.id; });
    return out;
}

json stack_to_json(const PromptStack& stack) {
    json out = json::array();
    auto add = [&](const PromptTemplate& t) {
        json entry{{"id", t.id}, {"level", std::string(to_string(t.level))}, {"text", t.text}};
        if (!t.question.empty()) entry["question"] = t.question;
        out.push_back(std::move(entry));
    };
    add(stack.role());
    if (stack.physical()) add(*stack.physical());
    if (stack.dynamics()) add(*stack.dynamics());
    return out;
}

PromptStack stack_from_json(const json& templates) {
    if (!templates.is_array()) throw SchemaError("templates", "expected an array");
    std::vector<PromptTemplate> list;
    for (const auto& entry : templates) {
        PromptTemplate t;
        t.id = entry.at("id").get<std::string>();
        const auto level = parse_template_level(entry.at("level").get<std::string>());
        if (!level) throw SchemaError("templates.level", "unknown level");
        t.level = *level;
        t.text = entry.at("text").get<std::string>();
        t.question = entry.value("question", std::string());
        list.push_back(std::move(t));
    }
    return PromptStack::compose(list);
}

namespace {

json backend_json(const BackendDescriptor& d) {
    json out{{"kind", std::string(to_string(d.kind))}, {"model_name", d.model_name}};
    if (d.endpoint) out["endpoint"] = *d.endpoint;
    out["supports_logprobs"] = d.supports_logprobs;
    out["max_inflight"] = d.max_inflight;
    return out;
}

json ape_json(const ApeConfig& c) {
    return {{"alpha", c.alpha},
            {"iterations", c.iterations},
            {"top_k", c.top_k},
            {"perturb_per_parent", c.perturb_per_parent},
            {"eval_samples", c.eval_samples},
            {"convergence_patience", c.convergence_patience},
            {"convergence_eps", c.convergence_eps},
            {"seed", c.seed}};
}

json eval_record(int iteration, const Candidate& c, const char* status) {
    json r{{"type", "eval"},
           {"iteration", iteration},
           {"candidate", c.id()},
           {"status", status},
           {"f_exec", c.f_exec},
           {"f_logprob", c.f_logprob},
           {"f_score", c.f_score},
           {"n", c.eval_count},
           {"excluded", c.excluded},
           {"backend_calls", c.backend_calls},
           {"cache_hits", c.cache_hits},
           {"parse_failures", c.parse_failures},
           {"tp", c.counts.tp},
           {"fp", c.counts.fp},
           {"tn", c.counts.tn},
           {"fn", c.counts.fn}};
    if (!c.error.empty()) r["error"] = c.error;
    return r;
}

// Template ids of perturbations: the seed template's id, then "~<iteration>.<n>".
std::string variant_id(const std::string& parent_template_id, int iteration, int index) {
    const auto base = parent_template_id.substr(0, parent_template_id.find('~'));
    return base + "~" + std::to_string(iteration) + "." + std::to_string(index);
}

std::vector<PromptTemplate> perturb_newest(const PromptStack& stack, Paraphraser& paraphraser, int n,
                                           std::uint64_t seed, int iteration, int& counter) {
    const auto& newest = stack.newest();
    const auto texts = paraphraser.paraphrase(newest.text, n, mix_seed(seed, "text"));
    std::vector<std::string> questions;
    if (!newest.question.empty()) {
        questions = paraphraser.paraphrase(newest.question, n, mix_seed(seed, "question"));
    }
    std::vector<PromptTemplate> out;
    for (int j = 0; j < n; ++j) {
        PromptTemplate t = newest;
        t.id = variant_id(newest.id, iteration, counter++);
        t.text = texts.at(static_cast<std::size_t>(j));
        if (!questions.empty()) t.question = questions.at(static_cast<std::size_t>(j));
        validate(t);
        out.push_back(std::move(t));
    }
    return out;
}

}  // namespace

SearchResult monte_carlo_search(std::span<const PromptStack> seeds, std::span<const Sample> samples,
                                const EvalContext& context, Paraphraser& paraphraser, const ApeConfig& config,
                                const SearchSettings& settings) {
    validate(config);
    if (seeds.empty()) throw ValidationError("search needs at least one seed stack");
    if (samples.empty()) throw EmptyEvaluation();

    SearchResult result;
    result.ledger = RunLedger(settings.stage);
    auto& ledger = result.ledger;

    json config_record{{"type", "config"},
                       {"iteration", 0},
                       {"stage", settings.stage},
                       {"backend", backend_json(context.backend->descriptor())},
                       {"ape", ape_json(config)},
                       {"eval_samples", samples.size()},
                       {"seeds", seeds.size()},
                       {"paraphraser", paraphraser.id()},
                       {"role_delivery", delivery_tag(context.render)},
                       {"conventions",
                        {{"perturbation", "newest_level_only"},
                         {"log_probability", "answer_token_true_label"},
                         {"parse_failure", "incorrect_with_floor"},
                         {"probability_floor", kProbabilityFloor}}}};
    for (const auto& [key, value] : settings.annotations.items()) config_record[key] = value;
    ledger.append(std::move(config_record));

    std::vector<Candidate> population;
    std::map<std::string, std::string> by_hash;  // content hash -> candidate id

    // Evaluates and records one stack; returns false when it was not admitted.
    auto admit = [&](const PromptStack& stack, const CandidateOrigin& origin) {
        const auto hash = stack.content_hash();
        Candidate c = evaluate_candidate(stack, samples, context, config.alpha);
        c.origin = origin;
        const auto dup = by_hash.find(hash);
        if (c.status == CandidateStatus::Failed) {
            ledger.append(eval_record(origin.iteration, c, "failed"));
            return false;
        }
        if (dup != by_hash.end()) {
            auto record = eval_record(origin.iteration, c, "duplicate");
            record["duplicate_of"] = dup->second;
            ledger.append(std::move(record));
            return true;
        }
        ledger.append(eval_record(origin.iteration, c, "ok"));
        by_hash.emplace(hash, c.id());
        population.push_back(std::move(c));
        return true;
    };

    auto retain = [&](int iteration) {
        auto top = select_top_k(population, config.top_k);
        json ids = json::array();
        for (const auto& c : top) ids.push_back(c.id());
        ledger.append({{"type", "retain"},
                       {"iteration", iteration},
                       {"candidate", top.front().id()},
                       {"retained", ids},
                       {"best_f_score", top.front().f_score},
                       {"best_f_exec", top.front().f_exec},
                       {"population", population.size()}});
        return top;
    };

    using Clock = std::chrono::steady_clock;
    auto started = Clock::now();
    auto lap = [&] {
        const auto now = Clock::now();
        result.iteration_seconds.push_back(std::chrono::duration<double>(now - started).count());
        started = now;
    };

    bool any_ok = false;
    std::string last_error;
    for (const auto& stack : seeds) {
        ledger.append({{"type", "seed"}, {"iteration", 0}, {"candidate", stack.id()}, {"templates", stack_to_json(stack)}});
        if (admit(stack, CandidateOrigin{true, {}, 0})) {
            any_ok = true;
        } else {
            last_error = "seed " + stack.id();
        }
    }
    if (!any_ok || population.empty()) throw IterationFailed(0, last_error);

    auto retained = retain(0);
    lap();
    int iterations_run = 1;
    double best = retained.front().f_score;
    int stall = 0;
    std::string reason = "iterations";

    for (int it = 1; it <= config.iterations; ++it) {
        if (config.perturb_per_parent == 0) {
            reason = "exhausted";
            break;
        }
        int counter = 0;
        int generated = 0;
        int failed = 0;
        for (const auto& parent : retained) {
            const std::uint64_t pseed =
                mix_seed(config.seed, settings.stage + ":" + std::to_string(it) + ":" + parent.id());
            std::vector<PromptTemplate> variants;
            try {
                variants = perturb_newest(parent.stack, paraphraser, config.perturb_per_parent, pseed, it, counter);
            } catch (const TransportError&) {
                throw;
            } catch (const RuntimeFailure& e) {
                // Too few distinct or placeholder-safe rewrites: this parent sits the iteration out.
                ledger.append({{"type", "perturb_failed"}, {"iteration", it}, {"parent", parent.id()}, {"error", e.what()}});
                continue;
            }
            for (const auto& v : variants) {
                const auto stack = parent.stack.with_newest(v);
                ledger.append({{"type", "perturb"},
                               {"iteration", it},
                               {"candidate", stack.id()},
                               {"parent", parent.id()},
                               {"templates", stack_to_json(stack)}});
                ++generated;
                if (!admit(stack, CandidateOrigin{false, parent.id(), it})) ++failed;
            }
        }
        if (generated == 0) {
            reason = "exhausted";
            break;
        }
        if (failed == generated) throw IterationFailed(it, "all " + std::to_string(generated) + " candidates failed");

        retained = retain(it);
        lap();
        ++iterations_run;
        const double improvement = retained.front().f_score - best;
        best = std::max(best, retained.front().f_score);
        stall = improvement < config.convergence_eps ? stall + 1 : 0;
        if (stall >= config.convergence_patience) {
            reason = "converged";
            break;
        }
    }

    result.ranked = select_top_k(population, static_cast<int>(population.size()));
    result.stop_reason = reason;
    const auto& top = result.ranked.front();
    const auto t = totals(ledger);
    ledger.append({{"type", "converged"},
                   {"iteration", iterations_run - 1},
                   {"candidate", top.id()},
                   {"reason", reason},
                   {"iterations", iterations_run},
                   {"f_exec", top.f_exec},
                   {"f_logprob", top.f_logprob},
                   {"f_score", top.f_score},
                   {"candidates", t.candidates},
                   {"backend_calls", t.backend_calls},
                   {"cache_hits", t.cache_hits},
                   {"templates", stack_to_json(top.stack)}});
    return result;
}

const StageResult* HierarchyResult::find(TemplateLevel level) const {
    for (const auto& s : stages) {
        if (s.level == level) return &s;
    }
    return nullptr;
}

namespace {

std::vector<PromptStack> cross(std::span<const Candidate> parents, const PromptPool& pool) {
    std::vector<PromptStack> out;
    for (const auto& p : parents) {
        for (const auto& t : pool.templates) out.push_back(p.stack.with(t));
    }
    return out;
}

std::vector<Candidate> head(const std::vector<Candidate>& ranked, int k) {
    return {ranked.begin(), ranked.begin() + std::min<std::ptrdiff_t>(k, static_cast<std::ptrdiff_t>(ranked.size()))};
}

}  // namespace

HierarchyResult run_hierarchy(const PoolSet& pools, std::span<const Sample> samples, const EvalContext& context,
                              Paraphraser& paraphraser, const ApeConfig& config, const SearchSettings& settings) {
    validate(config);
    if (samples.empty()) throw EmptyEvaluation();
    for (auto level : {TemplateLevel::Role, TemplateLevel::PhysicalCues, TemplateLevel::SpeedNumeric,
                       TemplateLevel::SpeedDescriptive, TemplateLevel::SpeedTimeConscious}) {
        validate(pools.at(level));
    }
    if (pools.role.templates.empty() || pools.physical.templates.empty()) {
        throw ValidationError("role and physical-cue pools must not be empty");
    }
    const auto subset = stratified_subsample(samples, config.eval_samples, config.seed);

    HierarchyResult out;
    auto run_stage = [&](TemplateLevel level, const std::vector<PromptStack>& seeds) -> const SearchResult& {
        SearchSettings s = settings;
        s.stage = std::string(level_tag(level));
        try {
            out.stages.push_back({level, monte_carlo_search(seeds, subset, context, paraphraser, config, s)});
        } catch (const Error& e) {
            throw Error(e.category(), "stage " + s.stage + ": " + e.what());
        }
        return out.stages.back().search;
    };

    std::vector<PromptStack> role_seeds;
    for (const auto& t : pools.role.templates) role_seeds.emplace_back(t);
    const auto top_roles = head(run_stage(TemplateLevel::Role, role_seeds).ranked, config.top_k);

    const auto top_physical =
        head(run_stage(TemplateLevel::PhysicalCues, cross(top_roles, pools.physical)).ranked, config.top_k);

    for (auto level : {TemplateLevel::SpeedNumeric, TemplateLevel::SpeedDescriptive, TemplateLevel::SpeedTimeConscious}) {
        const auto& pool = pools.at(level);
        if (pool.templates.empty()) continue;
        const auto probe = top_physical.front().stack.with(pool.templates.front());
        const bool any = std::any_of(subset.begin(), subset.end(), [&](const Sample& s) { return renderable(probe, s); });
        if (!any) continue;
        run_stage(level, cross(top_physical, pool));
    }
    return out;
}

std::string stage_table_markdown(std::span<const RunLedger> ledgers) {
    std::string out = "| Level | Best prompt | f_exec | f_logprob | f_score | Iterations | Stop |\n";
    out += "|---|---|---|---|---|---|---|\n";
    char row[160];
    for (const auto& ledger : ledgers) {
        const auto best = stage_best(ledger);
        if (!best) continue;
        std::snprintf(row, sizeof row, " | %.4f | %.4f | %.4f | %d | ", best->f_exec, best->f_logprob, best->f_score,
                      best->iterations);
        out += "| " + best->stage + " | `" + best->candidate + "`" + row + best->reason + " |\n";
    }
    return out;
}

TestsetEvaluation evaluate_testset(const PromptStack& stack, std::span<const Sample> samples,
                                   const EvalContext& context) {
    const auto sweep = run_samples(stack, samples, context);
    if (sweep.transport_error) {
        throw RuntimeFailure("test-set evaluation of " + stack.id() + " aborted: " + *sweep.transport_error);
    }
    TestsetEvaluation out;
    out.excluded = sweep.excluded;
    for (std::size_t i = 0; i < sweep.scored.size(); ++i) {
        const auto& s = *sweep.scored[i];
        const auto& o = sweep.outcomes[i];
        out.per_sample.push_back({s.id, s.dataset, o.prob_crossing, o.predicted, s.label, o.has_true_logprobs});
    }
    out.report = make_report(out.per_sample, context.backend->descriptor().model_name);
    return out;
}

}  // namespace intent_ape
