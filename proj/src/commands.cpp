#include "intent_ape/commands.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "intent_ape/http_transport.hpp"
#include "intent_ape/mock_backend.hpp"
#include "intent_ape/remote_backend.hpp"

namespace intent_ape {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

int exit_code_for(const std::exception& error) noexcept {
    if (const auto* e = dynamic_cast<const Error*>(&error)) {
        switch (e->category()) {
            case ErrorCategory::Configuration: return 1;
            case ErrorCategory::Runtime: return 2;
            case ErrorCategory::Validation: return 3;
        }
    }
    return 2;
}

const std::vector<TemplateLevel>& stage_order() {
    static const std::vector<TemplateLevel> order{TemplateLevel::Role, TemplateLevel::PhysicalCues,
                                                  TemplateLevel::SpeedNumeric, TemplateLevel::SpeedDescriptive,
                                                  TemplateLevel::SpeedTimeConscious};
    return order;
}

namespace {

void write_text(const fs::path& path, const std::string& text) {
    fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw RuntimeFailure("cannot write " + path.string());
    out << text;
}

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw MissingFile(path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

std::string fixed(double v, int decimals = 4) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
    return buf;
}

fs::path fresh_run_dir(const RunConfig& config) {
    std::string name = config.run_name;
    if (name.empty()) {
        const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
        std::tm tm{};
        gmtime_r(&now, &tm);
        char buf[32];
        std::strftime(buf, sizeof buf, "run-%Y%m%dT%H%M%SZ", &tm);
        name = buf;
        fs::path candidate = config.output_dir / name;
        for (int n = 2; fs::exists(candidate); ++n) candidate = config.output_dir / (name + "-" + std::to_string(n));
        fs::create_directories(candidate);
        return candidate;
    }
    const fs::path dir = config.output_dir / name;
    fs::create_directories(dir);
    return dir;
}

std::shared_ptr<HttpTransport> make_transport(const RunConfig& config) {
    if (config.replay_dir) return std::make_shared<ReplayTransport>(*config.replay_dir);
    std::shared_ptr<HttpTransport> live =
        std::make_shared<HttplibTransport>(std::chrono::seconds(config.backend.timeout_s));
    if (config.backend.capture_dir) return std::make_shared<CaptureTransport>(live, *config.backend.capture_dir);
    return live;
}

}  // namespace

IngestResult cmd_ingest(const fs::path& source, DatasetId adapter, const fs::path& out, const ImportOptions& options) {
    IngestResult result;
    const auto manifest = import_annotations(source, adapter, options, &result.stats);
    validate(manifest);
    save_manifest(manifest, out);
    result.manifest = out;
    for (const auto& s : manifest.samples) (s.split == Split::Validation ? result.validation : result.test) += 1;
    return result;
}

EvalContext Runtime::context() const {
    return EvalContext{backend.get(), cache.get(), payloads.get(), render, temperature};
}

Runtime make_runtime(const RunConfig& config, const std::vector<Sample>& samples) {
    validate(config);
    Runtime rt;
    rt.render.role_delivery = config.backend.role_delivery;
    rt.temperature = config.backend.temperature;
    rt.cache = std::make_unique<EvaluationCache>();
    rt.payloads = std::make_unique<PayloadCache>(config.frames);

    std::shared_ptr<HttpTransport> transport;
    auto remote_config = [&](const std::string& endpoint, const std::string& model) {
        RemoteChatConfig rc;
        rc.endpoint = endpoint;
        rc.model_name = model;
        rc.supports_logprobs = config.backend.supports_logprobs;
        rc.max_inflight = config.backend.max_inflight;
        // Key is checked before any transport exists, so a missing key never reaches the network.
        if (!config.replay_dir) rc.api_key = api_key_from_env();
        if (!transport) transport = make_transport(config);
        return rc;
    };

    std::shared_ptr<VisionBackend> inner;
    if (config.backend.kind == "mock") {
        MockOracleConfig mock;
        mock.weights = config.backend.mock_weights;
        mock.bias = config.backend.mock_bias;
        mock.seed = config.backend.mock_seed;
        mock.model_name = config.backend.model_name.empty() ? "mock-oracle" : config.backend.model_name;
        mock.add_samples(samples);
        inner = std::make_shared<MockOracleBackend>(std::move(mock), config.backend.max_inflight);
    } else {
        inner = std::make_shared<RemoteChatBackend>(remote_config(config.backend.endpoint, config.backend.model_name),
                                                    transport);
    }
    rt.backend = std::make_shared<GatedBackend>(inner, config.backend.requests_per_second);

    if (config.paraphraser.kind == "mock") {
        rt.paraphraser = std::make_unique<MockParaphraser>();
    } else {
        rt.paraphraser = std::make_unique<RemoteParaphraser>(
            remote_config(config.paraphraser.endpoint, config.paraphraser.model_name), transport);
    }
    return rt;
}

std::vector<Sample> load_all_samples(const RunConfig& config) {
    if (config.manifests.empty()) throw ConfigError("no manifests configured under [data] manifests");
    std::vector<SampleManifest> manifests;
    for (const auto& path : config.manifests) manifests.push_back(load_manifest(path));
    auto all = merge_samples(manifests, Split::Validation);
    auto test = merge_samples(manifests, Split::Test);
    std::set<std::string> ids;
    for (const auto& s : all) ids.insert(s.id);
    for (auto& s : test) {
        if (!ids.insert(s.id).second) throw ValidationError("sample id '" + s.id + "' appears in both splits");
        all.push_back(std::move(s));
    }
    std::sort(all.begin(), all.end(), [](const Sample& a, const Sample& b) { return a.id < b.id; });
    return all;
}

namespace {

std::vector<Sample> of_split(const std::vector<Sample>& all, Split split) {
    std::vector<Sample> out;
    for (const auto& s : all) {
        if (s.split == split) out.push_back(s);
    }
    return out;
}

struct LoadedLedger {
    TemplateLevel level;
    RunLedger ledger;
};

std::vector<LoadedLedger> read_ledgers(const fs::path& run_dir) {
    std::vector<LoadedLedger> out;
    for (auto level : stage_order()) {
        const auto tag = std::string(level_tag(level));
        const auto path = run_dir / "ledgers" / (tag + ".jsonl");
        if (fs::exists(path)) out.push_back({level, RunLedger::read(path, tag)});
    }
    if (out.empty() || out.front().level != TemplateLevel::Role) {
        throw MissingLedger(run_dir / "ledgers" / "R.jsonl");
    }
    return out;
}

// Final top-K of a stage, reconstructed from its records.
json stage_top(const RunLedger& ledger) {
    std::map<std::string, json> templates;
    std::map<std::string, json> scores;
    json retained = json::array();
    for (const auto& r : ledger.records()) {
        const auto& type = r.at("type");
        if (type == "seed" || type == "perturb") {
            templates[r.at("candidate")] = r.at("templates");
        } else if (type == "eval" && r.at("status") == "ok") {
            scores[r.at("candidate")] = r;
        } else if (type == "retain") {
            retained = r.at("retained");
        }
    }
    json top = json::array();
    int rank = 1;
    for (const auto& id : retained) {
        const auto& e = scores.at(id.get<std::string>());
        top.push_back({{"rank", rank++},
                       {"candidate", id},
                       {"f_exec", e.at("f_exec")},
                       {"f_logprob", e.at("f_logprob")},
                       {"f_score", e.at("f_score")},
                       {"n", e.at("n")},
                       {"templates", templates.at(id.get<std::string>())}});
    }
    return top;
}

std::string summary_markdown(const std::vector<LoadedLedger>& loaded, const json& best) {
    std::vector<RunLedger> ledgers;
    for (const auto& l : loaded) ledgers.push_back(l.ledger);

    std::ostringstream md;
    md << "# Optimisation summary\n\n";
    const auto config = loaded.front().ledger.records_of("config").at(0);
    md << "Backend: `" << config.at("backend").at("model_name").get<std::string>() << "` ("
       << config.at("backend").at("kind").get<std::string>() << "), paraphraser `"
       << config.at("paraphraser").get<std::string>() << "`, alpha " << config.at("ape").at("alpha").dump()
       << ", top_k " << config.at("ape").at("top_k").dump() << ", " << config.at("eval_samples").dump()
       << " evaluation samples.\n\n";
    md << "## Best prompt per template level\n\n" << stage_table_markdown(ledgers) << "\n";

    md << "## Search cost\n\n| Level | Candidates | Backend calls | Cache hits | Excluded | Parse failures |\n";
    md << "|---|---|---|---|---|---|\n";
    for (const auto& l : loaded) {
        const auto t = totals(l.ledger);
        md << "| " << l.ledger.stage() << " | " << t.candidates << " | " << t.backend_calls << " | " << t.cache_hits
           << " | " << t.excluded << " | " << t.parse_failures << " |\n";
    }

    for (const auto& stage : best.at("stages")) {
        md << "\n## Top prompts, level " << stage.at("stage").get<std::string>() << "\n\n";
        for (const auto& c : stage.at("top")) {
            md << c.at("rank").get<int>() << ". `" << c.at("candidate").get<std::string>() << "` f_score "
               << fixed(c.at("f_score").get<double>()) << ", f_exec " << fixed(c.at("f_exec").get<double>()) << "\n";
            for (const auto& t : c.at("templates")) {
                md << "   - " << t.at("level").get<std::string>() << ": " << t.at("text").get<std::string>();
                if (t.contains("question")) md << " / " << t.at("question").get<std::string>();
                md << "\n";
            }
        }
    }
    return md.str();
}

}  // namespace

void cmd_report(const fs::path& run_dir) {
    const auto loaded = read_ledgers(run_dir);
    json best{{"stages", json::array()}};
    for (const auto& l : loaded) {
        write_text(run_dir / "curves" / (l.ledger.stage() + ".csv"), curve_csv(l.ledger));
        best["stages"].push_back(
            {{"stage", l.ledger.stage()}, {"level", std::string(to_string(l.level))}, {"top", stage_top(l.ledger)}});
    }
    write_text(run_dir / "best_prompts.json", best.dump(2) + "\n");
    write_text(run_dir / "summary.md", summary_markdown(loaded, best));
}

fs::path cmd_optimize(const RunConfig& config, std::ostream* log) {
    const auto all = load_all_samples(config);
    const auto validation = of_split(all, Split::Validation);
    if (validation.empty()) throw ValidationError("no validation samples in the configured manifests");
    const auto pools = load_pool_set(config.pool_dir);
    auto runtime = make_runtime(config, all);

    SearchSettings settings;
    settings.annotations = {
        {"frames",
         {{"delivery", "ordered_image_sequence"},
          {"max_edge_px", config.frames.max_edge_px},
          {"stroke_px", config.frames.style.stroke_px},
          {"png_compression", config.frames.png_compression}}}};
    if (log) *log << "optimising over " << validation.size() << " validation samples\n";
    const auto result = run_hierarchy(pools, validation, runtime.context(), *runtime.paraphraser, config.ape, settings);

    const auto run_dir = fresh_run_dir(config);
    write_text(run_dir / "config.json", config_snapshot(config).dump(2) + "\n");
    json timings = json::object();
    for (const auto& stage : result.stages) {
        const auto tag = std::string(level_tag(stage.level));
        stage.search.ledger.write((fs::create_directories(run_dir / "ledgers"), run_dir / "ledgers" / (tag + ".jsonl")));
        timings[tag] = stage.search.iteration_seconds;
        if (log) {
            *log << "stage " << tag << ": best " << stage.search.best().id() << " f_score "
                 << fixed(stage.search.best().f_score) << " (" << stage.search.stop_reason << ")\n";
        }
    }
    write_text(run_dir / "timings.json", timings.dump(2) + "\n");
    cmd_report(run_dir);
    return run_dir;
}

EvaluationOutput cmd_evaluate(const RunConfig& config, const fs::path& best_prompts, const fs::path& out_dir) {
    const auto doc = json::parse(read_text(best_prompts), nullptr, false);
    if (doc.is_discarded() || !doc.contains("stages")) throw SchemaError("best_prompts", "not a best-prompts file");

    const auto all = load_all_samples(config);
    const auto test = of_split(all, Split::Test);
    if (test.empty()) throw ValidationError("no test samples in the configured manifests");
    auto runtime = make_runtime(config, all);
    const auto context = runtime.context();

    // Deepest stage first.
    std::vector<std::pair<std::string, std::vector<PromptStack>>> stages;
    for (auto it = doc.at("stages").rbegin(); it != doc.at("stages").rend(); ++it) {
        std::vector<PromptStack> stacks;
        for (const auto& c : it->at("top")) stacks.push_back(stack_from_json(c.at("templates")));
        if (!stacks.empty()) stages.emplace_back(it->at("stage").get<std::string>(), std::move(stacks));
    }
    if (stages.empty()) throw SchemaError("best_prompts.stages", "no prompts recorded");

    EvaluationOutput out;
    out.directory = out_dir.empty() ? best_prompts.parent_path() / "evaluation" : out_dir;
    out.model_name = runtime.backend->descriptor().model_name;

    std::map<DatasetId, std::vector<Sample>> by_dataset;
    for (const auto& s : test) by_dataset[s.dataset].push_back(s);

    json report{{"model_name", out.model_name}, {"positive_class", "crossing"}, {"datasets", json::array()}};
    for (const auto& [dataset, samples] : by_dataset) {
        const auto* chosen = &stages.back();
        for (const auto& stage : stages) {
            const auto& probe = stage.second.front();
            if (std::any_of(samples.begin(), samples.end(), [&](const Sample& s) { return renderable(probe, s); })) {
                chosen = &stage;
                break;
            }
        }
        std::vector<MetricSummary> summaries;
        json prompts = json::array();
        for (const auto& stack : chosen->second) {
            const auto evaluation = evaluate_testset(stack, samples, context);
            out.has_true_logprobs = out.has_true_logprobs && evaluation.report.has_true_logprobs;
            const std::string name = std::string(to_string(dataset)) + "_" + stack.id();
            write_text(out.directory / "samples" / (name + ".csv"), per_sample_csv(evaluation.per_sample));
            out.rows.push_back(
                {stack.id(), chosen->first, dataset, evaluation.report.overall, evaluation.excluded, false});
            summaries.push_back(evaluation.report.overall);
            const auto& m = evaluation.report.overall;
            prompts.push_back({{"prompt", stack.id()},
                               {"acc", m.acc},
                               {"auc", m.auc ? json(*m.auc) : json(nullptr)},
                               {"f1", m.f1},
                               {"precision", m.precision},
                               {"recall", m.recall},
                               {"n", m.n},
                               {"excluded", evaluation.excluded},
                               {"degenerate", m.degenerate}});
        }
        const auto mean = mean_summary(summaries);
        out.rows.push_back({"mean of top " + std::to_string(summaries.size()), chosen->first, dataset, mean, 0, true});
        report["datasets"].push_back({{"dataset", std::string(to_string(dataset))},
                                      {"stage", chosen->first},
                                      {"prompts", prompts},
                                      {"mean",
                                       {{"acc", mean.acc},
                                        {"auc", mean.auc ? json(*mean.auc) : json(nullptr)},
                                        {"f1", mean.f1},
                                        {"precision", mean.precision},
                                        {"recall", mean.recall}}}});
    }
    report["has_true_logprobs"] = out.has_true_logprobs;

    std::vector<ReportRow> table;
    for (const auto& r : out.rows) {
        table.push_back({r.prompt + " (" + r.stage + ")", std::string(to_string(r.dataset)), r.metrics});
    }
    std::ostringstream md;
    md << "# Test-set evaluation\n\n";
    md << "Model: `" << out.model_name << "`. Positive class: crossing. True log-probabilities: "
       << (out.has_true_logprobs ? "yes" : "no (pseudo-confidences; AUC is coarse)") << ".\n\n";
    md << metrics_markdown_table(table);
    write_text(out.directory / "report.md", md.str());
    write_text(out.directory / "report.json", report.dump(2) + "\n");
    return out;
}

std::size_t cmd_render_frames(const RunConfig& config, const std::vector<std::string>& sample_ids, const fs::path& out) {
    const auto all = load_all_samples(config);
    std::set<std::string> wanted(sample_ids.begin(), sample_ids.end());
    const bool every = wanted.empty();
    std::size_t written = 0;
    for (const auto& s : all) {
        if (!every && !wanted.contains(s.id)) continue;
        wanted.erase(s.id);
        const auto payload = build_visual_payload(s, {}, config.frames);
        fs::create_directories(out / s.id);
        for (const auto& f : payload.frames) {
            char name[32];
            std::snprintf(name, sizeof name, "%02zu.png", f.index);
            std::ofstream file(out / s.id / name, std::ios::binary);
            file.write(reinterpret_cast<const char*>(f.png.data()), static_cast<std::streamsize>(f.png.size()));
            ++written;
        }
    }
    if (!every && !wanted.empty()) {
        throw ValidationError("unknown sample id '" + *wanted.begin() + "'");
    }
    return written;
}

}  // namespace intent_ape
