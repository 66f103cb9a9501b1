#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "intent_ape/commands.hpp"

using namespace intent_ape;

namespace {

struct CommonFlags {
    std::string config;
    std::optional<std::int64_t> seed;
    std::string backend;
    std::string replay;
    std::string out;
};

void add_common(CLI::App* cmd, CommonFlags& flags) {
    cmd->add_option("--config", flags.config, "TOML run configuration")->required()->check(CLI::ExistingFile);
    cmd->add_option("--seed", flags.seed, "Override [ape] seed");
    cmd->add_option("--backend", flags.backend, "Override [backend] kind (mock or remote)");
    cmd->add_option("--replay", flags.replay, "Serve backend traffic from a capture directory");
    cmd->add_option("--out", flags.out, "Output directory");
}

RunConfig resolve(const CommonFlags& flags) {
    auto config = load_run_config(flags.config);
    if (flags.seed) config.ape.seed = static_cast<std::uint64_t>(*flags.seed);
    if (!flags.backend.empty()) {
        config.backend.kind = flags.backend;
        if (flags.backend == "mock" && config.backend.model_name.empty()) config.backend.model_name = "mock-oracle";
    }
    if (!flags.replay.empty()) config.replay_dir = flags.replay;
    if (!flags.out.empty()) config.output_dir = flags.out;
    validate(config);
    return config;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Hierarchical prompt optimisation for pedestrian crossing-intention prediction"};
    app.require_subcommand(1);

    std::string source;
    std::string adapter;
    std::string manifest_out;
    ImportOptions import_options;
    auto* ingest = app.add_subcommand("ingest", "Convert a raw annotation directory into a canonical manifest");
    ingest->add_option("--source", source, "Directory in the adapter layout")->required();
    ingest->add_option("--adapter", adapter, "JAAD, PIE, FU-PIP or Custom")->required();
    ingest->add_option("--out", manifest_out, "Manifest file to write")->required();
    ingest->add_option("--horizon", import_options.prediction_horizon, "Frames between window end and event");
    ingest->add_option("--offset", import_options.decision_offset, "Shift of the decision frame");

    CommonFlags optimize_flags;
    auto* optimize = app.add_subcommand("optimize", "Run the staged prompt search");
    add_common(optimize, optimize_flags);

    CommonFlags evaluate_flags;
    std::string prompts;
    auto* evaluate = app.add_subcommand("evaluate", "Score the best prompts on the test split");
    add_common(evaluate, evaluate_flags);
    evaluate->add_option("--prompts", prompts, "best_prompts.json from an optimize run")->required();

    std::string run_dir;
    auto* report = app.add_subcommand("report", "Regenerate curves, best prompts and summary from ledgers");
    report->add_option("--run", run_dir, "Run directory")->required();

    CommonFlags render_flags;
    std::vector<std::string> sample_ids;
    auto* render = app.add_subcommand("render-frames", "Dump the annotated frames sent for each sample");
    add_common(render, render_flags);
    render->add_option("--sample", sample_ids, "Sample id (repeatable; default all)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (*ingest) {
            const auto dataset = parse_dataset(adapter);
            if (!dataset) throw ConfigError("unknown adapter '" + adapter + "'");
            const auto r = cmd_ingest(source, *dataset, manifest_out, import_options);
            std::cout << "wrote " << r.manifest.string() << ": " << r.validation << " validation, " << r.test
                      << " test samples";
            if (!r.stats.skipped.empty()) std::cout << ", " << r.stats.skipped.size() << " tracks skipped";
            std::cout << "\n";
        } else if (*optimize) {
            const auto dir = cmd_optimize(resolve(optimize_flags), &std::cout);
            std::cout << "run directory: " << dir.string() << "\n";
        } else if (*evaluate) {
            auto config = resolve(evaluate_flags);
            const auto out = cmd_evaluate(config, prompts, evaluate_flags.out.empty() ? std::filesystem::path{}
                                                                                       : std::filesystem::path(evaluate_flags.out));
            std::cout << "wrote " << (out.directory / "report.md").string() << "\n";
        } else if (*report) {
            cmd_report(run_dir);
            std::cout << "regenerated reports in " << run_dir << "\n";
        } else if (*render) {
            auto config = resolve(render_flags);
            const std::filesystem::path out = render_flags.out.empty() ? "frames" : render_flags.out;
            const auto n = cmd_render_frames(config, sample_ids, out);
            std::cout << "wrote " << n << " frames under " << out.string() << "\n";
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_code_for(e);
    }
    return 0;
}
