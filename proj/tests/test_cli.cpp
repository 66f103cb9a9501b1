#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "fixtures.hpp"
#include "intent_ape/commands.hpp"
#include "intent_ape/config.hpp"
#include "intent_ape/ledger.hpp"
#include "intent_ape/remote_backend.hpp"
#include "json.hpp"

using namespace intent_ape;
namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

struct Workspace {
    fs::path dir;
    fs::path manifest;
    fs::path config;
};

// Two datasets, both splits; small pools and few iterations keep runs quick.
Workspace workspace(const std::string& name, const std::string& extra_ape = "iterations = 3\ntop_k = 2\n") {
    Workspace w;
    w.dir = fixtures::scratch_dir(name);
    w.manifest = fixtures::write_manifest(w.dir / "data", {{"pie_v", DatasetId::PIE, Split::Validation, 8, true, false},
                                                           {"jaad_v", DatasetId::JAAD, Split::Validation, 6, false, true},
                                                           {"pie_t", DatasetId::PIE, Split::Test, 6, true, false},
                                                           {"jaad_t", DatasetId::JAAD, Split::Test, 6, false, true}});
    const auto pools = fixtures::write_mini_pools(w.dir / "pools");
    w.config = w.dir / "run.toml";
    std::ofstream(w.config) << fixtures::mock_config_toml({w.manifest}, pools, w.dir / "runs", extra_ape);
    return w;
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string(INTENT_APE_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST(Config, ParsesSectionsAndResolvesPaths) {
    const auto cfg = parse_run_config(R"(
[data]
manifests = ["m.json"]
pools = "pools"
[backend]
kind = "remote"
model_name = "vlm"
endpoint = "https://api.example.com/v1/chat/completions"
supports_logprobs = false
max_inflight = 8
role_delivery = "prepend"
[backend.mock]
seed = 3
[paraphraser]
kind = "mock"
[ape]
alpha = 0.5
iterations = 7
seed = 11
[frames]
max_edge_px = 512
[output]
dir = "out"
run_name = "fixed"
)",
                                      "/base");
    EXPECT_EQ(cfg.manifests.at(0), fs::path("/base/m.json"));
    EXPECT_EQ(cfg.pool_dir, fs::path("/base/pools"));
    EXPECT_EQ(cfg.backend.kind, "remote");
    EXPECT_FALSE(cfg.backend.supports_logprobs);
    EXPECT_EQ(cfg.backend.max_inflight, 8);
    EXPECT_EQ(cfg.backend.role_delivery, RoleDelivery::PrependToUser);
    EXPECT_EQ(cfg.backend.mock_seed, 3u);
    EXPECT_EQ(cfg.ape.alpha, 0.5);
    EXPECT_EQ(cfg.ape.iterations, 7);
    EXPECT_EQ(cfg.ape.seed, 11u);
    EXPECT_EQ(cfg.frames.max_edge_px, 512);
    EXPECT_EQ(cfg.output_dir, fs::path("/base/out"));
    EXPECT_EQ(cfg.run_name, "fixed");
}

TEST(Config, RejectsUnknownKeysBadTypesAndValues) {
    EXPECT_THROW((void)parse_run_config("[ape]\nalpah = 0.3\n", "/"), ConfigError);
    EXPECT_THROW((void)parse_run_config("[ape]\nalpha = \"high\"\n", "/"), ConfigError);
    EXPECT_THROW((void)parse_run_config("[ape]\nalpha = 2.0\n", "/"), ConfigError);
    EXPECT_THROW((void)parse_run_config("[backend]\nrole_delivery = \"sideways\"\n", "/"), ConfigError);
    EXPECT_THROW((void)parse_run_config("not toml = = =", "/"), ConfigError);
    EXPECT_THROW((void)load_run_config("/nonexistent.toml"), MissingFile);
    auto cfg = parse_run_config("[backend]\nkind = \"remote\"\n", "/");
    EXPECT_THROW(validate(cfg), ConfigError);
}

TEST(Commands, ExitCodes) {
    EXPECT_EQ(exit_code_for(ConfigError("x")), 1);
    EXPECT_EQ(exit_code_for(RuntimeFailure("x")), 2);
    EXPECT_EQ(exit_code_for(ValidationError("x")), 3);
    EXPECT_EQ(exit_code_for(std::runtime_error("x")), 2);
}

TEST(Commands, OptimizeReportEvaluate) {
    const auto w = workspace("cli_full");
    const auto run = cmd_optimize(load_run_config(w.config));
    for (const auto* tag : {"R", "B", "Ds", "Dd", "Dt"}) {
        EXPECT_TRUE(fs::exists(run / "ledgers" / (std::string(tag) + ".jsonl"))) << tag;
        EXPECT_TRUE(fs::exists(run / "curves" / (std::string(tag) + ".csv"))) << tag;
    }
    for (const auto* f : {"config.json", "best_prompts.json", "summary.md", "timings.json"}) {
        EXPECT_TRUE(fs::exists(run / f)) << f;
    }
    // Ledgers carry no wall-clock values.
    EXPECT_EQ(slurp(run / "ledgers" / "R.jsonl").find("seconds"), std::string::npos);

    const auto summary = slurp(run / "summary.md");
    const auto best = slurp(run / "best_prompts.json");
    cmd_report(run);
    EXPECT_EQ(slurp(run / "summary.md"), summary);
    EXPECT_EQ(slurp(run / "best_prompts.json"), best);

    const auto doc = json::parse(best);
    ASSERT_EQ(doc["stages"].size(), 5u);
    EXPECT_EQ(doc["stages"][0]["stage"], "R");
    EXPECT_EQ(doc["stages"][0]["top"].size(), 2u);

    const auto out = cmd_evaluate(load_run_config(w.config), run / "best_prompts.json");
    // Two datasets x (two prompts + one averaged row).
    ASSERT_EQ(out.rows.size(), 6u);
    int averaged = 0;
    for (const auto& r : out.rows) {
        averaged += r.averaged;
        if (r.dataset == DatasetId::JAAD) EXPECT_EQ(r.stage, "Dd");
        if (r.dataset == DatasetId::PIE) EXPECT_EQ(r.stage, "Dt");
        if (!r.averaged) EXPECT_EQ(r.metrics.n, 6u);
    }
    EXPECT_EQ(averaged, 2);
    EXPECT_TRUE(fs::exists(out.directory / "report.md"));
    EXPECT_TRUE(fs::exists(out.directory / "report.json"));
    EXPECT_EQ(out.model_name, "mock-oracle");
    EXPECT_TRUE(out.has_true_logprobs);
    const auto report = slurp(out.directory / "report.md");
    EXPECT_NE(report.find("mock-oracle"), std::string::npos);
    EXPECT_NE(report.find("mean of top 2"), std::string::npos);
}

TEST(Commands, ReportWithoutLedgers) {
    const auto dir = fixtures::scratch_dir("cli_noledger");
    EXPECT_THROW(cmd_report(dir), MissingLedger);
}

TEST(Commands, RenderFrames) {
    const auto w = workspace("cli_frames");
    const auto config = load_run_config(w.config);
    const auto n = cmd_render_frames(config, {"pie_v000"}, w.dir / "frames");
    EXPECT_EQ(n, 16u);
    EXPECT_TRUE(fs::exists(w.dir / "frames" / "pie_v000" / "00.png"));
    EXPECT_THROW((void)cmd_render_frames(config, {"nobody"}, w.dir / "frames"), ValidationError);
}

TEST(Commands, RemoteWithoutKeyIsConfigError) {
    const auto w = workspace("cli_nokey");
    auto config = load_run_config(w.config);
    config.backend.kind = "remote";
    config.backend.model_name = "vlm";
    config.backend.endpoint = "http://127.0.0.1:1/v1/chat/completions";
    ::unsetenv(kApiKeyEnv);
    EXPECT_THROW((void)make_runtime(config, load_all_samples(config)), ConfigError);
}

TEST(Commands, IngestFixture) {
    const auto dir = fixtures::scratch_dir("cli_ingest");
    fixtures::write_raw_source(dir / "src", DatasetId::FUPIP, 2, 1, 2);
    const auto r = cmd_ingest(dir / "src", DatasetId::FUPIP, dir / "manifest.json");
    EXPECT_EQ(r.validation, 4u);
    EXPECT_EQ(r.test, 2u);
    EXPECT_EQ(load_manifest(dir / "manifest.json").samples.size(), 6u);
}

TEST(Binary, ExitCodesAndSubcommands) {
    const auto w = workspace("cli_binary", "iterations = 1\ntop_k = 1\nperturb_per_parent = 1\n");
    EXPECT_EQ(run_cli("--help"), 0);
    EXPECT_EQ(run_cli("bogus"), 1);
    EXPECT_EQ(run_cli("optimize"), 1);  // --config missing
    EXPECT_EQ(run_cli("report --run " + (w.dir / "nothing").string()), 1);

    std::ofstream(w.dir / "bad.toml") << "[ape]\nalpha = 3.0\n";
    EXPECT_EQ(run_cli("optimize --config " + (w.dir / "bad.toml").string()), 1);

    ::unsetenv(kApiKeyEnv);
    EXPECT_EQ(run_cli("optimize --config " + w.config.string() + " --backend remote"), 1);

    EXPECT_EQ(run_cli("optimize --config " + w.config.string() + " --out " + (w.dir / "bin_runs").string()), 0);
    fs::path run;
    for (const auto& e : fs::directory_iterator(w.dir / "bin_runs")) run = e.path();
    ASSERT_FALSE(run.empty());
    EXPECT_EQ(run_cli("report --run " + run.string()), 0);
    EXPECT_EQ(run_cli("evaluate --config " + w.config.string() + " --prompts " + (run / "best_prompts.json").string()),
              0);
    EXPECT_TRUE(fs::exists(run / "evaluation" / "report.md"));
    EXPECT_EQ(run_cli("render-frames --config " + w.config.string() + " --sample nobody --out " +
                      (w.dir / "fr").string()),
              3);

    fixtures::write_raw_source(w.dir / "raw", DatasetId::PIE, 1, 1, 1);
    EXPECT_EQ(run_cli("ingest --source " + (w.dir / "raw").string() + " --adapter PIE --out " +
                      (w.dir / "ingested.json").string()),
              0);
    EXPECT_EQ(run_cli("ingest --source " + (w.dir / "raw").string() + " --adapter XYZ --out " +
                      (w.dir / "x.json").string()),
              1);
}
