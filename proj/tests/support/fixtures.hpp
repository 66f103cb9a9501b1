#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "intent_ape/commands.hpp"
#include "intent_ape/dataset.hpp"
#include "intent_ape/mock_backend.hpp"
#include "intent_ape/optimizer.hpp"

namespace fixtures {

namespace fs = std::filesystem;

/// Fresh, empty directory under the system temp dir.
fs::path scratch_dir(const std::string& name);

struct SampleSpec {
    std::string prefix;
    intent_ape::DatasetId dataset = intent_ape::DatasetId::PIE;
    intent_ape::Split split = intent_ape::Split::Validation;
    int count = 6;
    bool numeric_speed = true;
    bool descriptive_speed = false;
};

/// Writes 16 shared 64x48 frames plus a canonical manifest into `dir` and
/// returns the manifest path. Labels alternate; speed traces are seeded ramps.
fs::path write_manifest(const fs::path& dir, const std::vector<SampleSpec>& specs, std::uint64_t seed = 7);

/// Samples of a manifest for one split with absolute frame paths.
std::vector<intent_ape::Sample> load_split(const fs::path& manifest, intent_ape::Split split);

/// Raw adapter-layout source with `val_videos`/`test_videos` videos of
/// `tracks` pedestrians each; every track is fully covered.
void write_raw_source(const fs::path& dir, intent_ape::DatasetId adapter, int val_videos, int test_videos, int tracks);

/// Three-template pools (first three of each shipped pool) written to `dir`.
fs::path write_mini_pools(const fs::path& dir, int per_pool = 3);

/// Mock oracle, mock paraphraser and caches over `samples`.
struct MockRig {
    std::shared_ptr<intent_ape::MockOracleBackend> backend;
    intent_ape::MockParaphraser paraphraser;
    intent_ape::EvaluationCache cache;
    intent_ape::PayloadCache payloads;

    explicit MockRig(const std::vector<intent_ape::Sample>& samples, std::uint64_t oracle_seed = 0);
    [[nodiscard]] intent_ape::EvalContext context();
};

/// Minimal TOML for a mock run over `manifests`.
std::string mock_config_toml(const std::vector<fs::path>& manifests, const fs::path& pools, const fs::path& out,
                             const std::string& extra_ape = "");

}  // namespace fixtures
