#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "intent_ape/frames.hpp"
#include "intent_ape/mock_backend.hpp"
#include "intent_ape/optimizer.hpp"
#include "intent_ape/templates.hpp"

namespace intent_ape {

struct BackendSettings {
    /// "mock" or "remote".
    std::string kind = "mock";
    std::string model_name = "mock-oracle";
    std::string endpoint;
    bool supports_logprobs = true;
    int max_inflight = 4;
    double requests_per_second = 0.0;
    double temperature = 0.0;
    int timeout_s = 120;
    RoleDelivery role_delivery = RoleDelivery::SystemMessage;
    /// Mirror every exchange here when set (live runs only).
    std::optional<std::filesystem::path> capture_dir;

    // Mock oracle parameters.
    std::uint64_t mock_seed = 0;
    double mock_bias = -1.0;
    std::vector<OracleKeyword> mock_weights = MockOracleConfig::default_weights();
};

struct ParaphraserSettings {
    std::string kind = "mock";
    std::string model_name;
    std::string endpoint;
};

struct RunConfig {
    std::vector<std::filesystem::path> manifests;
    std::filesystem::path pool_dir;
    BackendSettings backend;
    ParaphraserSettings paraphraser;
    ApeConfig ape;
    FrameSettings frames;
    std::filesystem::path output_dir = "runs";
    /// Fixed run directory name; a UTC timestamp is used when empty.
    std::string run_name;
    /// Serve backend traffic from recorded exchanges instead of the network.
    std::optional<std::filesystem::path> replay_dir;
};

/// Directory holding the shipped seed pools.
[[nodiscard]] std::filesystem::path default_pool_dir();

/// Parses a TOML run configuration. Relative paths resolve against the file's
/// directory. Throws MissingFile or ConfigError.
[[nodiscard]] RunConfig load_run_config(const std::filesystem::path& path);
[[nodiscard]] RunConfig parse_run_config(const std::string& toml_text, const std::filesystem::path& base_dir);

/// Checks cross-field rules: existing inputs, known kinds, replay without capture.
void validate(const RunConfig& config);

/// Fully resolved configuration as recorded in every run directory.
[[nodiscard]] nlohmann::ordered_json config_snapshot(const RunConfig& config);

}  // namespace intent_ape
