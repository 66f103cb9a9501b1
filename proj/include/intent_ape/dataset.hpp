#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "intent_ape/error.hpp"

namespace intent_ape {

enum class Label { Crossing, NotCrossing };

/// Ego-vehicle action categories (the five JAAD vehicle states).
enum class MotionState { Stopped, MovingSlow, MovingFast, Accelerating, Decelerating };

enum class DatasetId { JAAD, PIE, FUPIP, Custom };

enum class Split { Validation, Test };

[[nodiscard]] std::string_view to_string(Label label);
[[nodiscard]] std::string_view to_string(MotionState state);
[[nodiscard]] std::string_view to_string(DatasetId dataset);
[[nodiscard]] std::string_view to_string(Split split);

// Parsers return nullopt for anything unrecognised. Labels and splits are
// exact-match; motion states and dataset names are case-insensitive and
// ignore '_', '-' and ' ' separators.
[[nodiscard]] std::optional<Label> parse_label_name(std::string_view text);
[[nodiscard]] std::optional<MotionState> parse_motion_state(std::string_view text);
[[nodiscard]] std::optional<DatasetId> parse_dataset(std::string_view text);
[[nodiscard]] std::optional<Split> parse_split(std::string_view text);

[[nodiscard]] constexpr Label opposite(Label label) noexcept {
    return label == Label::Crossing ? Label::NotCrossing : Label::Crossing;
}

struct BBox {
    double x_min = 0;
    double y_min = 0;
    double x_max = 0;
    double y_max = 0;

    [[nodiscard]] bool non_degenerate() const noexcept { return x_min < x_max && y_min < y_max; }
    friend bool operator==(const BBox&, const BBox&) = default;
};

struct SpeedTrace {
    std::optional<std::vector<double>> per_frame_mph;
    std::optional<MotionState> descriptive;
    double fps = 30.0;

    [[nodiscard]] bool has_numeric() const noexcept { return per_frame_mph.has_value(); }
    [[nodiscard]] bool has_descriptive() const noexcept { return descriptive.has_value(); }
    friend bool operator==(const SpeedTrace&, const SpeedTrace&) = default;
};

struct Sample {
    std::string id;
    std::vector<std::filesystem::path> frames;  // relative to the manifest root
    std::vector<BBox> bboxes;
    SpeedTrace speed;
    Label label = Label::NotCrossing;
    DatasetId dataset = DatasetId::Custom;
    Split split = Split::Validation;

    [[nodiscard]] std::size_t window_len() const noexcept { return frames.size(); }
    friend bool operator==(const Sample&, const Sample&) = default;
};

struct SampleManifest {
    std::vector<Sample> samples;
    std::size_t window_len = 16;
    double fps = 30.0;
    /// Directory that relative frame paths resolve against.
    std::filesystem::path root;

    [[nodiscard]] std::filesystem::path resolve(const std::filesystem::path& frame) const;
    [[nodiscard]] const Sample* find(std::string_view id) const;
};

class MissingFile : public ConfigError {
  public:
    explicit MissingFile(const std::filesystem::path& path)
        : ConfigError("missing file: " + path.string()), path_(path) {}
    [[nodiscard]] const std::filesystem::path& path() const noexcept { return path_; }

  private:
    std::filesystem::path path_;
};

class SchemaError : public ValidationError {
  public:
    SchemaError(std::string field, const std::string& detail)
        : ValidationError("schema error at '" + field + "': " + detail), field_(std::move(field)) {}
    [[nodiscard]] const std::string& field() const noexcept { return field_; }

  private:
    std::string field_;
};

class InvariantViolation : public ValidationError {
  public:
    InvariantViolation(std::string sample_id, std::string reason)
        : ValidationError("sample '" + sample_id + "': " + reason),
          sample_id_(std::move(sample_id)),
          reason_(std::move(reason)) {}
    [[nodiscard]] const std::string& sample_id() const noexcept { return sample_id_; }
    [[nodiscard]] const std::string& reason() const noexcept { return reason_; }

  private:
    std::string sample_id_;
    std::string reason_;
};

/// Throws InvariantViolation on the first broken Sample/SpeedTrace/manifest rule.
void validate(const SampleManifest& manifest);

[[nodiscard]] SampleManifest load_manifest(const std::filesystem::path& path);

/// Canonical form: samples sorted by id, fixed field order. Frame paths are
/// written relative to the destination file's directory.
void save_manifest(const SampleManifest& manifest, const std::filesystem::path& path);
[[nodiscard]] std::string manifest_to_json(const SampleManifest& manifest,
                                           const std::filesystem::path& destination_dir);

/// Samples matching the filters, ordered by id.
[[nodiscard]] std::vector<Sample> split_filter(const SampleManifest& manifest, Split split,
                                               std::optional<DatasetId> dataset = std::nullopt);

[[nodiscard]] std::vector<Sample> merge_samples(const std::vector<SampleManifest>& manifests,
                                                Split split);

// ---------------------------------------------------------------------------
// Raw-source adapters

class UnsupportedLayout : public ValidationError {
  public:
    explicit UnsupportedLayout(const std::string& what) : ValidationError("unsupported layout: " + what) {}
};

class MissingSpeed : public ValidationError {
  public:
    explicit MissingSpeed(const std::string& sample_id)
        : ValidationError("sample '" + sample_id + "' lacks numeric ego-vehicle speed"), sample_id_(sample_id) {}
    [[nodiscard]] const std::string& sample_id() const noexcept { return sample_id_; }

  private:
    std::string sample_id_;
};

class MissingLabel : public ValidationError {
  public:
    explicit MissingLabel(const std::string& sample_id)
        : ValidationError("sample '" + sample_id + "' has no usable intention label"), sample_id_(sample_id) {}
    [[nodiscard]] const std::string& sample_id() const noexcept { return sample_id_; }

  private:
    std::string sample_id_;
};

struct ImportOptions {
    std::size_t window_len = 16;
    /// Frames between the last observed frame and the crossing event.
    int prediction_horizon = 16;
    /// Extra shift applied to the decision frame (negative moves the window earlier).
    int decision_offset = 0;
};

constexpr double kKmhToMph = 0.621371192237334;
constexpr double kMpsToMph = 2.2369362920544;

struct ImportStats {
    std::size_t tracks_seen = 0;
    /// Tracks whose observation window falls outside the annotated frames.
    std::vector<std::string> skipped;
};

/// Reads a source directory in the adapter layout documented in README.md.
[[nodiscard]] SampleManifest import_annotations(const std::filesystem::path& source_dir, DatasetId adapter,
                                                const ImportOptions& options = {}, ImportStats* stats = nullptr);

}  // namespace intent_ape
