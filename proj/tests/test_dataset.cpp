#include <gtest/gtest.h>

#include <fstream>

#include "fixtures.hpp"
#include "intent_ape/dataset.hpp"
#include "json.hpp"

using namespace intent_ape;
namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

fs::path two_split_manifest(const std::string& name) {
    return fixtures::write_manifest(fixtures::scratch_dir(name),
                                    {{"pie_v", DatasetId::PIE, Split::Validation, 6, true, false},
                                     {"jaad_v", DatasetId::JAAD, Split::Validation, 4, false, true},
                                     {"pie_t", DatasetId::PIE, Split::Test, 5, true, true}});
}

json read_json(const fs::path& p) {
    std::ifstream in(p);
    return json::parse(in);
}

void write_json(const fs::path& p, const json& j) { std::ofstream(p) << j.dump(2); }

}  // namespace

TEST(Manifest, RoundTripIsCanonicalAndLossless) {
    const auto path = two_split_manifest("ds_roundtrip");
    const auto m = load_manifest(path);
    ASSERT_EQ(m.samples.size(), 15u);
    const auto again = path.parent_path() / "again.json";
    save_manifest(m, again);
    const auto m2 = load_manifest(again);
    EXPECT_EQ(m.samples, m2.samples);
    EXPECT_EQ(m.window_len, m2.window_len);
    // Saving twice produces identical bytes.
    EXPECT_EQ(manifest_to_json(m, path.parent_path()), manifest_to_json(m2, path.parent_path()));
    EXPECT_TRUE(std::is_sorted(m.samples.begin(), m.samples.end(),
                               [](const Sample& a, const Sample& b) { return a.id < b.id; }));
}

TEST(Manifest, SplitFilterAndMerge) {
    const auto m = load_manifest(two_split_manifest("ds_filter"));
    EXPECT_EQ(split_filter(m, Split::Validation).size(), 10u);
    EXPECT_EQ(split_filter(m, Split::Test).size(), 5u);
    EXPECT_EQ(split_filter(m, Split::Validation, DatasetId::JAAD).size(), 4u);
    EXPECT_EQ(split_filter(m, Split::Test, DatasetId::JAAD).size(), 0u);
    EXPECT_EQ(merge_samples({m}, Split::Test).size(), 5u);
}

TEST(Manifest, MissingFileIsConfigError) {
    EXPECT_THROW((void)load_manifest("/nonexistent/manifest.json"), MissingFile);
}

TEST(Manifest, SchemaErrorsNameTheField) {
    const auto path = two_split_manifest("ds_schema");
    auto doc = read_json(path);
    doc["samples"][0]["label"] = "maybe";
    write_json(path, doc);
    try {
        (void)load_manifest(path);
        FAIL() << "expected SchemaError";
    } catch (const SchemaError& e) {
        EXPECT_NE(e.field().find("label"), std::string::npos);
    }
}

TEST(Manifest, InvariantViolations) {
    auto m = load_manifest(two_split_manifest("ds_invariants"));
    EXPECT_NO_THROW(validate(m));

    auto short_window = m;
    short_window.samples[0].frames.pop_back();
    short_window.samples[0].bboxes.pop_back();
    EXPECT_THROW(validate(short_window), InvariantViolation);

    auto duplicate = m;
    duplicate.samples[1].id = duplicate.samples[0].id;
    EXPECT_THROW(validate(duplicate), InvariantViolation);

    auto degenerate = m;
    degenerate.samples[0].bboxes[0] = BBox{5, 5, 5, 9};
    EXPECT_THROW(validate(degenerate), InvariantViolation);

    auto no_speed = m;
    no_speed.samples[0].speed.per_frame_mph.reset();
    no_speed.samples[0].speed.descriptive.reset();
    EXPECT_THROW(validate(no_speed), InvariantViolation);

    auto negative = m;
    for (auto& s : negative.samples) {
        if (s.speed.per_frame_mph) {
            (*s.speed.per_frame_mph)[3] = -1.0;
            break;
        }
    }
    EXPECT_THROW(validate(negative), InvariantViolation);

    auto wrong_length = m;
    for (auto& s : wrong_length.samples) {
        if (s.speed.per_frame_mph) {
            s.speed.per_frame_mph->push_back(1.0);
            break;
        }
    }
    EXPECT_THROW(validate(wrong_length), InvariantViolation);
}

class AdapterImport : public ::testing::TestWithParam<DatasetId> {};

TEST_P(AdapterImport, CountsMatchDeclaredLayout) {
    const auto adapter = GetParam();
    const auto dir = fixtures::scratch_dir("ds_import_" + std::to_string(static_cast<int>(adapter)));
    fixtures::write_raw_source(dir, adapter, 2, 3, 3);
    ImportStats stats;
    const auto m = import_annotations(dir, adapter, {}, &stats);
    EXPECT_EQ(split_filter(m, Split::Validation).size(), 6u);
    EXPECT_EQ(split_filter(m, Split::Test).size(), 9u);
    EXPECT_EQ(stats.tracks_seen, 15u);
    EXPECT_TRUE(stats.skipped.empty());
    for (const auto& s : m.samples) {
        EXPECT_EQ(s.dataset, adapter);
        EXPECT_EQ(s.window_len(), 16u);
        EXPECT_EQ(s.speed.has_numeric(), adapter != DatasetId::JAAD);
        if (adapter == DatasetId::JAAD) EXPECT_TRUE(s.speed.has_descriptive());
    }
    EXPECT_NO_THROW(validate(m));
}

INSTANTIATE_TEST_SUITE_P(AllAdapters, AdapterImport,
                         ::testing::Values(DatasetId::JAAD, DatasetId::PIE, DatasetId::FUPIP, DatasetId::Custom));

TEST(AdapterImport, WindowEndsHorizonFramesBeforeEvent) {
    const auto dir = fixtures::scratch_dir("ds_window");
    fixtures::write_raw_source(dir, DatasetId::PIE, 1, 0, 1);
    const auto m = import_annotations(dir, DatasetId::PIE, {.window_len = 16, .prediction_horizon = 16});
    ASSERT_EQ(m.samples.size(), 1u);
    // event_frame 36, horizon 16: observation ends at frame 20 and starts at 5.
    EXPECT_EQ(m.samples[0].frames.back().filename().string(), "00020.png");
    EXPECT_EQ(m.samples[0].frames.front().filename().string(), "00005.png");
    // PIE speeds are km/h in the source and mph in the manifest.
    EXPECT_NEAR(m.samples[0].speed.per_frame_mph->front(), (20.0 + 5 * 0.5) * kKmhToMph, 1e-9);
}

TEST(AdapterImport, WindowOutsideAnnotationsIsSkipped) {
    const auto dir = fixtures::scratch_dir("ds_skip");
    fixtures::write_raw_source(dir, DatasetId::FUPIP, 1, 1, 2);
    ImportStats stats;
    const auto m = import_annotations(dir, DatasetId::FUPIP, {.window_len = 16, .prediction_horizon = 30}, &stats);
    EXPECT_TRUE(m.samples.empty());
    EXPECT_EQ(stats.skipped.size(), 4u);
}

TEST(AdapterImport, MissingAnnotationFileIsReported) {
    const auto dir = fixtures::scratch_dir("ds_missing_ann");
    fixtures::write_raw_source(dir, DatasetId::PIE, 2, 1, 1);
    fs::remove(dir / "annotations" / "video_1.json");
    EXPECT_THROW((void)import_annotations(dir, DatasetId::PIE), UnsupportedLayout);
}

TEST(AdapterImport, MissingSpeedChannel) {
    const auto dir = fixtures::scratch_dir("ds_missing_speed");
    fixtures::write_raw_source(dir, DatasetId::JAAD, 1, 0, 1);
    // A JAAD-style source has no numeric channel, which PIE requires.
    EXPECT_THROW((void)import_annotations(dir, DatasetId::PIE), MissingSpeed);
}

TEST(AdapterImport, MissingSourceDirectory) {
    EXPECT_THROW((void)import_annotations("/nonexistent/source", DatasetId::JAAD), UnsupportedLayout);
}

TEST(AdapterImport, MissingLabelIsValidationError) {
    const auto dir = fixtures::scratch_dir("ds_missing_label");
    fixtures::write_raw_source(dir, DatasetId::PIE, 1, 0, 1);
    auto doc = read_json(dir / "annotations" / "video_0.json");
    doc["pedestrians"][0].erase("label");
    write_json(dir / "annotations" / "video_0.json", doc);
    EXPECT_THROW((void)import_annotations(dir, DatasetId::PIE), MissingLabel);
}
