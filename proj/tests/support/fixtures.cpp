#include "fixtures.hpp"

#include <fstream>
#include <random>

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "json.hpp"

namespace fixtures {

using namespace intent_ape;
using json = nlohmann::json;

fs::path scratch_dir(const std::string& name) {
    const auto dir = fs::temp_directory_path() / ("intent_ape_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

namespace {

cv::Mat synthetic_frame(int index, int width = 64, int height = 48) {
    cv::Mat img(height, width, CV_8UC3, cv::Scalar(90, 110, 100));
    cv::rectangle(img, cv::Rect(0, height * 2 / 3, width, height / 3), cv::Scalar(60, 60, 60), cv::FILLED);
    cv::circle(img, cv::Point(8 + index * 3, height / 2), 4, cv::Scalar(200, 180, 40), cv::FILLED);
    return img;
}

}  // namespace

fs::path write_manifest(const fs::path& dir, const std::vector<SampleSpec>& specs, std::uint64_t seed) {
    fs::create_directories(dir / "frames");
    std::vector<fs::path> frames;
    for (int i = 0; i < 16; ++i) {
        char name[16];
        std::snprintf(name, sizeof name, "%02d.png", i);
        const auto rel = fs::path("frames") / name;
        cv::imwrite((dir / rel).string(), synthetic_frame(i));
        frames.push_back(rel);
    }

    std::mt19937_64 rng(seed);
    SampleManifest manifest;
    manifest.root = dir;
    for (const auto& spec : specs) {
        for (int k = 0; k < spec.count; ++k) {
            Sample s;
            char id[64];
            std::snprintf(id, sizeof id, "%s%03d", spec.prefix.c_str(), k);
            s.id = id;
            s.dataset = spec.dataset;
            s.split = spec.split;
            s.label = k % 2 == 0 ? Label::Crossing : Label::NotCrossing;
            s.frames = frames;
            for (int f = 0; f < 16; ++f) {
                const double x = 10 + f + static_cast<double>(rng() % 10);
                s.bboxes.push_back(BBox{x, 8, x + 14, 40});
            }
            if (spec.numeric_speed) {
                const double start = static_cast<double>(rng() % 30);
                const double end = static_cast<double>(rng() % 30);
                std::vector<double> mph;
                for (int f = 0; f < 16; ++f) mph.push_back(start + (end - start) * f / 15.0);
                s.speed.per_frame_mph = mph;
            }
            if (spec.descriptive_speed) {
                s.speed.descriptive = static_cast<MotionState>(rng() % 5);
            }
            manifest.samples.push_back(std::move(s));
        }
    }
    const auto path = dir / "manifest.json";
    save_manifest(manifest, path);
    return path;
}

std::vector<Sample> load_split(const fs::path& manifest, Split split) {
    return merge_samples({load_manifest(manifest)}, split);
}

void write_raw_source(const fs::path& dir, DatasetId adapter, int val_videos, int test_videos, int tracks) {
    fs::create_directories(dir / "splits");
    fs::create_directories(dir / "annotations");
    const int frames = 40;
    std::ofstream val(dir / "splits" / "validation.txt");
    std::ofstream test(dir / "splits" / "test.txt");
    for (int v = 0; v < val_videos + test_videos; ++v) {
        const std::string video = "video_" + std::to_string(v);
        (v < val_videos ? val : test) << video << "\n";
        fs::create_directories(dir / "images" / video);
        for (int f = 0; f < frames; ++f) {
            char name[16];
            std::snprintf(name, sizeof name, "%05d.png", f);
            cv::imwrite((dir / "images" / video / name).string(), synthetic_frame(f % 16, 32, 24));
        }
        json doc{{"fps", 30}};
        json vehicle = json::object();
        json speeds = json::array();
        json actions = json::array();
        for (int f = 0; f < frames; ++f) {
            speeds.push_back(20.0 + f * 0.5);
            actions.push_back(f % 2 == 0 ? "moving_slow" : "decelerating");
        }
        if (adapter == DatasetId::PIE) vehicle["obd_speed_kmh"] = speeds;
        if (adapter == DatasetId::FUPIP) vehicle["speed_kmh"] = speeds;
        if (adapter == DatasetId::Custom) vehicle["speed_mph"] = speeds;
        if (adapter == DatasetId::JAAD || adapter == DatasetId::Custom) vehicle["action"] = actions;
        doc["vehicle"] = vehicle;
        json peds = json::array();
        for (int t = 0; t < tracks; ++t) {
            json fr = json::array();
            json boxes = json::array();
            for (int f = 0; f < frames; ++f) {
                fr.push_back(f);
                boxes.push_back({2 + t, 2, 12 + t, 20});
            }
            peds.push_back({{"id", "p" + std::to_string(t)},
                            {"label", t % 2 == 0 ? "crossing" : "not_crossing"},
                            {"event_frame", 36},
                            {"frames", fr},
                            {"boxes", boxes}});
        }
        doc["pedestrians"] = peds;
        std::ofstream(dir / "annotations" / (video + ".json")) << doc.dump();
    }
}

fs::path write_mini_pools(const fs::path& dir, int per_pool) {
    fs::create_directories(dir);
    const auto shipped = load_pool_set(default_pool_dir());
    for (auto level : stage_order()) {
        auto pool = shipped.at(level);
        pool.templates.resize(std::min<std::size_t>(pool.templates.size(), static_cast<std::size_t>(per_pool)));
        save_pool(pool, dir / pool_file_name(level));
    }
    return dir;
}

MockRig::MockRig(const std::vector<Sample>& samples, std::uint64_t oracle_seed) {
    MockOracleConfig config;
    config.seed = oracle_seed;
    config.add_samples(samples);
    backend = std::make_shared<MockOracleBackend>(config, 4);
}

EvalContext MockRig::context() {
    return EvalContext{backend.get(), &cache, &payloads, {}, 0.0};
}

std::string mock_config_toml(const std::vector<fs::path>& manifests, const fs::path& pools, const fs::path& out,
                             const std::string& extra_ape) {
    std::string m;
    for (const auto& p : manifests) m += (m.empty() ? "\"" : ", \"") + p.generic_string() + "\"";
    return "[data]\nmanifests = [" + m + "]\npools = \"" + pools.generic_string() +
           "\"\n\n[backend]\nkind = \"mock\"\n\n[ape]\n" + extra_ape + "\n[output]\ndir = \"" + out.generic_string() +
           "\"\n";
}

}  // namespace fixtures
