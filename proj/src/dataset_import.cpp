// Thin converters from per-dataset annotation exports into the canonical
// manifest. Every adapter reads the same directory skeleton:
//
//   <source>/splits/{validation,test}.txt     video ids, one per line
//   <source>/annotations/<video_id>.json      tracks + ego-vehicle channel
//   <source>/images/<video_id>/<frame>.png    pre-extracted frames (%05d, .png or .jpg)
//
// and differs only in the ego-vehicle channel it expects.

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <map>

#include "intent_ape/dataset.hpp"
#include "json.hpp"

namespace intent_ape {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

std::vector<std::string> read_split_file(const fs::path& path) {
    std::vector<std::string> ids;
    std::ifstream in(path);
    std::string line;
    while (std::getline(in, line)) {
        auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos || line[first] == '#') {
            continue;
        }
        auto last = line.find_last_not_of(" \t\r");
        ids.push_back(line.substr(first, last - first + 1));
    }
    return ids;
}

std::optional<Label> parse_source_label(const json& node) {
    if (node.is_boolean()) {
        return node.get<bool>() ? Label::Crossing : Label::NotCrossing;
    }
    if (node.is_number_integer()) {
        auto v = node.get<long long>();
        if (v == 1) return Label::Crossing;
        if (v == 0) return Label::NotCrossing;
        return std::nullopt;
    }
    if (!node.is_string()) {
        return std::nullopt;
    }
    std::string key;
    for (char c : node.get<std::string>()) {
        if (c != '_' && c != '-' && c != ' ') {
            key.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
        }
    }
    if (key == "crossing" || key == "cross") return Label::Crossing;
    if (key == "notcrossing" || key == "notcross" || key == "nocrossing") return Label::NotCrossing;
    return std::nullopt;
}

fs::path locate_frame(const fs::path& source_dir, const std::string& video, long long frame) {
    char name[32];
    std::snprintf(name, sizeof name, "%05lld", frame);
    const auto dir = fs::path("images") / video;
    for (const char* ext : {".png", ".jpg", ".jpeg"}) {
        auto rel = dir / (std::string(name) + ext);
        if (fs::is_regular_file(source_dir / rel)) {
            return rel;
        }
    }
    throw UnsupportedLayout("missing frame image " + (source_dir / dir / (std::string(name) + ".png")).string());
}

/// Numeric channel for one adapter, converted to mph. Entries may be null.
std::optional<std::vector<std::optional<double>>> numeric_channel(const json& vehicle, DatasetId adapter) {
    const char* key = nullptr;
    double scale = 1.0;
    switch (adapter) {
        case DatasetId::PIE:
            key = "obd_speed_kmh";
            scale = kKmhToMph;
            break;
        case DatasetId::FUPIP:
            key = "speed_kmh";
            scale = kKmhToMph;
            break;
        case DatasetId::Custom:
            key = "speed_mph";
            break;
        case DatasetId::JAAD:
            return std::nullopt;
    }
    auto it = vehicle.find(key);
    if (it == vehicle.end() || !it->is_array()) {
        return std::nullopt;
    }
    std::vector<std::optional<double>> values;
    values.reserve(it->size());
    for (const auto& v : *it) {
        if (v.is_number()) {
            values.push_back(v.get<double>() * scale);
        } else {
            values.push_back(std::nullopt);
        }
    }
    return values;
}

}  // namespace

SampleManifest import_annotations(const fs::path& source_dir, DatasetId adapter, const ImportOptions& options,
                                  ImportStats* stats) {
    if (!fs::is_directory(source_dir)) {
        throw UnsupportedLayout("source directory " + source_dir.string() + " does not exist");
    }
    if (options.window_len == 0) {
        throw UnsupportedLayout("window_len must be positive");
    }
    const fs::path splits_dir = source_dir / "splits";
    const fs::path annotations_dir = source_dir / "annotations";
    if (!fs::is_directory(annotations_dir)) {
        throw UnsupportedLayout("missing " + annotations_dir.string());
    }

    std::vector<std::pair<std::string, Split>> videos;
    bool any_split_file = false;
    for (auto [file, split] : {std::pair{"validation.txt", Split::Validation}, std::pair{"test.txt", Split::Test}}) {
        const auto path = splits_dir / file;
        if (!fs::is_regular_file(path)) {
            continue;
        }
        any_split_file = true;
        for (auto& id : read_split_file(path)) {
            videos.emplace_back(std::move(id), split);
        }
    }
    if (!any_split_file) {
        throw UnsupportedLayout("missing " + (splits_dir / "validation.txt").string() + " and " +
                                (splits_dir / "test.txt").string());
    }

    SampleManifest manifest;
    manifest.window_len = options.window_len;
    manifest.root = fs::absolute(source_dir).lexically_normal();
    std::optional<double> manifest_fps;
    ImportStats local_stats;

    for (const auto& [video, split] : videos) {
        const auto annotation_path = annotations_dir / (video + ".json");
        if (!fs::is_regular_file(annotation_path)) {
            throw UnsupportedLayout("missing annotation file " + annotation_path.string());
        }
        json doc;
        try {
            std::ifstream in(annotation_path);
            doc = json::parse(in);
        } catch (const json::exception& e) {
            throw UnsupportedLayout(annotation_path.string() + ": " + e.what());
        }
        const double fps = doc.value("fps", 30.0);
        if (!(fps > 0)) {
            throw UnsupportedLayout(annotation_path.string() + ": fps must be positive");
        }
        if (manifest_fps && *manifest_fps != fps) {
            throw UnsupportedLayout(annotation_path.string() + ": mixed frame rates in one source");
        }
        manifest_fps = fps;

        const json vehicle = doc.value("vehicle", json::object());
        const auto numeric = numeric_channel(vehicle, adapter);
        const json actions = vehicle.value("action", json::array());

        if (!doc.contains("pedestrians") || !doc["pedestrians"].is_array()) {
            throw UnsupportedLayout(annotation_path.string() + ": missing 'pedestrians' array");
        }
        for (const auto& track : doc["pedestrians"]) {
            ++local_stats.tracks_seen;
            const std::string track_id =
                track.contains("id") ? (track["id"].is_string() ? track["id"].get<std::string>() : track["id"].dump())
                                     : std::string("?");
            const std::string sample_id = video + "/" + track_id;

            auto label = track.contains("label") ? parse_source_label(track["label"]) : std::nullopt;
            if (!label) {
                throw MissingLabel(sample_id);
            }
            if (!track.contains("event_frame") || !track["event_frame"].is_number_integer()) {
                throw UnsupportedLayout(sample_id + ": missing integer 'event_frame'");
            }
            const auto& frames_node = track.value("frames", json::array());
            const auto& boxes_node = track.value("boxes", json::array());
            if (frames_node.size() != boxes_node.size()) {
                throw UnsupportedLayout(sample_id + ": 'frames' and 'boxes' differ in length");
            }
            std::map<long long, BBox> boxes;
            for (std::size_t i = 0; i < frames_node.size(); ++i) {
                const auto& b = boxes_node[i];
                if (!frames_node[i].is_number_integer() || !b.is_array() || b.size() != 4) {
                    throw UnsupportedLayout(sample_id + ": malformed box entry " + std::to_string(i));
                }
                boxes[frames_node[i].get<long long>()] =
                    BBox{b[0].get<double>(), b[1].get<double>(), b[2].get<double>(), b[3].get<double>()};
            }

            const long long decision =
                track["event_frame"].get<long long>() - options.prediction_horizon + options.decision_offset;
            const long long first = decision - static_cast<long long>(options.window_len) + 1;
            bool covered = first >= 0;
            for (long long f = first; covered && f <= decision; ++f) {
                covered = boxes.count(f) > 0;
            }
            if (!covered) {
                local_stats.skipped.push_back(sample_id);
                continue;
            }

            Sample sample;
            sample.id = sample_id;
            sample.dataset = adapter;
            sample.split = split;
            sample.label = *label;
            sample.speed.fps = fps;
            for (long long f = first; f <= decision; ++f) {
                sample.frames.push_back(locate_frame(source_dir, video, f));
                sample.bboxes.push_back(boxes.at(f));
            }

            if (numeric) {
                std::vector<double> mph;
                for (long long f = first; f <= decision; ++f) {
                    if (f >= static_cast<long long>(numeric->size()) || !(*numeric)[f]) {
                        break;
                    }
                    mph.push_back(*(*numeric)[f]);
                }
                if (mph.size() == options.window_len) {
                    sample.speed.per_frame_mph = std::move(mph);
                }
            }
            if ((adapter == DatasetId::PIE || adapter == DatasetId::FUPIP) && !sample.speed.has_numeric()) {
                throw MissingSpeed(sample_id);
            }
            // JAAD exposes the ego-vehicle action only; read it at the decision frame.
            if ((adapter == DatasetId::JAAD || adapter == DatasetId::Custom) && actions.is_array() &&
                decision < static_cast<long long>(actions.size()) && actions[decision].is_string()) {
                sample.speed.descriptive = parse_motion_state(actions[decision].get<std::string>());
            }
            if (!sample.speed.has_numeric() && !sample.speed.has_descriptive()) {
                throw MissingSpeed(sample_id);
            }
            manifest.samples.push_back(std::move(sample));
        }
    }
    manifest.fps = manifest_fps.value_or(30.0);
    std::sort(manifest.samples.begin(), manifest.samples.end(),
              [](const Sample& a, const Sample& b) { return a.id < b.id; });
    validate(manifest);
    if (stats) {
        *stats = std::move(local_stats);
    }
    return manifest;
}

}  // namespace intent_ape
