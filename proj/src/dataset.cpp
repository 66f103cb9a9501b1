#include "intent_ape/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace intent_ape {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

std::string normalise_token(std::string_view text) {
    std::string out;
    out.reserve(text.size());
    for (char c : text) {
        if (c == '_' || c == '-' || c == ' ') {
            continue;
        }
        out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
    return out;
}

const json& require(const json& object, const std::string& key, const std::string& where) {
    if (!object.is_object()) {
        throw SchemaError(where, "expected an object");
    }
    auto it = object.find(key);
    if (it == object.end()) {
        throw SchemaError(where + "." + key, "missing field");
    }
    return *it;
}

std::string require_string(const json& object, const std::string& key, const std::string& where) {
    const auto& value = require(object, key, where);
    if (!value.is_string()) {
        throw SchemaError(where + "." + key, "expected a string");
    }
    return value.get<std::string>();
}

double require_number(const json& value, const std::string& where) {
    if (!value.is_number()) {
        throw SchemaError(where, "expected a number");
    }
    return value.get<double>();
}

Sample parse_sample(const json& node, const std::string& where, double fps) {
    Sample sample;
    sample.id = require_string(node, "id", where);

    const auto dataset_name = require_string(node, "dataset", where);
    auto dataset = parse_dataset(dataset_name);
    if (!dataset) {
        throw SchemaError(where + ".dataset", "unknown dataset '" + dataset_name + "'");
    }
    sample.dataset = *dataset;

    const auto split_name = require_string(node, "split", where);
    auto split = parse_split(split_name);
    if (!split) {
        throw SchemaError(where + ".split", "unknown split '" + split_name + "'");
    }
    sample.split = *split;

    const auto label_name = require_string(node, "label", where);
    auto label = parse_label_name(label_name);
    if (!label) {
        throw SchemaError(where + ".label", "expected \"crossing\" or \"not_crossing\", got '" + label_name + "'");
    }
    sample.label = *label;

    const auto& frames = require(node, "frames", where);
    if (!frames.is_array()) {
        throw SchemaError(where + ".frames", "expected an array");
    }
    for (std::size_t i = 0; i < frames.size(); ++i) {
        if (!frames[i].is_string()) {
            throw SchemaError(where + ".frames[" + std::to_string(i) + "]", "expected a path string");
        }
        sample.frames.emplace_back(frames[i].get<std::string>());
    }

    const auto& boxes = require(node, "bboxes", where);
    if (!boxes.is_array()) {
        throw SchemaError(where + ".bboxes", "expected an array");
    }
    for (std::size_t i = 0; i < boxes.size(); ++i) {
        const std::string box_where = where + ".bboxes[" + std::to_string(i) + "]";
        if (!boxes[i].is_array() || boxes[i].size() != 4) {
            throw SchemaError(box_where, "expected [x_min, y_min, x_max, y_max]");
        }
        sample.bboxes.push_back(BBox{require_number(boxes[i][0], box_where), require_number(boxes[i][1], box_where),
                                     require_number(boxes[i][2], box_where), require_number(boxes[i][3], box_where)});
    }

    const auto& speed = require(node, "speed", where);
    if (!speed.is_object()) {
        throw SchemaError(where + ".speed", "expected an object");
    }
    sample.speed.fps = fps;
    if (auto it = speed.find("mph"); it != speed.end() && !it->is_null()) {
        if (!it->is_array()) {
            throw SchemaError(where + ".speed.mph", "expected an array or null");
        }
        std::vector<double> mph;
        for (std::size_t i = 0; i < it->size(); ++i) {
            mph.push_back(require_number((*it)[i], where + ".speed.mph[" + std::to_string(i) + "]"));
        }
        sample.speed.per_frame_mph = std::move(mph);
    }
    if (auto it = speed.find("descriptive"); it != speed.end() && !it->is_null()) {
        if (!it->is_string()) {
            throw SchemaError(where + ".speed.descriptive", "expected a string or null");
        }
        auto state = parse_motion_state(it->get<std::string>());
        if (!state) {
            throw SchemaError(where + ".speed.descriptive", "unknown motion state '" + it->get<std::string>() + "'");
        }
        sample.speed.descriptive = *state;
    }
    return sample;
}

}  // namespace

std::string_view to_string(Label label) {
    return label == Label::Crossing ? "crossing" : "not_crossing";
}

std::string_view to_string(MotionState state) {
    switch (state) {
        case MotionState::Stopped: return "stopped";
        case MotionState::MovingSlow: return "moving_slow";
        case MotionState::MovingFast: return "moving_fast";
        case MotionState::Accelerating: return "accelerating";
        case MotionState::Decelerating: return "decelerating";
    }
    return "stopped";
}

std::string_view to_string(DatasetId dataset) {
    switch (dataset) {
        case DatasetId::JAAD: return "JAAD";
        case DatasetId::PIE: return "PIE";
        case DatasetId::FUPIP: return "FU-PIP";
        case DatasetId::Custom: return "Custom";
    }
    return "Custom";
}

std::string_view to_string(Split split) {
    return split == Split::Validation ? "validation" : "test";
}

std::optional<Label> parse_label_name(std::string_view text) {
    if (text == "crossing") return Label::Crossing;
    if (text == "not_crossing") return Label::NotCrossing;
    return std::nullopt;
}

std::optional<MotionState> parse_motion_state(std::string_view text) {
    const auto key = normalise_token(text);
    if (key == "stopped" || key == "stop") return MotionState::Stopped;
    if (key == "movingslow" || key == "slow") return MotionState::MovingSlow;
    if (key == "movingfast" || key == "fast") return MotionState::MovingFast;
    if (key == "accelerating" || key == "speedingup") return MotionState::Accelerating;
    if (key == "decelerating" || key == "slowingdown") return MotionState::Decelerating;
    return std::nullopt;
}

std::optional<DatasetId> parse_dataset(std::string_view text) {
    const auto key = normalise_token(text);
    if (key == "jaad") return DatasetId::JAAD;
    if (key == "pie") return DatasetId::PIE;
    if (key == "fupip") return DatasetId::FUPIP;
    if (key == "custom") return DatasetId::Custom;
    return std::nullopt;
}

std::optional<Split> parse_split(std::string_view text) {
    if (text == "validation") return Split::Validation;
    if (text == "test") return Split::Test;
    return std::nullopt;
}

fs::path SampleManifest::resolve(const fs::path& frame) const {
    return frame.is_absolute() ? frame : (root / frame).lexically_normal();
}

const Sample* SampleManifest::find(std::string_view id) const {
    auto it = std::find_if(samples.begin(), samples.end(), [&](const Sample& s) { return s.id == id; });
    return it == samples.end() ? nullptr : &*it;
}

void validate(const SampleManifest& manifest) {
    if (manifest.window_len == 0) {
        throw InvariantViolation("<manifest>", "window_len must be positive");
    }
    if (!(manifest.fps > 0)) {
        throw InvariantViolation("<manifest>", "fps must be positive");
    }
    std::set<std::string> ids;
    for (const auto& sample : manifest.samples) {
        if (sample.id.empty()) {
            throw InvariantViolation("<unnamed>", "sample id is empty");
        }
        if (!ids.insert(sample.id).second) {
            throw InvariantViolation(sample.id, "duplicate sample id");
        }
        if (sample.frames.size() != manifest.window_len) {
            throw InvariantViolation(sample.id, "has " + std::to_string(sample.frames.size()) +
                                                    " frames, window_len is " +
                                                    std::to_string(manifest.window_len));
        }
        if (sample.bboxes.size() != sample.frames.size()) {
            throw InvariantViolation(sample.id, "frame and bbox counts differ");
        }
        std::set<fs::path> paths;
        for (const auto& frame : sample.frames) {
            if (frame.empty()) {
                throw InvariantViolation(sample.id, "empty frame path");
            }
            if (!paths.insert(frame.lexically_normal()).second) {
                throw InvariantViolation(sample.id, "duplicate frame path " + frame.string());
            }
        }
        for (std::size_t i = 0; i < sample.bboxes.size(); ++i) {
            if (!sample.bboxes[i].non_degenerate()) {
                throw InvariantViolation(sample.id, "degenerate bbox at frame " + std::to_string(i));
            }
        }
        const auto& speed = sample.speed;
        if (!speed.has_numeric() && !speed.has_descriptive()) {
            throw InvariantViolation(sample.id, "speed has neither mph trace nor descriptive state");
        }
        if (!(speed.fps > 0)) {
            throw InvariantViolation(sample.id, "speed fps must be positive");
        }
        if (speed.has_numeric()) {
            if (speed.per_frame_mph->size() != manifest.window_len) {
                throw InvariantViolation(sample.id, "mph trace length differs from window_len");
            }
            for (double mph : *speed.per_frame_mph) {
                if (!(mph >= 0)) {
                    throw InvariantViolation(sample.id, "negative or non-finite speed");
                }
            }
        }
    }
}

SampleManifest load_manifest(const fs::path& path) {
    if (!fs::is_regular_file(path)) {
        throw MissingFile(path);
    }
    std::ifstream in(path);
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw SchemaError("<document>", e.what());
    }
    if (!doc.is_object()) {
        throw SchemaError("<document>", "expected a JSON object");
    }

    SampleManifest manifest;
    manifest.root = fs::absolute(path).parent_path().lexically_normal();
    const auto& window = require(doc, "window_len", "$");
    if (!window.is_number_integer() || window.get<long long>() <= 0) {
        throw SchemaError("$.window_len", "expected a positive integer");
    }
    manifest.window_len = window.get<std::size_t>();
    manifest.fps = require_number(require(doc, "fps", "$"), "$.fps");

    const auto& samples = require(doc, "samples", "$");
    if (!samples.is_array()) {
        throw SchemaError("$.samples", "expected an array");
    }
    for (std::size_t i = 0; i < samples.size(); ++i) {
        manifest.samples.push_back(parse_sample(samples[i], "$.samples[" + std::to_string(i) + "]", manifest.fps));
    }
    validate(manifest);
    return manifest;
}

std::string manifest_to_json(const SampleManifest& manifest, const fs::path& destination_dir) {
    std::vector<const Sample*> ordered;
    ordered.reserve(manifest.samples.size());
    for (const auto& s : manifest.samples) {
        ordered.push_back(&s);
    }
    std::sort(ordered.begin(), ordered.end(), [](const Sample* a, const Sample* b) { return a->id < b->id; });

    const auto dest = fs::absolute(destination_dir).lexically_normal();
    json doc;
    doc["window_len"] = manifest.window_len;
    doc["fps"] = manifest.fps;
    doc["samples"] = json::array();
    for (const Sample* s : ordered) {
        json node;
        node["id"] = s->id;
        node["dataset"] = std::string(to_string(s->dataset));
        node["split"] = std::string(to_string(s->split));
        node["label"] = std::string(to_string(s->label));
        json frames = json::array();
        for (const auto& frame : s->frames) {
            auto absolute = fs::absolute(manifest.resolve(frame)).lexically_normal();
            frames.push_back(absolute.lexically_relative(dest).generic_string());
        }
        node["frames"] = std::move(frames);
        json boxes = json::array();
        for (const auto& b : s->bboxes) {
            boxes.push_back(json::array({b.x_min, b.y_min, b.x_max, b.y_max}));
        }
        node["bboxes"] = std::move(boxes);
        json speed;
        speed["mph"] = s->speed.per_frame_mph ? json(*s->speed.per_frame_mph) : json(nullptr);
        speed["descriptive"] =
            s->speed.descriptive ? json(std::string(to_string(*s->speed.descriptive))) : json(nullptr);
        node["speed"] = std::move(speed);
        doc["samples"].push_back(std::move(node));
    }
    return doc.dump(2) + "\n";
}

void save_manifest(const SampleManifest& manifest, const fs::path& path) {
    validate(manifest);
    const auto dir = fs::absolute(path).parent_path();
    fs::create_directories(dir);
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw RuntimeFailure("cannot write manifest " + path.string());
    }
    out << manifest_to_json(manifest, dir);
}

std::vector<Sample> split_filter(const SampleManifest& manifest, Split split, std::optional<DatasetId> dataset) {
    std::vector<Sample> out;
    for (const auto& s : manifest.samples) {
        if (s.split == split && (!dataset || s.dataset == *dataset)) {
            out.push_back(s);
        }
    }
    std::sort(out.begin(), out.end(), [](const Sample& a, const Sample& b) { return a.id < b.id; });
    return out;
}

std::vector<Sample> merge_samples(const std::vector<SampleManifest>& manifests, Split split) {
    std::vector<Sample> out;
    std::set<std::string> seen;
    for (const auto& manifest : manifests) {
        for (auto sample : split_filter(manifest, split)) {
            if (!seen.insert(sample.id).second) {
                throw InvariantViolation(sample.id, "sample id appears in more than one manifest");
            }
            for (auto& frame : sample.frames) {
                frame = manifest.resolve(frame);
            }
            out.push_back(std::move(sample));
        }
    }
    std::sort(out.begin(), out.end(), [](const Sample& a, const Sample& b) { return a.id < b.id; });
    return out;
}

}  // namespace intent_ape
