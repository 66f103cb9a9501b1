#include "intent_ape/templates.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <set>

#include "intent_ape/encoding.hpp"
#include "json.hpp"

namespace intent_ape {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

constexpr std::array<std::string_view, 0> kNoPlaceholders{};
constexpr std::array<std::string_view, 1> kNumeric{placeholder::kSpeed};
constexpr std::array<std::string_view, 1> kDescriptive{placeholder::kSpeedDescription};
constexpr std::array<std::string_view, 4> kTimeConscious{placeholder::kTimeInterval, placeholder::kInitialSpeed,
                                                         placeholder::kFinalSpeed, placeholder::kDirection};
constexpr std::array<std::string_view, 6> kAllPlaceholders{
    placeholder::kSpeed,       placeholder::kSpeedDescription, placeholder::kTimeInterval,
    placeholder::kInitialSpeed, placeholder::kFinalSpeed,      placeholder::kDirection};

bool is_ident_start(char c) { return std::islower(static_cast<unsigned char>(c)) || c == '_'; }
bool is_ident(char c) { return is_ident_start(c) || std::isdigit(static_cast<unsigned char>(c)); }

double round_half_up(double value, int decimals) {
    const double scale = std::pow(10.0, decimals);
    return std::floor(value * scale + 0.5 + 1e-9) / scale;
}

void check_placeholders(std::string_view text, TemplateLevel level, const std::string& id) {
    const auto legal = legal_placeholders(level);
    for (const auto& name : extract_placeholders(text)) {
        if (std::find(kAllPlaceholders.begin(), kAllPlaceholders.end(), name) == kAllPlaceholders.end()) {
            throw UnknownPlaceholder(name);
        }
        if (std::find(legal.begin(), legal.end(), name) == legal.end()) {
            throw LevelMismatch("template '" + id + "' (" + std::string(to_string(level)) + ") uses {" + name + "}");
        }
    }
}

}  // namespace

std::string_view to_string(TemplateLevel level) {
    switch (level) {
        case TemplateLevel::Role: return "role";
        case TemplateLevel::PhysicalCues: return "physical";
        case TemplateLevel::SpeedNumeric: return "speed_numeric";
        case TemplateLevel::SpeedDescriptive: return "speed_descriptive";
        case TemplateLevel::SpeedTimeConscious: return "speed_time";
    }
    return "role";
}

std::optional<TemplateLevel> parse_template_level(std::string_view text) {
    for (auto level : {TemplateLevel::Role, TemplateLevel::PhysicalCues, TemplateLevel::SpeedNumeric,
                       TemplateLevel::SpeedDescriptive, TemplateLevel::SpeedTimeConscious}) {
        if (text == to_string(level) || text == level_tag(level)) {
            return level;
        }
    }
    return std::nullopt;
}

std::string_view level_tag(TemplateLevel level) {
    switch (level) {
        case TemplateLevel::Role: return "R";
        case TemplateLevel::PhysicalCues: return "B";
        case TemplateLevel::SpeedNumeric: return "Ds";
        case TemplateLevel::SpeedDescriptive: return "Dd";
        case TemplateLevel::SpeedTimeConscious: return "Dt";
    }
    return "R";
}

std::span<const std::string_view> legal_placeholders(TemplateLevel level) {
    switch (level) {
        case TemplateLevel::Role:
        case TemplateLevel::PhysicalCues: return kNoPlaceholders;
        case TemplateLevel::SpeedNumeric: return kNumeric;
        case TemplateLevel::SpeedDescriptive: return kDescriptive;
        case TemplateLevel::SpeedTimeConscious: return kTimeConscious;
    }
    return kNoPlaceholders;
}

std::vector<std::string> extract_placeholders(std::string_view text) {
    std::vector<std::string> names;
    for (std::size_t i = 0; i < text.size(); ++i) {
        if (text[i] != '{') {
            continue;
        }
        std::size_t j = i + 1;
        while (j < text.size() && is_ident(text[j])) {
            ++j;
        }
        const bool well_formed = j > i + 1 && is_ident_start(text[i + 1]) && j < text.size() && text[j] == '}';
        if (!well_formed) {
            const auto end = text.find('}', i);
            throw UnknownPlaceholder(std::string(text.substr(i + 1, end == std::string_view::npos ? 12 : end - i - 1)));
        }
        names.emplace_back(text.substr(i + 1, j - i - 1));
        i = j;
    }
    return names;
}

std::string substitute(std::string_view text, const std::map<std::string, std::string>& values) {
    std::string out;
    out.reserve(text.size() + 32);
    std::size_t pos = 0;
    while (pos < text.size()) {
        const auto open = text.find('{', pos);
        if (open == std::string_view::npos) {
            out.append(text.substr(pos));
            break;
        }
        out.append(text.substr(pos, open - pos));
        const auto close = text.find('}', open);
        if (close == std::string_view::npos) {
            throw UnknownPlaceholder(std::string(text.substr(open + 1)));
        }
        const std::string name(text.substr(open + 1, close - open - 1));
        auto it = values.find(name);
        if (it == values.end()) {
            throw UnknownPlaceholder(name);
        }
        out.append(it->second);
        pos = close + 1;
    }
    return out;
}

void validate(const PromptTemplate& tmpl) {
    if (tmpl.id.empty()) {
        throw SchemaError("id", "template id is empty");
    }
    if (tmpl.text.empty()) {
        throw SchemaError(tmpl.id + ".text", "template text is empty");
    }
    if (tmpl.level == TemplateLevel::Role) {
        if (tmpl.question.empty()) {
            throw SchemaError(tmpl.id + ".question", "role templates need a question");
        }
        check_placeholders(tmpl.question, tmpl.level, tmpl.id);
    } else if (!tmpl.question.empty()) {
        throw LevelMismatch("template '" + tmpl.id + "': only role templates carry a question");
    }
    check_placeholders(tmpl.text, tmpl.level, tmpl.id);
}

const PromptTemplate* PromptPool::find(std::string_view id) const {
    auto it = std::find_if(templates.begin(), templates.end(), [&](const PromptTemplate& t) { return t.id == id; });
    return it == templates.end() ? nullptr : &*it;
}

void validate(const PromptPool& pool) {
    std::set<std::string> ids;
    for (const auto& t : pool.templates) {
        if (t.level != pool.level) {
            throw LevelMismatch("template '" + t.id + "' is " + std::string(to_string(t.level)) + " in a " +
                                std::string(to_string(pool.level)) + " pool");
        }
        validate(t);
        if (!ids.insert(t.id).second) {
            throw DuplicateId(t.id);
        }
    }
}

PromptPool load_pool(const fs::path& path) {
    if (!fs::is_regular_file(path)) {
        throw MissingFile(path);
    }
    json doc;
    try {
        std::ifstream in(path);
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw SchemaError(path.string(), e.what());
    }
    if (!doc.is_object() || !doc.contains("level") || !doc["level"].is_string()) {
        throw SchemaError("level", "pool file needs a string 'level'");
    }
    auto level = parse_template_level(doc["level"].get<std::string>());
    if (!level) {
        throw SchemaError("level", "unknown level '" + doc["level"].get<std::string>() + "'");
    }
    if (!doc.contains("templates") || !doc["templates"].is_array()) {
        throw SchemaError("templates", "expected an array");
    }
    PromptPool pool;
    pool.level = *level;
    for (std::size_t i = 0; i < doc["templates"].size(); ++i) {
        const auto& node = doc["templates"][i];
        const std::string where = "templates[" + std::to_string(i) + "]";
        if (!node.is_object() || !node.contains("id") || !node["id"].is_string() || !node.contains("text") ||
            !node["text"].is_string()) {
            throw SchemaError(where, "expected {\"id\": str, \"text\": str}");
        }
        PromptTemplate t;
        t.id = node["id"].get<std::string>();
        t.level = *level;
        t.text = node["text"].get<std::string>();
        if (node.contains("question")) {
            if (!node["question"].is_string()) {
                throw SchemaError(where + ".question", "expected a string");
            }
            t.question = node["question"].get<std::string>();
        }
        if (node.contains("level")) {
            auto own = node["level"].is_string() ? parse_template_level(node["level"].get<std::string>())
                                                 : std::nullopt;
            if (own != level) {
                throw LevelMismatch("template '" + t.id + "' declares a level different from its pool");
            }
        }
        pool.templates.push_back(std::move(t));
    }
    validate(pool);
    return pool;
}

void save_pool(const PromptPool& pool, const fs::path& path) {
    validate(pool);
    json doc;
    doc["level"] = std::string(to_string(pool.level));
    doc["templates"] = json::array();
    for (const auto& t : pool.templates) {
        json node;
        node["id"] = t.id;
        node["text"] = t.text;
        if (!t.question.empty()) {
            node["question"] = t.question;
        }
        doc["templates"].push_back(std::move(node));
    }
    if (path.has_parent_path()) {
        fs::create_directories(path.parent_path());
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw RuntimeFailure("cannot write pool " + path.string());
    }
    out << doc.dump(2) << "\n";
}

std::string_view pool_file_name(TemplateLevel level) {
    switch (level) {
        case TemplateLevel::Role: return "role.json";
        case TemplateLevel::PhysicalCues: return "physical.json";
        case TemplateLevel::SpeedNumeric: return "speed_numeric.json";
        case TemplateLevel::SpeedDescriptive: return "speed_descriptive.json";
        case TemplateLevel::SpeedTimeConscious: return "speed_time.json";
    }
    return "role.json";
}

const PromptPool& PoolSet::at(TemplateLevel level) const {
    switch (level) {
        case TemplateLevel::Role: return role;
        case TemplateLevel::PhysicalCues: return physical;
        case TemplateLevel::SpeedNumeric: return speed_numeric;
        case TemplateLevel::SpeedDescriptive: return speed_descriptive;
        case TemplateLevel::SpeedTimeConscious: return speed_time;
    }
    return role;
}

PoolSet load_pool_set(const fs::path& directory) {
    auto load = [&](TemplateLevel level) {
        auto pool = load_pool(directory / pool_file_name(level));
        if (pool.level != level) {
            throw LevelMismatch((directory / pool_file_name(level)).string() + " holds a " +
                                std::string(to_string(pool.level)) + " pool");
        }
        return pool;
    };
    return PoolSet{load(TemplateLevel::Role), load(TemplateLevel::PhysicalCues), load(TemplateLevel::SpeedNumeric),
                   load(TemplateLevel::SpeedDescriptive), load(TemplateLevel::SpeedTimeConscious)};
}

// ---------------------------------------------------------------------------
// PromptStack

PromptStack::PromptStack(PromptTemplate role, std::optional<PromptTemplate> physical,
                         std::optional<PromptTemplate> dynamics)
    : role_(std::move(role)), physical_(std::move(physical)), dynamics_(std::move(dynamics)) {
    if (role_.level != TemplateLevel::Role) {
        throw LevelMismatch("stack role slot holds a " + std::string(to_string(role_.level)) + " template");
    }
    if (physical_ && physical_->level != TemplateLevel::PhysicalCues) {
        throw LevelMismatch("stack physical slot holds a " + std::string(to_string(physical_->level)) + " template");
    }
    if (dynamics_ && !is_dynamics(dynamics_->level)) {
        throw LevelMismatch("stack dynamics slot holds a " + std::string(to_string(dynamics_->level)) + " template");
    }
}

PromptStack PromptStack::compose(std::span<const PromptTemplate> templates) {
    std::optional<PromptTemplate> role;
    std::optional<PromptTemplate> physical;
    std::optional<PromptTemplate> dynamics;
    for (const auto& t : templates) {
        std::optional<PromptTemplate>* slot = nullptr;
        if (t.level == TemplateLevel::Role) {
            slot = &role;
        } else if (t.level == TemplateLevel::PhysicalCues) {
            slot = &physical;
        } else {
            slot = &dynamics;
        }
        if (slot->has_value()) {
            throw LevelMismatch("stack already holds a " + std::string(to_string((*slot)->level)) +
                                " template; cannot add '" + t.id + "'");
        }
        *slot = t;
    }
    if (!role) {
        throw LevelMismatch("stack needs a role template");
    }
    return PromptStack(std::move(*role), std::move(physical), std::move(dynamics));
}

const PromptTemplate& PromptStack::newest() const noexcept {
    if (dynamics_) return *dynamics_;
    if (physical_) return *physical_;
    return role_;
}

PromptStack PromptStack::with_newest(PromptTemplate replacement) const {
    PromptStack out = *this;
    if (replacement.level != newest().level) {
        throw LevelMismatch("replacement for the newest slot must be " + std::string(to_string(newest().level)));
    }
    if (dynamics_) {
        out.dynamics_ = std::move(replacement);
    } else if (physical_) {
        out.physical_ = std::move(replacement);
    } else {
        out.role_ = std::move(replacement);
    }
    return out;
}

PromptStack PromptStack::with(PromptTemplate added) const {
    PromptStack out = *this;
    if (added.level == TemplateLevel::PhysicalCues && !physical_) {
        out.physical_ = std::move(added);
    } else if (is_dynamics(added.level) && !dynamics_) {
        out.dynamics_ = std::move(added);
    } else {
        throw LevelMismatch("stack slot for " + std::string(to_string(added.level)) + " is taken");
    }
    return out;
}

std::vector<std::string> PromptStack::template_ids() const {
    std::vector<std::string> ids{role_.id};
    if (physical_) ids.push_back(physical_->id);
    if (dynamics_) ids.push_back(dynamics_->id);
    return ids;
}

std::string PromptStack::id() const {
    const auto ids = template_ids();
    std::string out = ids.front();
    for (std::size_t i = 1; i < ids.size(); ++i) {
        out += "+" + ids[i];
    }
    return out;
}

std::string PromptStack::content_hash() const {
    std::string material;
    auto add = [&](const PromptTemplate& t) {
        material += to_string(t.level);
        material += '\x1f';
        material += t.text;
        material += '\x1f';
        material += t.question;
        material += '\x1e';
    };
    add(role_);
    if (physical_) add(*physical_);
    if (dynamics_) add(*dynamics_);
    return sha256_hex(material);
}

// ---------------------------------------------------------------------------
// Speed helpers

std::string_view motion_phrase(MotionState state) {
    switch (state) {
        case MotionState::Stopped: return "stopped";
        case MotionState::MovingSlow: return "moving slowly";
        case MotionState::MovingFast: return "moving fast";
        case MotionState::Accelerating: return "accelerating";
        case MotionState::Decelerating: return "decelerating";
    }
    return "stopped";
}

MotionDescription describe_motion(const SpeedTrace& trace, const MotionThresholds& thresholds) {
    const bool numeric = trace.per_frame_mph && !trace.per_frame_mph->empty();
    if (!numeric && !trace.descriptive) {
        throw NoSpeedInformation();
    }
    MotionDescription out;
    if (numeric) {
        const auto& mph = *trace.per_frame_mph;
        const double first = mph.front();
        const double last = mph.back();
        const double mean = std::accumulate(mph.begin(), mph.end(), 0.0) / static_cast<double>(mph.size());
        const double delta = last - first;
        if (mean < thresholds.stopped_mean_mph) {
            out.state = MotionState::Stopped;
        } else if (delta <= -thresholds.change_delta_mph) {
            out.state = MotionState::Decelerating;
        } else if (delta >= thresholds.change_delta_mph) {
            out.state = MotionState::Accelerating;
        } else if (mean < thresholds.slow_fast_split_mph) {
            out.state = MotionState::MovingSlow;
        } else {
            out.state = MotionState::MovingFast;
        }
        out.direction = last > first ? "increased" : (last < first ? "decreased" : "remained near");
    }
    if (trace.descriptive) {
        out.state = *trace.descriptive;
        if (!numeric) {
            out.direction = out.state == MotionState::Accelerating   ? "increased"
                            : out.state == MotionState::Decelerating ? "decreased"
                                                                     : "remained near";
        }
    }
    return out;
}

double time_interval(const SpeedTrace& trace, std::size_t window_len) {
    if (window_len <= 1 || !(trace.fps > 0)) {
        return 0.0;
    }
    return round_half_up(static_cast<double>(window_len - 1) / trace.fps, 2);
}

std::string format_speed(double mph) {
    const double rounded = round_half_up(mph, 1);
    char buf[32];
    if (std::fabs(rounded - std::round(rounded)) < 1e-9) {
        std::snprintf(buf, sizeof buf, "%.0f", std::round(rounded));
    } else {
        std::snprintf(buf, sizeof buf, "%.1f", rounded);
    }
    return buf;
}

std::string format_interval(double seconds) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", round_half_up(seconds, 2));
    return buf;
}

// ---------------------------------------------------------------------------
// Rendering

bool renderable(const PromptStack& stack, const Sample& sample) {
    if (!stack.dynamics()) {
        return true;
    }
    const auto& speed = sample.speed;
    const bool numeric = speed.per_frame_mph && !speed.per_frame_mph->empty();
    switch (stack.dynamics()->level) {
        case TemplateLevel::SpeedNumeric:
        case TemplateLevel::SpeedTimeConscious: return numeric;
        case TemplateLevel::SpeedDescriptive: return numeric || speed.descriptive.has_value();
        default: return true;
    }
}

RenderedPrompt render(const PromptStack& stack, const Sample& sample, const RenderOptions& options) {
    RenderedPrompt out;
    out.stack_ids = stack.template_ids();

    std::vector<std::string> parts;
    if (options.role_delivery == RoleDelivery::SystemMessage) {
        out.system_text = stack.role().text;
    } else {
        parts.push_back(stack.role().text);
    }
    if (stack.physical()) {
        parts.push_back(stack.physical()->text);
    }
    if (stack.dynamics()) {
        const auto& tmpl = *stack.dynamics();
        const auto& speed = sample.speed;
        const bool numeric = speed.per_frame_mph && !speed.per_frame_mph->empty();
        std::map<std::string, std::string> values;
        switch (tmpl.level) {
            case TemplateLevel::SpeedNumeric:
                if (!numeric) throw MissingNumericSpeed(sample.id);
                values[std::string(placeholder::kSpeed)] = format_speed(speed.per_frame_mph->back());
                break;
            case TemplateLevel::SpeedDescriptive: {
                if (!numeric && !speed.descriptive) throw MissingDescriptiveSpeed(sample.id);
                const auto motion = describe_motion(speed, options.thresholds);
                values[std::string(placeholder::kSpeedDescription)] = std::string(motion_phrase(motion.state));
                break;
            }
            case TemplateLevel::SpeedTimeConscious: {
                if (!numeric) throw MissingNumericSpeed(sample.id);
                const auto& mph = *speed.per_frame_mph;
                const auto motion = describe_motion(speed, options.thresholds);
                values[std::string(placeholder::kTimeInterval)] = format_interval(time_interval(speed, mph.size()));
                values[std::string(placeholder::kInitialSpeed)] = format_speed(mph.front());
                values[std::string(placeholder::kFinalSpeed)] = format_speed(mph.back());
                values[std::string(placeholder::kDirection)] = motion.direction;
                break;
            }
            default: break;
        }
        const auto used = extract_placeholders(tmpl.text);
        for (const auto& name : used) {
            auto it = values.find(name);
            if (it == values.end()) {
                throw UnknownPlaceholder(name);
            }
            out.substitutions[name] = it->second;
        }
        parts.push_back(substitute(tmpl.text, values));
    }
    parts.push_back(stack.role().question);
    parts.emplace_back(kAnswerDirective);

    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i) out.user_text += '\n';
        out.user_text += parts[i];
    }
    return out;
}

}  // namespace intent_ape
