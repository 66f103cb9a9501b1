#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "intent_ape/dataset.hpp"

namespace intent_ape {

enum class TemplateLevel { Role, PhysicalCues, SpeedNumeric, SpeedDescriptive, SpeedTimeConscious };

[[nodiscard]] std::string_view to_string(TemplateLevel level);
[[nodiscard]] std::optional<TemplateLevel> parse_template_level(std::string_view text);
/// Short tag used in ledgers and reports: R, B, Ds, Dd, Dt.
[[nodiscard]] std::string_view level_tag(TemplateLevel level);
[[nodiscard]] constexpr bool is_dynamics(TemplateLevel level) noexcept {
    return level == TemplateLevel::SpeedNumeric || level == TemplateLevel::SpeedDescriptive ||
           level == TemplateLevel::SpeedTimeConscious;
}

namespace placeholder {
inline constexpr std::string_view kSpeed = "speed";
inline constexpr std::string_view kSpeedDescription = "speed_description";
inline constexpr std::string_view kTimeInterval = "time_interval";
inline constexpr std::string_view kInitialSpeed = "initial_speed";
inline constexpr std::string_view kFinalSpeed = "final_speed";
inline constexpr std::string_view kDirection = "direction";
}  // namespace placeholder

[[nodiscard]] std::span<const std::string_view> legal_placeholders(TemplateLevel level);

class UnknownPlaceholder : public ValidationError {
  public:
    explicit UnknownPlaceholder(const std::string& name) : ValidationError("unknown placeholder {" + name + "}") {}
};

class LevelMismatch : public ValidationError {
  public:
    explicit LevelMismatch(const std::string& what) : ValidationError("level mismatch: " + what) {}
};

class DuplicateId : public ValidationError {
  public:
    explicit DuplicateId(const std::string& id) : ValidationError("duplicate template id '" + id + "'") {}
};

class MissingNumericSpeed : public ValidationError {
  public:
    explicit MissingNumericSpeed(const std::string& sample_id)
        : ValidationError("sample '" + sample_id + "' has no numeric speed trace") {}
};

class MissingDescriptiveSpeed : public ValidationError {
  public:
    explicit MissingDescriptiveSpeed(const std::string& sample_id)
        : ValidationError("sample '" + sample_id + "' has no speed information to describe") {}
};

class NoSpeedInformation : public ValidationError {
  public:
    NoSpeedInformation() : ValidationError("speed trace has neither numeric nor descriptive data") {}
};

/// `{name}` tokens in order of appearance. Text that opens a brace without a
/// well-formed identifier and closing brace is reported as an unknown placeholder.
[[nodiscard]] std::vector<std::string> extract_placeholders(std::string_view text);

/// One entry of a prompt pool. Role templates carry two parts: `text` is the
/// role definition (sent as the system message by default) and `question` is
/// the task question placed in the user message. Other levels leave `question` empty.
struct PromptTemplate {
    std::string id;
    TemplateLevel level = TemplateLevel::Role;
    std::string text;
    std::string question;

    friend bool operator==(const PromptTemplate&, const PromptTemplate&) = default;
};

/// Throws UnknownPlaceholder, LevelMismatch or SchemaError.
void validate(const PromptTemplate& tmpl);

struct PromptPool {
    TemplateLevel level = TemplateLevel::Role;
    std::vector<PromptTemplate> templates;

    [[nodiscard]] const PromptTemplate* find(std::string_view id) const;
    friend bool operator==(const PromptPool&, const PromptPool&) = default;
};

void validate(const PromptPool& pool);
[[nodiscard]] PromptPool load_pool(const std::filesystem::path& path);
void save_pool(const PromptPool& pool, const std::filesystem::path& path);

/// File name of the shipped seed pool for a level (role.json, physical.json, ...).
[[nodiscard]] std::string_view pool_file_name(TemplateLevel level);

struct PoolSet {
    PromptPool role;
    PromptPool physical;
    PromptPool speed_numeric;
    PromptPool speed_descriptive;
    PromptPool speed_time;

    [[nodiscard]] const PromptPool& at(TemplateLevel level) const;
};

[[nodiscard]] PoolSet load_pool_set(const std::filesystem::path& directory);

inline constexpr std::string_view kAnswerDirective =
    "Conclude with exactly one line: 'Answer: YES' or 'Answer: NO'.";

/// One template per active level; role always present, at most one dynamics template.
class PromptStack {
  public:
    explicit PromptStack(PromptTemplate role, std::optional<PromptTemplate> physical = std::nullopt,
                         std::optional<PromptTemplate> dynamics = std::nullopt);

    /// Builds a stack from an unordered list, rejecting duplicates and mixed dynamics levels.
    [[nodiscard]] static PromptStack compose(std::span<const PromptTemplate> templates);

    [[nodiscard]] const PromptTemplate& role() const noexcept { return role_; }
    [[nodiscard]] const std::optional<PromptTemplate>& physical() const noexcept { return physical_; }
    [[nodiscard]] const std::optional<PromptTemplate>& dynamics() const noexcept { return dynamics_; }

    [[nodiscard]] const PromptTemplate& newest() const noexcept;
    [[nodiscard]] PromptStack with_newest(PromptTemplate replacement) const;
    [[nodiscard]] PromptStack with(PromptTemplate added) const;

    /// Template ids joined with '+'.
    [[nodiscard]] std::string id() const;
    /// SHA-256 over levels and texts; independent of template ids.
    [[nodiscard]] std::string content_hash() const;
    [[nodiscard]] std::vector<std::string> template_ids() const;

    friend bool operator==(const PromptStack&, const PromptStack&) = default;

  private:
    PromptTemplate role_;
    std::optional<PromptTemplate> physical_;
    std::optional<PromptTemplate> dynamics_;
};

struct MotionThresholds {
    double stopped_mean_mph = 0.5;
    double change_delta_mph = 2.0;
    double slow_fast_split_mph = 15.0;
};

struct MotionDescription {
    MotionState state = MotionState::Stopped;
    /// "increased", "decreased" or "remained near".
    std::string direction;
};

[[nodiscard]] MotionDescription describe_motion(const SpeedTrace& trace, const MotionThresholds& thresholds = {});
/// Phrase used for {speed_description}, e.g. "moving slowly".
[[nodiscard]] std::string_view motion_phrase(MotionState state);

/// (window_len - 1) / fps, rounded half-up to two decimals.
[[nodiscard]] double time_interval(const SpeedTrace& trace, std::size_t window_len);

[[nodiscard]] std::string format_speed(double mph);
[[nodiscard]] std::string format_interval(double seconds);

enum class RoleDelivery { SystemMessage, PrependToUser };

struct RenderOptions {
    RoleDelivery role_delivery = RoleDelivery::SystemMessage;
    MotionThresholds thresholds;
};

struct RenderedPrompt {
    std::string system_text;
    std::string user_text;
    std::vector<std::string> stack_ids;
    std::map<std::string, std::string> substitutions;

    friend bool operator==(const RenderedPrompt&, const RenderedPrompt&) = default;
};

/// Whether `sample` carries the speed data the stack's dynamics template needs.
[[nodiscard]] bool renderable(const PromptStack& stack, const Sample& sample);

[[nodiscard]] RenderedPrompt render(const PromptStack& stack, const Sample& sample,
                                    const RenderOptions& options = {});

/// Replaces every `{name}` in `text` from `values`; throws UnknownPlaceholder on a miss.
[[nodiscard]] std::string substitute(std::string_view text, const std::map<std::string, std::string>& values);

}  // namespace intent_ape
