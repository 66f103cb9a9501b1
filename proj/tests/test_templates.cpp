#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "intent_ape/templates.hpp"

using namespace intent_ape;

namespace {

PromptTemplate role_t() {
    return {"r", TemplateLevel::Role, "You are a driving assistant.", "Will the pedestrian cross?"};
}
PromptTemplate physical_t() { return {"p", TemplateLevel::PhysicalCues, "Consider the pedestrian posture.", ""}; }
PromptTemplate dt_t() {
    return {"dt", TemplateLevel::SpeedTimeConscious,
            "Over the past {time_interval} seconds, the ego-vehicle speed {direction} from {initial_speed} mph to "
            "{final_speed} mph.",
            ""};
}

Sample ramp(double from, double to, std::size_t n = 16, double fps = 30) {
    Sample s;
    s.id = "ramp";
    s.frames.assign(n, "f.png");
    s.bboxes.assign(n, BBox{0, 0, 1, 1});
    std::vector<double> mph;
    for (std::size_t i = 0; i < n; ++i) mph.push_back(from + (to - from) * i / (n - 1));
    s.speed.per_frame_mph = mph;
    s.speed.fps = fps;
    return s;
}

}  // namespace

TEST(Render, TimeConsciousGolden) {
    const PromptStack stack(role_t(), physical_t(), dt_t());
    const auto out = render(stack, ramp(25, 18));
    EXPECT_EQ(out.system_text, "You are a driving assistant.");
    EXPECT_EQ(out.user_text,
              "Consider the pedestrian posture.\n"
              "Over the past 0.50 seconds, the ego-vehicle speed decreased from 25 mph to 18 mph.\n"
              "Will the pedestrian cross?\n"
              "Conclude with exactly one line: 'Answer: YES' or 'Answer: NO'.");
    EXPECT_EQ(out.substitutions.at("time_interval"), "0.50");
    EXPECT_EQ(out.substitutions.at("direction"), "decreased");
    EXPECT_EQ(out.stack_ids, (std::vector<std::string>{"r", "p", "dt"}));
}

TEST(Render, PrependDeliveryPutsRoleInUserText) {
    const PromptStack stack(role_t(), physical_t());
    const auto out = render(stack, ramp(10, 10), {.role_delivery = RoleDelivery::PrependToUser});
    EXPECT_TRUE(out.system_text.empty());
    EXPECT_EQ(out.user_text.rfind("You are a driving assistant.\nConsider", 0), 0u);
}

TEST(Render, NumericAndDescriptiveSpeeds) {
    const PromptTemplate ds{"ds", TemplateLevel::SpeedNumeric, "The car drives at {speed} mph.", ""};
    const PromptTemplate dd{"dd", TemplateLevel::SpeedDescriptive, "The car is {speed_description}.", ""};
    auto s = ramp(30, 12.35);
    EXPECT_NE(render(PromptStack(role_t(), std::nullopt, ds), s).user_text.find("at 12.4 mph"), std::string::npos);
    EXPECT_NE(render(PromptStack(role_t(), std::nullopt, dd), s).user_text.find("is decelerating."), std::string::npos);
    Sample descriptive = s;
    descriptive.speed.per_frame_mph.reset();
    descriptive.speed.descriptive = MotionState::MovingSlow;
    EXPECT_NE(render(PromptStack(role_t(), std::nullopt, dd), descriptive).user_text.find("moving slowly"),
              std::string::npos);
    EXPECT_FALSE(renderable(PromptStack(role_t(), std::nullopt, ds), descriptive));
    EXPECT_THROW((void)render(PromptStack(role_t(), std::nullopt, ds), descriptive), MissingNumericSpeed);
    EXPECT_THROW((void)render(PromptStack(role_t(), std::nullopt, dt_t()), descriptive), MissingNumericSpeed);
}

TEST(Speed, TimeIntervalRoundsHalfUp) {
    EXPECT_DOUBLE_EQ(time_interval(ramp(1, 1).speed, 16), 0.50);
    EXPECT_EQ(format_interval(time_interval(ramp(1, 1, 16, 15).speed, 16)), "1.00");
    EXPECT_EQ(format_interval(time_interval(ramp(1, 1, 9, 16).speed, 9)), "0.50");
    EXPECT_EQ(format_interval(time_interval(ramp(1, 1, 2, 8).speed, 2)), "0.13");  // 0.125 -> 0.13
    EXPECT_DOUBLE_EQ(time_interval(ramp(1, 1, 1).speed, 1), 0.0);
}

TEST(Speed, FormatSpeed) {
    EXPECT_EQ(format_speed(25.0), "25");
    EXPECT_EQ(format_speed(18.04), "18");
    EXPECT_EQ(format_speed(12.35), "12.4");
    EXPECT_EQ(format_speed(0.0), "0");
}

TEST(Speed, DescribeMotionStates) {
    EXPECT_EQ(describe_motion(ramp(0.1, 0.2).speed).state, MotionState::Stopped);
    EXPECT_EQ(describe_motion(ramp(5, 6).speed).state, MotionState::MovingSlow);
    EXPECT_EQ(describe_motion(ramp(30, 31).speed).state, MotionState::MovingFast);
    EXPECT_EQ(describe_motion(ramp(10, 20).speed).state, MotionState::Accelerating);
    EXPECT_EQ(describe_motion(ramp(25, 18).speed).state, MotionState::Decelerating);
    EXPECT_EQ(describe_motion(ramp(10, 20).speed).direction, "increased");
    EXPECT_EQ(describe_motion(ramp(20, 20).speed).direction, "remained near");
    EXPECT_THROW((void)describe_motion(SpeedTrace{}), NoSpeedInformation);
}

TEST(Placeholders, ExtractAndSubstitute) {
    EXPECT_EQ(extract_placeholders("a {speed} b {final_speed}"), (std::vector<std::string>{"speed", "final_speed"}));
    EXPECT_THROW((void)extract_placeholders("broken {Speed}"), UnknownPlaceholder);
    EXPECT_THROW((void)extract_placeholders("dangling {speed"), UnknownPlaceholder);
    EXPECT_EQ(substitute("x {a} y {a}", {{"a", "1"}}), "x 1 y 1");
    EXPECT_THROW((void)substitute("x {b}", {{"a", "1"}}), UnknownPlaceholder);
}

TEST(Validation, TemplatesAndPools) {
    EXPECT_NO_THROW(validate(dt_t()));
    EXPECT_THROW(validate(PromptTemplate{"x", TemplateLevel::SpeedNumeric, "{initial_speed}", ""}), LevelMismatch);
    EXPECT_THROW(validate(PromptTemplate{"x", TemplateLevel::SpeedNumeric, "{velocity}", ""}), UnknownPlaceholder);
    EXPECT_THROW(validate(PromptTemplate{"x", TemplateLevel::Role, "text", ""}), SchemaError);
    EXPECT_THROW(validate(PromptTemplate{"x", TemplateLevel::PhysicalCues, "text", "q?"}), LevelMismatch);
    PromptPool dup{TemplateLevel::Role, {role_t(), role_t()}};
    EXPECT_THROW(validate(dup), DuplicateId);
}

TEST(Pools, ShippedPoolsLoadAndRoundTrip) {
    const auto pools = load_pool_set(default_pool_dir());
    for (auto level : stage_order()) {
        const auto& pool = pools.at(level);
        EXPECT_EQ(pool.level, level);
        EXPECT_EQ(pool.templates.size(), 13u) << to_string(level);
        const auto path = fixtures::scratch_dir("tpl_pool") / pool_file_name(level);
        save_pool(pool, path);
        EXPECT_EQ(load_pool(path), pool);
    }
    EXPECT_THROW((void)load_pool("/nonexistent/role.json"), MissingFile);
}

TEST(Stack, ComposeIdsAndHash) {
    const std::vector<PromptTemplate> parts{dt_t(), role_t(), physical_t()};
    const auto stack = PromptStack::compose(parts);
    EXPECT_EQ(stack.id(), "r+p+dt");
    EXPECT_EQ(stack.newest().id, "dt");
    const std::vector<PromptTemplate> clash{role_t(), dt_t(),
                                            PromptTemplate{"ds", TemplateLevel::SpeedNumeric, "{speed}", ""}};
    EXPECT_THROW((void)PromptStack::compose(clash), LevelMismatch);
    const std::vector<PromptTemplate> headless{physical_t()};
    EXPECT_THROW((void)PromptStack::compose(headless), LevelMismatch);

    auto renamed = dt_t();
    renamed.id = "other";
    EXPECT_EQ(stack.content_hash(), stack.with_newest(renamed).content_hash());
    auto reworded = dt_t();
    reworded.text += " ";
    EXPECT_NE(stack.content_hash(), stack.with_newest(reworded).content_hash());
    EXPECT_THROW((void)stack.with_newest(physical_t()), LevelMismatch);
    EXPECT_THROW((void)PromptStack(role_t(), physical_t()).with(physical_t()), LevelMismatch);
}
