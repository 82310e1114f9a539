#include "cda/meta/meta_action.hpp"

#include "meta_fuzz.hpp"

#include <gtest/gtest.h>

using namespace cda;
using namespace cda::meta;

namespace {

std::string block(const std::string& action, const std::string& params) {
    return "```metaaction\naction: " + action + "\nparams:\n" + params + "```\n";
}

RejectReason rejected(std::string_view text) {
    const auto r = parse_command(text);
    EXPECT_TRUE(std::holds_alternative<Rejection>(r)) << text;
    return std::holds_alternative<Rejection>(r) ? std::get<Rejection>(r).reason : RejectReason::RateLimited;
}

template <class T>
T parsed(std::string_view text) {
    const auto r = parse_command(text);
    if (const auto* rej = std::get_if<Rejection>(&r)) {
        ADD_FAILURE() << rej->describe();
        return {};
    }
    EXPECT_TRUE(std::holds_alternative<T>(std::get<Command>(r)));
    return std::get<T>(std::get<Command>(r));
}

vehicle::VehicleState test_vehicle() {
    auto route = std::make_shared<vehicle::Route>(
        std::vector<vehicle::RouteSegment>{{12, {28.51, -81.40}, {28.51, -81.38}, 2000.0}});
    return vehicle::make_vehicle(1, route, 30.0, 30.0, 100.0);
}

}  // namespace

TEST(ParseCommand, GrammarForcedFollowGap) {
    const auto text = "Given the rain I suggest more space.\n" + block("SetFollowGap", "  gap_s: 2.5\n") + "Thanks";
    EXPECT_DOUBLE_EQ(parsed<SetFollowGap>(text).gap_s, 2.5);
}

TEST(ParseCommand, EveryCatalogAction) {
    EXPECT_DOUBLE_EQ(parsed<SetCruiseSpeed>(block("SetCruiseSpeed", "  speed_mps: 25\n")).speed_mps, 25.0);
    const auto a = parsed<ApplyAdvisorySpeed>(
        block("ApplyAdvisorySpeed", "  segment_id: 12\n  speed_mps: 20.0\n  duration_s: 600\n"));
    EXPECT_EQ(a.segment_id, 12);
    EXPECT_DOUBLE_EQ(a.speed_mps, 20.0);
    EXPECT_DOUBLE_EQ(a.duration_s, 600.0);
    EXPECT_EQ(parsed<CancelAdvisory>(block("CancelAdvisory", "  segment_id: 7\n")).segment_id, 7);
    const auto n = parsed<DriverNotice>(block("DriverNotice", "  text: \"congestion ahead\"\n  severity: warn\n"));
    EXPECT_EQ(n.text, "congestion ahead");
    EXPECT_EQ(n.severity, vehicle::NoticeSeverity::Warn);
    // Quoted numbers are strings; an unquoted word is a string as well.
    EXPECT_EQ(parsed<DriverNotice>(block("DriverNotice", "  text: 42\n  severity: 'info'\n")).text, "42");
}

TEST(ParseCommand, ToleratesCrlfAndBlankLines) {
    const std::string text = "```metaaction\r\naction: SetCruiseSpeed\r\n\r\nparams:\r\n  speed_mps: 12\r\n```\r\n";
    EXPECT_DOUBLE_EQ(parsed<SetCruiseSpeed>(text).speed_mps, 12.0);
}

TEST(ParseCommand, DistinctRejectionReasons) {
    EXPECT_EQ(rejected("just prose, set speed to 20"), RejectReason::NoBlock);
    EXPECT_EQ(rejected(""), RejectReason::NoBlock);
    EXPECT_EQ(rejected(block("SetCruiseSpeed", "  speed_mps: 1\n") + block("SetFollowGap", "  gap_s: 1\n")),
              RejectReason::MultipleBlocks);
    EXPECT_EQ(rejected(block("LaunchMissiles", "  target: moon\n")), RejectReason::UnknownAction);
    EXPECT_EQ(rejected(block("SetCruiseSpeed", "")), RejectReason::MissingParam);
    EXPECT_EQ(rejected("```metaaction\naction: SetCruiseSpeed\n```"), RejectReason::MissingParam);
    EXPECT_EQ(rejected(block("SetCruiseSpeed", "  speed_mps: fast\n")), RejectReason::MistypedParam);
    EXPECT_EQ(rejected(block("SetCruiseSpeed", "  speed_mps: \"20\"\n")), RejectReason::MistypedParam);
    EXPECT_EQ(rejected(block("SetCruiseSpeed", "  speed_mps: inf\n")), RejectReason::MistypedParam);
    EXPECT_EQ(rejected(block("CancelAdvisory", "  segment_id: 1.5\n")), RejectReason::MistypedParam);
    EXPECT_EQ(rejected(block("DriverNotice", "  text: hi\n  severity: loud\n")), RejectReason::MistypedParam);
    EXPECT_EQ(rejected(block("SetCruiseSpeed", "  speed_mps: 20\n  turbo: 1\n")), RejectReason::UnknownParam);
    EXPECT_EQ(rejected("```metaaction\naction: SetCruiseSpeed\nparams:\n  speed_mps: 1\n"), RejectReason::Malformed);
    EXPECT_EQ(rejected(block("SetCruiseSpeed", "  speed_mps: 1\n  speed_mps: 2\n")), RejectReason::Malformed);
    EXPECT_EQ(rejected("```metaaction\nparams:\n  speed_mps: 1\n```"), RejectReason::Malformed);
    EXPECT_EQ(rejected("```metaaction\naction: SetCruiseSpeed\nspeed_mps: 1\n```"), RejectReason::Malformed);
    EXPECT_EQ(rejected("```metaaction\naction: SetCruiseSpeed\n  speed_mps: 1\n```"), RejectReason::Malformed);
}

TEST(Validate, EnvelopeRules) {
    const SafetyEnvelope env;
    const auto check = [&](const Command& c) { return validate(c, env, std::nullopt, SimTime{}); };

    const auto fast = check(SetCruiseSpeed{80.0});
    ASSERT_TRUE(std::holds_alternative<Rejection>(fast));
    const auto& r = std::get<Rejection>(fast);
    EXPECT_EQ(r.reason, RejectReason::OutOfRange);
    EXPECT_EQ(r.field, "speed_mps");
    EXPECT_EQ(r.value, 80.0);
    EXPECT_EQ(r.upper, 38.0);

    EXPECT_TRUE(std::holds_alternative<ValidatedCommand>(check(SetFollowGap{2.5})));
    EXPECT_TRUE(std::holds_alternative<Rejection>(check(SetFollowGap{0.5})));
    EXPECT_TRUE(std::holds_alternative<Rejection>(check(ApplyAdvisorySpeed{12, 20.0, 0.0})));
    EXPECT_TRUE(std::holds_alternative<Rejection>(check(ApplyAdvisorySpeed{12, -1.0, 60.0})));
    EXPECT_TRUE(std::holds_alternative<ValidatedCommand>(check(ApplyAdvisorySpeed{12, 38.0, 60.0})));
    EXPECT_TRUE(std::holds_alternative<Rejection>(check(DriverNotice{std::string(201, 'x')})));
    EXPECT_TRUE(std::holds_alternative<ValidatedCommand>(check(DriverNotice{std::string(200, 'x')})));
    // 200 code points of two-byte UTF-8 still fit.
    std::string accents;
    for (int i = 0; i < 200; ++i) {
        accents += "\xC3\xA9";
    }
    EXPECT_TRUE(std::holds_alternative<ValidatedCommand>(check(DriverNotice{accents})));
    EXPECT_TRUE(std::holds_alternative<Rejection>(check(DriverNotice{""})));
    EXPECT_TRUE(std::holds_alternative<Rejection>(check(DriverNotice{"bad\x01text"})));
    EXPECT_TRUE(std::holds_alternative<Rejection>(check(DriverNotice{"\xC3"})));
}

TEST(Validate, QuantizedAdvisorySpeedMustFit) {
    SafetyEnvelope env;
    env.speed_max = 37.99;
    // 37.989 is in range, but its 0.02 m/s wire value rounds to 37.98 and is fine;
    // 37.9899 rounds to 37.98 too. 37.99 itself rounds to 38.00 and must be refused.
    EXPECT_TRUE(std::holds_alternative<ValidatedCommand>(
        validate(ApplyAdvisorySpeed{1, 37.989, 60}, env, std::nullopt, SimTime{})));
    EXPECT_TRUE(std::holds_alternative<Rejection>(
        validate(ApplyAdvisorySpeed{1, 37.99, 60}, env, std::nullopt, SimTime{})));
}

TEST(Validate, RateLimit) {
    const SafetyEnvelope env;
    const SimTime t0 = std::chrono::seconds(10);
    const auto second = validate(SetFollowGap{2.0}, env, t0, t0 + std::chrono::milliseconds(200));
    ASSERT_TRUE(std::holds_alternative<Rejection>(second));
    EXPECT_EQ(std::get<Rejection>(second).reason, RejectReason::RateLimited);
    EXPECT_NEAR(std::get<Rejection>(second).remaining_s, 0.8, 1e-9);
    EXPECT_TRUE(std::holds_alternative<ValidatedCommand>(validate(SetFollowGap{2.0}, env, t0, t0 + std::chrono::seconds(1))));
}

TEST(Validate, EnvelopeItselfChecked) {
    EXPECT_NO_THROW(SafetyEnvelope{}.validate());
    SafetyEnvelope bad;
    bad.gap_min = 5.0;
    EXPECT_THROW(bad.validate(), std::invalid_argument);
    bad = {};
    bad.rate_limit_s = -1;
    EXPECT_THROW(bad.validate(), std::invalid_argument);
}

TEST(Apply, Setpoints) {
    auto v = test_vehicle();
    CommandGate gate;
    SimTime now{};
    auto r = gate.submit(block("SetCruiseSpeed", "  speed_mps: 25\n"), v, now);
    ASSERT_TRUE(r.applied) << r.rejection->describe();
    EXPECT_DOUBLE_EQ(v.driver_set_speed_mps, 25.0);
    for (int i = 0; i < 300; ++i) {
        v = vehicle::tick(v, {}, now);
    }
    EXPECT_NEAR(v.speed_mps, 25.0, 0.01);

    now += std::chrono::seconds(2);
    const double speed = v.speed_mps;
    r = gate.submit(block("DriverNotice", "  text: \"congestion ahead\"\n  severity: info\n"), v, now);
    ASSERT_TRUE(r.applied);
    EXPECT_EQ(v.notices.size(), 1U);
    EXPECT_EQ(v.notices[0].text, "congestion ahead");
    EXPECT_DOUBLE_EQ(v.speed_mps, speed);

    now += std::chrono::seconds(2);
    r = gate.submit(block("ApplyAdvisorySpeed", "  segment_id: 12\n  speed_mps: 20\n  duration_s: 600\n"), v, now);
    ASSERT_TRUE(r.applied);
    EXPECT_EQ(r.advisory_outcome, vehicle::AdvisoryOutcome::Applied);
    EXPECT_DOUBLE_EQ(vehicle::effective_target(v), 20.0);

    now += std::chrono::seconds(2);
    r = gate.submit(block("CancelAdvisory", "  segment_id: 12\n"), v, now);
    ASSERT_TRUE(r.applied);
    EXPECT_EQ(r.advisory_outcome, vehicle::AdvisoryOutcome::Cancelled);
    EXPECT_DOUBLE_EQ(vehicle::effective_target(v), 25.0);

    now += std::chrono::milliseconds(100);
    r = gate.submit(block("SetFollowGap", "  gap_s: 3\n"), v, now);
    ASSERT_TRUE(r.rejection);
    EXPECT_EQ(r.rejection->reason, RejectReason::RateLimited);
    EXPECT_DOUBLE_EQ(v.follow_gap_s, 2.0);
    EXPECT_EQ(gate.accepted(), 4U);
    EXPECT_EQ(gate.rejections().at(RejectReason::RateLimited), 1U);
}

TEST(SafetyClosure, FuzzedOutputsNeverLeaveEnvelope) {
    std::mt19937_64 rng(2024);
    const SafetyEnvelope env;
    CommandGate gate(env);
    auto v = test_vehicle();
    std::size_t applied = 0;
    std::size_t rejected_count = 0;
    SimTime now{};
    for (int i = 0; i < 3000; ++i) {
        now += std::chrono::milliseconds(700);
        const auto r = gate.submit(fuzz::model_output(rng), v, now);
        ASSERT_NE(r.applied.has_value(), r.rejection.has_value());
        applied += r.applied.has_value();
        rejected_count += r.rejection.has_value();
        ASSERT_GE(v.driver_set_speed_mps, env.speed_min);
        ASSERT_LE(v.driver_set_speed_mps, env.speed_max);
        ASSERT_GE(v.follow_gap_s, env.gap_min);
        ASSERT_LE(v.follow_gap_s, env.gap_max);
        if (v.active_advisory) {
            ASSERT_LE(v.active_advisory->payload.speed_mps(), env.speed_max);
        }
        for (const auto& n : v.notices) {
            ASSERT_LE(n.text.size(), 4 * env.notice_max_len);
        }
        v = vehicle::tick(v, {}, now);
    }
    EXPECT_GT(applied, 100U);
    EXPECT_GT(rejected_count, 100U);
}

TEST(SafetyClosure, WideningEnvelopeNeverRejectsMore) {
    std::mt19937_64 rng(7);
    SafetyEnvelope narrow;
    SafetyEnvelope wide;
    wide.speed_max = 60;
    wide.gap_min = 0.5;
    wide.gap_max = 6;
    wide.notice_max_len = 500;
    for (int i = 0; i < 5000; ++i) {
        const auto p = parse_command(fuzz::model_output(rng));
        if (!std::holds_alternative<Command>(p)) {
            continue;
        }
        const auto& c = std::get<Command>(p);
        if (std::holds_alternative<ValidatedCommand>(validate(c, narrow, std::nullopt, SimTime{}))) {
            EXPECT_TRUE(std::holds_alternative<ValidatedCommand>(validate(c, wide, std::nullopt, SimTime{})));
        }
    }
}
