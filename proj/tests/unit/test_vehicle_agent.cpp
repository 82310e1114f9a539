#include "cda/vehicle/agent.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace cda;
using namespace cda::vehicle;

namespace {

// Roughly 1.1 km per 0.01 degree of latitude; lengths are what the route says.
std::shared_ptr<const Route> corridor() {
    return std::make_shared<Route>(std::vector<RouteSegment>{
        {11, {28.5000, -81.4000}, {28.5100, -81.4000}, 1000.0},
        {12, {28.5100, -81.4000}, {28.5100, -81.3800}, 2000.0},
        {13, {28.5100, -81.3800}, {28.5000, -81.3800}, 1000.0},
    });
}

wire::AdvisoryPayload advisory(std::uint16_t id, std::uint16_t segment, double mps, std::uint16_t minutes = 10) {
    wire::AdvisoryPayload a;
    a.advisory_id = id;
    a.segment_id = segment;
    a.advisory_speed = speed_field(mps);
    a.start_minute_of_year = wire::kStartImmediate;
    a.duration_minutes = minutes;
    a.cause = 1;
    return a;
}

VehicleState on_segment_12(double speed, double set_speed) {
    return make_vehicle(7, corridor(), speed, set_speed, 1100.0);
}

// Independent oracle: steps v <- max(0, v + clamp(k (target - v), lo, hi) dt)
// with its own loop and reports the first sample inside the band.
double oracle_compliance(double v, double target, double k, double lo, double hi, double dt) {
    for (int n = 0; n < 100000; ++n) {
        if (std::fabs(v - target) < 0.5) {
            return n * dt;
        }
        double a = k * (target - v);
        a = a < lo ? lo : (a > hi ? hi : a);
        v = v + a * dt;
        if (v < 0) {
            v = 0;
        }
    }
    return -1;
}

}  // namespace

TEST(Route, LocateAndGeometry) {
    const auto r = corridor();
    EXPECT_DOUBLE_EQ(r->length_m(), 4000.0);
    EXPECT_EQ(r->segment_at(0.0), 11);
    EXPECT_EQ(r->segment_at(999.9), 11);
    EXPECT_EQ(r->segment_at(1000.0), 12);
    EXPECT_EQ(r->segment_at(4000.0), 13);
    EXPECT_EQ(r->segment_at(1e9), 13);
    const auto mid = r->point_at(2000.0);
    EXPECT_NEAR(mid.lat_deg, 28.51, 1e-12);
    EXPECT_NEAR(mid.lon_deg, -81.39, 1e-12);
    EXPECT_NEAR(r->bearing_deg(0), 0.0, 1e-9);
    EXPECT_NEAR(r->bearing_deg(1), 90.0, 0.01);
    EXPECT_NEAR(r->bearing_deg(2), 180.0, 1e-9);
    EXPECT_THROW(Route(std::vector<RouteSegment>{}), std::invalid_argument);
    EXPECT_THROW(Route({{1, {}, {}, 0.0}}), std::invalid_argument);
    EXPECT_THROW(Route({{1, {95, 0}, {}, 10.0}}), std::invalid_argument);
}

TEST(EffectiveTarget, MinRuleAndCancel) {
    auto s = on_segment_12(30, 30);
    EXPECT_DOUBLE_EQ(effective_target(s), 30.0);
    ASSERT_EQ(on_advisory(s, advisory(1, 12, 20), SimTime{}), AdvisoryOutcome::Applied);
    EXPECT_DOUBLE_EQ(effective_target(s), 20.0);

    auto slow = on_segment_12(15, 15);
    on_advisory(slow, advisory(1, 12, 20), SimTime{});
    EXPECT_DOUBLE_EQ(effective_target(slow), 15.0);

    auto cancel = advisory(1, 12, 0);
    cancel.advisory_speed = wire::kSpeedUnavailable;
    EXPECT_EQ(on_advisory(s, cancel, SimTime{}), AdvisoryOutcome::Cancelled);
    EXPECT_DOUBLE_EQ(effective_target(s), 30.0);
}

TEST(Tick, FirstStepIsDecelLimited) {
    auto s = on_segment_12(30, 30);
    on_advisory(s, advisory(1, 12, 20), SimTime{});
    const auto n = tick(s, ControlLaw{}, SimTime{});
    EXPECT_NEAR(n.speed_mps, 29.7, 1e-12);
    EXPECT_NEAR(n.odometer_m, 1100.0 + 29.7 * 0.1, 1e-9);
}

TEST(Tick, FixedPointAndFloor) {
    const auto s = on_segment_12(25, 25);
    EXPECT_DOUBLE_EQ(tick(s, ControlLaw{}, SimTime{}).speed_mps, 25.0);
    const auto still = on_segment_12(0, 0);
    const auto n = tick(still, ControlLaw{}, SimTime{});
    EXPECT_DOUBLE_EQ(n.speed_mps, 0.0);
    EXPECT_DOUBLE_EQ(n.odometer_m, still.odometer_m);
}

TEST(Tick, StopsAtRouteEnd) {
    auto s = make_vehicle(1, corridor(), 30, 30, 3999.0);
    s = tick(s, ControlLaw{}, SimTime{});
    EXPECT_DOUBLE_EQ(s.odometer_m, 4000.0);
    EXPECT_DOUBLE_EQ(s.speed_mps, 0.0);
    s = tick(s, ControlLaw{}, SimTime{});
    EXPECT_DOUBLE_EQ(s.speed_mps, 0.0);
}

TEST(Tick, LeavingSegmentClearsAdvisory) {
    auto s = make_vehicle(1, corridor(), 30, 30, 2990.0);
    ASSERT_EQ(on_advisory(s, advisory(3, 12, 20), SimTime{}), AdvisoryOutcome::Applied);
    s = tick(s, ControlLaw{}, SimTime{});
    ASSERT_EQ(s.current_segment(), 12);
    EXPECT_TRUE(s.active_advisory);
    for (int i = 0; i < 5; ++i) {
        s = tick(s, ControlLaw{}, SimTime{});
    }
    EXPECT_EQ(s.current_segment(), 13);
    EXPECT_FALSE(s.active_advisory);
}

TEST(Tick, ExpiredAdvisoryDropped) {
    auto s = on_segment_12(30, 30);
    on_advisory(s, advisory(1, 12, 20, 1), SimTime{});
    s = tick(s, ControlLaw{}, std::chrono::seconds(60));
    EXPECT_TRUE(s.active_advisory);
    s = tick(s, ControlLaw{}, std::chrono::seconds(61));
    EXPECT_FALSE(s.active_advisory);
}

TEST(Tick, LawValidation) {
    EXPECT_NO_THROW(ControlLaw{}.validate());
    EXPECT_THROW((ControlLaw{0.0, 2, -3, 0.1}.validate()), std::invalid_argument);
    EXPECT_THROW((ControlLaw{0.5, -1, -3, 0.1}.validate()), std::invalid_argument);
    EXPECT_THROW((ControlLaw{0.5, 2, 1, 0.1}.validate()), std::invalid_argument);
    EXPECT_THROW((ControlLaw{0.5, 2, -3, 0.0}.validate()), std::invalid_argument);
    EXPECT_THROW((ControlLaw{20, 2, -3, 0.1}.validate()), std::invalid_argument);
}

TEST(Tick, RandomAdvisoryStreamsRespectBounds) {
    std::mt19937 rng(99);
    std::uniform_real_distribution<double> speed(0.0, 45.0);
    std::uniform_int_distribution<int> coin(0, 9), seg(11, 13);
    const ControlLaw law;
    for (int run = 0; run < 200; ++run) {
        auto s = make_vehicle(1, corridor(), speed(rng), speed(rng));
        std::uint16_t id = 1;
        for (int t = 0; t < 400; ++t) {
            const SimTime now = from_seconds(t * 0.1);
            if (coin(rng) == 0) {
                auto a = advisory(id++, static_cast<std::uint16_t>(seg(rng)), speed(rng));
                if (coin(rng) < 2) {
                    a.advisory_speed = wire::kSpeedUnavailable;
                }
                on_advisory(s, a, now);
            }
            EXPECT_LE(effective_target(s), s.driver_set_speed_mps);
            const auto n = tick(s, law, now);
            ASSERT_GE(n.speed_mps, 0.0);
            if (!n.at_route_end()) {
                const double a = (n.speed_mps - s.speed_mps) / law.tick_s;
                ASSERT_LE(a, law.accel_max + 1e-9);
                ASSERT_GE(a, law.decel_max - 1e-9);
            }
            ASSERT_GE(n.odometer_m, s.odometer_m);
            ASSERT_LE(n.odometer_m, s.route->length_m());
            s = n;
        }
    }
}

TEST(Tick, MonotoneApproachToFixedTarget) {
    std::mt19937 rng(3);
    std::uniform_real_distribution<double> speed(0.0, 40.0);
    for (int run = 0; run < 500; ++run) {
        const double target = speed(rng);
        auto s = make_vehicle(1, std::make_shared<Route>(std::vector<RouteSegment>{{1, {}, {0.5, 0}, 1e7}}),
                              speed(rng), target);
        double gap = std::fabs(s.speed_mps - target);
        for (int t = 0; t < 300; ++t) {
            s = tick(s, ControlLaw{}, SimTime{});
            const double g = std::fabs(s.speed_mps - target);
            ASSERT_LE(g, gap + 1e-12);
            gap = g;
        }
    }
}

TEST(Bsm, SnapshotConversions) {
    auto s = on_segment_12(20, 20);
    const SimTime now = std::chrono::minutes(100) + std::chrono::milliseconds(12345);
    const auto b = bsm_snapshot(s, now);
    EXPECT_EQ(b.temp_id, 7U);
    EXPECT_EQ(b.speed, 1000);
    EXPECT_EQ(b.sec_mark, 12345);
    EXPECT_EQ(b.lat, 285100000);
    EXPECT_EQ(b.lon, -813990000);
    EXPECT_NEAR(b.heading, 7200, 2);
    EXPECT_EQ(b.msg_cnt, 0);
    EXPECT_NO_THROW(wire::encode_frame(b));
}

TEST(Bsm, SpeedSaturatesAndCounterWraps) {
    EXPECT_EQ(speed_field(163.82), wire::kSpeedMax);
    EXPECT_EQ(speed_field(500.0), wire::kSpeedMax);
    EXPECT_EQ(speed_field(163.78), 8189);
    EXPECT_EQ(speed_field(-1.0), 0);
    auto s = on_segment_12(20, 20);
    std::uint8_t prev = bsm_snapshot(s, SimTime{}).msg_cnt;
    for (int i = 0; i < 300; ++i) {
        const auto cur = bsm_snapshot(s, SimTime{}).msg_cnt;
        EXPECT_EQ(cur, (prev + 1) % 128);
        prev = cur;
    }
}

TEST(OnAdvisory, SegmentWindowAndOrdering) {
    auto s = on_segment_12(30, 30);
    EXPECT_EQ(on_advisory(s, advisory(1, 13, 20), SimTime{}), AdvisoryOutcome::WrongSegment);
    EXPECT_EQ(s.ignored_advisories, 1U);

    auto old = advisory(2, 12, 20, 5);
    old.start_minute_of_year = 10;
    EXPECT_EQ(on_advisory(s, old, std::chrono::minutes(16)), AdvisoryOutcome::OutsideWindow);
    EXPECT_EQ(on_advisory(s, old, std::chrono::minutes(9)), AdvisoryOutcome::OutsideWindow);
    EXPECT_EQ(on_advisory(s, old, std::chrono::minutes(12)), AdvisoryOutcome::Applied);
    EXPECT_EQ(s.active_advisory->expires_at, SimTime(std::chrono::minutes(15)));

    EXPECT_EQ(on_advisory(s, advisory(5, 12, 18), std::chrono::minutes(12)), AdvisoryOutcome::Applied);
    EXPECT_EQ(on_advisory(s, advisory(4, 12, 10), std::chrono::minutes(12)), AdvisoryOutcome::Superseded);
    EXPECT_NEAR(effective_target(s), 18.0, 1e-9);
}

TEST(OnAdvisory, RepeatKeepsOriginalReceipt) {
    auto s = on_segment_12(30, 30);
    const auto a = advisory(9, 12, 20);
    on_advisory(s, a, std::chrono::seconds(5));
    EXPECT_EQ(on_advisory(s, a, std::chrono::seconds(6)), AdvisoryOutcome::Refreshed);
    EXPECT_EQ(s.active_advisory->received_at, SimTime(std::chrono::seconds(5)));
}

TEST(Compliance, AlreadyAtSpeedAndNeverReached) {
    const std::vector<TracePoint> trace = {{SimTime{}, 20.2}, {std::chrono::seconds(1), 20.0}};
    EXPECT_EQ(compliance_time(trace, 20.0, SimTime{}), 0.0);
    const std::vector<TracePoint> far = {{SimTime{}, 30.0}, {std::chrono::seconds(1), 29.0}};
    EXPECT_FALSE(compliance_time(far, 20.0, SimTime{}));
}

TEST(Compliance, ThirtyToTwentyMatchesSteppedOracle) {
    const double expected = oracle_compliance(30.0, 20.0, 0.5, -3.0, 2.0, 0.1);
    EXPECT_NEAR(expected, 6.2, 1e-9);

    auto s = on_segment_12(30, 30);
    on_advisory(s, advisory(1, 12, 20), SimTime{});
    std::vector<TracePoint> trace{{SimTime{}, s.speed_mps}};
    for (int t = 1; t <= 200; ++t) {
        s = tick(s, ControlLaw{}, from_seconds((t - 1) * 0.1));
        trace.push_back({from_seconds(t * 0.1), s.speed_mps});
    }
    const auto got = compliance_time(trace, 20.0, SimTime{});
    ASSERT_TRUE(got);
    EXPECT_NEAR(*got, expected, 1e-9);
}
