#include "cda/linksim/link.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>

using namespace cda;
using namespace cda::linksim;
using namespace std::chrono_literals;

TEST(Profiles, MeasuredUpperBounds) {
    EXPECT_EQ(builtin_profile(ProfileName::Wifi6).latency_max_ms, 10.0);
    EXPECT_EQ(builtin_profile(ProfileName::Wifi4).latency_max_ms, 50.0);
    EXPECT_EQ(builtin_profile(ProfileName::Lte).latency_max_ms, 100.0);
    EXPECT_EQ(builtin_profile(ProfileName::Wifi6).bandwidth_bps, 4.3e9);
}

TEST(Profiles, FloorsAndLoopback) {
    EXPECT_EQ(builtin_profile(ProfileName::Wifi6).latency_min_ms, 1.0);
    EXPECT_EQ(builtin_profile(ProfileName::Wifi4).latency_min_ms, 5.0);
    EXPECT_EQ(builtin_profile(ProfileName::Lte).latency_min_ms, 20.0);
    const auto loop = builtin_profile(ProfileName::Loopback);
    EXPECT_EQ(loop.latency_min_ms, 0.0);
    EXPECT_EQ(loop.latency_max_ms, 0.0);
    EXPECT_EQ(loop.loss_rate, 0.0);
}

TEST(Profiles, NamesAndValidation) {
    EXPECT_EQ(parse_profile_name("LTE"), ProfileName::Lte);
    EXPECT_EQ(parse_profile_name("wifi6"), ProfileName::Wifi6);
    EXPECT_THROW(parse_profile_name("5g"), std::invalid_argument);

    LinkProfile bad = builtin_profile(ProfileName::Lte);
    bad.latency_min_ms = 200;
    EXPECT_THROW(bad.validate(), std::invalid_argument);
    bad = builtin_profile(ProfileName::Lte);
    bad.loss_rate = 1.0;
    EXPECT_THROW(bad.validate(), std::invalid_argument);
    EXPECT_THROW((ImpairedLink<int>(bad, 1)), std::invalid_argument);
}

TEST(SampleDelay, StaysInsideEveryProfile) {
    for (const auto name : {ProfileName::Wifi6, ProfileName::Wifi4, ProfileName::Lte}) {
        const auto profile = builtin_profile(name);
        LinkRng rng(derive_seed(42, static_cast<std::uint64_t>(name)));
        for (int i = 0; i < 10000; ++i) {
            const double d = sample_delay_ms(profile, rng);
            ASSERT_GE(d, profile.latency_min_ms);
            ASSERT_LE(d, profile.latency_max_ms);
        }
    }
}

TEST(SampleDelay, SameSeedSameSequence) {
    const auto profile = builtin_profile(ProfileName::Wifi4);
    LinkRng a(123), b(123), c(124);
    bool differs = false;
    for (int i = 0; i < 1000; ++i) {
        const double x = sample_delay_ms(profile, a);
        ASSERT_EQ(x, sample_delay_ms(profile, b));
        differs = differs || x != sample_delay_ms(profile, c);
    }
    EXPECT_TRUE(differs);
}

TEST(SampleDelay, UniformMeanMatchesMidpoint) {
    const auto profile = builtin_profile(ProfileName::Lte);
    LinkRng rng(7);
    double sum = 0;
    for (int i = 0; i < 10000; ++i) {
        sum += sample_delay_ms(profile, rng);
    }
    // (20 + 100) / 2
    EXPECT_NEAR(sum / 10000.0, 60.0, 2.0);
}

TEST(Transmit, NoLossNeverDrops) {
    ImpairedLink<int> link(builtin_profile(ProfileName::Lte), 9);
    for (int i = 0; i < 5000; ++i) {
        ASSERT_TRUE(link.transmit(i, SimTime{0}).has_value());
    }
    EXPECT_EQ(link.stats().dropped, 0U);
}

TEST(Transmit, LossRateWithinBinomialBound) {
    auto profile = builtin_profile(ProfileName::Lte);
    profile.loss_rate = 0.02;
    ImpairedLink<int> link(profile, 42);
    for (int i = 0; i < 10000; ++i) {
        link.transmit(i, SimTime{0});
    }
    EXPECT_NEAR(static_cast<double>(link.stats().dropped), 200.0, 60.0);
}

TEST(Transmit, DeliversInDeadlineOrderAndMayReorder) {
    ImpairedLink<int> link(builtin_profile(ProfileName::Lte), 5);
    for (int i = 0; i < 200; ++i) {
        link.transmit(i, SimTime{std::chrono::milliseconds(i)});
    }
    std::vector<int> order;
    SimTime last{0};
    while (auto next = link.next_delivery()) {
        ASSERT_GE(*next, last);
        last = *next;
        for (int v : link.pop_due(*next)) {
            order.push_back(v);
        }
    }
    ASSERT_EQ(order.size(), 200U);
    EXPECT_FALSE(std::is_sorted(order.begin(), order.end()));
    EXPECT_EQ(link.stats().delivered, 200U);
}

TEST(Transmit, ScheduledTimesRespectBounds) {
    ImpairedLink<int> link(builtin_profile(ProfileName::Wifi6), 11);
    const SimTime now = 5s;
    for (int i = 0; i < 1000; ++i) {
        const auto at = link.transmit(i, now);
        ASSERT_TRUE(at);
        ASSERT_GE(*at - now, 1ms);
        ASSERT_LE(*at - now, 10ms);
    }
}

TEST(Transmit, LoopbackIsIdentity) {
    ImpairedLink<int> link(builtin_profile(ProfileName::Loopback), 1);
    for (int i = 0; i < 10; ++i) {
        EXPECT_EQ(link.transmit(i, 3s), SimTime{3s});
    }
    std::vector<int> expect(10);
    std::iota(expect.begin(), expect.end(), 0);
    EXPECT_EQ(link.pop_due(3s), expect);
    EXPECT_TRUE(link.idle());
}

TEST(Transmit, SameSeedSameSchedule) {
    auto profile = builtin_profile(ProfileName::Wifi4);
    profile.loss_rate = 0.1;
    ImpairedLink<int> a(profile, 77), b(profile, 77);
    for (int i = 0; i < 1000; ++i) {
        ASSERT_EQ(a.transmit(i, SimTime{i}), b.transmit(i, SimTime{i}));
    }
}
