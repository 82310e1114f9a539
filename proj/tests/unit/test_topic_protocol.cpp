#include "cda/pubsub/broker_core.hpp"
#include "cda/pubsub/protocol.hpp"
#include "cda/pubsub/topic.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace cda::pubsub;

namespace {

bool matches(std::string_view pattern, std::string_view topic) {
    return topic_matches(TopicPattern::parse(pattern), Topic::parse(topic));
}

std::string random_topic(std::mt19937& rng) {
    static const char* kTokens[] = {"cda", "fl", "ga", "veh", "adv", "bsm", "7", "12", "x"};
    std::uniform_int_distribution<int> len(1, 6), tok(0, 8);
    std::string out;
    const int n = len(rng);
    for (int i = 0; i < n; ++i) {
        out += (i ? "/" : "");
        out += kTokens[tok(rng)];
    }
    return out;
}

}  // namespace

TEST(TopicMatch, Examples) {
    EXPECT_TRUE(matches("cda/+/adv/#", "cda/fl/adv/12"));
    EXPECT_TRUE(matches("cda/fl/veh/+/bsm", "cda/fl/veh/7/bsm"));
    EXPECT_FALSE(matches("cda/fl/adv/#", "cda/fl/veh/7/bsm"));
}

TEST(TopicMatch, EdgeCases) {
    EXPECT_TRUE(matches("cda/fl/#", "cda/fl"));
    EXPECT_FALSE(matches("cda/fl/+", "cda/fl"));
    EXPECT_FALSE(matches("cda/fl", "cda/fl/adv"));
    EXPECT_FALSE(matches("cda/+", "cda/fl/adv"));
}

TEST(TopicMatch, MalformedInputsRejected) {
    EXPECT_THROW(Topic::parse(""), std::invalid_argument);
    EXPECT_THROW(Topic::parse("cda//fl"), std::invalid_argument);
    EXPECT_THROW(Topic::parse("cda/+/fl"), std::invalid_argument);
    EXPECT_THROW(Topic::parse("cda/fl#"), std::invalid_argument);
    EXPECT_THROW(TopicPattern::parse("cda/#/fl"), std::invalid_argument);
    EXPECT_THROW(TopicPattern::parse("cda/f+"), std::invalid_argument);
    EXPECT_THROW(TopicPattern::parse("cda/"), std::invalid_argument);
}

TEST(TopicMatch, PatternAlgebra) {
    std::mt19937 rng(17);
    const auto hash = TopicPattern::parse("#");
    for (int i = 0; i < 2000; ++i) {
        const auto a = random_topic(rng);
        const auto b = random_topic(rng);
        EXPECT_TRUE(topic_matches(hash, Topic::parse(a)));
        EXPECT_TRUE(matches(a, a));
        EXPECT_EQ(matches(a, b), a == b) << a << " vs " << b;
        EXPECT_EQ(matches(a, b), matches(a, b));
    }
}

TEST(TopicScheme, Builders) {
    EXPECT_EQ(bsm_topic("fl", 7).str(), "cda/fl/veh/7/bsm");
    EXPECT_EQ(advisory_topic("fl", 12).str(), "cda/fl/adv/12");
    EXPECT_TRUE(topic_matches(all_bsm_pattern(), bsm_topic("ga", 99)));
}

TEST(Protocol, FramesSurviveArbitrarySplits) {
    std::vector<std::uint8_t> stream;
    Envelope e{Topic::parse("cda/fl/adv/3"), Qos::AtLeastOnce, true, 42, {1, 2, 3}};
    for (const auto& f : {encode_control(Op::Connect, "veh-1"), encode_control(Op::Pub, encode_pub_body(e)),
                          encode_control(Op::Ping)}) {
        stream.insert(stream.end(), f.begin(), f.end());
    }
    for (std::size_t chunk = 1; chunk <= stream.size(); ++chunk) {
        FrameReader reader;
        std::vector<ControlFrame> frames;
        for (std::size_t pos = 0; pos < stream.size(); pos += chunk) {
            const auto n = std::min(chunk, stream.size() - pos);
            reader.append(std::span<const std::uint8_t>(stream).subspan(pos, n));
            while (auto f = reader.next()) {
                frames.push_back(*f);
            }
        }
        ASSERT_EQ(frames.size(), 3U);
        EXPECT_EQ(frames[0].op, Op::Connect);
        EXPECT_EQ(decode_client_id(frames[0].body), "veh-1");
        const auto back = decode_pub_body(frames[1].body);
        EXPECT_EQ(back.topic.str(), "cda/fl/adv/3");
        EXPECT_EQ(back.qos, Qos::AtLeastOnce);
        EXPECT_TRUE(back.retain);
        EXPECT_EQ(back.seq, 42U);
        EXPECT_EQ(back.body, e.body);
        EXPECT_EQ(frames[2].op, Op::Ping);
    }
}

TEST(Protocol, RejectsMalformedFrames) {
    {
        FrameReader r;
        r.append(std::vector<std::uint8_t>{0, 0, 0, 0});
        EXPECT_THROW(r.next(), ProtocolError);
    }
    {
        FrameReader r;
        r.append(std::vector<std::uint8_t>{0x7F, 0, 0, 0});
        EXPECT_THROW(r.next(), ProtocolError);
    }
    {
        FrameReader r;
        r.append(std::vector<std::uint8_t>{0, 0, 0, 1, 99});
        EXPECT_THROW(r.next(), ProtocolError);
    }
    EXPECT_THROW(decode_pub_body(std::vector<std::uint8_t>{0, 1, 2}), ProtocolError);
    EXPECT_THROW(decode_pub_body(std::vector<std::uint8_t>{0x80, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0}), ProtocolError);
    EXPECT_THROW(decode_pub_body(std::vector<std::uint8_t>{0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 5, 'a'}), ProtocolError);
    EXPECT_THROW(decode_pub_body(std::vector<std::uint8_t>{0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 1, '+'}), ProtocolError);
    EXPECT_THROW(decode_ack_body(std::vector<std::uint8_t>{1, 2}), ProtocolError);
    EXPECT_THROW(decode_client_id({}), ProtocolError);
    EXPECT_THROW(decode_client_id(std::vector<std::uint8_t>{'a', ' ', 'b'}), ProtocolError);
}

TEST(Protocol, RandomBytesOnlyYieldFramesOrProtocolErrors) {
    std::mt19937 rng(5);
    std::uniform_int_distribution<int> byte(0, 255), len(0, 40);
    for (int i = 0; i < 5000; ++i) {
        std::vector<std::uint8_t> junk(static_cast<std::size_t>(len(rng)));
        for (auto& b : junk) {
            b = static_cast<std::uint8_t>(byte(rng));
        }
        if (junk.size() > 4 && i % 2 == 0) {
            junk[0] = junk[1] = 0;  // plausible lengths
        }
        FrameReader r;
        r.append(junk);
        try {
            while (auto f = r.next()) {
                if (f->op == Op::Pub) {
                    decode_pub_body(f->body);
                }
            }
        } catch (const ProtocolError&) {
        }
    }
}

namespace {

struct Recorder {
    std::vector<std::pair<std::string, Envelope>> got;
    BrokerCore::Deliver fn() {
        return [this](const std::string& c, const Envelope& e) { got.emplace_back(c, e); };
    }
};

Envelope env(std::string_view topic, std::uint64_t seq, Qos qos = Qos::AtLeastOnce, bool retain = false) {
    return Envelope{Topic::parse(topic), qos, retain, seq, {static_cast<std::uint8_t>(seq)}};
}

}  // namespace

TEST(BrokerCore, RoutesOncePerSubscriber) {
    BrokerCore core;
    Recorder rec;
    core.connect("a");
    core.connect("b");
    core.subscribe("a", TopicPattern::parse("cda/#"), rec.fn());
    core.subscribe("a", TopicPattern::parse("cda/fl/adv/+"), rec.fn());
    const auto out = core.publish("b", env("cda/fl/adv/1", 1), rec.fn());
    EXPECT_EQ(out.recipients, 1U);
    ASSERT_EQ(rec.got.size(), 1U);
    EXPECT_EQ(rec.got[0].first, "a");
}

TEST(BrokerCore, RetainedReplayedToLateSubscriber) {
    BrokerCore core;
    Recorder rec;
    core.connect("svc");
    core.publish("svc", env("cda/fl/adv/12", 1, Qos::AtLeastOnce, true), rec.fn());
    core.publish("svc", env("cda/fl/adv/12", 2, Qos::AtLeastOnce, true), rec.fn());
    core.publish("svc", env("cda/fl/adv/13", 3, Qos::AtLeastOnce, false), rec.fn());
    EXPECT_TRUE(rec.got.empty());
    EXPECT_EQ(core.stats().unrouted, 3U);

    core.connect("veh");
    core.subscribe("veh", TopicPattern::parse("cda/fl/adv/+"), rec.fn());
    ASSERT_EQ(rec.got.size(), 1U);
    EXPECT_EQ(rec.got[0].second.seq, 2U);
}

TEST(BrokerCore, DuplicateSeqAcknowledgedButNotRouted) {
    BrokerCore core;
    Recorder rec;
    core.connect("pub");
    core.connect("sub");
    core.subscribe("sub", TopicPattern::parse("#"), rec.fn());
    EXPECT_FALSE(core.publish("pub", env("t/a", 5), rec.fn()).duplicate);
    EXPECT_TRUE(core.publish("pub", env("t/a", 5), rec.fn()).duplicate);
    EXPECT_TRUE(core.publish("pub", env("t/a", 4), rec.fn()).duplicate);
    EXPECT_FALSE(core.publish("pub", env("t/b", 4), rec.fn()).duplicate);
    // BestEffort is never deduplicated
    EXPECT_FALSE(core.publish("pub", env("t/a", 1, Qos::BestEffort), rec.fn()).duplicate);
    EXPECT_EQ(rec.got.size(), 3U);
}

TEST(BrokerCore, UnsubscribeAndDisconnectStopRouting) {
    BrokerCore core;
    Recorder rec;
    core.connect("s");
    const auto p = TopicPattern::parse("x/+");
    core.subscribe("s", p, rec.fn());
    EXPECT_TRUE(core.unsubscribe("s", p));
    EXPECT_FALSE(core.unsubscribe("s", p));
    core.publish("s", env("x/1", 1), rec.fn());
    core.subscribe("s", p, rec.fn());
    core.disconnect("s");
    core.publish("other", env("x/1", 2), rec.fn());
    EXPECT_TRUE(rec.got.empty());
    EXPECT_THROW(core.subscribe("ghost", p, rec.fn()), std::logic_error);
}
