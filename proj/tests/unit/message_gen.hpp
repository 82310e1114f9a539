#pragma once

#include "cda/wire/codec.hpp"

#include <random>

namespace gen {

// Uniform in-range generators. One draw in eight lands on a sentinel so the
// unavailable encodings get exercised too.
template <typename Rng>
std::int64_t range(Rng& rng, std::int64_t lo, std::int64_t hi) {
    return std::uniform_int_distribution<std::int64_t>(lo, hi)(rng);
}

template <typename Rng>
bool sentinel(Rng& rng) {
    return range(rng, 0, 7) == 0;
}

template <typename Rng>
cda::wire::BsmPayload bsm(Rng& rng) {
    using namespace cda::wire;
    BsmPayload m;
    m.msg_cnt = static_cast<std::uint8_t>(range(rng, 0, kMsgCntMax));
    m.temp_id = static_cast<std::uint32_t>(range(rng, 0, 0xFFFFFFFFLL));
    m.sec_mark = sentinel(rng) ? kSecMarkUnavailable : static_cast<std::uint16_t>(range(rng, 0, kSecMarkMax));
    m.lat = sentinel(rng) ? kLatUnavailable : static_cast<std::int32_t>(range(rng, kLatMin, kLatMax));
    m.lon = sentinel(rng) ? kLonUnavailable : static_cast<std::int32_t>(range(rng, kLonMin, kLonMax));
    m.elev = sentinel(rng) ? kElevUnavailable : static_cast<std::int32_t>(range(rng, kElevMin, kElevMax));
    m.speed = static_cast<std::uint16_t>(range(rng, 0, kSpeedUnavailable));
    m.heading = static_cast<std::uint16_t>(range(rng, 0, kHeadingUnavailable));
    return m;
}

template <typename Rng>
cda::wire::AdvisoryPayload advisory(Rng& rng) {
    using namespace cda::wire;
    AdvisoryPayload m;
    m.advisory_id = static_cast<std::uint16_t>(range(rng, 0, 0xFFFF));
    m.segment_id = static_cast<std::uint16_t>(range(rng, 0, 0xFFFF));
    m.advisory_speed = static_cast<std::uint16_t>(range(rng, 0, kSpeedUnavailable));
    m.start_minute_of_year = static_cast<std::uint32_t>(range(rng, 0, kStartImmediate));
    m.duration_minutes = static_cast<std::uint16_t>(range(rng, 0, 0xFFFF));
    m.cause = static_cast<std::uint8_t>(range(rng, 0, 4));
    return m;
}

template <typename Rng>
cda::wire::TollPayload toll(Rng& rng) {
    cda::wire::TollPayload m;
    m.toll_point_id = static_cast<std::uint16_t>(range(rng, 0, 0xFFFF));
    m.amount_cents = static_cast<std::uint16_t>(range(rng, 0, 0xFFFF));
    m.currency = 0;
    m.lane_mask = static_cast<std::uint8_t>(range(rng, 0, 0xFF));
    return m;
}

}  // namespace gen
