#pragma once

#include "cda/pubsub/topic.hpp"

#include <cstdint>
#include <vector>

namespace cda::pubsub {

enum class Qos : std::uint8_t { BestEffort = 0, AtLeastOnce = 1 };

struct Envelope {
    Topic topic;
    Qos qos = Qos::BestEffort;
    bool retain = false;
    std::uint64_t seq = 0;  // per-publisher counter
    std::vector<std::uint8_t> body;
};

}  // namespace cda::pubsub
