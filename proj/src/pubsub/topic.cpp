#include "cda/pubsub/topic.hpp"

#include <stdexcept>

namespace cda::pubsub {

namespace {

std::vector<std::string> split(std::string_view text) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t slash = text.find('/', start);
        out.emplace_back(text.substr(start, slash == std::string_view::npos ? std::string_view::npos
                                                                            : slash - start));
        if (slash == std::string_view::npos) {
            break;
        }
        start = slash + 1;
    }
    return out;
}

[[noreturn]] void malformed(std::string_view what, std::string_view text) {
    throw std::invalid_argument(std::string(what) + ": '" + std::string(text) + "'");
}

}  // namespace

Topic Topic::parse(std::string_view text) {
    Topic t;
    t.segments_ = split(text);
    for (const auto& s : t.segments_) {
        if (s.empty()) {
            malformed("empty topic segment", text);
        }
        if (s.find_first_of("+#") != std::string::npos) {
            malformed("wildcard in concrete topic", text);
        }
    }
    t.text_ = std::string(text);
    return t;
}

TopicPattern TopicPattern::parse(std::string_view text) {
    TopicPattern p;
    p.segments_ = split(text);
    for (std::size_t i = 0; i < p.segments_.size(); ++i) {
        const auto& s = p.segments_[i];
        if (s.empty()) {
            malformed("empty pattern segment", text);
        }
        if (s == "#") {
            if (i + 1 != p.segments_.size()) {
                malformed("'#' must be the final segment", text);
            }
            continue;
        }
        if (s == "+") {
            continue;
        }
        if (s.find_first_of("+#") != std::string::npos) {
            malformed("wildcard mixed into a segment", text);
        }
    }
    p.text_ = std::string(text);
    return p;
}

bool topic_matches(const TopicPattern& pattern, const Topic& topic) {
    const auto& ps = pattern.segments();
    const auto& ts = topic.segments();
    std::size_t i = 0;
    for (; i < ps.size(); ++i) {
        if (ps[i] == "#") {
            return true;
        }
        if (i >= ts.size()) {
            return false;
        }
        if (ps[i] != "+" && ps[i] != ts[i]) {
            return false;
        }
    }
    return i == ts.size();
}

Topic bsm_topic(std::string_view region, std::uint32_t vehicle_id) {
    return Topic::parse("cda/" + std::string(region) + "/veh/" + std::to_string(vehicle_id) + "/bsm");
}

Topic advisory_topic(std::string_view region, std::uint16_t segment_id) {
    return Topic::parse("cda/" + std::string(region) + "/adv/" + std::to_string(segment_id));
}

TopicPattern all_bsm_pattern() {
    return TopicPattern::parse("cda/+/veh/+/bsm");
}

}  // namespace cda::pubsub
