#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace cda::pubsub {

/// Concrete topic: one or more non-empty '/'-separated tokens, no wildcards.
class Topic {
public:
    /// Throws std::invalid_argument when malformed.
    static Topic parse(std::string_view text);

    const std::vector<std::string>& segments() const { return segments_; }
    const std::string& str() const { return text_; }

    bool operator==(const Topic& other) const { return text_ == other.text_; }
    bool operator<(const Topic& other) const { return text_ < other.text_; }

private:
    std::vector<std::string> segments_;
    std::string text_;
};

/// '+' matches exactly one segment; a trailing '#' matches any suffix,
/// including the empty one.
class TopicPattern {
public:
    static TopicPattern parse(std::string_view text);

    const std::vector<std::string>& segments() const { return segments_; }
    const std::string& str() const { return text_; }

    bool operator==(const TopicPattern& other) const { return text_ == other.text_; }

private:
    std::vector<std::string> segments_;
    std::string text_;
};

bool topic_matches(const TopicPattern& pattern, const Topic& topic);

// Fixed topic scheme.
Topic bsm_topic(std::string_view region, std::uint32_t vehicle_id);
Topic advisory_topic(std::string_view region, std::uint16_t segment_id);
TopicPattern all_bsm_pattern();  // cda/+/veh/+/bsm

}  // namespace cda::pubsub
