#pragma once

#include <nlohmann/json.hpp>

#include <stdexcept>
#include <string>
#include <vector>

namespace cda::advisory {

enum class FeedKind { Incident, Congestion, Construction, Closure };

const char* to_string(FeedKind kind);

struct FeedEvent {
    std::string event_id;
    std::string roadway;
    std::string direction;
    FeedKind kind = FeedKind::Incident;
    int severity = 1;  // 1..5
    std::string description;
    double lat = 0.0;
    double lon = 0.0;
    std::string updated_at;

    bool operator==(const FeedEvent&) const = default;
};

struct FeedSnapshot {
    std::vector<FeedEvent> events;
    std::vector<std::string> diagnostics;  // one line per skipped entry
};

/// Unreadable source or a document without an "events" array.
class FeedError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Parses {"events": [...]}. Entries that fail validation are skipped with a
/// diagnostic; duplicate event_ids keep the first entry.
FeedSnapshot parse_feed(const std::string& document);

/// Reads a file path or an http:// URL and parses it.
FeedSnapshot load_feed(const std::string& source);

nlohmann::json to_json(const FeedEvent& e);

}  // namespace cda::advisory
