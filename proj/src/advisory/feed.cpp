#include "cda/advisory/feed.hpp"

#include <httplib.h>

#include <cmath>
#include <fstream>
#include <regex>
#include <set>
#include <sstream>

namespace cda::advisory {

namespace {

const std::pair<const char*, FeedKind> kKinds[] = {
    {"incident", FeedKind::Incident},
    {"congestion", FeedKind::Congestion},
    {"construction", FeedKind::Construction},
    {"closure", FeedKind::Closure},
};

std::string required_string(const nlohmann::json& e, const char* key) {
    if (!e.contains(key) || !e[key].is_string() || e[key].get<std::string>().empty()) {
        throw std::invalid_argument(std::string("missing or empty ") + key);
    }
    return e[key].get<std::string>();
}

double required_number(const nlohmann::json& e, const char* key) {
    if (!e.contains(key) || !e[key].is_number()) {
        throw std::invalid_argument(std::string("missing or non-numeric ") + key);
    }
    return e[key].get<double>();
}

FeedEvent parse_event(const nlohmann::json& e) {
    if (!e.is_object()) {
        throw std::invalid_argument("entry is not an object");
    }
    FeedEvent ev;
    ev.event_id = required_string(e, "event_id");
    ev.roadway = required_string(e, "roadway");
    ev.direction = required_string(e, "direction");
    const auto kind = required_string(e, "kind");
    bool known = false;
    for (const auto& [name, k] : kKinds) {
        if (kind == name) {
            ev.kind = k;
            known = true;
        }
    }
    if (!known) {
        throw std::invalid_argument("unknown kind '" + kind + "'");
    }
    if (!e.contains("severity") || !e["severity"].is_number_integer()) {
        throw std::invalid_argument("missing or non-integer severity");
    }
    ev.severity = e["severity"].get<int>();
    if (ev.severity < 1 || ev.severity > 5) {
        throw std::invalid_argument("severity outside 1..5");
    }
    ev.description = e.contains("description") && e["description"].is_string() ? e["description"].get<std::string>()
                                                                                 : std::string();
    ev.lat = required_number(e, "lat");
    ev.lon = required_number(e, "lon");
    if (!(std::abs(ev.lat) <= 90.0) || !(std::abs(ev.lon) <= 180.0)) {
        throw std::invalid_argument("coordinates out of range");
    }
    ev.updated_at = required_string(e, "updated_at");
    return ev;
}

}  // namespace

const char* to_string(FeedKind kind) {
    for (const auto& [name, k] : kKinds) {
        if (k == kind) {
            return name;
        }
    }
    return "?";
}

FeedSnapshot parse_feed(const std::string& document) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(document);
    } catch (const nlohmann::json::parse_error& e) {
        throw FeedError(std::string("feed is not JSON: ") + e.what());
    }
    if (!doc.is_object() || !doc.contains("events") || !doc["events"].is_array()) {
        throw FeedError("feed document needs an \"events\" array");
    }
    FeedSnapshot snap;
    std::set<std::string> seen;
    std::size_t index = 0;
    for (const auto& entry : doc["events"]) {
        try {
            auto ev = parse_event(entry);
            if (!seen.insert(ev.event_id).second) {
                throw std::invalid_argument("duplicate event_id '" + ev.event_id + "'");
            }
            snap.events.push_back(std::move(ev));
        } catch (const std::exception& e) {
            std::string id;
            if (entry.is_object() && entry.contains("event_id") && entry["event_id"].is_string()) {
                id = " (" + entry["event_id"].get<std::string>() + ")";
            }
            snap.diagnostics.push_back("entry " + std::to_string(index) + id + ": " + e.what());
        }
        ++index;
    }
    return snap;
}

FeedSnapshot load_feed(const std::string& source) {
    static const std::regex kUrl(R"(^(http://[^/]+)(/.*)?$)");
    std::smatch m;
    if (std::regex_match(source, m, kUrl)) {
        httplib::Client cli(m[1].str());
        cli.set_connection_timeout(5);
        cli.set_read_timeout(10);
        const auto res = cli.Get(m[2].matched ? m[2].str() : "/");
        if (!res) {
            throw FeedError("cannot fetch " + source + ": " + httplib::to_string(res.error()));
        }
        if (res->status != 200) {
            throw FeedError("cannot fetch " + source + ": HTTP " + std::to_string(res->status));
        }
        return parse_feed(res->body);
    }
    std::ifstream in(source);
    if (!in) {
        throw FeedError("cannot read feed " + source);
    }
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_feed(ss.str());
}

nlohmann::json to_json(const FeedEvent& e) {
    return {{"event_id", e.event_id}, {"roadway", e.roadway},         {"direction", e.direction},
            {"kind", to_string(e.kind)}, {"severity", e.severity},     {"description", e.description},
            {"lat", e.lat},              {"lon", e.lon},               {"updated_at", e.updated_at}};
}

}  // namespace cda::advisory
