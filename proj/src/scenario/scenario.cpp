#include "cda/scenario/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

namespace cda::scenario {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& where, const std::string& what) {
    throw ScenarioError(where + ": " + what);
}

void allow_keys(const json& obj, const std::string& where, std::initializer_list<const char*> keys) {
    if (!obj.is_object()) {
        fail(where, "expected an object");
    }
    const std::set<std::string> allowed(keys.begin(), keys.end());
    for (const auto& [k, _] : obj.items()) {
        if (!allowed.count(k)) {
            fail(where, "unknown field '" + k + "'");
        }
    }
}

const json& required(const json& obj, const std::string& where, const char* key) {
    const auto it = obj.find(key);
    if (it == obj.end()) {
        fail(where, std::string("missing field '") + key + "'");
    }
    return *it;
}

double number(const json& v, const std::string& where) {
    if (!v.is_number() || !std::isfinite(v.get<double>())) {
        fail(where, "expected a finite number");
    }
    return v.get<double>();
}

double number_or(const json& obj, const std::string& where, const char* key, double fallback) {
    const auto it = obj.find(key);
    return it == obj.end() ? fallback : number(*it, where + "." + key);
}

std::int64_t integer(const json& v, const std::string& where) {
    if (!v.is_number_integer()) {
        fail(where, "expected an integer");
    }
    return v.get<std::int64_t>();
}

std::string text(const json& v, const std::string& where) {
    if (!v.is_string()) {
        fail(where, "expected a string");
    }
    return v.get<std::string>();
}

vehicle::GeoPoint point(const json& v, const std::string& where) {
    allow_keys(v, where, {"lat", "lon"});
    return {number(required(v, where, "lat"), where + ".lat"), number(required(v, where, "lon"), where + ".lon")};
}

linksim::LinkProfile parse_link(const json& v) {
    if (v.is_string()) {
        try {
            return linksim::builtin_profile(linksim::parse_profile_name(v.get<std::string>()));
        } catch (const std::invalid_argument& e) {
            fail("link", e.what());
        }
    }
    allow_keys(v, "link", {"profile", "latency_min_ms", "latency_max_ms", "loss_rate"});
    linksim::LinkProfile p;
    try {
        p = linksim::builtin_profile(linksim::parse_profile_name(text(required(v, "link", "profile"), "link.profile")));
    } catch (const std::invalid_argument& e) {
        fail("link.profile", e.what());
    }
    p.latency_min_ms = number_or(v, "link", "latency_min_ms", p.latency_min_ms);
    p.latency_max_ms = number_or(v, "link", "latency_max_ms", p.latency_max_ms);
    p.loss_rate = number_or(v, "link", "loss_rate", p.loss_rate);
    try {
        p.validate();
    } catch (const std::invalid_argument& e) {
        fail("link", e.what());
    }
    return p;
}

VehicleSpec parse_vehicles(const json& v) {
    allow_keys(v, "vehicles", {"count", "initial_speed_mps", "set_speed_mps", "start_odometer_m", "spacing_m"});
    VehicleSpec s;
    const auto count = integer(required(v, "vehicles", "count"), "vehicles.count");
    if (count < 1 || count > 100000) {
        fail("vehicles.count", "must be between 1 and 100000");
    }
    s.count = static_cast<int>(count);
    s.initial_speed_mps = number_or(v, "vehicles", "initial_speed_mps", 0.0);
    s.set_speed_mps = number_or(v, "vehicles", "set_speed_mps", s.initial_speed_mps);
    s.start_odometer_m = number_or(v, "vehicles", "start_odometer_m", 0.0);
    s.spacing_m = number_or(v, "vehicles", "spacing_m", s.spacing_m);
    if (s.initial_speed_mps < 0 || s.set_speed_mps < 0 || s.start_odometer_m < 0 || s.spacing_m < 0) {
        fail("vehicles", "speeds and distances must be non-negative");
    }
    return s;
}

advisory::FeedSnapshot parse_feed_step(const json& v, const std::string& where, const std::string& base_dir) {
    try {
        if (v.is_object() && v.contains("file")) {
            allow_keys(v, where, {"file"});
            std::filesystem::path p = text(v["file"], where + ".file");
            if (p.is_relative()) {
                p = std::filesystem::path(base_dir) / p;
            }
            return advisory::load_feed(p.string());
        }
        return advisory::parse_feed(v.dump());
    } catch (const advisory::FeedError& e) {
        fail(where, e.what());
    }
}

TimelineEvent parse_event(const json& v, std::size_t index, const std::string& base_dir) {
    const std::string where = "timeline[" + std::to_string(index) + "]";
    if (!v.is_object()) {
        fail(where, "expected an object");
    }
    TimelineEvent e;
    e.at_s = number(required(v, where, "at_s"), where + ".at_s");
    int actions = 0;
    for (const auto& [k, body] : v.items()) {
        if (k == "at_s") {
            continue;
        }
        ++actions;
        const std::string w = where + "." + k;
        if (k == "create_advisory") {
            try {
                e.action = CreateAdvisoryStep{advisory::parse_create_request(body)};
            } catch (const advisory::ValidationError& err) {
                fail(w, err.what());
            }
        } else if (k == "cancel_advisory") {
            allow_keys(body, w, {"advisory_id"});
            const auto id = integer(required(body, w, "advisory_id"), w + ".advisory_id");
            if (id < 0 || id > 65535) {
                fail(w + ".advisory_id", "out of range");
            }
            e.action = CancelAdvisoryStep{static_cast<std::uint16_t>(id)};
        } else if (k == "metaaction_text") {
            allow_keys(body, w, {"vehicle_id", "text"});
            MetaActionStep m;
            m.text = text(required(body, w, "text"), w + ".text");
            if (body.contains("vehicle_id")) {
                const auto id = integer(body["vehicle_id"], w + ".vehicle_id");
                if (id < 0 || id > 0xFFFFFFFFLL) {
                    fail(w + ".vehicle_id", "out of range");
                }
                m.vehicle_id = static_cast<std::uint32_t>(id);
            }
            e.action = std::move(m);
        } else if (k == "feed_update") {
            e.action = FeedUpdateStep{parse_feed_step(body, w, base_dir)};
        } else {
            fail(where, "unknown action '" + k + "'");
        }
    }
    if (actions != 1) {
        fail(where, "exactly one action per event");
    }
    return e;
}

}  // namespace

std::vector<vehicle::Route> parse_routes(const nlohmann::json& doc) {
    if (!doc.is_array() || doc.empty()) {
        fail("routes", "expected a non-empty array");
    }
    std::vector<vehicle::Route> routes;
    for (std::size_t r = 0; r < doc.size(); ++r) {
        const std::string where = "routes[" + std::to_string(r) + "]";
        allow_keys(doc[r], where, {"segments"});
        const auto& segs = required(doc[r], where, "segments");
        if (!segs.is_array()) {
            fail(where + ".segments", "expected an array");
        }
        std::vector<vehicle::RouteSegment> segments;
        for (std::size_t i = 0; i < segs.size(); ++i) {
            const std::string w = where + ".segments[" + std::to_string(i) + "]";
            allow_keys(segs[i], w, {"segment_id", "start", "end", "length_m"});
            const auto id = integer(required(segs[i], w, "segment_id"), w + ".segment_id");
            if (id < 0 || id > 65535) {
                fail(w + ".segment_id", "out of range");
            }
            segments.push_back({static_cast<std::uint16_t>(id), point(required(segs[i], w, "start"), w + ".start"),
                                point(required(segs[i], w, "end"), w + ".end"),
                                number(required(segs[i], w, "length_m"), w + ".length_m")});
        }
        try {
            routes.emplace_back(std::move(segments));
        } catch (const std::invalid_argument& e) {
            fail(where, e.what());
        }
    }
    return routes;
}

namespace {

json read_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw ScenarioError("cannot open " + path);
    }
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ScenarioError(path + ": " + e.what());
    }
}

}  // namespace

std::vector<vehicle::Route> load_routes(const std::string& path) {
    const auto doc = read_json(path);
    return parse_routes(doc.is_object() && doc.contains("routes") ? doc["routes"] : doc);
}

Scenario parse_scenario(const nlohmann::json& doc, const std::string& base_dir) {
    allow_keys(doc, "scenario",
               {"name", "seed", "link", "region", "vehicles", "routes", "timeline", "duration_s", "compliance_window_s",
                "processing_allowance_ms", "out"});
    Scenario s;
    s.name = doc.contains("name") ? text(doc["name"], "name") : "scenario";
    const auto& seed = required(doc, "scenario", "seed");
    if (!seed.is_number_unsigned() && !(seed.is_number_integer() && seed.get<std::int64_t>() >= 0)) {
        fail("seed", "expected a non-negative integer");
    }
    s.seed = seed.get<std::uint64_t>();
    s.link = parse_link(required(doc, "scenario", "link"));
    if (doc.contains("region")) {
        s.region = text(doc["region"], "region");
    }
    s.vehicles = parse_vehicles(required(doc, "scenario", "vehicles"));
    for (auto& r : parse_routes(required(doc, "scenario", "routes"))) {
        s.routes.push_back(std::make_shared<const vehicle::Route>(std::move(r)));
    }
    s.duration_s = number(required(doc, "scenario", "duration_s"), "duration_s");
    if (s.duration_s <= 0 || s.duration_s > 86400) {
        fail("duration_s", "must be in (0, 86400]");
    }
    s.compliance_window_s = number_or(doc, "scenario", "compliance_window_s", s.compliance_window_s);
    s.processing_allowance_ms = number_or(doc, "scenario", "processing_allowance_ms", s.processing_allowance_ms);
    if (doc.contains("out")) {
        s.out = text(doc["out"], "out");
    }
    if (doc.contains("timeline")) {
        const auto& tl = doc["timeline"];
        if (!tl.is_array()) {
            fail("timeline", "expected an array");
        }
        for (std::size_t i = 0; i < tl.size(); ++i) {
            auto e = parse_event(tl[i], i, base_dir);
            if (e.at_s < 0 || e.at_s > s.duration_s) {
                fail("timeline[" + std::to_string(i) + "].at_s", "outside [0, duration_s]");
            }
            s.timeline.push_back(std::move(e));
        }
        std::stable_sort(s.timeline.begin(), s.timeline.end(),
                         [](const TimelineEvent& a, const TimelineEvent& b) { return a.at_s < b.at_s; });
    }

    // Every vehicle has to start on its route.
    const auto per_route = static_cast<std::size_t>(s.vehicles.count + s.routes.size() - 1) / s.routes.size();
    for (const auto& route : s.routes) {
        const double last = s.vehicles.start_odometer_m + s.vehicles.spacing_m * static_cast<double>(per_route - 1);
        if (last >= route->length_m()) {
            fail("vehicles", "placement runs past the end of a route");
        }
    }
    return s;
}

Scenario load_scenario(const std::string& path) {
    const auto doc = read_json(path);
    const auto dir = std::filesystem::path(path).parent_path();
    return parse_scenario(doc, dir.empty() ? "." : dir.string());
}

}  // namespace cda::scenario
