#include "cda/advisory/service.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace cda::advisory {

namespace {

constexpr const char* kCauseNames[] = {"none", "congestion", "incident", "weather", "workzone"};
constexpr double kEarthRadiusM = 6371000.0;

std::uint16_t speed_units(double mps) {
    return static_cast<std::uint16_t>(std::min<double>(std::round(mps / wire::kSpeedUnitMps), wire::kSpeedMax));
}

std::uint16_t duration_minutes(double seconds) {
    return static_cast<std::uint16_t>(std::ceil(seconds / 60.0));
}

AdvisoryStatus parse_status(const std::string& s) {
    if (s == "active") {
        return AdvisoryStatus::Active;
    }
    if (s == "expired") {
        return AdvisoryStatus::Expired;
    }
    if (s == "cancelled") {
        return AdvisoryStatus::Cancelled;
    }
    throw LogError("unknown status '" + s + "' in log");
}

AdvisoryRecord record_from_json(const nlohmann::json& j) {
    AdvisoryRecord r;
    r.advisory_id = j.at("advisory_id").get<std::uint16_t>();
    r.segment_id = j.at("segment_id").get<std::uint16_t>();
    r.speed_mps = j.at("speed_mps").get<double>();
    r.duration_s = j.at("duration_s").get<double>();
    r.cause = parse_cause(j.at("cause").get<std::string>());
    r.created_at = SimTime(j.at("created_at_us").get<std::int64_t>());
    r.status = parse_status(j.at("status").get<std::string>());
    return r;
}

}  // namespace

const char* to_string(AdvisoryStatus s) {
    switch (s) {
        case AdvisoryStatus::Active: return "active";
        case AdvisoryStatus::Expired: return "expired";
        case AdvisoryStatus::Cancelled: return "cancelled";
    }
    return "?";
}

const char* cause_name(wire::AdvisoryCause c) {
    const auto i = static_cast<std::size_t>(c);
    return i < std::size(kCauseNames) ? kCauseNames[i] : "?";
}

wire::AdvisoryCause parse_cause(std::string_view name) {
    for (std::size_t i = 0; i < std::size(kCauseNames); ++i) {
        if (name == kCauseNames[i]) {
            return static_cast<wire::AdvisoryCause>(i);
        }
    }
    throw std::invalid_argument("unknown cause '" + std::string(name) + "'");
}

nlohmann::json to_json(const AdvisoryRecord& r) {
    return {{"advisory_id", r.advisory_id},
            {"segment_id", r.segment_id},
            {"speed_mps", r.speed_mps},
            {"duration_s", r.duration_s},
            {"cause", cause_name(r.cause)},
            {"created_at_us", r.created_at.count()},
            {"status", to_string(r.status)}};
}

nlohmann::json to_json(const FleetEntry& e) {
    nlohmann::json j{{"vehicle_id", e.vehicle_id},
                     {"speed_mps", e.speed_mps},
                     {"last_bsm_at_us", e.last_bsm_at.count()},
                     {"stale", e.stale}};
    j["segment_id"] = e.segment_id ? nlohmann::json(*e.segment_id) : nlohmann::json(nullptr);
    j["active_advisory_id"] = e.active_advisory_id ? nlohmann::json(*e.active_advisory_id) : nlohmann::json(nullptr);
    return j;
}

CreateRequest parse_create_request(const nlohmann::json& body) {
    if (!body.is_object()) {
        throw ValidationError("body", "request body must be a JSON object");
    }
    for (auto it = body.begin(); it != body.end(); ++it) {
        if (it.key() != "segment_id" && it.key() != "speed_mps" && it.key() != "duration_s" && it.key() != "cause") {
            throw ValidationError(it.key(), "unknown field '" + it.key() + "'");
        }
    }
    CreateRequest req;
    if (!body.contains("segment_id") || !body["segment_id"].is_number_integer()) {
        throw ValidationError("segment_id", "segment_id must be an integer");
    }
    req.segment_id = body["segment_id"].get<std::int64_t>();
    for (const char* key : {"speed_mps", "duration_s"}) {
        if (!body.contains(key) || !body[key].is_number()) {
            throw ValidationError(key, std::string(key) + " must be a number");
        }
    }
    req.speed_mps = body["speed_mps"].get<double>();
    req.duration_s = body["duration_s"].get<double>();
    if (body.contains("cause")) {
        const auto& c = body["cause"];
        try {
            if (c.is_string()) {
                req.cause = parse_cause(c.get<std::string>());
            } else if (c.is_number_integer() && c.get<std::int64_t>() >= 0 &&
                       c.get<std::int64_t>() < static_cast<std::int64_t>(std::size(kCauseNames))) {
                req.cause = static_cast<wire::AdvisoryCause>(c.get<int>());
            } else {
                throw std::invalid_argument("cause must be one of none, congestion, incident, weather, workzone");
            }
        } catch (const std::invalid_argument& e) {
            throw ValidationError("cause", e.what());
        }
    }
    return req;
}

SegmentLocator route_locator(std::vector<vehicle::Route> routes, double tolerance_m) {
    return [routes = std::move(routes), tolerance_m](double lat, double lon) -> std::optional<std::uint16_t> {
        std::optional<std::uint16_t> best;
        double best_d = tolerance_m;
        for (const auto& route : routes) {
            for (const auto& s : route.segments()) {
                // Local equirectangular frame around the query point.
                const double k = std::numbers::pi / 180.0 * kEarthRadiusM;
                const double c = std::cos(lat * std::numbers::pi / 180.0);
                const double ax = (s.start.lon_deg - lon) * k * c, ay = (s.start.lat_deg - lat) * k;
                const double bx = (s.end.lon_deg - lon) * k * c, by = (s.end.lat_deg - lat) * k;
                const double dx = bx - ax, dy = by - ay;
                const double len2 = dx * dx + dy * dy;
                const double t = len2 > 0 ? std::clamp(-(ax * dx + ay * dy) / len2, 0.0, 1.0) : 0.0;
                const double d = std::hypot(ax + t * dx, ay + t * dy);
                if (d <= best_d) {
                    best_d = d;
                    best = s.segment_id;
                }
            }
        }
        return best;
    };
}

AdvisoryService::AdvisoryService(ServiceOptions options, Publisher& publisher)
    : options_(std::move(options)), publisher_(publisher), log_(options_.log_path), hub_(options_.stream_buffer) {
    if (!options_.clock) {
        options_.clock = wall_now;
    }
    replay(log_.recovered());
}

void AdvisoryService::replay(const std::vector<nlohmann::json>& entries) {
    try {
        for (const auto& e : entries) {
            const auto op = e.at("op").get<std::string>();
            if (op == "create") {
                const auto r = record_from_json(e.at("record"));
                records_[r.advisory_id] = r;
                latest_by_segment_[r.segment_id] = r.advisory_id;
                next_id_ = std::max<std::uint32_t>(next_id_, r.advisory_id + 1U);
                auto frame = wire::from_hex(e.at("frame").get<std::string>());
                creation_frames_[r.advisory_id] = frame;
                const auto pub = e.at("pub").get<std::uint64_t>();
                pending_.push_back({pub, r.advisory_id, pubsub::Topic::parse(e.at("topic").get<std::string>()),
                                    std::move(frame)});
                next_pub_ = std::max(next_pub_, pub + 1);
            } else if (op == "status") {
                const auto id = e.at("advisory_id").get<std::uint16_t>();
                const auto it = records_.find(id);
                if (it == records_.end()) {
                    throw LogError("status entry for unknown advisory " + std::to_string(id));
                }
                it->second.status = parse_status(e.at("status").get<std::string>());
                if (!e.at("frame").is_null()) {
                    const auto pub = e.at("pub").get<std::uint64_t>();
                    pending_.push_back({pub, id, pubsub::Topic::parse(e.at("topic").get<std::string>()),
                                        wire::from_hex(e.at("frame").get<std::string>())});
                    next_pub_ = std::max(next_pub_, pub + 1);
                }
            } else if (op == "published") {
                const auto pub = e.at("pub").get<std::uint64_t>();
                std::erase_if(pending_, [&](const PendingPublish& p) { return p.pub_id == pub; });
            } else {
                throw LogError("unknown log op '" + op + "'");
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw LogError(std::string("malformed log entry: ") + e.what());
    } catch (const std::invalid_argument& e) {
        throw LogError(std::string("malformed log entry: ") + e.what());
    }
}

void AdvisoryService::queue_publish(nlohmann::json entry, std::uint16_t advisory_id, const pubsub::Topic& topic,
                                    std::vector<std::uint8_t> frame) {
    const auto pub = next_pub_++;
    entry["pub"] = pub;
    entry["topic"] = topic.str();
    entry["frame"] = wire::to_hex(frame);
    log_.append(entry);
    pending_.push_back({pub, advisory_id, topic, std::move(frame)});
}

AdvisoryRecord AdvisoryService::create(const CreateRequest& req) {
    if (req.segment_id < 0 || req.segment_id > 65535) {
        throw ValidationError("segment_id", "segment_id must be within 0..65535");
    }
    if (!(req.speed_mps >= 0.0 && req.speed_mps <= kMaxAdvisorySpeedMps)) {
        throw ValidationError("speed_mps", "speed_mps must be within [0, 163.8]");
    }
    if (!(req.duration_s > 0.0 && req.duration_s <= kMaxDurationS)) {
        throw ValidationError("duration_s", "duration_s must be positive and at most 65535 minutes");
    }
    if (static_cast<std::size_t>(req.cause) >= std::size(kCauseNames)) {
        throw ValidationError("cause", "unknown cause");
    }
    AdvisoryRecord r;
    {
        std::lock_guard lock(mutex_);
        if (next_id_ > 65535) {
            throw Conflict("advisory id space exhausted");
        }
        r.advisory_id = static_cast<std::uint16_t>(next_id_);
        r.segment_id = static_cast<std::uint16_t>(req.segment_id);
        r.speed_mps = req.speed_mps;
        r.duration_s = req.duration_s;
        r.cause = req.cause;
        r.created_at = options_.clock();

        wire::AdvisoryPayload p;
        p.advisory_id = r.advisory_id;
        p.segment_id = r.segment_id;
        p.advisory_speed = speed_units(r.speed_mps);
        p.start_minute_of_year = wire::kStartImmediate;
        p.duration_minutes = duration_minutes(r.duration_s);
        p.cause = static_cast<std::uint8_t>(r.cause);
        auto frame = wire::encode_frame(p);

        queue_publish({{"op", "create"}, {"record", to_json(r)}}, r.advisory_id,
                      pubsub::advisory_topic(options_.region, r.segment_id), frame);
        ++next_id_;
        records_[r.advisory_id] = r;
        creation_frames_[r.advisory_id] = std::move(frame);
        latest_by_segment_[r.segment_id] = r.advisory_id;
        hub_.publish("advisory_created", to_json(r));
    }
    if (options_.after_persist) {
        options_.after_persist();
    }
    publish_pending();
    return r;
}

std::vector<std::uint8_t> AdvisoryService::cancel_frame(const AdvisoryRecord& r) const {
    wire::AdvisoryPayload p;
    p.advisory_id = r.advisory_id;
    p.segment_id = r.segment_id;
    p.advisory_speed = wire::kSpeedUnavailable;
    p.start_minute_of_year = wire::kStartImmediate;
    p.duration_minutes = duration_minutes(r.duration_s);
    p.cause = static_cast<std::uint8_t>(r.cause);
    return wire::encode_frame(p);
}

void AdvisoryService::close_advisory(AdvisoryRecord& r, AdvisoryStatus status) {
    r.status = status;
    nlohmann::json entry{{"op", "status"}, {"advisory_id", r.advisory_id}, {"status", to_string(status)}};
    // Only the newest advisory on a segment owns the retained message; a
    // cancel for an older one would wipe out its successor.
    const auto latest = latest_by_segment_.find(r.segment_id);
    if (latest != latest_by_segment_.end() && latest->second == r.advisory_id) {
        queue_publish(std::move(entry), r.advisory_id, pubsub::advisory_topic(options_.region, r.segment_id),
                      cancel_frame(r));
    } else {
        entry["frame"] = nullptr;
        log_.append(entry);
    }
    hub_.publish(status == AdvisoryStatus::Cancelled ? "advisory_cancelled" : "advisory_expired", to_json(r));
}

AdvisoryRecord AdvisoryService::cancel(std::uint16_t advisory_id) {
    AdvisoryRecord out;
    {
        std::lock_guard lock(mutex_);
        const auto it = records_.find(advisory_id);
        if (it == records_.end()) {
            throw NotFound("no advisory " + std::to_string(advisory_id));
        }
        if (it->second.status != AdvisoryStatus::Active) {
            throw Conflict("advisory " + std::to_string(advisory_id) + " is already " + to_string(it->second.status));
        }
        close_advisory(it->second, AdvisoryStatus::Cancelled);
        out = it->second;
    }
    publish_pending();
    return out;
}

std::size_t AdvisoryService::expire_due() {
    std::size_t n = 0;
    {
        std::lock_guard lock(mutex_);
        const SimTime now = options_.clock();
        for (auto& [id, r] : records_) {
            if (r.status == AdvisoryStatus::Active && now >= r.created_at + from_seconds(r.duration_s)) {
                close_advisory(r, AdvisoryStatus::Expired);
                ++n;
            }
        }
    }
    if (n > 0) {
        publish_pending();
    }
    return n;
}

std::size_t AdvisoryService::publish_pending() {
    std::lock_guard publishing(publish_mutex_);
    std::size_t sent = 0;
    while (true) {
        PendingPublish next;
        {
            std::lock_guard lock(mutex_);
            if (pending_.empty()) {
                return sent;
            }
            next = pending_.front();
        }
        try {
            publisher_.publish(next.topic, next.frame);
        } catch (const PublishError&) {
            return sent;
        }
        std::lock_guard lock(mutex_);
        log_.append({{"op", "published"}, {"pub", next.pub_id}});
        std::erase_if(pending_, [&](const PendingPublish& p) { return p.pub_id == next.pub_id; });
        ++sent;
    }
}

std::vector<PendingPublish> AdvisoryService::pending() const {
    std::lock_guard lock(mutex_);
    return {pending_.begin(), pending_.end()};
}

bool AdvisoryService::is_pending(std::uint16_t advisory_id) const {
    std::lock_guard lock(mutex_);
    return std::any_of(pending_.begin(), pending_.end(),
                       [&](const PendingPublish& p) { return p.advisory_id == advisory_id; });
}

std::vector<AdvisoryRecord> AdvisoryService::advisories() const {
    std::lock_guard lock(mutex_);
    std::vector<AdvisoryRecord> out;
    for (const auto& [id, r] : records_) {
        out.push_back(r);
    }
    return out;
}

std::optional<AdvisoryRecord> AdvisoryService::find(std::uint16_t advisory_id) const {
    std::lock_guard lock(mutex_);
    const auto it = records_.find(advisory_id);
    if (it == records_.end()) {
        return std::nullopt;
    }
    return it->second;
}

std::optional<std::vector<std::uint8_t>> AdvisoryService::creation_frame(std::uint16_t advisory_id) const {
    std::lock_guard lock(mutex_);
    const auto it = creation_frames_.find(advisory_id);
    if (it == creation_frames_.end()) {
        return std::nullopt;
    }
    return it->second;
}

void AdvisoryService::on_bsm(std::span<const std::uint8_t> frame) {
    wire::BsmPayload bsm;
    try {
        const auto decoded = wire::decode_frame(frame);
        const auto* p = std::get_if<wire::BsmPayload>(&decoded.message);
        if (!p) {
            throw wire::CodecError(wire::ErrorKind::UnknownType, "not a BSM");
        }
        bsm = *p;
    } catch (const wire::CodecError&) {
        std::lock_guard lock(mutex_);
        ++rejected_bsms_;
        return;
    }
    std::lock_guard lock(mutex_);
    const SimTime now = options_.clock();
    auto& view = fleet_[bsm.temp_id];
    auto& e = view.entry;
    e.vehicle_id = bsm.temp_id;
    e.speed_mps = bsm.speed == wire::kSpeedUnavailable ? 0.0 : bsm.speed * wire::kSpeedUnitMps;
    e.last_bsm_at = now;
    e.stale = false;
    e.segment_id.reset();
    if (options_.locator && bsm.lat != wire::kLatUnavailable && bsm.lon != wire::kLonUnavailable) {
        e.segment_id = options_.locator(bsm.lat / 1e7, bsm.lon / 1e7);
    }
    e.active_advisory_id.reset();
    if (e.segment_id) {
        const auto latest = latest_by_segment_.find(*e.segment_id);
        if (latest != latest_by_segment_.end() && records_.at(latest->second).status == AdvisoryStatus::Active) {
            e.active_advisory_id = latest->second;
        }
    }
    if (!view.last_emit || now - *view.last_emit >= options_.fleet_delta_interval) {
        view.last_emit = now;
        hub_.publish("fleet", to_json(e));
    }
}

std::vector<FleetEntry> AdvisoryService::fleet_locked(SimTime now) const {
    std::vector<FleetEntry> out;
    for (const auto& [id, v] : fleet_) {
        FleetEntry e = v.entry;
        e.stale = now - e.last_bsm_at > options_.stale_after;
        out.push_back(e);
    }
    return out;
}

std::vector<FleetEntry> AdvisoryService::fleet() const {
    std::lock_guard lock(mutex_);
    return fleet_locked(options_.clock());
}

std::uint64_t AdvisoryService::rejected_bsms() const {
    std::lock_guard lock(mutex_);
    return rejected_bsms_;
}

void AdvisoryService::set_feed(FeedSnapshot snapshot) {
    std::lock_guard lock(mutex_);
    feed_ = std::move(snapshot);
    nlohmann::json events = nlohmann::json::array();
    for (const auto& e : feed_.events) {
        events.push_back(to_json(e));
    }
    hub_.publish("feed", {{"events", events}});
}

FeedSnapshot AdvisoryService::traffic() const {
    std::lock_guard lock(mutex_);
    return feed_;
}

nlohmann::json AdvisoryService::snapshot_locked() const {
    nlohmann::json advisories = nlohmann::json::array();
    for (const auto& [id, r] : records_) {
        advisories.push_back(to_json(r));
    }
    nlohmann::json fleet = nlohmann::json::array();
    for (const auto& e : fleet_locked(options_.clock())) {
        fleet.push_back(to_json(e));
    }
    nlohmann::json events = nlohmann::json::array();
    for (const auto& e : feed_.events) {
        events.push_back(to_json(e));
    }
    return {{"advisories", advisories}, {"fleet", fleet}, {"traffic", {{"events", events}}}};
}

std::shared_ptr<StreamSubscription> AdvisoryService::stream() {
    std::lock_guard lock(mutex_);
    return hub_.subscribe(snapshot_locked());
}

}  // namespace cda::advisory
