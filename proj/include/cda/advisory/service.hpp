#pragma once

#include "cda/advisory/events.hpp"
#include "cda/advisory/feed.hpp"
#include "cda/advisory/log.hpp"
#include "cda/common/time.hpp"
#include "cda/pubsub/topic.hpp"
#include "cda/vehicle/route.hpp"
#include "cda/wire/codec.hpp"

#include <nlohmann/json.hpp>

#include <deque>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace cda::advisory {

enum class AdvisoryStatus { Active, Expired, Cancelled };

const char* to_string(AdvisoryStatus s);
const char* cause_name(wire::AdvisoryCause c);
/// Accepts the names returned by cause_name. Throws std::invalid_argument.
wire::AdvisoryCause parse_cause(std::string_view name);

struct AdvisoryRecord {
    std::uint16_t advisory_id = 0;
    std::uint16_t segment_id = 0;
    double speed_mps = 0.0;
    double duration_s = 0.0;
    wire::AdvisoryCause cause = wire::AdvisoryCause::None;
    SimTime created_at{};
    AdvisoryStatus status = AdvisoryStatus::Active;
};

struct CreateRequest {
    std::int64_t segment_id = 0;
    double speed_mps = 0.0;
    double duration_s = 0.0;
    wire::AdvisoryCause cause = wire::AdvisoryCause::None;
};

inline constexpr double kMaxAdvisorySpeedMps = 163.8;
inline constexpr double kMaxDurationS = 65535.0 * 60.0;

class ValidationError : public std::invalid_argument {
public:
    ValidationError(std::string field, const std::string& message)
        : std::invalid_argument(message), field_(std::move(field)) {}
    const std::string& field() const { return field_; }

private:
    std::string field_;
};

class NotFound : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// The request is valid but conflicts with current state.
class Conflict : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class PublishError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Retained AtLeastOnce publish toward the broker. Throws PublishError when
/// the broker cannot be reached or does not acknowledge.
class Publisher {
public:
    virtual ~Publisher() = default;
    virtual void publish(const pubsub::Topic& topic, const std::vector<std::uint8_t>& frame) = 0;
};

/// Maps a BSM position to a segment id.
using SegmentLocator = std::function<std::optional<std::uint16_t>(double lat_deg, double lon_deg)>;

/// Nearest segment within `tolerance_m` of the point, across all routes.
SegmentLocator route_locator(std::vector<vehicle::Route> routes, double tolerance_m = 50.0);

struct ServiceOptions {
    std::string region = "fl";
    std::string log_path = "advisories.log";
    std::function<SimTime()> clock = wall_now;
    /// Runs after an advisory is durably logged and before it is published.
    std::function<void()> after_persist;
    SegmentLocator locator;
    std::size_t stream_buffer = 1024;
    SimTime stale_after = std::chrono::seconds(5);
    SimTime fleet_delta_interval = std::chrono::milliseconds(500);
};

struct FleetEntry {
    std::uint32_t vehicle_id = 0;
    std::optional<std::uint16_t> segment_id;
    double speed_mps = 0.0;
    SimTime last_bsm_at{};
    std::optional<std::uint16_t> active_advisory_id;
    bool stale = false;
};

struct PendingPublish {
    std::uint64_t pub_id = 0;
    std::uint16_t advisory_id = 0;
    pubsub::Topic topic;
    std::vector<std::uint8_t> frame;
};

/// Advisory lifecycle, persistence, fleet view and event fan-out. Every
/// state change is appended to the log before anything is published, and
/// frames are stored in the log so a restart republishes the same bytes.
class AdvisoryService {
public:
    /// Replays the log; pending frames stay queued until recover() or
    /// publish_pending() runs. Throws LogError.
    AdvisoryService(ServiceOptions options, Publisher& publisher);

    /// Publishes whatever the log left pending. Returns how many went out.
    std::size_t recover() { return publish_pending(); }

    /// Throws ValidationError, or Conflict when the 16-bit id space is spent.
    AdvisoryRecord create(const CreateRequest& request);
    /// Throws NotFound, or Conflict for an advisory that is no longer active.
    AdvisoryRecord cancel(std::uint16_t advisory_id);
    /// Marks advisories whose duration has elapsed as expired.
    std::size_t expire_due();

    /// Publishes queued frames in log order, stopping at the first failure.
    std::size_t publish_pending();
    std::vector<PendingPublish> pending() const;
    bool is_pending(std::uint16_t advisory_id) const;

    std::vector<AdvisoryRecord> advisories() const;
    std::optional<AdvisoryRecord> find(std::uint16_t advisory_id) const;
    /// Frame that went (or will go) out for the advisory's creation.
    std::optional<std::vector<std::uint8_t>> creation_frame(std::uint16_t advisory_id) const;

    /// Ingests one BSM frame from the broker. Undecodable or non-BSM frames
    /// are counted and dropped.
    void on_bsm(std::span<const std::uint8_t> frame);
    std::vector<FleetEntry> fleet() const;
    std::uint64_t rejected_bsms() const;

    void set_feed(FeedSnapshot snapshot);
    FeedSnapshot traffic() const;

    /// Subscribes to the event stream; the first event is the current
    /// advisory set, fleet and traffic snapshot.
    std::shared_ptr<StreamSubscription> stream();
    EventHub& hub() { return hub_; }

    const ServiceOptions& options() const { return options_; }

private:
    void replay(const std::vector<nlohmann::json>& entries);
    void queue_publish(nlohmann::json entry, std::uint16_t advisory_id, const pubsub::Topic& topic,
                       std::vector<std::uint8_t> frame);
    std::vector<std::uint8_t> cancel_frame(const AdvisoryRecord& r) const;
    void close_advisory(AdvisoryRecord& r, AdvisoryStatus status);
    nlohmann::json snapshot_locked() const;
    std::vector<FleetEntry> fleet_locked(SimTime now) const;

    ServiceOptions options_;
    Publisher& publisher_;
    AdvisoryLog log_;
    EventHub hub_;

    mutable std::mutex mutex_;
    std::map<std::uint16_t, AdvisoryRecord> records_;
    std::map<std::uint16_t, std::vector<std::uint8_t>> creation_frames_;
    std::map<std::uint16_t, std::uint16_t> latest_by_segment_;
    std::deque<PendingPublish> pending_;
    std::uint32_t next_id_ = 1;
    std::uint64_t next_pub_ = 1;

    struct VehicleView {
        FleetEntry entry;
        std::optional<SimTime> last_emit;
    };
    std::map<std::uint32_t, VehicleView> fleet_;
    std::uint64_t rejected_bsms_ = 0;
    FeedSnapshot feed_;

    std::mutex publish_mutex_;
};

nlohmann::json to_json(const AdvisoryRecord& r);
nlohmann::json to_json(const FleetEntry& e);

/// Parses a POST /advisories body. Throws ValidationError naming the field.
CreateRequest parse_create_request(const nlohmann::json& body);

}  // namespace cda::advisory
