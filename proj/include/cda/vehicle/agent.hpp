#pragma once

#include "cda/common/time.hpp"
#include "cda/vehicle/route.hpp"
#include "cda/wire/codec.hpp"

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace cda::vehicle {

/// First-order longitudinal speed law.
struct ControlLaw {
    double gain = 0.5;        // 1/s
    double accel_max = 2.0;   // m/s^2
    double decel_max = -3.0;  // m/s^2
    double tick_s = 0.1;

    /// Throws std::invalid_argument unless gain > 0, decel_max < 0 < accel_max,
    /// tick > 0 and gain * tick <= 1 (larger products overshoot the target).
    void validate() const;
};

struct ActiveAdvisory {
    wire::AdvisoryPayload payload;
    SimTime received_at{};
    SimTime expires_at{};
};

enum class NoticeSeverity { Info, Warn };

struct DriverNotice {
    SimTime at{};
    std::string text;
    NoticeSeverity severity = NoticeSeverity::Info;
};

struct VehicleState {
    std::uint32_t vehicle_id = 0;
    std::shared_ptr<const Route> route;
    double odometer_m = 0.0;
    double speed_mps = 0.0;
    double driver_set_speed_mps = 0.0;
    std::optional<ActiveAdvisory> active_advisory;
    std::uint8_t msg_cnt = 0;  // 0..127
    double follow_gap_s = 2.0;
    std::vector<DriverNotice> notices;
    std::uint64_t ignored_advisories = 0;

    std::uint16_t current_segment() const { return route->segment_at(odometer_m); }
    bool at_route_end() const { return odometer_m >= route->length_m(); }
};

/// Builds a vehicle at the start of its route. Throws std::invalid_argument
/// for a missing route or negative speeds.
VehicleState make_vehicle(std::uint32_t vehicle_id, std::shared_ptr<const Route> route, double initial_speed_mps,
                          double driver_set_speed_mps, double odometer_m = 0.0);

/// Driver set speed, lowered to the active advisory speed when there is one.
double effective_target(const VehicleState& state);

/// Advances one control period. `now` is the time at the start of the tick;
/// an advisory whose window has closed by then is dropped first. At the end
/// of the route the vehicle stops.
VehicleState tick(const VehicleState& state, const ControlLaw& law, SimTime now);

/// Snapshot as a BSM and advance msg_cnt.
wire::BsmPayload bsm_snapshot(VehicleState& state, SimTime now);

/// Saturating m/s to 0.02 m/s units.
std::uint16_t speed_field(double mps);

enum class AdvisoryOutcome {
    Applied,
    Refreshed,    // same advisory_id seen again; original receipt time kept
    Cancelled,
    WrongSegment,
    OutsideWindow,
    Superseded,   // older advisory_id than the active one
};

const char* to_string(AdvisoryOutcome outcome);

/// Applies an advisory to the state. Only outcomes Applied, Refreshed and
/// Cancelled change it; every other outcome bumps ignored_advisories.
AdvisoryOutcome on_advisory(VehicleState& state, const wire::AdvisoryPayload& advisory, SimTime now);

struct TracePoint {
    SimTime at{};
    double speed_mps = 0.0;
};

/// Seconds from receipt until the first trace point within 0.5 m/s of the
/// advisory speed; nullopt when never reached.
std::optional<double> compliance_time(const std::vector<TracePoint>& trace, double advisory_speed_mps,
                                      SimTime received_at);

}  // namespace cda::vehicle
