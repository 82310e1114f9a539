#include "cda/vehicle/agent.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace cda::vehicle {

namespace {

constexpr double kComplianceBand = 0.5;

SimTime window_start(const wire::AdvisoryPayload& a, SimTime received_at) {
    if (a.start_minute_of_year == wire::kStartImmediate) {
        return received_at;
    }
    return std::chrono::minutes(a.start_minute_of_year);
}

}  // namespace

void ControlLaw::validate() const {
    if (!(gain > 0.0) || !(decel_max < 0.0) || !(accel_max > 0.0) || !(tick_s > 0.0)) {
        throw std::invalid_argument("control law needs gain > 0, decel_max < 0 < accel_max and tick > 0");
    }
    if (gain * tick_s > 1.0) {
        throw std::invalid_argument("control law gain * tick must not exceed 1");
    }
}

VehicleState make_vehicle(std::uint32_t vehicle_id, std::shared_ptr<const Route> route, double initial_speed_mps,
                          double driver_set_speed_mps, double odometer_m) {
    if (!route) {
        throw std::invalid_argument("vehicle needs a route");
    }
    if (!(initial_speed_mps >= 0.0) || !(driver_set_speed_mps >= 0.0)) {
        throw std::invalid_argument("vehicle speeds must be non-negative");
    }
    if (!(odometer_m >= 0.0) || odometer_m > route->length_m()) {
        throw std::invalid_argument("vehicle odometer outside its route");
    }
    VehicleState s;
    s.vehicle_id = vehicle_id;
    s.route = std::move(route);
    s.speed_mps = initial_speed_mps;
    s.driver_set_speed_mps = driver_set_speed_mps;
    s.odometer_m = odometer_m;
    return s;
}

double effective_target(const VehicleState& state) {
    if (state.active_advisory && !state.active_advisory->payload.is_cancel()) {
        return std::min(state.driver_set_speed_mps, state.active_advisory->payload.speed_mps());
    }
    return state.driver_set_speed_mps;
}

VehicleState tick(const VehicleState& state, const ControlLaw& law, SimTime now) {
    VehicleState next = state;
    if (next.active_advisory && now > next.active_advisory->expires_at) {
        next.active_advisory.reset();
    }
    if (next.at_route_end()) {
        next.speed_mps = 0.0;
        return next;
    }
    const double accel = std::clamp(law.gain * (effective_target(next) - next.speed_mps), law.decel_max, law.accel_max);
    next.speed_mps = std::max(0.0, next.speed_mps + accel * law.tick_s);
    next.odometer_m = next.odometer_m + next.speed_mps * law.tick_s;
    if (next.odometer_m >= next.route->length_m()) {
        next.odometer_m = next.route->length_m();
        next.speed_mps = 0.0;
    }
    if (next.active_advisory && next.active_advisory->payload.segment_id != next.current_segment()) {
        next.active_advisory.reset();
    }
    return next;
}

std::uint16_t speed_field(double mps) {
    if (!(mps > 0.0)) {
        return 0;
    }
    const double units = std::round(mps / wire::kSpeedUnitMps);
    return units >= wire::kSpeedMax ? wire::kSpeedMax : static_cast<std::uint16_t>(units);
}

wire::BsmPayload bsm_snapshot(VehicleState& state, SimTime now) {
    const auto pos = state.route->locate(state.odometer_m);
    const auto point = state.route->point_at(state.odometer_m);
    wire::BsmPayload bsm;
    bsm.msg_cnt = state.msg_cnt;
    bsm.temp_id = state.vehicle_id;
    bsm.sec_mark = sec_mark(now);
    bsm.lat = static_cast<std::int32_t>(std::lround(point.lat_deg * 1e7));
    bsm.lon = static_cast<std::int32_t>(std::lround(point.lon_deg * 1e7));
    bsm.speed = speed_field(state.speed_mps);
    const auto heading = std::lround(state.route->bearing_deg(pos.index) / wire::kHeadingUnitDeg);
    bsm.heading = static_cast<std::uint16_t>(heading % (wire::kHeadingMax + 1));
    state.msg_cnt = static_cast<std::uint8_t>((state.msg_cnt + 1) % 128);
    return bsm;
}

const char* to_string(AdvisoryOutcome outcome) {
    switch (outcome) {
        case AdvisoryOutcome::Applied: return "applied";
        case AdvisoryOutcome::Refreshed: return "refreshed";
        case AdvisoryOutcome::Cancelled: return "cancelled";
        case AdvisoryOutcome::WrongSegment: return "wrong_segment";
        case AdvisoryOutcome::OutsideWindow: return "outside_window";
        case AdvisoryOutcome::Superseded: return "superseded";
    }
    return "?";
}

AdvisoryOutcome on_advisory(VehicleState& state, const wire::AdvisoryPayload& advisory, SimTime now) {
    const auto ignore = [&](AdvisoryOutcome why) {
        ++state.ignored_advisories;
        return why;
    };
    if (advisory.segment_id != state.current_segment()) {
        return ignore(AdvisoryOutcome::WrongSegment);
    }
    auto& active = state.active_advisory;
    if (active && advisory.advisory_id < active->payload.advisory_id) {
        return ignore(AdvisoryOutcome::Superseded);
    }
    if (advisory.is_cancel()) {
        if (!active) {
            return ignore(AdvisoryOutcome::OutsideWindow);
        }
        active.reset();
        return AdvisoryOutcome::Cancelled;
    }
    if (active && advisory.advisory_id == active->payload.advisory_id && advisory == active->payload) {
        return AdvisoryOutcome::Refreshed;
    }
    const SimTime start = window_start(advisory, now);
    const SimTime end = start + std::chrono::minutes(advisory.duration_minutes);
    if (now < start || now > end) {
        return ignore(AdvisoryOutcome::OutsideWindow);
    }
    active = ActiveAdvisory{advisory, now, end};
    return AdvisoryOutcome::Applied;
}

std::optional<double> compliance_time(const std::vector<TracePoint>& trace, double advisory_speed_mps,
                                      SimTime received_at) {
    for (const auto& p : trace) {
        if (p.at < received_at) {
            continue;
        }
        if (std::abs(p.speed_mps - advisory_speed_mps) < kComplianceBand) {
            return to_seconds(p.at - received_at);
        }
    }
    return std::nullopt;
}

}  // namespace cda::vehicle
