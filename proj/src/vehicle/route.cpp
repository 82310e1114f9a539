#include "cda/vehicle/route.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace cda::vehicle {

namespace {

double radians(double deg) { return deg * std::numbers::pi / 180.0; }

}  // namespace

Route::Route(std::vector<RouteSegment> segments) : segments_(std::move(segments)) {
    if (segments_.empty()) {
        throw std::invalid_argument("route needs at least one segment");
    }
    starts_.reserve(segments_.size());
    for (const auto& s : segments_) {
        if (!(s.length_m > 0.0) || !std::isfinite(s.length_m)) {
            throw std::invalid_argument("segment " + std::to_string(s.segment_id) + " has non-positive length");
        }
        if (std::abs(s.start.lat_deg) > 90.0 || std::abs(s.end.lat_deg) > 90.0 ||
            std::abs(s.start.lon_deg) > 180.0 || std::abs(s.end.lon_deg) > 180.0) {
            throw std::invalid_argument("segment " + std::to_string(s.segment_id) + " has invalid coordinates");
        }
        starts_.push_back(total_);
        total_ += s.length_m;
    }
}

RoutePosition Route::locate(double odometer_m) const {
    const double odo = std::clamp(odometer_m, 0.0, total_);
    // Last segment whose start is <= odo.
    const auto it = std::upper_bound(starts_.begin(), starts_.end(), odo);
    const auto index = static_cast<std::size_t>(std::distance(starts_.begin(), it)) - 1;
    return {index, std::min(odo - starts_[index], segments_[index].length_m)};
}

std::uint16_t Route::segment_at(double odometer_m) const { return segments_[locate(odometer_m).index].segment_id; }

GeoPoint Route::point_at(double odometer_m) const {
    const auto pos = locate(odometer_m);
    const auto& s = segments_[pos.index];
    const double f = pos.offset_m / s.length_m;
    return {s.start.lat_deg + f * (s.end.lat_deg - s.start.lat_deg),
            s.start.lon_deg + f * (s.end.lon_deg - s.start.lon_deg)};
}

double Route::bearing_deg(std::size_t index) const {
    const auto& s = segments_.at(index);
    const double phi1 = radians(s.start.lat_deg);
    const double phi2 = radians(s.end.lat_deg);
    const double dl = radians(s.end.lon_deg - s.start.lon_deg);
    const double y = std::sin(dl) * std::cos(phi2);
    const double x = std::cos(phi1) * std::sin(phi2) - std::sin(phi1) * std::cos(phi2) * std::cos(dl);
    double deg = std::atan2(y, x) * 180.0 / std::numbers::pi;
    deg = std::fmod(deg + 360.0, 360.0);
    return deg >= 360.0 ? 0.0 : deg;
}

}  // namespace cda::vehicle
