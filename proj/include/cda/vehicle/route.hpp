#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace cda::vehicle {

struct GeoPoint {
    double lat_deg = 0.0;
    double lon_deg = 0.0;
};

struct RouteSegment {
    std::uint16_t segment_id = 0;
    GeoPoint start;
    GeoPoint end;
    double length_m = 0.0;
};

/// Where an odometer reading falls on a route.
struct RoutePosition {
    std::size_t index = 0;   // into Route::segments()
    double offset_m = 0.0;   // meters into that segment
};

/// Ordered chain of straight segments.
class Route {
public:
    Route() = default;
    /// Throws std::invalid_argument for an empty list or a non-positive length.
    explicit Route(std::vector<RouteSegment> segments);

    const std::vector<RouteSegment>& segments() const { return segments_; }
    double length_m() const { return total_; }

    /// The odometer is clamped to [0, length]; the end point belongs to the
    /// last segment.
    RoutePosition locate(double odometer_m) const;
    std::uint16_t segment_at(double odometer_m) const;
    GeoPoint point_at(double odometer_m) const;

    /// Initial great-circle bearing of a segment, degrees clockwise from north in [0, 360).
    double bearing_deg(std::size_t index) const;

private:
    std::vector<RouteSegment> segments_;
    std::vector<double> starts_;  // cumulative start odometer of each segment
    double total_ = 0.0;
};

}  // namespace cda::vehicle
