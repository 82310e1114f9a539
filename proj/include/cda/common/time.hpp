#pragma once

#include <chrono>
#include <cstdint>

namespace cda {

/// Time measured from 00:00 UTC on January 1st of the current year.
/// Both simulated and live clocks report in this frame so that J2735
/// minute-of-year and second-mark fields fall out of plain division.
using SimTime = std::chrono::microseconds;

inline constexpr std::int64_t kMinutesPerYear = 527040;  // 366 days

inline std::uint32_t minute_of_year(SimTime t) {
    return static_cast<std::uint32_t>(
        std::chrono::duration_cast<std::chrono::minutes>(t).count() % kMinutesPerYear);
}

/// Milliseconds within the current minute, 0..59999.
inline std::uint16_t sec_mark(SimTime t) {
    const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(t).count();
    return static_cast<std::uint16_t>(ms % 60000);
}

inline double to_seconds(SimTime t) {
    return std::chrono::duration<double>(t).count();
}

inline SimTime from_seconds(double s) {
    return std::chrono::round<SimTime>(std::chrono::duration<double>(s));
}

inline SimTime from_millis(double ms) {
    return std::chrono::round<SimTime>(std::chrono::duration<double, std::milli>(ms));
}

inline double to_millis(SimTime t) {
    return std::chrono::duration<double, std::milli>(t).count();
}

/// Wall clock mapped into the start-of-year frame.
SimTime wall_now();

}  // namespace cda
