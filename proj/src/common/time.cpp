#include "cda/common/time.hpp"

#include <ctime>

namespace cda {

SimTime wall_now() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t secs = std::chrono::system_clock::to_time_t(now);
    std::tm utc{};
    gmtime_r(&secs, &utc);
    std::tm start{};
    start.tm_year = utc.tm_year;
    start.tm_mday = 1;
    const auto year_start = std::chrono::system_clock::from_time_t(timegm(&start));
    return std::chrono::duration_cast<SimTime>(now - year_start);
}

}  // namespace cda
