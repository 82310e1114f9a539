#pragma once

#include "cda/linksim/link.hpp"
#include "cda/pubsub/socket.hpp"
#include "cda/vehicle/agent.hpp"

#include <atomic>
#include <memory>
#include <mutex>
#include <thread>
#include <vector>

namespace cda::scenario {

struct LiveFleetOptions {
    pubsub::Endpoint broker;
    std::string region = "fl";
    int count = 1;
    linksim::LinkProfile link = linksim::builtin_profile(linksim::ProfileName::Loopback);
    std::uint64_t seed = 0;
    std::vector<std::shared_ptr<const vehicle::Route>> routes;
    double initial_speed_mps = 30.0;
    double set_speed_mps = 30.0;
    double start_odometer_m = 0.0;
    double spacing_m = 25.0;
    /// Restart from the beginning of the route instead of stopping at its end.
    bool wrap = true;
};

struct LiveVehicleStatus {
    std::uint32_t vehicle_id = 0;
    double speed_mps = 0.0;
    std::uint16_t segment_id = 0;
    std::optional<std::uint16_t> advisory_id;
    bool connected = false;
};

/// Real-time fleet: one task per vehicle, each with its own broker session
/// and impaired link, ticking on the wall clock and publishing a BSM every
/// tick.
class LiveFleet {
public:
    explicit LiveFleet(LiveFleetOptions options);
    ~LiveFleet();

    LiveFleet(const LiveFleet&) = delete;
    LiveFleet& operator=(const LiveFleet&) = delete;

    std::vector<LiveVehicleStatus> status() const;
    void stop();

private:
    void run_vehicle(std::size_t index);

    LiveFleetOptions options_;
    std::atomic<bool> stopping_{false};
    mutable std::mutex mutex_;
    std::vector<LiveVehicleStatus> status_;
    std::vector<std::thread> threads_;
};

}  // namespace cda::scenario
