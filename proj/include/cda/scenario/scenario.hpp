#pragma once

#include "cda/advisory/feed.hpp"
#include "cda/advisory/service.hpp"
#include "cda/linksim/link.hpp"
#include "cda/vehicle/route.hpp"

#include <nlohmann/json.hpp>

#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace cda::scenario {

class ScenarioError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct VehicleSpec {
    int count = 1;
    double initial_speed_mps = 0.0;
    double set_speed_mps = 0.0;
    double start_odometer_m = 0.0;
    /// Gap between consecutive vehicles placed on the same route.
    double spacing_m = 25.0;
};

struct CreateAdvisoryStep {
    advisory::CreateRequest request;
};
struct CancelAdvisoryStep {
    std::uint16_t advisory_id = 0;
};
struct MetaActionStep {
    std::optional<std::uint32_t> vehicle_id;  // nullopt targets every vehicle
    std::string text;
};
struct FeedUpdateStep {
    advisory::FeedSnapshot snapshot;
};

using TimelineAction = std::variant<CreateAdvisoryStep, CancelAdvisoryStep, MetaActionStep, FeedUpdateStep>;

struct TimelineEvent {
    double at_s = 0.0;
    TimelineAction action;
};

struct Scenario {
    std::string name;
    std::uint64_t seed = 0;
    linksim::LinkProfile link;
    std::string region = "fl";
    VehicleSpec vehicles;
    std::vector<std::shared_ptr<const vehicle::Route>> routes;
    std::vector<TimelineEvent> timeline;  // sorted by at_s, stable
    double duration_s = 0.0;
    /// Window after publication within which a vehicle must be compliant.
    double compliance_window_s = 20.0;
    /// Added to the profile's latency ceiling when checking deliveries.
    double processing_allowance_ms = 50.0;
    std::string out;  // default output directory, may be empty
};

/// Route documents: [{"segments": [{"segment_id", "start": {"lat","lon"},
/// "end": {...}, "length_m"}, ...]}, ...]. Throws ScenarioError.
std::vector<vehicle::Route> parse_routes(const nlohmann::json& doc);
std::vector<vehicle::Route> load_routes(const std::string& path);

/// Unknown keys are errors so that typos do not silently change a run.
/// Relative file references (feed_update.file) resolve against base_dir.
Scenario parse_scenario(const nlohmann::json& doc, const std::string& base_dir = ".");
Scenario load_scenario(const std::string& path);

}  // namespace cda::scenario
