#pragma once

#include "cda/scenario/scenario.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace cda::scenario {

/// First delivery of one speed advisory to one vehicle.
struct DeliveryRecord {
    std::uint16_t advisory_id = 0;
    std::uint32_t vehicle_id = 0;
    double advisory_speed_mps = 0.0;
    double routed_at_s = 0.0;  // broker handed the advisory to this vehicle's link
    /// One-way latency of the transmission that arrived first. Empty when
    /// every attempt was lost.
    std::optional<double> delivery_ms;
    /// From the first routing to receipt, retransmission waits included.
    std::optional<double> eventual_ms;
    int attempts = 0;
    std::optional<double> received_at_s;
    std::optional<double> compliance_s;
};

struct AdvisoryReport {
    std::uint16_t advisory_id = 0;
    std::uint16_t segment_id = 0;
    double speed_mps = 0.0;
    double published_at_s = 0.0;
    std::size_t recipients = 0;
    std::size_t delivered = 0;
    double latency_min_ms = 0.0;
    double latency_mean_ms = 0.0;
    double latency_max_ms = 0.0;
    double eventual_max_ms = 0.0;
    /// Recipients within 0.5 m/s of the advisory within the compliance window
    /// counted from publication.
    std::size_t compliant_in_window = 0;
};

struct MetaRecord {
    double at_s = 0.0;
    std::uint32_t vehicle_id = 0;
    std::string outcome;  // action name when applied, rejection text otherwise
    bool applied = false;
};

struct TraceRow {
    double t_s = 0.0;
    std::uint32_t vehicle_id = 0;
    double speed_mps = 0.0;
    double odometer_m = 0.0;
    std::uint16_t segment_id = 0;
};

struct VehicleReport {
    std::uint32_t vehicle_id = 0;
    double final_speed_mps = 0.0;
    double final_odometer_m = 0.0;
    std::uint16_t final_segment = 0;
    std::uint64_t ignored_advisories = 0;
    std::size_t notices = 0;
};

struct TransportCounters {
    std::uint64_t downlink_sent = 0;
    std::uint64_t downlink_dropped = 0;
    std::uint64_t uplink_sent = 0;
    std::uint64_t uplink_dropped = 0;
    std::uint64_t retransmissions = 0;
    std::uint64_t duplicates_suppressed = 0;
    std::uint64_t abandoned = 0;  // AtLeastOnce deliveries that ran out of attempts
    std::uint64_t bsms_published = 0;
    std::uint64_t bsms_at_service = 0;
};

struct RunMetrics {
    std::string scenario;
    std::uint64_t seed = 0;
    linksim::LinkProfile link;
    double duration_s = 0.0;
    double compliance_window_s = 0.0;
    std::vector<DeliveryRecord> deliveries;  // sorted by (advisory_id, vehicle_id)
    std::vector<AdvisoryReport> advisories;
    std::vector<VehicleReport> vehicles;
    std::vector<MetaRecord> meta;
    std::vector<TraceRow> traces;
    TransportCounters transport;
    std::size_t fleet_entries_at_service = 0;
};

struct RunOptions {
    /// Directory for the service's advisory log. Wiped of any previous log
    /// before the run. Defaults to a private temporary directory.
    std::string work_dir;
    std::chrono::milliseconds ack_timeout{250};
    int max_attempts = 5;
};

/// Runs the scenario on simulated time. The result is a pure function of the
/// scenario. Throws ScenarioError on a rejected timeline action or a broken
/// run invariant.
RunMetrics run_scenario(const Scenario& scenario, const RunOptions& options = {});

/// advisory_id,vehicle_id,delivery_ms,compliance_s
std::string metrics_csv(const RunMetrics& metrics);
std::string traces_csv(const RunMetrics& metrics);
nlohmann::json summary_json(const RunMetrics& metrics);

/// Writes metrics.csv, summary.json and traces.csv into dir, creating it.
void write_outputs(const RunMetrics& metrics, const std::string& dir);

}  // namespace cda::scenario
