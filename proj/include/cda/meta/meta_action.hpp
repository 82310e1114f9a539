#pragma once

#include "cda/common/time.hpp"
#include "cda/vehicle/agent.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>

namespace cda::meta {

struct SetCruiseSpeed {
    double speed_mps = 0.0;
};
struct SetFollowGap {
    double gap_s = 0.0;
};
struct ApplyAdvisorySpeed {
    std::uint16_t segment_id = 0;
    double speed_mps = 0.0;
    double duration_s = 0.0;
};
struct CancelAdvisory {
    std::uint16_t segment_id = 0;
};
struct DriverNotice {
    std::string text;
    vehicle::NoticeSeverity severity = vehicle::NoticeSeverity::Info;
};

using Command = std::variant<SetCruiseSpeed, SetFollowGap, ApplyAdvisorySpeed, CancelAdvisory, DriverNotice>;

const char* action_name(const Command& command);

enum class RejectReason {
    NoBlock,
    MultipleBlocks,
    Malformed,
    UnknownAction,
    MissingParam,
    MistypedParam,
    UnknownParam,
    OutOfRange,
    RateLimited,
};

const char* to_string(RejectReason reason);

struct Rejection {
    RejectReason reason = RejectReason::Malformed;
    std::string detail;
    std::string field;              // offending parameter, when there is one
    std::optional<double> value;    // OutOfRange
    double lower = 0.0;             // OutOfRange bounds
    double upper = 0.0;
    double remaining_s = 0.0;       // RateLimited

    std::string describe() const;
};

/// Extracts the single ```metaaction block from model output and parses it
/// into the catalog. Never throws on any input.
std::variant<Command, Rejection> parse_command(std::string_view text);

struct SafetyEnvelope {
    double speed_min = 0.0;
    double speed_max = 38.0;
    double gap_min = 0.8;
    double gap_max = 4.0;
    double rate_limit_s = 1.0;
    std::size_t notice_max_len = 200;  // code points

    /// Throws std::invalid_argument unless each min < max and rate_limit >= 0.
    void validate() const;
};

class ValidatedCommand;

std::variant<ValidatedCommand, Rejection> validate(const Command& command, const SafetyEnvelope& envelope,
                                                   std::optional<SimTime> last_accepted_at, SimTime now);

/// A command that passed the envelope and rate limit. Only validate() can
/// produce one, and apply() only accepts this type.
class ValidatedCommand {
public:
    const Command& command() const { return command_; }

private:
    explicit ValidatedCommand(Command c) : command_(std::move(c)) {}
    friend std::variant<ValidatedCommand, Rejection> validate(const Command&, const SafetyEnvelope&,
                                                              std::optional<SimTime>, SimTime);
    Command command_;
};

/// Applies setpoints to the vehicle. Advisory commands are turned into an
/// AdvisoryPayload and routed through vehicle::on_advisory, whose outcome is
/// returned.
std::optional<vehicle::AdvisoryOutcome> apply(const ValidatedCommand& command, vehicle::VehicleState& state,
                                              SimTime now);

/// parse -> validate -> apply for one vehicle, holding its rate-limit
/// timestamp and a rejection tally. Callers serialize access per vehicle.
class CommandGate {
public:
    explicit CommandGate(SafetyEnvelope envelope = {});

    struct Result {
        std::optional<Command> applied;
        std::optional<Rejection> rejection;
        std::optional<vehicle::AdvisoryOutcome> advisory_outcome;
    };

    Result submit(std::string_view model_output, vehicle::VehicleState& state, SimTime now);

    const SafetyEnvelope& envelope() const { return envelope_; }
    std::uint64_t accepted() const { return accepted_; }
    const std::map<RejectReason, std::uint64_t>& rejections() const { return rejections_; }

private:
    SafetyEnvelope envelope_;
    std::optional<SimTime> last_accepted_;
    std::uint64_t accepted_ = 0;
    std::map<RejectReason, std::uint64_t> rejections_;
};

}  // namespace cda::meta
