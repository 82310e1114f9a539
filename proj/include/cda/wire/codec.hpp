#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace cda::wire {

enum class MessageType : std::uint8_t {
    Bsm = 20,
    Advisory = 31,
    Toll = 240,
};

const char* to_string(MessageType type);

// Sentinels and unit scales follow J2735 coreData conventions.
inline constexpr std::uint8_t kMsgCntMax = 127;
inline constexpr std::uint16_t kSecMarkMax = 60999;
inline constexpr std::uint16_t kSecMarkUnavailable = 65535;
inline constexpr std::int32_t kLatMin = -900000000;
inline constexpr std::int32_t kLatMax = 900000000;
inline constexpr std::int32_t kLatUnavailable = 900000001;
inline constexpr std::int32_t kLonMin = -1799999999;
inline constexpr std::int32_t kLonMax = 1800000000;
inline constexpr std::int32_t kLonUnavailable = 1800000001;
inline constexpr std::int32_t kElevMin = -4095;
inline constexpr std::int32_t kElevMax = 61439;
inline constexpr std::int32_t kElevUnavailable = -4096;
inline constexpr std::uint16_t kSpeedMax = 8190;
inline constexpr std::uint16_t kSpeedUnavailable = 8191;
inline constexpr std::uint16_t kHeadingMax = 28799;
inline constexpr std::uint16_t kHeadingUnavailable = 28800;
// The advisory start field is 17 bits wide, so minute-of-year starts are
// representable up to 131070 and the all-ones value means "immediate".
inline constexpr std::uint32_t kMinuteOfYearMax = 131070;
inline constexpr std::uint32_t kStartImmediate = 131071;

inline constexpr double kSpeedUnitMps = 0.02;
inline constexpr double kHeadingUnitDeg = 0.0125;

struct BsmPayload {
    std::uint8_t msg_cnt = 0;
    std::uint32_t temp_id = 0;
    std::uint16_t sec_mark = kSecMarkUnavailable;
    std::int32_t lat = kLatUnavailable;
    std::int32_t lon = kLonUnavailable;
    std::int32_t elev = kElevUnavailable;
    std::uint16_t speed = kSpeedUnavailable;
    std::uint16_t heading = kHeadingUnavailable;

    bool operator==(const BsmPayload&) const = default;
};

enum class AdvisoryCause : std::uint8_t {
    None = 0,
    Congestion = 1,
    Incident = 2,
    Weather = 3,
    Workzone = 4,
};

struct AdvisoryPayload {
    std::uint16_t advisory_id = 0;
    std::uint16_t segment_id = 0;
    std::uint16_t advisory_speed = kSpeedUnavailable;  // 8191 cancels
    std::uint32_t start_minute_of_year = kStartImmediate;
    std::uint16_t duration_minutes = 0;
    std::uint8_t cause = 0;

    bool is_cancel() const { return advisory_speed == kSpeedUnavailable; }
    double speed_mps() const { return advisory_speed * kSpeedUnitMps; }

    bool operator==(const AdvisoryPayload&) const = default;
};

struct TollPayload {
    std::uint16_t toll_point_id = 0;
    std::uint16_t amount_cents = 0;
    std::uint8_t currency = 0;  // 0 = USD
    std::uint8_t lane_mask = 0;

    bool operator==(const TollPayload&) const = default;
};

using Payload = std::variant<BsmPayload, AdvisoryPayload, TollPayload>;

struct PayloadLayout {
    MessageType type;
    std::size_t bits;
    std::size_t bytes;
};

inline constexpr PayloadLayout kBsmLayout{MessageType::Bsm, 162, 21};
inline constexpr PayloadLayout kAdvisoryLayout{MessageType::Advisory, 86, 11};
inline constexpr PayloadLayout kTollLayout{MessageType::Toll, 48, 6};

inline constexpr std::size_t kFrameHeaderSize = 3;
inline constexpr std::size_t kFrameOverhead = 5;

struct MessageFrame {
    MessageType type{};
    std::vector<std::uint8_t> payload;
    std::uint16_t crc = 0;

    bool operator==(const MessageFrame&) const = default;
};

struct Decoded {
    MessageFrame frame;
    Payload message;
};

enum class ErrorKind {
    ShortBuffer,
    UnknownType,
    LengthMismatch,
    CrcMismatch,
    NonzeroPadding,
    FieldRange,
};

const char* to_string(ErrorKind kind);

class CodecError : public std::runtime_error {
public:
    CodecError(ErrorKind kind, std::string detail, std::string field = {});

    ErrorKind kind() const { return kind_; }
    /// Offending field for FieldRange errors, empty otherwise.
    const std::string& field() const { return field_; }

private:
    ErrorKind kind_;
    std::string field_;
};

MessageType type_of(const Payload& message);

/// Throws CodecError(FieldRange) naming the first out-of-range field.
void validate(const Payload& message);

std::vector<std::uint8_t> encode_payload(const Payload& message);

/// [type:1][len:2 BE][payload][crc:2 BE]
std::vector<std::uint8_t> encode_frame(const Payload& message);

/// Accepts arbitrary bytes; every malformed input surfaces as a CodecError.
Decoded decode_frame(std::span<const std::uint8_t> bytes);

Payload decode_payload(MessageType type, std::span<const std::uint8_t> payload);

std::string to_hex(std::span<const std::uint8_t> bytes);
/// Whitespace is ignored. Throws std::invalid_argument on odd length or non-hex.
std::vector<std::uint8_t> from_hex(std::string_view text);

}  // namespace cda::wire
