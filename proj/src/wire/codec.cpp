#include "cda/wire/codec.hpp"

#include "cda/wire/bit_cursor.hpp"
#include "cda/wire/crc16.hpp"

#include <cctype>
#include <string_view>

namespace cda::wire {

namespace {

constexpr std::int64_t kLatOffset = 900000000;
constexpr std::int64_t kLonOffset = 1799999999;
constexpr std::int64_t kElevOffset = 4096;
constexpr std::uint8_t kCauseMax = 4;
constexpr std::uint8_t kCurrencyUsd = 0;

[[noreturn]] void range_error(const char* field, std::int64_t value) {
    throw CodecError(ErrorKind::FieldRange,
                     std::string(field) + " out of range: " + std::to_string(value), field);
}

void check(bool ok, const char* field, std::int64_t value) {
    if (!ok) {
        range_error(field, value);
    }
}

void validate_bsm(const BsmPayload& m) {
    check(m.msg_cnt <= kMsgCntMax, "msg_cnt", m.msg_cnt);
    check(m.sec_mark <= kSecMarkMax || m.sec_mark == kSecMarkUnavailable, "sec_mark", m.sec_mark);
    check((m.lat >= kLatMin && m.lat <= kLatMax) || m.lat == kLatUnavailable, "lat", m.lat);
    check((m.lon >= kLonMin && m.lon <= kLonMax) || m.lon == kLonUnavailable, "lon", m.lon);
    check((m.elev >= kElevMin && m.elev <= kElevMax) || m.elev == kElevUnavailable, "elev", m.elev);
    check(m.speed <= kSpeedUnavailable, "speed", m.speed);
    check(m.heading <= kHeadingUnavailable, "heading", m.heading);
}

void validate_advisory(const AdvisoryPayload& m) {
    check(m.advisory_speed <= kSpeedUnavailable, "advisory_speed", m.advisory_speed);
    check(m.start_minute_of_year <= kStartImmediate, "start_minute_of_year",
          m.start_minute_of_year);
    check(m.cause <= kCauseMax, "cause", m.cause);
}

void validate_toll(const TollPayload& m) {
    check(m.currency == kCurrencyUsd, "currency", m.currency);
}

const PayloadLayout& layout_of(MessageType type) {
    switch (type) {
        case MessageType::Bsm: return kBsmLayout;
        case MessageType::Advisory: return kAdvisoryLayout;
        case MessageType::Toll: return kTollLayout;
    }
    throw CodecError(ErrorKind::UnknownType, "unregistered message type");
}

bool is_registered(std::uint8_t code) {
    return code == static_cast<std::uint8_t>(MessageType::Bsm) ||
           code == static_cast<std::uint8_t>(MessageType::Advisory) ||
           code == static_cast<std::uint8_t>(MessageType::Toll);
}

void pack(BitWriter& w, const BsmPayload& m) {
    w.pack_uint(m.msg_cnt, 7)
        .pack_uint(m.temp_id, 32)
        .pack_uint(m.sec_mark, 16)
        .pack_uint(encode_offset_field(m.lat, kLatOffset, 31), 31)
        .pack_uint(encode_offset_field(m.lon, kLonOffset, 32), 32)
        .pack_uint(encode_offset_field(m.elev, kElevOffset, 16), 16)
        .pack_uint(m.speed, 13)
        .pack_uint(m.heading, 15);
}

void pack(BitWriter& w, const AdvisoryPayload& m) {
    w.pack_uint(m.advisory_id, 16)
        .pack_uint(m.segment_id, 16)
        .pack_uint(m.advisory_speed, 13)
        .pack_uint(m.start_minute_of_year, 17)
        .pack_uint(m.duration_minutes, 16)
        .pack_uint(m.cause, 8);
}

void pack(BitWriter& w, const TollPayload& m) {
    w.pack_uint(m.toll_point_id, 16)
        .pack_uint(m.amount_cents, 16)
        .pack_uint(m.currency, 8)
        .pack_uint(m.lane_mask, 8);
}

template <typename T>
T narrow(std::uint64_t raw) {
    return static_cast<T>(raw);
}

BsmPayload unpack_bsm(BitReader& r) {
    BsmPayload m;
    m.msg_cnt = narrow<std::uint8_t>(r.read_uint(7));
    m.temp_id = narrow<std::uint32_t>(r.read_uint(32));
    m.sec_mark = narrow<std::uint16_t>(r.read_uint(16));
    // Offset decoding can land outside int32 for corrupt input; range-check in 64 bits first.
    const std::int64_t lat = decode_offset_field(r.read_uint(31), kLatOffset);
    const std::int64_t lon = decode_offset_field(r.read_uint(32), kLonOffset);
    const std::int64_t elev = decode_offset_field(r.read_uint(16), kElevOffset);
    check(lat <= kLatUnavailable, "lat", lat);
    check(lon <= kLonUnavailable, "lon", lon);
    m.lat = static_cast<std::int32_t>(lat);
    m.lon = static_cast<std::int32_t>(lon);
    m.elev = static_cast<std::int32_t>(elev);
    m.speed = narrow<std::uint16_t>(r.read_uint(13));
    m.heading = narrow<std::uint16_t>(r.read_uint(15));
    return m;
}

AdvisoryPayload unpack_advisory(BitReader& r) {
    AdvisoryPayload m;
    m.advisory_id = narrow<std::uint16_t>(r.read_uint(16));
    m.segment_id = narrow<std::uint16_t>(r.read_uint(16));
    m.advisory_speed = narrow<std::uint16_t>(r.read_uint(13));
    m.start_minute_of_year = narrow<std::uint32_t>(r.read_uint(17));
    m.duration_minutes = narrow<std::uint16_t>(r.read_uint(16));
    m.cause = narrow<std::uint8_t>(r.read_uint(8));
    return m;
}

TollPayload unpack_toll(BitReader& r) {
    TollPayload m;
    m.toll_point_id = narrow<std::uint16_t>(r.read_uint(16));
    m.amount_cents = narrow<std::uint16_t>(r.read_uint(16));
    m.currency = narrow<std::uint8_t>(r.read_uint(8));
    m.lane_mask = narrow<std::uint8_t>(r.read_uint(8));
    return m;
}

}  // namespace

const char* to_string(MessageType type) {
    switch (type) {
        case MessageType::Bsm: return "BSM";
        case MessageType::Advisory: return "Advisory";
        case MessageType::Toll: return "Toll";
    }
    return "?";
}

const char* to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::ShortBuffer: return "short buffer";
        case ErrorKind::UnknownType: return "unknown message type";
        case ErrorKind::LengthMismatch: return "length mismatch";
        case ErrorKind::CrcMismatch: return "crc mismatch";
        case ErrorKind::NonzeroPadding: return "nonzero padding";
        case ErrorKind::FieldRange: return "field out of range";
    }
    return "?";
}

CodecError::CodecError(ErrorKind kind, std::string detail, std::string field)
    : std::runtime_error(std::string(to_string(kind)) + ": " + detail),
      kind_(kind),
      field_(std::move(field)) {}

MessageType type_of(const Payload& message) {
    struct Visitor {
        MessageType operator()(const BsmPayload&) const { return MessageType::Bsm; }
        MessageType operator()(const AdvisoryPayload&) const { return MessageType::Advisory; }
        MessageType operator()(const TollPayload&) const { return MessageType::Toll; }
    };
    return std::visit(Visitor{}, message);
}

void validate(const Payload& message) {
    struct Visitor {
        void operator()(const BsmPayload& m) const { validate_bsm(m); }
        void operator()(const AdvisoryPayload& m) const { validate_advisory(m); }
        void operator()(const TollPayload& m) const { validate_toll(m); }
    };
    std::visit(Visitor{}, message);
}

std::vector<std::uint8_t> encode_payload(const Payload& message) {
    validate(message);
    BitWriter writer;
    std::visit([&writer](const auto& m) { pack(writer, m); }, message);
    writer.pad_to_byte();
    return std::move(writer).take();
}

std::vector<std::uint8_t> encode_frame(const Payload& message) {
    const auto payload = encode_payload(message);
    std::vector<std::uint8_t> frame;
    frame.reserve(payload.size() + kFrameOverhead);
    frame.push_back(static_cast<std::uint8_t>(type_of(message)));
    frame.push_back(static_cast<std::uint8_t>(payload.size() >> 8));
    frame.push_back(static_cast<std::uint8_t>(payload.size() & 0xFF));
    frame.insert(frame.end(), payload.begin(), payload.end());
    const std::uint16_t crc = crc16(frame);
    frame.push_back(static_cast<std::uint8_t>(crc >> 8));
    frame.push_back(static_cast<std::uint8_t>(crc & 0xFF));
    return frame;
}

Payload decode_payload(MessageType type, std::span<const std::uint8_t> payload) {
    const PayloadLayout& layout = layout_of(type);
    if (payload.size() != layout.bytes) {
        throw CodecError(ErrorKind::LengthMismatch,
                         std::string(to_string(type)) + " payload must be " +
                             std::to_string(layout.bytes) + " bytes, got " +
                             std::to_string(payload.size()));
    }
    BitReader reader(payload);
    Payload message;
    switch (type) {
        case MessageType::Bsm: message = unpack_bsm(reader); break;
        case MessageType::Advisory: message = unpack_advisory(reader); break;
        case MessageType::Toll: message = unpack_toll(reader); break;
    }
    if (!reader.rest_is_zero()) {
        throw CodecError(ErrorKind::NonzeroPadding, "padding bits after " +
                                                        std::to_string(layout.bits) + " bits");
    }
    validate(message);
    return message;
}

Decoded decode_frame(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < kFrameOverhead) {
        throw CodecError(ErrorKind::ShortBuffer,
                         "frame of " + std::to_string(bytes.size()) + " bytes");
    }
    if (!is_registered(bytes[0])) {
        throw CodecError(ErrorKind::UnknownType, "type code " + std::to_string(bytes[0]));
    }
    const auto type = static_cast<MessageType>(bytes[0]);
    const std::size_t declared = (std::size_t{bytes[1]} << 8) | bytes[2];
    const std::size_t expected = layout_of(type).bytes;
    if (declared != expected) {
        throw CodecError(ErrorKind::LengthMismatch,
                         "declared length " + std::to_string(declared) + ", " +
                             to_string(type) + " requires " + std::to_string(expected));
    }
    if (bytes.size() < declared + kFrameOverhead) {
        throw CodecError(ErrorKind::ShortBuffer, "frame truncated at " +
                                                     std::to_string(bytes.size()) + " bytes");
    }
    if (bytes.size() > declared + kFrameOverhead) {
        throw CodecError(ErrorKind::LengthMismatch, "trailing bytes after frame");
    }
    const auto covered = bytes.first(kFrameHeaderSize + declared);
    const std::uint16_t stored =
        static_cast<std::uint16_t>((bytes[covered.size()] << 8) | bytes[covered.size() + 1]);
    if (crc16(covered) != stored) {
        throw CodecError(ErrorKind::CrcMismatch, "checksum does not match contents");
    }
    const auto payload = bytes.subspan(kFrameHeaderSize, declared);
    Decoded out;
    out.frame.type = type;
    out.frame.payload.assign(payload.begin(), payload.end());
    out.frame.crc = stored;
    out.message = decode_payload(type, payload);
    return out;
}

std::string to_hex(std::span<const std::uint8_t> bytes) {
    static constexpr char kDigits[] = "0123456789abcdef";
    std::string out;
    out.reserve(bytes.size() * 2);
    for (const std::uint8_t b : bytes) {
        out.push_back(kDigits[b >> 4]);
        out.push_back(kDigits[b & 0xF]);
    }
    return out;
}

std::vector<std::uint8_t> from_hex(std::string_view text) {
    std::string digits;
    for (const char c : text) {
        if (std::isspace(static_cast<unsigned char>(c))) {
            continue;
        }
        if (!std::isxdigit(static_cast<unsigned char>(c))) {
            throw std::invalid_argument(std::string("not a hex digit: '") + c + "'");
        }
        digits.push_back(c);
    }
    if (digits.size() % 2 != 0) {
        throw std::invalid_argument("odd number of hex digits");
    }
    std::vector<std::uint8_t> out;
    out.reserve(digits.size() / 2);
    for (std::size_t i = 0; i < digits.size(); i += 2) {
        out.push_back(static_cast<std::uint8_t>(std::stoi(digits.substr(i, 2), nullptr, 16)));
    }
    return out;
}

}  // namespace cda::wire
