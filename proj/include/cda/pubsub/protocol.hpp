#pragma once

#include "cda/pubsub/envelope.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace cda::pubsub {

// Control channel framing: [len:4 BE][op:1][body], len counts op + body.
enum class Op : std::uint8_t {
    Connect = 1,  // body: client id
    Sub = 2,      // body: pattern
    Unsub = 3,    // body: pattern
    Pub = 4,      // body: flags:1 seq:8 topic_len:2 topic payload
    Ack = 5,      // body: seq:8
    Ping = 6,
    Pong = 7,
    Notice = 8,   // broker -> client, body: reason; the connection closes after it
};

inline constexpr std::size_t kMaxControlFrame = 64 * 1024;
inline constexpr std::size_t kMaxClientIdLength = 255;
inline constexpr std::uint16_t kDefaultTcpPort = 7320;
inline constexpr std::uint16_t kDefaultUdpPort = 7321;

class ProtocolError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct ControlFrame {
    Op op{};
    std::vector<std::uint8_t> body;
};

std::vector<std::uint8_t> encode_control(Op op, std::span<const std::uint8_t> body = {});
std::vector<std::uint8_t> encode_control(Op op, std::string_view text);

std::vector<std::uint8_t> encode_pub_body(const Envelope& envelope);
/// Throws ProtocolError on truncation, unknown flag bits or a malformed topic.
Envelope decode_pub_body(std::span<const std::uint8_t> body);

std::vector<std::uint8_t> encode_ack_body(std::uint64_t seq);
std::uint64_t decode_ack_body(std::span<const std::uint8_t> body);

/// Validates a CONNECT body and returns the client id.
std::string decode_client_id(std::span<const std::uint8_t> body);

/// Incremental stream reassembly.
class FrameReader {
public:
    void append(std::span<const std::uint8_t> bytes);
    /// Next complete frame, if any. Throws ProtocolError on a zero or
    /// oversized length prefix or an unknown op code.
    std::optional<ControlFrame> next();

private:
    std::vector<std::uint8_t> buffer_;
    std::size_t read_pos_ = 0;
};

}  // namespace cda::pubsub
