#pragma once

#include "cda/pubsub/socket.hpp"
#include "cda/wire/codec.hpp"

#include <atomic>
#include <chrono>
#include <optional>
#include <vector>

namespace cda::pubsub {

inline constexpr std::size_t kMaxDatagram = 1200;

struct ReceivedFrame {
    std::vector<std::uint8_t> bytes;
    wire::Decoded decoded;
    Endpoint from;
};

/// Connectionless, unordered, unreliable transport for wire frames.
/// Anything that fails frame decoding on receipt is dropped and counted.
class DatagramChannel {
public:
    explicit DatagramChannel(const Endpoint& bind_at = {"127.0.0.1", 0});

    std::uint16_t port() const { return port_; }

    /// Throws std::length_error above kMaxDatagram, std::system_error on socket failure.
    void send(const Endpoint& to, std::span<const std::uint8_t> frame);

    /// Next valid frame within timeout.
    std::optional<ReceivedFrame> recv(std::chrono::milliseconds timeout);

    struct Stats {
        std::uint64_t sent = 0;
        std::uint64_t received = 0;
        std::uint64_t corrupt = 0;
    };
    Stats stats() const { return {sent_.load(), received_.load(), corrupt_.load()}; }

private:
    Fd fd_;
    std::uint16_t port_ = 0;
    std::atomic<std::uint64_t> sent_{0};
    std::atomic<std::uint64_t> received_{0};
    std::atomic<std::uint64_t> corrupt_{0};
};

}  // namespace cda::pubsub
