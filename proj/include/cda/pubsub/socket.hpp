#pragma once

#include <chrono>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <utility>

namespace cda::pubsub {

/// Owning file descriptor.
class Fd {
public:
    Fd() = default;
    explicit Fd(int fd) : fd_(fd) {}
    Fd(Fd&& other) noexcept : fd_(std::exchange(other.fd_, -1)) {}
    Fd& operator=(Fd&& other) noexcept {
        if (this != &other) {
            reset(std::exchange(other.fd_, -1));
        }
        return *this;
    }
    Fd(const Fd&) = delete;
    Fd& operator=(const Fd&) = delete;
    ~Fd() { reset(); }

    int get() const { return fd_; }
    bool valid() const { return fd_ >= 0; }
    void reset(int fd = -1);

private:
    int fd_ = -1;
};

struct Endpoint {
    std::string host = "127.0.0.1";
    std::uint16_t port = 0;

    /// "host:port" or ":port". Throws std::invalid_argument.
    static Endpoint parse(std::string_view text);
    std::string str() const { return host + ":" + std::to_string(port); }
};

// All of these throw std::system_error on failure.
Fd tcp_listen(const Endpoint& at, int backlog = 64);
Fd tcp_connect(const Endpoint& to, std::chrono::milliseconds timeout);
Fd udp_bind(const Endpoint& at);
std::uint16_t local_port(int fd);

/// Blocks until every byte is written. False when the peer is gone.
bool write_all(int fd, std::span<const std::uint8_t> bytes);

/// Waits up to timeout for fd to become readable.
bool wait_readable(int fd, std::chrono::milliseconds timeout);

}  // namespace cda::pubsub
