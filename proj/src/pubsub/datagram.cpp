#include "cda/pubsub/datagram.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>

#include <array>
#include <cerrno>
#include <stdexcept>
#include <system_error>

namespace cda::pubsub {

DatagramChannel::DatagramChannel(const Endpoint& bind_at) : fd_(udp_bind(bind_at)), port_(local_port(fd_.get())) {}

void DatagramChannel::send(const Endpoint& to, std::span<const std::uint8_t> frame) {
    if (frame.size() > kMaxDatagram) {
        throw std::length_error("datagram of " + std::to_string(frame.size()) + " bytes exceeds " +
                                std::to_string(kMaxDatagram));
    }
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(to.port);
    if (inet_pton(AF_INET, to.host.c_str(), &addr.sin_addr) != 1) {
        throw std::system_error(std::make_error_code(std::errc::invalid_argument), "address " + to.host);
    }
    const ssize_t n = ::sendto(fd_.get(), frame.data(), frame.size(), 0,
                               reinterpret_cast<const sockaddr*>(&addr), sizeof(addr));
    if (n < 0) {
        throw std::system_error(errno, std::generic_category(), "sendto " + to.str());
    }
    ++sent_;
}

std::optional<ReceivedFrame> DatagramChannel::recv(std::chrono::milliseconds timeout) {
    const auto deadline = std::chrono::steady_clock::now() + timeout;
    std::array<std::uint8_t, 2048> buf{};
    while (true) {
        const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
        if (!wait_readable(fd_.get(), std::max(left, std::chrono::milliseconds(0)))) {
            return std::nullopt;
        }
        sockaddr_in from{};
        socklen_t from_len = sizeof(from);
        const ssize_t n = ::recvfrom(fd_.get(), buf.data(), buf.size(), 0, reinterpret_cast<sockaddr*>(&from), &from_len);
        if (n < 0) {
            if (errno == EINTR || errno == EAGAIN) {
                continue;
            }
            throw std::system_error(errno, std::generic_category(), "recvfrom");
        }
        const std::span<const std::uint8_t> bytes(buf.data(), static_cast<std::size_t>(n));
        try {
            ReceivedFrame out{{bytes.begin(), bytes.end()}, wire::decode_frame(bytes), {}};
            char host[INET_ADDRSTRLEN] = {};
            inet_ntop(AF_INET, &from.sin_addr, host, sizeof(host));
            out.from = Endpoint{host, ntohs(from.sin_port)};
            ++received_;
            return out;
        } catch (const wire::CodecError&) {
            ++corrupt_;
        }
    }
}

}  // namespace cda::pubsub
