#pragma once

#include "cda/pubsub/broker_core.hpp"
#include "cda/pubsub/protocol.hpp"
#include "cda/pubsub/socket.hpp"

#include <atomic>
#include <list>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>

namespace cda::pubsub {

struct BrokerOptions {
    Endpoint tcp{"127.0.0.1", kDefaultTcpPort};
    /// When set, BSM frames arriving on this UDP endpoint are published as
    /// BestEffort to cda/{region}/veh/{temp_id}/bsm.
    std::optional<Endpoint> udp;
    std::size_t queue_limit = 1024;
    std::string region = "fl";
};

/// TCP front end over BrokerCore. One reader and one writer thread per
/// connection; outbound queues are bounded and a client that lets its queue
/// fill is sent a NOTICE and disconnected.
class TcpBroker {
public:
    /// Binds immediately; throws std::system_error when the address is taken.
    explicit TcpBroker(BrokerOptions options);
    ~TcpBroker();

    TcpBroker(const TcpBroker&) = delete;
    TcpBroker& operator=(const TcpBroker&) = delete;

    std::uint16_t tcp_port() const { return tcp_port_; }
    std::uint16_t udp_port() const { return udp_port_; }

    void stop();

    struct Stats {
        std::uint64_t accepted = 0;
        std::uint64_t protocol_disconnects = 0;
        std::uint64_t overflow_disconnects = 0;
        std::uint64_t datagrams_routed = 0;
        std::uint64_t datagrams_rejected = 0;
        std::size_t live_connections = 0;
        BrokerCore::Stats routing;
    };
    Stats stats() const;

    const BrokerCore& core() const { return core_; }

private:
    struct Connection;

    void accept_loop();
    void udp_loop();
    void serve(const std::shared_ptr<Connection>& conn);
    void write_loop(const std::shared_ptr<Connection>& conn);
    void handle(const std::shared_ptr<Connection>& conn, const ControlFrame& frame);
    void enqueue(const std::string& client, const Envelope& envelope);
    void reap_finished();

    BrokerOptions options_;
    BrokerCore core_;
    Fd listener_;
    Fd udp_;
    std::uint16_t tcp_port_ = 0;
    std::uint16_t udp_port_ = 0;
    std::atomic<bool> stopping_{false};

    mutable std::mutex connections_mutex_;
    std::list<std::shared_ptr<Connection>> connections_;
    std::map<std::string, std::shared_ptr<Connection>> by_client_;

    std::atomic<std::uint64_t> accepted_{0};
    std::atomic<std::uint64_t> protocol_disconnects_{0};
    std::atomic<std::uint64_t> overflow_disconnects_{0};
    std::atomic<std::uint64_t> datagrams_routed_{0};
    std::atomic<std::uint64_t> datagrams_rejected_{0};

    std::thread accept_thread_;
    std::thread udp_thread_;
};

}  // namespace cda::pubsub
