#pragma once

#include "cda/linksim/link.hpp"
#include "cda/pubsub/envelope.hpp"
#include "cda/pubsub/protocol.hpp"
#include "cda/pubsub/socket.hpp"

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <deque>
#include <mutex>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <thread>

namespace cda::pubsub {

class ConnectionError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// AtLeastOnce publish exhausted its attempts without an ACK.
class DeliveryError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct ClientOptions {
    std::chrono::milliseconds ack_timeout{250};
    int max_attempts = 5;
    std::chrono::milliseconds connect_timeout{2000};
    /// Optional simulated access link. Outbound PUB frames and inbound ACKs
    /// are dropped at the profile's loss rate; inbound deliveries are held
    /// for a sampled latency before receive() returns them.
    std::optional<linksim::LinkProfile> impairment;
    std::uint64_t impairment_seed = 0;
};

/// Control-channel client. Usable from one task at a time; a background
/// thread reads the socket and routes ACK/PONG/PUB/NOTICE frames.
class BrokerClient {
public:
    /// Connects and opens a clean session. Throws ConnectionError.
    BrokerClient(const Endpoint& broker, std::string client_id, ClientOptions options = {});
    ~BrokerClient();

    BrokerClient(const BrokerClient&) = delete;
    BrokerClient& operator=(const BrokerClient&) = delete;

    /// Returns once the broker has applied the subscription.
    void subscribe(std::string_view pattern);
    void unsubscribe(std::string_view pattern);

    /// AtLeastOnce blocks until ACKed, retransmitting the same seq every
    /// ack_timeout; throws DeliveryError after max_attempts. BestEffort
    /// returns after the write. Returns the seq used.
    std::uint64_t publish(const Topic& topic, std::span<const std::uint8_t> body, Qos qos, bool retain = false);

    std::optional<Envelope> receive(std::chrono::milliseconds timeout);

    bool connected() const { return open_.load(); }
    /// Reason from a broker NOTICE, if one arrived.
    std::optional<std::string> notice() const;
    void close();

    struct Stats {
        std::uint64_t retransmits = 0;
        std::uint64_t simulated_drops = 0;
    };
    Stats stats() const;

    const std::string& id() const { return id_; }

private:
    void read_loop();
    void send_frame(const std::vector<std::uint8_t>& frame);
    void barrier();
    bool impaired_drop();

    std::string id_;
    ClientOptions options_;
    Fd fd_;
    std::atomic<bool> open_{false};
    std::mutex write_mutex_;

    mutable std::mutex mutex_;
    std::condition_variable cv_;
    std::set<std::uint64_t> acked_;
    std::uint64_t pongs_ = 0;
    struct Inbound {
        std::chrono::steady_clock::time_point ready_at;
        Envelope envelope;
    };
    std::deque<Inbound> inbox_;
    std::optional<std::string> notice_;
    Stats stats_;
    std::uint64_t next_seq_ = 1;

    std::mutex rng_mutex_;
    std::optional<linksim::LinkRng> rng_;

    std::thread reader_;
};

}  // namespace cda::pubsub
