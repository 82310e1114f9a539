#pragma once

#include <nlohmann/json.hpp>

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <list>
#include <memory>
#include <mutex>
#include <optional>
#include <string>

namespace cda::advisory {

/// One /stream connection. Events carry a per-connection sequence number
/// starting at 1; the first event is always the state snapshot.
class StreamSubscription {
public:
    /// Next serialized event line (without newline), or nullopt on timeout or
    /// once the subscription is closed and drained.
    std::optional<std::string> next(std::chrono::milliseconds timeout);
    bool closed() const;
    /// Set when the hub dropped this subscriber for falling behind.
    bool overflowed() const;
    void close();

private:
    friend class EventHub;
    mutable std::mutex mutex_;
    std::condition_variable cv_;
    std::deque<std::string> queue_;
    std::uint64_t seq_ = 0;
    bool closed_ = false;
    bool overflowed_ = false;
};

/// Non-blocking fan-out with a bounded queue per subscriber.
class EventHub {
public:
    explicit EventHub(std::size_t buffer_limit = 1024) : limit_(buffer_limit) {}

    /// Registers a subscriber whose first event is {kind: "snapshot", body: snapshot}.
    std::shared_ptr<StreamSubscription> subscribe(const nlohmann::json& snapshot);

    void publish(const std::string& kind, const nlohmann::json& body);

    std::size_t subscribers() const;
    void close_all();

private:
    static void push(StreamSubscription& sub, const std::string& kind, const nlohmann::json& body, std::size_t limit);

    mutable std::mutex mutex_;
    std::list<std::weak_ptr<StreamSubscription>> subs_;
    std::size_t limit_;
};

}  // namespace cda::advisory
