#pragma once

#include "cda/pubsub/envelope.hpp"

#include <cstdint>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace cda::pubsub {

/// Routing state of the broker, independent of any socket layer. Both the
/// TCP broker and the in-process scenario simulator drive one of these.
///
/// All members are safe to call concurrently. The delivery callback runs
/// while the routing lock is held, which makes subscribe/unsubscribe atomic
/// with respect to routing and keeps per-publisher order intact as long as
/// the callback only enqueues. It must not call back into the core.
class BrokerCore {
public:
    using Deliver = std::function<void(const std::string& subscriber, const Envelope&)>;

    struct PublishOutcome {
        /// AtLeastOnce retransmission of a seq already routed; acknowledge,
        /// do not route again.
        bool duplicate = false;
        std::size_t recipients = 0;
    };

    struct Stats {
        std::uint64_t published = 0;
        std::uint64_t duplicates = 0;
        std::uint64_t deliveries = 0;
        std::uint64_t unrouted = 0;  // publishes that matched no subscription
    };

    /// Starts a clean session, dropping any previous subscriptions of the id.
    void connect(const std::string& client);
    void disconnect(const std::string& client);
    bool connected(const std::string& client) const;

    /// Adds the subscription and hands every matching retained envelope to
    /// deliver. Re-subscribing with the same pattern is a no-op apart from
    /// retained replay.
    void subscribe(const std::string& client, const TopicPattern& pattern, const Deliver& deliver);
    bool unsubscribe(const std::string& client, const TopicPattern& pattern);

    /// Routes to each matching subscriber once, however many of its patterns match.
    PublishOutcome publish(const std::string& publisher, const Envelope& envelope, const Deliver& deliver);

    std::optional<Envelope> retained(const Topic& topic) const;
    Stats stats() const;

private:
    struct Session {
        std::vector<TopicPattern> patterns;
        std::map<std::string, std::uint64_t> last_seq;  // per topic, AtLeastOnce only
    };

    mutable std::mutex mutex_;
    std::map<std::string, Session> sessions_;
    std::map<std::string, Envelope> retained_;
    Stats stats_;
};

}  // namespace cda::pubsub
