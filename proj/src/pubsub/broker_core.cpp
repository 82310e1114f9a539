#include "cda/pubsub/broker_core.hpp"

#include <algorithm>
#include <stdexcept>

namespace cda::pubsub {

void BrokerCore::connect(const std::string& client) {
    std::lock_guard lock(mutex_);
    sessions_[client] = Session{};
}

void BrokerCore::disconnect(const std::string& client) {
    std::lock_guard lock(mutex_);
    sessions_.erase(client);
}

bool BrokerCore::connected(const std::string& client) const {
    std::lock_guard lock(mutex_);
    return sessions_.count(client) != 0;
}

void BrokerCore::subscribe(const std::string& client, const TopicPattern& pattern, const Deliver& deliver) {
    std::lock_guard lock(mutex_);
    const auto it = sessions_.find(client);
    if (it == sessions_.end()) {
        throw std::logic_error("subscribe from unknown client " + client);
    }
    auto& patterns = it->second.patterns;
    if (std::find(patterns.begin(), patterns.end(), pattern) == patterns.end()) {
        patterns.push_back(pattern);
    }
    for (const auto& [topic, envelope] : retained_) {
        if (topic_matches(pattern, envelope.topic)) {
            ++stats_.deliveries;
            deliver(client, envelope);
        }
    }
}

bool BrokerCore::unsubscribe(const std::string& client, const TopicPattern& pattern) {
    std::lock_guard lock(mutex_);
    const auto it = sessions_.find(client);
    if (it == sessions_.end()) {
        return false;
    }
    auto& patterns = it->second.patterns;
    const auto pos = std::find(patterns.begin(), patterns.end(), pattern);
    if (pos == patterns.end()) {
        return false;
    }
    patterns.erase(pos);
    return true;
}

BrokerCore::PublishOutcome BrokerCore::publish(const std::string& publisher, const Envelope& envelope,
                                               const Deliver& deliver) {
    std::lock_guard lock(mutex_);
    PublishOutcome outcome;
    if (envelope.qos == Qos::AtLeastOnce) {
        const auto session = sessions_.find(publisher);
        if (session != sessions_.end()) {
            auto [it, fresh] = session->second.last_seq.try_emplace(envelope.topic.str(), envelope.seq);
            if (!fresh) {
                if (envelope.seq <= it->second) {
                    ++stats_.duplicates;
                    outcome.duplicate = true;
                    return outcome;
                }
                it->second = envelope.seq;
            }
        }
    }
    ++stats_.published;
    if (envelope.retain) {
        retained_.insert_or_assign(envelope.topic.str(), envelope);
    }
    for (const auto& [client, session] : sessions_) {
        const bool match = std::any_of(session.patterns.begin(), session.patterns.end(),
                                       [&](const TopicPattern& p) { return topic_matches(p, envelope.topic); });
        if (match) {
            ++outcome.recipients;
            ++stats_.deliveries;
            deliver(client, envelope);
        }
    }
    if (outcome.recipients == 0) {
        ++stats_.unrouted;
    }
    return outcome;
}

std::optional<Envelope> BrokerCore::retained(const Topic& topic) const {
    std::lock_guard lock(mutex_);
    const auto it = retained_.find(topic.str());
    if (it == retained_.end()) {
        return std::nullopt;
    }
    return it->second;
}

BrokerCore::Stats BrokerCore::stats() const {
    std::lock_guard lock(mutex_);
    return stats_;
}

}  // namespace cda::pubsub
