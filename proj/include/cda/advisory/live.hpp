#pragma once

#include "cda/advisory/service.hpp"
#include "cda/pubsub/client.hpp"

#include <atomic>
#include <memory>
#include <mutex>
#include <thread>

namespace cda::advisory {

/// Publishes through a broker connection, reconnecting on the next publish
/// after a failure.
class BrokerPublisher : public Publisher {
public:
    BrokerPublisher(pubsub::Endpoint broker, std::string client_id, pubsub::ClientOptions options = {});

    void publish(const pubsub::Topic& topic, const std::vector<std::uint8_t>& frame) override;
    bool connected() const;

private:
    pubsub::Endpoint broker_;
    std::string client_id_;
    pubsub::ClientOptions options_;
    mutable std::mutex mutex_;
    std::unique_ptr<pubsub::BrokerClient> client_;
};

/// Background loop that keeps the service fed from the broker: subscribes to
/// every BSM topic, forwards frames to on_bsm, republishes pending advisories
/// and expires old ones.
class ServiceRunner {
public:
    ServiceRunner(AdvisoryService& service, pubsub::Endpoint broker, std::string client_id);
    ~ServiceRunner();

    ServiceRunner(const ServiceRunner&) = delete;
    ServiceRunner& operator=(const ServiceRunner&) = delete;

    void stop();

private:
    void run();

    AdvisoryService& service_;
    pubsub::Endpoint broker_;
    std::string client_id_;
    std::atomic<bool> stopping_{false};
    std::thread thread_;
};

}  // namespace cda::advisory
