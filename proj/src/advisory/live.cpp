#include "cda/advisory/live.hpp"

#include <iostream>

namespace cda::advisory {

BrokerPublisher::BrokerPublisher(pubsub::Endpoint broker, std::string client_id, pubsub::ClientOptions options)
    : broker_(std::move(broker)), client_id_(std::move(client_id)), options_(std::move(options)) {}

void BrokerPublisher::publish(const pubsub::Topic& topic, const std::vector<std::uint8_t>& frame) {
    std::lock_guard lock(mutex_);
    try {
        if (!client_ || !client_->connected()) {
            client_.reset();
            client_ = std::make_unique<pubsub::BrokerClient>(broker_, client_id_, options_);
        }
        client_->publish(topic, frame, pubsub::Qos::AtLeastOnce, true);
    } catch (const pubsub::ConnectionError& e) {
        client_.reset();
        throw PublishError(e.what());
    } catch (const pubsub::DeliveryError& e) {
        client_.reset();
        throw PublishError(e.what());
    }
}

bool BrokerPublisher::connected() const {
    std::lock_guard lock(mutex_);
    return client_ && client_->connected();
}

ServiceRunner::ServiceRunner(AdvisoryService& service, pubsub::Endpoint broker, std::string client_id)
    : service_(service), broker_(std::move(broker)), client_id_(std::move(client_id)) {
    thread_ = std::thread([this] { run(); });
}

ServiceRunner::~ServiceRunner() { stop(); }

void ServiceRunner::stop() {
    stopping_ = true;
    if (thread_.joinable()) {
        thread_.join();
    }
}

void ServiceRunner::run() {
    std::unique_ptr<pubsub::BrokerClient> sub;
    auto next_housekeeping = std::chrono::steady_clock::now();
    while (!stopping_) {
        if (!sub || !sub->connected()) {
            sub.reset();
            try {
                sub = std::make_unique<pubsub::BrokerClient>(broker_, client_id_);
                sub->subscribe(pubsub::all_bsm_pattern().str());
            } catch (const pubsub::ConnectionError& e) {
                sub.reset();
                std::cerr << "fleet feed: " << e.what() << "; retrying\n";
                std::this_thread::sleep_for(std::chrono::seconds(1));
            }
        }
        if (sub) {
            while (auto e = sub->receive(std::chrono::milliseconds(100))) {
                service_.on_bsm(e->body);
                if (stopping_) {
                    break;
                }
            }
        }
        if (std::chrono::steady_clock::now() >= next_housekeeping) {
            service_.expire_due();
            service_.publish_pending();
            next_housekeeping = std::chrono::steady_clock::now() + std::chrono::seconds(1);
        }
    }
}

}  // namespace cda::advisory
