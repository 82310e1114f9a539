#include "cda/scenario/live_fleet.hpp"

#include "cda/pubsub/client.hpp"
#include "cda/wire/codec.hpp"

#include <iostream>
#include <stdexcept>

namespace cda::scenario {

LiveFleet::LiveFleet(LiveFleetOptions options) : options_(std::move(options)) {
    if (options_.count < 1 || options_.routes.empty()) {
        throw std::invalid_argument("fleet needs at least one vehicle and one route");
    }
    options_.link.validate();
    status_.resize(static_cast<std::size_t>(options_.count));
    for (std::size_t i = 0; i < status_.size(); ++i) {
        status_[i].vehicle_id = 1001 + static_cast<std::uint32_t>(i);
    }
    for (std::size_t i = 0; i < status_.size(); ++i) {
        threads_.emplace_back([this, i] { run_vehicle(i); });
    }
}

LiveFleet::~LiveFleet() { stop(); }

void LiveFleet::stop() {
    stopping_ = true;
    for (auto& t : threads_) {
        if (t.joinable()) {
            t.join();
        }
    }
}

std::vector<LiveVehicleStatus> LiveFleet::status() const {
    std::lock_guard lock(mutex_);
    return status_;
}

void LiveFleet::run_vehicle(std::size_t index) {
    const auto& routes = options_.routes;
    const auto& route = routes[index % routes.size()];
    const double odo = std::min(options_.start_odometer_m +
                                    options_.spacing_m * static_cast<double>(index / routes.size()),
                                route->length_m() * 0.999);
    const std::uint32_t id = status_[index].vehicle_id;
    auto state = vehicle::make_vehicle(id, route, options_.initial_speed_mps, options_.set_speed_mps, odo);
    const vehicle::ControlLaw law;
    const auto period = std::chrono::duration_cast<std::chrono::steady_clock::duration>(
        std::chrono::duration<double>(law.tick_s));

    pubsub::ClientOptions co;
    co.impairment = options_.link;
    co.impairment_seed = linksim::derive_seed(options_.seed, index);

    std::unique_ptr<pubsub::BrokerClient> client;
    std::optional<std::uint16_t> subscribed;
    auto next = std::chrono::steady_clock::now();
    auto next_connect = next;

    while (!stopping_) {
        next += period;
        const auto now = wall_now();

        if (!client || !client->connected()) {
            client.reset();
            subscribed.reset();
            if (std::chrono::steady_clock::now() >= next_connect) {
                try {
                    client = std::make_unique<pubsub::BrokerClient>(options_.broker, "veh-" + std::to_string(id), co);
                } catch (const pubsub::ConnectionError& e) {
                    if (index == 0) {
                        std::cerr << "fleet: " << e.what() << "; retrying\n";
                    }
                    next_connect = std::chrono::steady_clock::now() + std::chrono::seconds(1);
                }
            }
        }

        if (client) {
            while (auto env = client->receive(std::chrono::milliseconds(0))) {
                try {
                    const auto decoded = wire::decode_frame(env->body);
                    if (const auto* adv = std::get_if<wire::AdvisoryPayload>(&decoded.message)) {
                        vehicle::on_advisory(state, *adv, now);
                    }
                } catch (const wire::CodecError& e) {
                    std::cerr << "vehicle " << id << ": dropped frame on " << env->topic.str() << ": " << e.what()
                              << "\n";
                }
            }
        }

        const double before = state.speed_mps;
        state = vehicle::tick(state, law, now);
        if (options_.wrap && state.at_route_end()) {
            state.odometer_m = 0.0;
            state.speed_mps = before;
            state.active_advisory.reset();
        }

        if (client) {
            try {
                const auto seg = state.current_segment();
                if (subscribed != seg) {
                    if (subscribed) {
                        client->unsubscribe(pubsub::advisory_topic(options_.region, *subscribed).str());
                    }
                    client->subscribe(pubsub::advisory_topic(options_.region, seg).str());
                    subscribed = seg;
                }
                const auto frame = wire::encode_frame(vehicle::bsm_snapshot(state, now));
                client->publish(pubsub::bsm_topic(options_.region, id), frame, pubsub::Qos::BestEffort);
            } catch (const pubsub::ConnectionError&) {
                client.reset();
            }
        }

        {
            std::lock_guard lock(mutex_);
            auto& s = status_[index];
            s.speed_mps = state.speed_mps;
            s.segment_id = state.current_segment();
            s.advisory_id = state.active_advisory
                                ? std::optional<std::uint16_t>(state.active_advisory->payload.advisory_id)
                                : std::nullopt;
            s.connected = client != nullptr;
        }
        std::this_thread::sleep_until(next);
    }
}

}  // namespace cda::scenario
