#include "cda/scenario/runner.hpp"

#include "cda/meta/meta_action.hpp"
#include "cda/pubsub/broker_core.hpp"
#include "cda/vehicle/agent.hpp"
#include "cda/wire/codec.hpp"

#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <tuple>

namespace cda::scenario {

namespace {

namespace fs = std::filesystem;

// Runs start at a fixed instant so minute-of-year and second-mark fields are
// reproducible: April 10th, 08:00.
constexpr SimTime kEpoch = std::chrono::hours(24 * 99 + 8);
constexpr const char* kServiceClient = "svc-fleet";
constexpr const char* kServicePublisher = "svc";

double rel_s(SimTime t) { return to_seconds(t - kEpoch); }

std::optional<wire::Decoded> try_decode(std::span<const std::uint8_t> bytes) {
    try {
        return wire::decode_frame(bytes);
    } catch (const wire::CodecError&) {
        return std::nullopt;
    }
}

struct Downlink {
    pubsub::Envelope envelope;
    SimTime sent_at{};
    int attempt = 1;
};

struct Uplink {
    bool ack = false;
    std::string topic;  // acked topic
    std::uint64_t seq = 0;
    std::vector<std::uint8_t> bsm;
};

struct SimVehicle {
    vehicle::VehicleState state;
    linksim::ImpairedLink<Downlink> down;
    linksim::ImpairedLink<Uplink> up;
    std::string client;
    std::optional<std::uint16_t> subscribed_segment;
    std::set<std::pair<std::string, std::uint64_t>> seen;
    meta::CommandGate gate;
    std::vector<vehicle::TracePoint> trace;
};

using RetryKey = std::tuple<std::size_t, std::string, std::uint64_t>;

struct Outstanding {
    pubsub::Envelope envelope;
    SimTime next_retry{};
    int attempts = 1;
};

struct PendingDelivery {
    DeliveryRecord record;
    SimTime routed_at{};
};

class SimPublisher : public advisory::Publisher {
public:
    explicit SimPublisher(std::function<void(const pubsub::Topic&, const std::vector<std::uint8_t>&)> fn)
        : fn_(std::move(fn)) {}
    void publish(const pubsub::Topic& topic, const std::vector<std::uint8_t>& frame) override { fn_(topic, frame); }

private:
    std::function<void(const pubsub::Topic&, const std::vector<std::uint8_t>&)> fn_;
};

fs::path private_work_dir() {
    static int counter = 0;
    return fs::temp_directory_path() / ("cda_scenario_" + std::to_string(::getpid()) + "_" + std::to_string(++counter));
}

class Simulation {
public:
    Simulation(const Scenario& sc, const RunOptions& opt)
        : sc_(sc), opt_(opt), publisher_([this](const pubsub::Topic& t, const std::vector<std::uint8_t>& f) {
              publish_advisory(t, f);
          }) {
        law_.validate();
        work_dir_ = opt.work_dir.empty() ? private_work_dir() : fs::path(opt.work_dir);
        owns_work_dir_ = opt.work_dir.empty();
        fs::create_directories(work_dir_);
        const auto log_path = work_dir_ / "advisories.log";
        fs::remove(log_path);

        advisory::ServiceOptions so;
        so.region = sc.region;
        so.log_path = log_path.string();
        so.clock = [this] { return now_; };
        std::vector<vehicle::Route> routes;
        for (const auto& r : sc.routes) {
            routes.push_back(*r);
        }
        so.locator = advisory::route_locator(std::move(routes));
        service_ = std::make_unique<advisory::AdvisoryService>(so, publisher_);

        core_.connect(kServiceClient);
        collect([&](auto& out) { core_.subscribe(kServiceClient, pubsub::all_bsm_pattern(), sink(out)); });

        const auto n_routes = sc.routes.size();
        for (int i = 0; i < sc.vehicles.count; ++i) {
            const auto idx = static_cast<std::size_t>(i);
            const auto& route = sc.routes[idx % n_routes];
            const double odo = sc.vehicles.start_odometer_m + sc.vehicles.spacing_m * static_cast<double>(idx / n_routes);
            const std::uint32_t id = 1001 + static_cast<std::uint32_t>(i);
            vehicles_.push_back(SimVehicle{
                vehicle::make_vehicle(id, route, sc.vehicles.initial_speed_mps, sc.vehicles.set_speed_mps, odo),
                linksim::ImpairedLink<Downlink>(sc.link, linksim::derive_seed(sc.seed, 2 * idx)),
                linksim::ImpairedLink<Uplink>(sc.link, linksim::derive_seed(sc.seed, 2 * idx + 1)),
                "veh-" + std::to_string(id),
                std::nullopt,
                {},
                meta::CommandGate{},
                {}});
            by_client_[vehicles_.back().client] = idx;
            core_.connect(vehicles_.back().client);
        }
    }

    ~Simulation() {
        service_.reset();
        if (owns_work_dir_) {
            std::error_code ec;
            fs::remove_all(work_dir_, ec);
        }
    }

    RunMetrics run() {
        now_ = kEpoch;
        for (std::size_t i = 0; i < vehicles_.size(); ++i) {
            resubscribe(i);
            record_trace(i);
        }

        const SimTime end = kEpoch + from_seconds(sc_.duration_s);
        std::int64_t tick_no = 1;
        SimTime next_tick = tick_at(tick_no);
        SimTime next_house = kEpoch + std::chrono::seconds(1);
        std::size_t next_event = 0;

        while (true) {
            SimTime t = std::min(next_tick, next_house);
            if (next_event < sc_.timeline.size()) {
                t = std::min(t, event_time(next_event));
            }
            for (const auto& v : vehicles_) {
                if (auto d = v.down.next_delivery()) {
                    t = std::min(t, *d);
                }
                if (auto u = v.up.next_delivery()) {
                    t = std::min(t, *u);
                }
            }
            for (const auto& [_, o] : outstanding_) {
                t = std::min(t, o.next_retry);
            }
            if (t > end) {
                break;
            }
            now_ = t;

            // A tick only sees messages received strictly before it.
            if (next_tick <= now_) {
                for (std::size_t i = 0; i < vehicles_.size(); ++i) {
                    step_vehicle(i);
                }
                next_tick = tick_at(++tick_no);
            }
            for (std::size_t i = 0; i < vehicles_.size(); ++i) {
                for (auto& d : vehicles_[i].down.pop_due(now_)) {
                    on_downlink(i, d);
                }
            }
            for (std::size_t i = 0; i < vehicles_.size(); ++i) {
                for (auto& u : vehicles_[i].up.pop_due(now_)) {
                    on_uplink(i, u);
                }
            }
            retry_due();
            while (next_event < sc_.timeline.size() && event_time(next_event) <= now_) {
                run_event(sc_.timeline[next_event++]);
            }
            if (next_house <= now_) {
                service_->expire_due();
                service_->publish_pending();
                next_house += std::chrono::seconds(1);
            }
        }
        return finish();
    }

private:
    using Routed = std::vector<std::pair<std::string, pubsub::Envelope>>;

    static pubsub::BrokerCore::Deliver sink(Routed& out) {
        return [&out](const std::string& sub, const pubsub::Envelope& e) { out.emplace_back(sub, e); };
    }

    // The broker core must not be re-entered from its delivery callback, so
    // routed envelopes are collected first and dispatched afterwards.
    template <typename F>
    void collect(F&& f) {
        Routed out;
        f(out);
        for (auto& [sub, env] : out) {
            dispatch(sub, env);
        }
    }

    SimTime tick_at(std::int64_t n) const { return kEpoch + from_seconds(static_cast<double>(n) * law_.tick_s); }
    SimTime event_time(std::size_t i) const { return kEpoch + from_seconds(sc_.timeline[i].at_s); }

    void publish_advisory(const pubsub::Topic& topic, const std::vector<std::uint8_t>& frame) {
        pubsub::Envelope env{topic, pubsub::Qos::AtLeastOnce, true, ++service_seq_, frame};
        collect([&](auto& out) { core_.publish(kServicePublisher, env, sink(out)); });
    }

    void dispatch(const std::string& subscriber, const pubsub::Envelope& env) {
        if (subscriber == kServiceClient) {
            ++counters_.bsms_at_service;
            service_->on_bsm(env.body);
            return;
        }
        const auto idx = by_client_.at(subscriber);
        auto& v = vehicles_[idx];
        if (env.qos == pubsub::Qos::AtLeastOnce) {
            outstanding_[{idx, env.topic.str(), env.seq}] = Outstanding{env, now_ + opt_.ack_timeout, 1};
        }
        note_routed(idx, env);
        v.down.transmit(Downlink{env, now_, 1}, now_);
    }

    void note_routed(std::size_t idx, const pubsub::Envelope& env) {
        const auto decoded = try_decode(env.body);
        if (!decoded) {
            return;
        }
        const auto* adv = std::get_if<wire::AdvisoryPayload>(&decoded->message);
        if (!adv || adv->is_cancel()) {
            return;
        }
        const auto key = std::make_pair(adv->advisory_id, vehicles_[idx].state.vehicle_id);
        if (deliveries_.count(key)) {
            return;
        }
        PendingDelivery p;
        p.record.advisory_id = adv->advisory_id;
        p.record.vehicle_id = vehicles_[idx].state.vehicle_id;
        p.record.advisory_speed_mps = adv->speed_mps();
        p.record.routed_at_s = rel_s(now_);
        p.routed_at = now_;
        deliveries_.emplace(key, p);
    }

    void on_downlink(std::size_t idx, const Downlink& d) {
        auto& v = vehicles_[idx];
        const auto& env = d.envelope;
        if (env.qos == pubsub::Qos::AtLeastOnce) {
            v.up.transmit(Uplink{true, env.topic.str(), env.seq, {}}, now_);
        }
        if (!v.seen.insert({env.topic.str(), env.seq}).second) {
            ++counters_.duplicates_suppressed;
            return;
        }
        const double latency_ms = to_millis(now_ - d.sent_at);
        if (latency_ms < sc_.link.latency_min_ms - 1e-3 ||
            latency_ms > sc_.link.latency_max_ms + sc_.processing_allowance_ms + 1e-3) {
            throw ScenarioError("invariant: delivery latency " + std::to_string(latency_ms) +
                                " ms outside the link envelope");
        }
        const auto decoded = try_decode(env.body);
        if (!decoded) {
            throw ScenarioError("invariant: undecodable advisory frame on " + env.topic.str());
        }
        const auto* adv = std::get_if<wire::AdvisoryPayload>(&decoded->message);
        if (!adv) {
            return;
        }
        vehicle::on_advisory(v.state, *adv, now_);
        if (adv->is_cancel()) {
            return;
        }
        auto it = deliveries_.find({adv->advisory_id, v.state.vehicle_id});
        if (it != deliveries_.end() && !it->second.record.received_at_s) {
            auto& r = it->second.record;
            r.received_at_s = rel_s(now_);
            r.delivery_ms = latency_ms;
            r.eventual_ms = to_millis(now_ - it->second.routed_at);
            r.attempts = d.attempt;
            received_at_[{adv->advisory_id, v.state.vehicle_id}] = now_;
        }
    }

    void on_uplink(std::size_t idx, const Uplink& u) {
        auto& v = vehicles_[idx];
        if (u.ack) {
            outstanding_.erase({idx, u.topic, u.seq});
            return;
        }
        pubsub::Envelope env{pubsub::bsm_topic(sc_.region, v.state.vehicle_id), pubsub::Qos::BestEffort, false,
                             ++bsm_seq_[idx], u.bsm};
        collect([&](auto& out) { core_.publish(v.client, env, sink(out)); });
    }

    void retry_due() {
        for (auto it = outstanding_.begin(); it != outstanding_.end();) {
            auto& o = it->second;
            if (o.next_retry > now_) {
                ++it;
                continue;
            }
            if (o.attempts >= opt_.max_attempts) {
                ++counters_.abandoned;
                it = outstanding_.erase(it);
                continue;
            }
            ++o.attempts;
            ++counters_.retransmissions;
            o.next_retry = now_ + opt_.ack_timeout;
            vehicles_[std::get<0>(it->first)].down.transmit(Downlink{o.envelope, now_, o.attempts}, now_);
            ++it;
        }
    }

    void run_event(const TimelineEvent& e) {
        const auto where = "timeline event at " + std::to_string(e.at_s) + " s: ";
        std::visit(
            [&](const auto& step) {
                using T = std::decay_t<decltype(step)>;
                try {
                    if constexpr (std::is_same_v<T, CreateAdvisoryStep>) {
                        service_->create(step.request);
                    } else if constexpr (std::is_same_v<T, CancelAdvisoryStep>) {
                        service_->cancel(step.advisory_id);
                    } else if constexpr (std::is_same_v<T, FeedUpdateStep>) {
                        service_->set_feed(step.snapshot);
                    } else {
                        run_meta(step, where);
                    }
                } catch (const advisory::ValidationError& err) {
                    throw ScenarioError(where + err.what());
                } catch (const advisory::NotFound& err) {
                    throw ScenarioError(where + err.what());
                } catch (const advisory::Conflict& err) {
                    throw ScenarioError(where + err.what());
                }
            },
            e.action);
    }

    void run_meta(const MetaActionStep& step, const std::string& where) {
        bool matched = false;
        for (auto& v : vehicles_) {
            if (step.vehicle_id && *step.vehicle_id != v.state.vehicle_id) {
                continue;
            }
            matched = true;
            const auto res = v.gate.submit(step.text, v.state, now_);
            MetaRecord m;
            m.at_s = rel_s(now_);
            m.vehicle_id = v.state.vehicle_id;
            m.applied = res.applied.has_value();
            m.outcome = res.applied ? meta::action_name(*res.applied) : res.rejection->describe();
            meta_.push_back(std::move(m));
        }
        if (!matched) {
            throw ScenarioError(where + "no vehicle " + std::to_string(*step.vehicle_id));
        }
    }

    void resubscribe(std::size_t idx) {
        auto& v = vehicles_[idx];
        const auto seg = v.state.current_segment();
        if (v.subscribed_segment == seg) {
            return;
        }
        if (v.subscribed_segment) {
            core_.unsubscribe(v.client,
                              pubsub::TopicPattern::parse(pubsub::advisory_topic(sc_.region, *v.subscribed_segment).str()));
        }
        v.subscribed_segment = seg;
        const auto pattern = pubsub::TopicPattern::parse(pubsub::advisory_topic(sc_.region, seg).str());
        collect([&](auto& out) { core_.subscribe(v.client, pattern, sink(out)); });
    }

    void record_trace(std::size_t idx) {
        const auto& s = vehicles_[idx].state;
        vehicles_[idx].trace.push_back({now_, s.speed_mps});
        traces_.push_back({rel_s(now_), s.vehicle_id, s.speed_mps, s.odometer_m, s.current_segment()});
    }

    void step_vehicle(std::size_t idx) {
        auto& v = vehicles_[idx];
        const double before = v.state.speed_mps;
        v.state = vehicle::tick(v.state, law_, now_);
        const double dv = v.state.speed_mps - before;
        const bool stopped_at_end = v.state.at_route_end() && v.state.speed_mps == 0.0;
        if (v.state.speed_mps < 0.0 || v.state.odometer_m > v.state.route->length_m() ||
            (!stopped_at_end && (dv > law_.accel_max * law_.tick_s + 1e-9 || dv < law_.decel_max * law_.tick_s - 1e-9))) {
            throw ScenarioError("invariant: vehicle " + std::to_string(v.state.vehicle_id) + " left the control envelope");
        }
        record_trace(idx);
        resubscribe(idx);
        auto frame = wire::encode_frame(vehicle::bsm_snapshot(v.state, now_));
        ++counters_.bsms_published;
        v.up.transmit(Uplink{false, {}, 0, std::move(frame)}, now_);
    }

    RunMetrics finish() {
        RunMetrics m;
        m.scenario = sc_.name;
        m.seed = sc_.seed;
        m.link = sc_.link;
        m.duration_s = sc_.duration_s;
        m.compliance_window_s = sc_.compliance_window_s;

        std::map<std::uint32_t, std::size_t> index;
        for (std::size_t i = 0; i < vehicles_.size(); ++i) {
            index[vehicles_[i].state.vehicle_id] = i;
        }
        for (auto& [key, p] : deliveries_) {
            auto r = p.record;
            if (const auto rx = received_at_.find(key); rx != received_at_.end()) {
                r.compliance_s = vehicle::compliance_time(vehicles_[index[r.vehicle_id]].trace, r.advisory_speed_mps,
                                                          rx->second);
            }
            m.deliveries.push_back(r);
        }

        std::map<std::uint16_t, AdvisoryReport> reports;
        for (const auto& rec : service_->advisories()) {
            auto& a = reports[rec.advisory_id];
            a.advisory_id = rec.advisory_id;
            a.segment_id = rec.segment_id;
            a.speed_mps = rec.speed_mps;
            a.published_at_s = rel_s(rec.created_at);
        }
        for (const auto& r : m.deliveries) {
            auto& a = reports[r.advisory_id];
            ++a.recipients;
            if (!r.delivery_ms) {
                continue;
            }
            const double ms = *r.delivery_ms;
            a.latency_min_ms = a.delivered == 0 ? ms : std::min(a.latency_min_ms, ms);
            a.latency_max_ms = std::max(a.latency_max_ms, ms);
            a.latency_mean_ms += ms;
            a.eventual_max_ms = std::max(a.eventual_max_ms, *r.eventual_ms);
            ++a.delivered;
            if (r.compliance_s && *r.received_at_s + *r.compliance_s - a.published_at_s <= sc_.compliance_window_s + 1e-9) {
                ++a.compliant_in_window;
            }
        }
        for (auto& [_, a] : reports) {
            if (a.delivered > 0) {
                a.latency_mean_ms /= static_cast<double>(a.delivered);
            }
            m.advisories.push_back(a);
        }

        for (const auto& v : vehicles_) {
            m.vehicles.push_back({v.state.vehicle_id, v.state.speed_mps, v.state.odometer_m, v.state.current_segment(),
                                  v.state.ignored_advisories, v.state.notices.size()});
            counters_.downlink_sent += v.down.stats().sent;
            counters_.downlink_dropped += v.down.stats().dropped;
            counters_.uplink_sent += v.up.stats().sent;
            counters_.uplink_dropped += v.up.stats().dropped;
        }
        m.meta = meta_;
        m.traces = traces_;
        m.transport = counters_;
        m.fleet_entries_at_service = service_->fleet().size();
        return m;
    }

    const Scenario& sc_;
    RunOptions opt_;
    vehicle::ControlLaw law_;
    SimPublisher publisher_;
    fs::path work_dir_;
    bool owns_work_dir_ = false;
    SimTime now_ = kEpoch;

    pubsub::BrokerCore core_;
    std::unique_ptr<advisory::AdvisoryService> service_;
    std::vector<SimVehicle> vehicles_;
    std::map<std::string, std::size_t> by_client_;
    std::map<RetryKey, Outstanding> outstanding_;
    std::map<std::size_t, std::uint64_t> bsm_seq_;
    std::uint64_t service_seq_ = 0;

    std::map<std::pair<std::uint16_t, std::uint32_t>, PendingDelivery> deliveries_;
    std::map<std::pair<std::uint16_t, std::uint32_t>, SimTime> received_at_;
    std::vector<MetaRecord> meta_;
    std::vector<TraceRow> traces_;
    TransportCounters counters_;
};

std::string fmt(const char* format, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, format, v);
    return buf;
}

void write_file(const fs::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << content;
    if (!out) {
        throw ScenarioError("cannot write " + path.string());
    }
}

}  // namespace

RunMetrics run_scenario(const Scenario& scenario, const RunOptions& options) {
    Simulation sim(scenario, options);
    return sim.run();
}

std::string metrics_csv(const RunMetrics& m) {
    std::string out = "advisory_id,vehicle_id,delivery_ms,compliance_s\n";
    for (const auto& r : m.deliveries) {
        out += std::to_string(r.advisory_id) + "," + std::to_string(r.vehicle_id) + ",";
        out += r.delivery_ms ? fmt("%.3f", *r.delivery_ms) : "";
        out += ",";
        out += r.compliance_s ? fmt("%.3f", *r.compliance_s) : "";
        out += "\n";
    }
    return out;
}

std::string traces_csv(const RunMetrics& m) {
    std::string out = "t_s,vehicle_id,speed_mps,odometer_m,segment_id\n";
    for (const auto& t : m.traces) {
        out += fmt("%.1f", t.t_s) + "," + std::to_string(t.vehicle_id) + "," + fmt("%.4f", t.speed_mps) + "," +
               fmt("%.3f", t.odometer_m) + "," + std::to_string(t.segment_id) + "\n";
    }
    return out;
}

nlohmann::json summary_json(const RunMetrics& m) {
    using nlohmann::json;
    json advisories = json::array();
    for (const auto& a : m.advisories) {
        advisories.push_back({{"advisory_id", a.advisory_id},
                              {"segment_id", a.segment_id},
                              {"speed_mps", a.speed_mps},
                              {"published_at_s", a.published_at_s},
                              {"recipients", a.recipients},
                              {"delivered", a.delivered},
                              {"delivery_ms", {{"min", a.latency_min_ms}, {"mean", a.latency_mean_ms}, {"max", a.latency_max_ms}}},
                              {"eventual_max_ms", a.eventual_max_ms},
                              {"compliant_in_window", a.compliant_in_window}});
    }
    json vehicles = json::array();
    for (const auto& v : m.vehicles) {
        vehicles.push_back({{"vehicle_id", v.vehicle_id},
                            {"final_speed_mps", v.final_speed_mps},
                            {"final_odometer_m", v.final_odometer_m},
                            {"final_segment", v.final_segment},
                            {"ignored_advisories", v.ignored_advisories},
                            {"notices", v.notices}});
    }
    json meta = json::array();
    for (const auto& r : m.meta) {
        meta.push_back({{"at_s", r.at_s}, {"vehicle_id", r.vehicle_id}, {"applied", r.applied}, {"outcome", r.outcome}});
    }
    const auto& t = m.transport;
    return {{"scenario", m.scenario},
            {"seed", m.seed},
            {"link",
             {{"profile", linksim::to_string(m.link.name)},
              {"latency_min_ms", m.link.latency_min_ms},
              {"latency_max_ms", m.link.latency_max_ms},
              {"loss_rate", m.link.loss_rate}}},
            {"duration_s", m.duration_s},
            {"compliance_window_s", m.compliance_window_s},
            {"advisories", advisories},
            {"vehicles", vehicles},
            {"metaactions", meta},
            {"transport",
             {{"downlink_sent", t.downlink_sent},
              {"downlink_dropped", t.downlink_dropped},
              {"uplink_sent", t.uplink_sent},
              {"uplink_dropped", t.uplink_dropped},
              {"retransmissions", t.retransmissions},
              {"duplicates_suppressed", t.duplicates_suppressed},
              {"abandoned", t.abandoned},
              {"bsms_published", t.bsms_published},
              {"bsms_at_service", t.bsms_at_service}}},
            {"fleet_entries_at_service", m.fleet_entries_at_service}};
}

void write_outputs(const RunMetrics& metrics, const std::string& dir) {
    fs::create_directories(dir);
    write_file(fs::path(dir) / "metrics.csv", metrics_csv(metrics));
    write_file(fs::path(dir) / "traces.csv", traces_csv(metrics));
    write_file(fs::path(dir) / "summary.json", summary_json(metrics).dump(2) + "\n");
}

}  // namespace cda::scenario
