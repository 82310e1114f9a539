#include "cda/advisory/http.hpp"
#include "cda/advisory/live.hpp"
#include "cda/genai/gateway.hpp"
#include "cda/meta/meta_action.hpp"
#include "cda/pubsub/broker.hpp"
#include "cda/scenario/live_fleet.hpp"
#include "cda/scenario/runner.hpp"
#include "cda/wire/json.hpp"

#include <CLI11.hpp>
#include <httplib.h>

#include <atomic>
#include <csignal>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <iterator>
#include <sstream>
#include <thread>

using namespace cda;

namespace {

std::atomic<bool> g_stop{false};

void on_signal(int) { g_stop = true; }

void install_signal_handlers() {
    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    std::signal(SIGPIPE, SIG_IGN);
}

// Sleeps until a signal arrives or the deadline passes (zero means forever).
void wait_for_stop(double seconds, const std::function<void()>& every_5s = {}) {
    const auto start = std::chrono::steady_clock::now();
    auto report = start + std::chrono::seconds(5);
    while (!g_stop) {
        std::this_thread::sleep_for(std::chrono::milliseconds(100));
        const auto now = std::chrono::steady_clock::now();
        if (seconds > 0 && now - start >= std::chrono::duration<double>(seconds)) {
            return;
        }
        if (every_5s && now >= report) {
            every_5s();
            report += std::chrono::seconds(5);
        }
    }
}

std::string read_all(const std::string& path) {
    if (path == "-") {
        return {std::istreambuf_iterator<char>(std::cin), {}};
    }
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("cannot open " + path);
    }
    return {std::istreambuf_iterator<char>(in), {}};
}

std::string fmt2(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

// ---- broker -----------------------------------------------------------------

struct BrokerArgs {
    std::string tcp = "127.0.0.1:7320";
    std::string udp;
    std::string region = "fl";
    std::size_t queue_limit = 1024;
};

int run_broker(const BrokerArgs& a) {
    pubsub::BrokerOptions o;
    o.tcp = pubsub::Endpoint::parse(a.tcp);
    if (!a.udp.empty()) {
        o.udp = pubsub::Endpoint::parse(a.udp);
    }
    o.region = a.region;
    o.queue_limit = a.queue_limit;
    pubsub::TcpBroker broker(o);
    std::cout << "broker listening on tcp " << o.tcp.host << ":" << broker.tcp_port();
    if (o.udp) {
        std::cout << ", udp " << o.udp->host << ":" << broker.udp_port();
    }
    std::cout << std::endl;
    wait_for_stop(0);
    broker.stop();
    const auto s = broker.stats();
    std::cout << "broker stopped: " << s.accepted << " connections, " << s.routing.published << " publishes, " << s.protocol_disconnects
              << " protocol disconnects\n";
    return 0;
}

// ---- serve ------------------------------------------------------------------

struct ServeArgs {
    std::string broker = "127.0.0.1:7320";
    std::string http = "127.0.0.1:8080";
    std::string log = "advisories.log";
    std::string region = "fl";
    std::string feed;
    std::string routes;
    std::string client_id = "svc";
};

int run_serve(const ServeArgs& a) {
    advisory::ServiceOptions so;
    so.region = a.region;
    so.log_path = a.log;
    if (!a.routes.empty()) {
        so.locator = advisory::route_locator(scenario::load_routes(a.routes));
    }
    if (const char* fault = std::getenv("CDA_FAULT"); fault && std::string(fault) == "crash_after_persist") {
        so.after_persist = [] {
            std::cerr << "fault injection: exiting between persist and publish" << std::endl;
            std::_Exit(86);
        };
    }
    const auto broker = pubsub::Endpoint::parse(a.broker);
    advisory::BrokerPublisher publisher(broker, a.client_id);
    advisory::AdvisoryService service(so, publisher);
    if (!a.feed.empty()) {
        service.set_feed(advisory::load_feed(a.feed));
    }
    if (const auto n = service.pending().size(); n > 0) {
        const auto sent = service.recover();
        std::cout << "recovered " << n << " pending publish(es), " << sent << " sent" << std::endl;
    }
    advisory::HttpFrontend http(service, pubsub::Endpoint::parse(a.http));
    advisory::ServiceRunner runner(service, broker, a.client_id + "-fleet");
    const auto bind = pubsub::Endpoint::parse(a.http);
    std::cout << "service listening on http://" << bind.host << ":" << http.port() << std::endl;
    wait_for_stop(0);
    runner.stop();
    http.stop();
    return 0;
}

// ---- fleet ------------------------------------------------------------------

struct FleetArgs {
    int n = 10;
    std::string profile = "loopback";
    double loss = -1.0;
    std::uint64_t seed = 1;
    std::string routes;
    std::string broker = "127.0.0.1:7320";
    std::string region = "fl";
    double speed = 30.0;
    double set_speed = -1.0;
    double start = 0.0;
    double spacing = 25.0;
    double duration = 0.0;
    bool no_wrap = false;
};

int run_fleet(const FleetArgs& a) {
    scenario::LiveFleetOptions o;
    o.broker = pubsub::Endpoint::parse(a.broker);
    o.region = a.region;
    o.count = a.n;
    o.link = linksim::builtin_profile(linksim::parse_profile_name(a.profile));
    if (a.loss >= 0) {
        o.link.loss_rate = a.loss;
    }
    o.seed = a.seed;
    for (auto& r : scenario::load_routes(a.routes)) {
        o.routes.push_back(std::make_shared<const vehicle::Route>(std::move(r)));
    }
    o.initial_speed_mps = a.speed;
    o.set_speed_mps = a.set_speed >= 0 ? a.set_speed : a.speed;
    o.start_odometer_m = a.start;
    o.spacing_m = a.spacing;
    o.wrap = !a.no_wrap;
    scenario::LiveFleet fleet(o);
    std::cout << "fleet of " << a.n << " vehicles on " << linksim::to_string(o.link.name) << " (loss "
              << o.link.loss_rate << ") against " << a.broker << std::endl;
    const auto report = [&] {
        const auto st = fleet.status();
        int connected = 0;
        int advised = 0;
        double sum = 0;
        for (const auto& s : st) {
            connected += s.connected;
            advised += s.advisory_id.has_value();
            sum += s.speed_mps;
        }
        std::cout << "connected " << connected << "/" << st.size() << ", with advisory " << advised
                  << ", mean speed " << fmt2(sum / static_cast<double>(st.size())) << " m/s" << std::endl;
    };
    wait_for_stop(a.duration, report);
    fleet.stop();
    report();
    return 0;
}

// ---- advise -----------------------------------------------------------------

struct AdviseArgs {
    long long segment = 0;
    double speed = 0;
    double duration = 0;
    std::string cause = "none";
    std::string service = "http://127.0.0.1:8080";
};

int run_advise(const AdviseArgs& a) {
    httplib::Client cli(a.service);
    cli.set_connection_timeout(std::chrono::seconds(3));
    const nlohmann::json body{
        {"segment_id", a.segment}, {"speed_mps", a.speed}, {"duration_s", a.duration}, {"cause", a.cause}};
    const auto res = cli.Post("/advisories", body.dump(), "application/json");
    if (!res) {
        std::cerr << "cannot reach service at " << a.service << ": " << httplib::to_string(res.error()) << "\n";
        return 1;
    }
    nlohmann::json reply;
    try {
        reply = nlohmann::json::parse(res->body);
    } catch (const nlohmann::json::parse_error&) {
        std::cerr << "service answered HTTP " << res->status << " with a non-JSON body\n";
        return 1;
    }
    if (res->status == 201) {
        std::cout << "created advisory " << reply["advisory_id"].get<int>()
                  << (reply.value("pending", false) ? " (publish pending)" : "") << "\n";
        return 0;
    }
    std::cerr << (res->status == 422 ? "validation error" : "HTTP " + std::to_string(res->status));
    if (reply.contains("field")) {
        std::cerr << " [" << reply["field"].get<std::string>() << "]";
    }
    std::cerr << ": " << reply.value("error", std::string("unknown")) << "\n";
    return 1;
}

// ---- codec ------------------------------------------------------------------

int run_encode(const std::string& input) {
    try {
        const auto doc = nlohmann::json::parse(read_all(input));
        std::cout << wire::to_hex(wire::encode_frame(wire::payload_from_json(doc))) << "\n";
        return 0;
    } catch (const nlohmann::json::parse_error& e) {
        std::cerr << "encode error: input is not JSON: " << e.what() << "\n";
    } catch (const wire::CodecError& e) {
        std::cerr << "encode error: " << e.what() << "\n";
    } catch (const std::exception& e) {
        std::cerr << "encode error: " << e.what() << "\n";
    }
    return 1;
}

int run_decode(const std::string& hex, bool as_json) {
    std::vector<std::uint8_t> bytes;
    try {
        bytes = wire::from_hex(hex == "-" ? read_all("-") : hex);
    } catch (const std::invalid_argument& e) {
        std::cerr << "decode error: " << e.what() << "\n";
        return 1;
    }
    try {
        const auto decoded = wire::decode_frame(bytes);
        const auto doc = wire::payload_to_json(decoded.message);
        if (as_json) {
            std::cout << doc.dump() << "\n";
            return 0;
        }
        std::cout << "type " << doc["type"].get<std::string>() << "\n";
        for (const auto& [k, v] : doc.items()) {
            if (k != "type") {
                std::cout << k << " " << v.dump() << "\n";
            }
        }
        return 0;
    } catch (const wire::CodecError& e) {
        std::cerr << "decode error: " << e.what() << "\n";
        return 1;
    }
}

// ---- scenario ---------------------------------------------------------------

int run_scenario_cmd(const std::string& file, std::string out) {
    try {
        const auto sc = scenario::load_scenario(file);
        if (out.empty()) {
            out = sc.out.empty() ? "out/" + sc.name : sc.out;
        }
        const auto started = std::chrono::steady_clock::now();
        const auto m = scenario::run_scenario(sc);
        scenario::write_outputs(m, out);
        const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
        std::cout << "scenario " << m.scenario << " seed " << m.seed << ": " << m.duration_s << " s simulated in "
                  << fmt2(wall) << " s\n";
        for (const auto& a : m.advisories) {
            std::cout << "advisory " << a.advisory_id << " (segment " << a.segment_id << ", " << a.speed_mps
                      << " m/s): delivered " << a.delivered << "/" << a.recipients << ", delivery_ms min "
                      << fmt2(a.latency_min_ms) << " mean " << fmt2(a.latency_mean_ms) << " max "
                      << fmt2(a.latency_max_ms) << ", compliant within " << m.compliance_window_s << " s: "
                      << a.compliant_in_window << "\n";
        }
        std::cout << "retransmissions " << m.transport.retransmissions << ", abandoned " << m.transport.abandoned
                  << "\nwrote " << out << "/metrics.csv, summary.json, traces.csv\n";
        return 0;
    } catch (const scenario::ScenarioError& e) {
        std::cerr << "scenario error: " << e.what() << "\n";
    } catch (const std::exception& e) {
        std::cerr << "scenario failed: " << e.what() << "\n";
    }
    return 1;
}

// ---- genai ------------------------------------------------------------------

struct GenaiArgs {
    std::string script;
    std::string endpoint;
    std::string model = "mock";
    std::string runner = "local";
    int samples = 10;
    double timeout_s = 30.0;
};

int run_genai(const GenaiArgs& a) {
    std::unique_ptr<genai::ModelClient> client;
    if (!a.script.empty()) {
        client = std::make_unique<genai::MockClient>(a.model, a.runner, genai::load_script(a.script));
    } else {
        client = std::make_unique<genai::HttpClient>(a.model, a.runner, a.endpoint);
    }
    const genai::PromptContext ctx{genai::PromptVehicle{1001, 12, 30.0, 30.0}, genai::PromptAdvisory{1, 12, 20.0}, {}};
    const auto prompt = genai::build_prompt(ctx);
    auto route = std::make_shared<const vehicle::Route>(
        std::vector<vehicle::RouteSegment>{{12, {28.5, -81.40}, {28.5, -81.37}, 3000.0}});
    auto state = vehicle::make_vehicle(1001, route, 30.0, 30.0);
    meta::CommandGate gate;
    std::vector<genai::Sample> samples;
    SimTime sim_now = wall_now();
    for (int i = 0; i < a.samples; ++i) {
        auto s = genai::request(*client, prompt, std::chrono::milliseconds(std::llround(a.timeout_s * 1000)));
        if (s.ok) {
            // Space submissions past the rate limit so every response is judged on content.
            sim_now += std::chrono::seconds(2);
            const auto r = gate.submit(s.text, state, sim_now);
            std::cerr << "sample " << i + 1 << ": " << fmt2(s.latency_s) << " s, " << s.token_count << " tokens, "
                      << (r.applied ? std::string("applied ") + meta::action_name(*r.applied)
                                    : "rejected: " + r.rejection->describe())
                      << "\n";
        } else {
            std::cerr << "sample " << i + 1 << ": " << s.error << "\n";
        }
        samples.push_back(std::move(s));
    }
    const auto report = genai::aggregate_stats(client->name(), client->runner(), samples);
    std::cout << genai::csv_header() << "\n" << genai::csv_row(report) << "\n";
    std::cerr << report.n_samples << " ok, " << report.n_failed << " failed; gate accepted " << gate.accepted()
              << "\n";
    return report.n_samples > 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Cooperative driving advisory toolkit: broker, service, fleet, codec and scenarios"};
    app.require_subcommand(1);

    BrokerArgs broker;
    auto* cmd_broker = app.add_subcommand("broker", "Run the publish/subscribe broker");
    cmd_broker->add_option("--tcp", broker.tcp, "TCP listen address")->capture_default_str();
    cmd_broker->add_option("--udp", broker.udp, "UDP address for raw BSM ingest");
    cmd_broker->add_option("--region", broker.region, "Region used for UDP BSM topics")->capture_default_str();
    cmd_broker->add_option("--queue-limit", broker.queue_limit, "Per-connection outbound queue")->capture_default_str();

    ServeArgs serve;
    auto* cmd_serve = app.add_subcommand("serve", "Run the advisory service and its HTTP API");
    cmd_serve->add_option("--broker", serve.broker, "Broker TCP address")->capture_default_str();
    cmd_serve->add_option("--http", serve.http, "HTTP listen address (port 0 picks one)")->capture_default_str();
    cmd_serve->add_option("--log", serve.log, "Advisory log path")->capture_default_str();
    cmd_serve->add_option("--region", serve.region)->capture_default_str();
    cmd_serve->add_option("--feed", serve.feed, "Traffic feed file or http:// URL");
    cmd_serve->add_option("--routes", serve.routes, "Route file used to place vehicles on segments");
    cmd_serve->add_option("--client-id", serve.client_id)->capture_default_str();

    FleetArgs fleet;
    auto* cmd_fleet = app.add_subcommand("fleet", "Run simulated vehicles against a live broker");
    cmd_fleet->add_option("--n", fleet.n, "Vehicle count")->capture_default_str()->check(CLI::Range(1, 10000));
    cmd_fleet->add_option("--profile", fleet.profile, "wifi6, wifi4, lte or loopback")->capture_default_str();
    cmd_fleet->add_option("--loss", fleet.loss, "Override the profile loss rate")->check(CLI::Range(0.0, 0.999));
    cmd_fleet->add_option("--seed", fleet.seed)->capture_default_str();
    cmd_fleet->add_option("--routes", fleet.routes, "Route file")->required()->check(CLI::ExistingFile);
    cmd_fleet->add_option("--broker", fleet.broker)->capture_default_str();
    cmd_fleet->add_option("--region", fleet.region)->capture_default_str();
    cmd_fleet->add_option("--speed", fleet.speed, "Initial speed, m/s")->capture_default_str();
    cmd_fleet->add_option("--set-speed", fleet.set_speed, "Driver set speed, m/s (defaults to --speed)");
    cmd_fleet->add_option("--start", fleet.start, "Odometer of the first vehicle, m")->capture_default_str();
    cmd_fleet->add_option("--spacing", fleet.spacing, "Gap between vehicles, m")->capture_default_str();
    cmd_fleet->add_option("--duration", fleet.duration, "Seconds to run, 0 until interrupted")->capture_default_str();
    cmd_fleet->add_flag("--no-wrap", fleet.no_wrap, "Stop at the route end instead of starting over");

    AdviseArgs advise;
    auto* cmd_advise = app.add_subcommand("advise", "Create an advisory through the service API");
    cmd_advise->add_option("segment", advise.segment)->required();
    cmd_advise->add_option("speed", advise.speed, "m/s")->required();
    cmd_advise->add_option("duration", advise.duration, "seconds")->required();
    cmd_advise->add_option("--cause", advise.cause)->capture_default_str();
    cmd_advise->add_option("--service", advise.service)->capture_default_str();

    auto* cmd_codec = app.add_subcommand("codec", "Encode or decode wire frames");
    cmd_codec->require_subcommand(1);
    std::string encode_input = "-";
    auto* cmd_encode = cmd_codec->add_subcommand("encode", "Field document (JSON) to frame hex");
    cmd_encode->add_option("input", encode_input, "File or - for stdin")->capture_default_str();
    std::string decode_input = "-";
    bool decode_json = false;
    auto* cmd_decode = cmd_codec->add_subcommand("decode", "Frame hex to field table");
    cmd_decode->add_option("hex", decode_input, "Hex string or - for stdin")->capture_default_str();
    cmd_decode->add_flag("--json", decode_json, "Print the field document instead of a table");

    auto* cmd_scenario = app.add_subcommand("scenario", "Seeded end-to-end simulations");
    cmd_scenario->require_subcommand(1);
    std::string scenario_file;
    std::string scenario_out;
    auto* cmd_run = cmd_scenario->add_subcommand("run", "Run a scenario file and write its metrics");
    cmd_run->add_option("file", scenario_file)->required()->check(CLI::ExistingFile);
    cmd_run->add_option("--out", scenario_out, "Output directory (defaults to the file's \"out\")");

    GenaiArgs genai_args;
    auto* cmd_genai = app.add_subcommand("genai", "Time a model backend and gate its responses");
    auto* script_opt = cmd_genai->add_option("--script", genai_args.script, "Mock script fixture");
    auto* endpoint_opt = cmd_genai->add_option("--endpoint", genai_args.endpoint, "http:// completion endpoint");
    script_opt->excludes(endpoint_opt);
    cmd_genai->add_option("--model", genai_args.model)->capture_default_str();
    cmd_genai->add_option("--runner", genai_args.runner)->capture_default_str();
    cmd_genai->add_option("--samples", genai_args.samples)->capture_default_str()->check(CLI::Range(1, 100000));
    cmd_genai->add_option("--timeout", genai_args.timeout_s, "Per-request timeout, s")->capture_default_str();

    CLI11_PARSE(app, argc, argv);
    install_signal_handlers();

    try {
        if (*cmd_broker) {
            return run_broker(broker);
        }
        if (*cmd_serve) {
            return run_serve(serve);
        }
        if (*cmd_fleet) {
            return run_fleet(fleet);
        }
        if (*cmd_advise) {
            return run_advise(advise);
        }
        if (*cmd_encode) {
            return run_encode(encode_input);
        }
        if (*cmd_decode) {
            return run_decode(decode_input, decode_json);
        }
        if (*cmd_run) {
            return run_scenario_cmd(scenario_file, scenario_out);
        }
        if (*cmd_genai) {
            if (genai_args.script.empty() && genai_args.endpoint.empty()) {
                std::cerr << "genai needs --script or --endpoint\n";
                return 2;
            }
            return run_genai(genai_args);
        }
    } catch (const std::system_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
