#include "cda/pubsub/client.hpp"
#include "cda/wire/codec.hpp"

#include <httplib.h>
#include <nlohmann/json.hpp>

#include <gtest/gtest.h>

#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <regex>
#include <sstream>

namespace fs = std::filesystem;
using namespace cda;

namespace {

const std::string kCli = CDA_CLI_PATH;
const std::string kScenario = CDA_SOURCE_DIR "/scenarios/advisory_lte_20veh.json";

struct Result {
    int exit_code = -1;
    std::string output;  // stdout and stderr interleaved
};

Result run(const std::string& args, const std::string& stdin_text = {}) {
    std::string cmd = kCli + " " + args + " 2>&1";
    if (!stdin_text.empty()) {
        cmd = "printf '%s' '" + stdin_text + "' | " + cmd;
    }
    Result r;
    FILE* p = ::popen(cmd.c_str(), "r");
    char buf[4096];
    std::size_t n;
    while ((n = std::fread(buf, 1, sizeof buf, p)) > 0) {
        r.output.append(buf, n);
    }
    const int status = ::pclose(p);
    r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

// Background CLI process with its stdout readable line by line.
class Process {
public:
    Process(std::vector<std::string> args, std::vector<std::string> env = {}) {
        int fds[2];
        if (::pipe(fds) != 0) {
            throw std::runtime_error("pipe");
        }
        pid_ = ::fork();
        if (pid_ == 0) {
            ::dup2(fds[1], STDOUT_FILENO);
            ::close(fds[0]);
            ::close(fds[1]);
            for (const auto& kv : env) {
                ::putenv(const_cast<char*>(kv.c_str()));
            }
            std::vector<char*> argv{const_cast<char*>(kCli.c_str())};
            for (auto& a : args) {
                argv.push_back(a.data());
            }
            argv.push_back(nullptr);
            ::execv(kCli.c_str(), argv.data());
            std::_Exit(127);
        }
        ::close(fds[1]);
        out_ = fds[0];
    }
    ~Process() {
        stop();
        ::close(out_);
    }

    std::string read_line(std::chrono::milliseconds timeout = std::chrono::seconds(10)) {
        const auto deadline = std::chrono::steady_clock::now() + timeout;
        while (true) {
            if (const auto nl = buffer_.find('\n'); nl != std::string::npos) {
                auto line = buffer_.substr(0, nl);
                buffer_.erase(0, nl + 1);
                return line;
            }
            const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
            if (left.count() <= 0) {
                return {};
            }
            pollfd pfd{out_, POLLIN, 0};
            if (::poll(&pfd, 1, static_cast<int>(left.count())) <= 0) {
                return {};
            }
            char buf[512];
            const auto n = ::read(out_, buf, sizeof buf);
            if (n <= 0) {
                return {};
            }
            buffer_.append(buf, static_cast<std::size_t>(n));
        }
    }

    int wait() {
        int status = 0;
        ::waitpid(pid_, &status, 0);
        pid_ = -1;
        return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    }

    void stop() {
        if (pid_ > 0) {
            ::kill(pid_, SIGTERM);
            wait();
        }
    }

private:
    pid_t pid_ = -1;
    int out_ = -1;
    std::string buffer_;
};

std::uint16_t port_in(const std::string& line) {
    std::smatch m;
    const std::regex re(R"(:(\d+)\b)");
    std::string last;
    for (auto it = std::sregex_iterator(line.begin(), line.end(), re); it != std::sregex_iterator(); ++it) {
        last = (*it)[1];
    }
    return last.empty() ? 0 : static_cast<std::uint16_t>(std::stoi(last));
}

struct TempDir {
    fs::path path = fs::temp_directory_path() / ("cda_cli_" + std::to_string(::getpid()) + "_" +
                                                 std::to_string(std::chrono::steady_clock::now().time_since_epoch().count()));
    TempDir() { fs::create_directories(path); }
    ~TempDir() { fs::remove_all(path); }
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::vector<std::uint8_t> logged_create_frame(const fs::path& log) {
    std::ifstream in(log);
    std::string line;
    while (std::getline(in, line)) {
        const auto j = nlohmann::json::parse(line);
        if (j["op"] == "create") {
            return wire::from_hex(j["frame"].get<std::string>());
        }
    }
    return {};
}

}  // namespace

TEST(CliCodec, EncodesAdvisoryGolden) {
    const auto r = run("codec encode",
                       R"({"type":"advisory","advisory_id":1,"segment_id":2,"advisory_speed":1000,"start_minute_of_year":0,"duration_minutes":30,"cause":1})");
    EXPECT_EQ(r.exit_code, 0) << r.output;
    EXPECT_EQ(r.output, "1f000b000100021f4000000078041cd2\n");
}

TEST(CliCodec, DecodeTableAndCorruption) {
    auto r = run("codec decode 1f000b000100021f4000000078041cd2");
    EXPECT_EQ(r.exit_code, 0);
    EXPECT_NE(r.output.find("type advisory"), std::string::npos);
    EXPECT_NE(r.output.find("advisory_speed 1000"), std::string::npos);
    EXPECT_NE(r.output.find("duration_minutes 30"), std::string::npos);

    r = run("codec decode 1f000b000100021f4000000078041cd3");
    EXPECT_EQ(r.exit_code, 1);
    EXPECT_NE(r.output.find("crc mismatch"), std::string::npos) << r.output;

    r = run("codec decode 1f00");
    EXPECT_EQ(r.exit_code, 1);
    r = run("codec decode zz");
    EXPECT_EQ(r.exit_code, 1);
    r = run("codec encode", R"({"type":"advisory","advisory_speed":9000})");
    EXPECT_EQ(r.exit_code, 1);
    EXPECT_NE(r.output.find("advisory_speed"), std::string::npos) << r.output;
}

TEST(CliCodec, RoundTripPrintsInputFields) {
    const nlohmann::json doc{{"type", "bsm"},  {"msg_cnt", 5},     {"temp_id", 123456}, {"sec_mark", 4000},
                             {"lat", 285100000}, {"lon", -813990000}, {"elev", 300},       {"speed", 1000},
                             {"heading", 7200}};
    const auto hex = run("codec encode", doc.dump());
    ASSERT_EQ(hex.exit_code, 0) << hex.output;
    const auto back = run("codec decode --json " + hex.output.substr(0, hex.output.size() - 1));
    ASSERT_EQ(back.exit_code, 0);
    EXPECT_EQ(nlohmann::json::parse(back.output), doc);
}

TEST(CliScenario, RunWritesIdenticalMetricsTwice) {
    TempDir dir;
    const auto a = run("scenario run " + kScenario + " --out " + (dir.path / "a").string());
    ASSERT_EQ(a.exit_code, 0) << a.output;
    EXPECT_NE(a.output.find("delivered 20/20"), std::string::npos) << a.output;
    const auto b = run("scenario run " + kScenario + " --out " + (dir.path / "b").string());
    ASSERT_EQ(b.exit_code, 0);
    const auto csv = slurp(dir.path / "a" / "metrics.csv");
    EXPECT_EQ(csv.rfind("advisory_id,vehicle_id,delivery_ms,compliance_s\n", 0), 0U);
    EXPECT_EQ(csv, slurp(dir.path / "b" / "metrics.csv"));
    EXPECT_TRUE(fs::exists(dir.path / "a" / "summary.json"));

    std::ofstream(dir.path / "bad.json") << R"({"seed": 1})";
    const auto bad = run("scenario run " + (dir.path / "bad.json").string());
    EXPECT_EQ(bad.exit_code, 1);
    EXPECT_NE(bad.output.find("scenario error"), std::string::npos) << bad.output;
}

TEST(CliAdvise, UnreachableServiceFails) {
    const auto r = run("advise 12 20 600 --service http://127.0.0.1:1");
    EXPECT_EQ(r.exit_code, 1);
    EXPECT_NE(r.output.find("cannot reach service"), std::string::npos) << r.output;
}

TEST(CliGenai, MockScriptProducesTableRow) {
    const auto r = run("genai --script " CDA_SOURCE_DIR "/fixtures/mock_model_script.json --model mock --runner local --samples 4");
    EXPECT_EQ(r.exit_code, 0) << r.output;
    EXPECT_NE(r.output.find("model,runner,mean_s,median_s,avg_tokens"), std::string::npos);
    EXPECT_NE(r.output.find("\nmock,local,"), std::string::npos) << r.output;
    EXPECT_NE(r.output.find("applied ApplyAdvisorySpeed"), std::string::npos);
    EXPECT_NE(r.output.find("rejected: no_block"), std::string::npos) << r.output;
}

TEST(CliLive, BrokerServeFleetAdvise) {
    TempDir dir;
    Process broker({"broker", "--tcp", "127.0.0.1:0"});
    const auto broker_port = port_in(broker.read_line());
    ASSERT_NE(broker_port, 0);
    const auto broker_ep = "127.0.0.1:" + std::to_string(broker_port);

    Process serve({"serve", "--broker", broker_ep, "--http", "127.0.0.1:0", "--log", (dir.path / "adv.log").string(),
                   "--routes", kScenario, "--feed", CDA_SOURCE_DIR "/fixtures/fl511_feed.json"});
    const auto http_port = port_in(serve.read_line());
    ASSERT_NE(http_port, 0);
    const auto url = "http://127.0.0.1:" + std::to_string(http_port);

    Process fleet({"fleet", "--n", "4", "--routes", kScenario, "--broker", broker_ep, "--start", "3100", "--duration",
                   "30", "--profile", "wifi6"});
    ASSERT_NE(fleet.read_line().find("fleet of 4"), std::string::npos);

    auto r = run("advise 12 20 600 --cause congestion --service " + url);
    EXPECT_EQ(r.exit_code, 0) << r.output;
    EXPECT_EQ(r.output, "created advisory 1\n");
    r = run("advise 12 -1 600 --service " + url);
    EXPECT_EQ(r.exit_code, 1);
    EXPECT_NE(r.output.find("validation error [speed_mps]"), std::string::npos) << r.output;

    pubsub::BrokerClient sub({"127.0.0.1", broker_port}, "cli-test");
    sub.subscribe("cda/fl/adv/12");
    const auto e = sub.receive(std::chrono::seconds(3));
    ASSERT_TRUE(e);
    EXPECT_EQ(e->body, logged_create_frame(dir.path / "adv.log"));

    // Vehicles report in and slow towards the advisory.
    httplib::Client cli("127.0.0.1", http_port);
    nlohmann::json fleet_view;
    for (int i = 0; i < 100; ++i) {
        const auto res = cli.Get("/fleet");
        ASSERT_TRUE(res);
        fleet_view = nlohmann::json::parse(res->body);
        bool slowed = fleet_view.size() == 4;
        for (const auto& v : fleet_view) {
            slowed = slowed && v["speed_mps"].get<double>() < 25.0 && v["active_advisory_id"] == 1;
        }
        if (slowed) {
            break;
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(100));
    }
    ASSERT_EQ(fleet_view.size(), 4U) << fleet_view.dump();
    for (const auto& v : fleet_view) {
        EXPECT_EQ(v["segment_id"], 12);
        EXPECT_EQ(v["active_advisory_id"], 1);
        EXPECT_LT(v["speed_mps"].get<double>(), 25.0);
    }
    fleet.stop();
}

TEST(CliLive, CrashBetweenPersistAndPublishRecoversOnRestart) {
    TempDir dir;
    Process broker({"broker", "--tcp", "127.0.0.1:0"});
    const auto broker_port = port_in(broker.read_line());
    ASSERT_NE(broker_port, 0);
    const auto broker_ep = "127.0.0.1:" + std::to_string(broker_port);
    const auto log = (dir.path / "adv.log").string();

    pubsub::BrokerClient sub({"127.0.0.1", broker_port}, "watcher");
    sub.subscribe("cda/fl/adv/+");

    {
        Process faulty({"serve", "--broker", broker_ep, "--http", "127.0.0.1:0", "--log", log},
                       {"CDA_FAULT=crash_after_persist"});
        const auto port = port_in(faulty.read_line());
        ASSERT_NE(port, 0);
        const auto r = run("advise 7 15.5 900 --service http://127.0.0.1:" + std::to_string(port));
        EXPECT_EQ(r.exit_code, 1) << r.output;
        EXPECT_EQ(faulty.wait(), 86);
    }
    EXPECT_FALSE(sub.receive(std::chrono::milliseconds(300)));
    const auto persisted = logged_create_frame(log);
    ASSERT_FALSE(persisted.empty());

    Process restarted({"serve", "--broker", broker_ep, "--http", "127.0.0.1:0", "--log", log});
    EXPECT_EQ(restarted.read_line(), "recovered 1 pending publish(es), 1 sent");
    const auto e = sub.receive(std::chrono::seconds(3));
    ASSERT_TRUE(e);
    EXPECT_EQ(e->topic.str(), "cda/fl/adv/7");
    EXPECT_EQ(e->body, persisted);
    const auto adv = std::get<wire::AdvisoryPayload>(wire::decode_frame(e->body).message);
    EXPECT_EQ(adv.advisory_id, 1);
    EXPECT_EQ(adv.advisory_speed, 775);
    EXPECT_EQ(adv.duration_minutes, 15);
}
