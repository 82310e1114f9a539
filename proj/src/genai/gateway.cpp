#include "cda/genai/gateway.hpp"

#include <httplib.h>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <regex>
#include <sstream>
#include <thread>

namespace cda::genai {

using Clock = std::chrono::steady_clock;

std::vector<ScriptStep> parse_script(const std::string& json_text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::parse_error& e) {
        throw std::invalid_argument(std::string("script is not JSON: ") + e.what());
    }
    if (!doc.is_array() || doc.empty()) {
        throw std::invalid_argument("script must be a non-empty array");
    }
    std::vector<ScriptStep> steps;
    for (const auto& entry : doc) {
        if (!entry.is_object() || !entry.contains("delay_ms") || !entry.contains("response_text") ||
            !entry["delay_ms"].is_number_unsigned() || !entry["response_text"].is_string()) {
            throw std::invalid_argument("script entries need unsigned delay_ms and string response_text");
        }
        steps.push_back({entry["delay_ms"].get<std::uint32_t>(), entry["response_text"].get<std::string>()});
    }
    return steps;
}

std::vector<ScriptStep> load_script(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::invalid_argument("cannot read script " + path);
    }
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_script(ss.str());
}

MockClient::MockClient(std::string name, std::string runner, std::vector<ScriptStep> script)
    : name_(std::move(name)), runner_(std::move(runner)), script_(std::move(script)) {
    if (script_.empty()) {
        throw std::invalid_argument("mock client needs at least one script step");
    }
}

std::string MockClient::complete(const std::string&, std::chrono::milliseconds timeout) {
    ScriptStep step;
    {
        std::lock_guard lock(mutex_);
        step = script_[next_];
        next_ = (next_ + 1) % script_.size();
    }
    const std::chrono::milliseconds delay(step.delay_ms);
    if (delay > timeout) {
        std::this_thread::sleep_for(timeout);
        throw TimeoutError("scripted delay " + std::to_string(step.delay_ms) + " ms exceeds timeout");
    }
    std::this_thread::sleep_for(delay);
    return step.response_text;
}

HttpClient::HttpClient(std::string name, std::string runner, const std::string& endpoint_url)
    : name_(std::move(name)), runner_(std::move(runner)) {
    static const std::regex kUrl(R"(^(http://[^/:]+(:[0-9]{1,5})?)(/.*)?$)");
    std::smatch m;
    if (!std::regex_match(endpoint_url, m, kUrl)) {
        throw std::invalid_argument("endpoint must look like http://host[:port]/path: " + endpoint_url);
    }
    base_ = m[1].str();
    path_ = m[3].matched ? m[3].str() : "/";
}

std::string HttpClient::complete(const std::string& prompt, std::chrono::milliseconds timeout) {
    httplib::Client cli(base_);
    const auto secs = std::chrono::duration_cast<std::chrono::seconds>(timeout);
    const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(timeout - secs);
    cli.set_connection_timeout(secs.count(), usecs.count());
    cli.set_read_timeout(secs.count(), usecs.count());
    cli.set_write_timeout(secs.count(), usecs.count());
    httplib::Headers headers;
    if (const char* token = std::getenv("CDA_MODEL_TOKEN"); token && *token) {
        headers.emplace("Authorization", std::string("Bearer ") + token);
    }
    const auto start = Clock::now();
    const auto res = cli.Post(path_, headers, nlohmann::json{{"prompt", prompt}}.dump(), "application/json");
    if (!res) {
        if (Clock::now() - start >= timeout) {
            throw TimeoutError("no response within " + std::to_string(timeout.count()) + " ms");
        }
        throw TransportError(httplib::to_string(res.error()));
    }
    if (res->status != 200) {
        throw TransportError("HTTP " + std::to_string(res->status));
    }
    try {
        const auto doc = nlohmann::json::parse(res->body);
        return doc.at("text").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        throw TransportError(std::string("bad response body: ") + e.what());
    }
}

std::string build_prompt(const PromptContext& context) {
    std::ostringstream os;
    os << "You assist the longitudinal control of a connected vehicle.\n"
          "Reply with at most one command block in this exact form:\n"
          "```metaaction\n"
          "action: <SetCruiseSpeed|SetFollowGap|ApplyAdvisorySpeed|CancelAdvisory|DriverNotice>\n"
          "params:\n"
          "  <key>: <number or string>\n"
          "```\n"
          "Parameters: SetCruiseSpeed{speed_mps}, SetFollowGap{gap_s}, "
          "ApplyAdvisorySpeed{segment_id, speed_mps, duration_s}, CancelAdvisory{segment_id}, "
          "DriverNotice{text, severity: info|warn}.\n"
          "Commands outside the vehicle's safety envelope are discarded.\n";
    char buf[64];
    if (context.vehicle) {
        const auto& v = *context.vehicle;
        os << "\nVehicle " << v.vehicle_id << " on segment " << v.segment_id;
        std::snprintf(buf, sizeof buf, ", speed %.2f m/s", v.speed_mps);
        os << buf;
        std::snprintf(buf, sizeof buf, ", set speed %.2f m/s.\n", v.driver_set_speed_mps);
        os << buf;
    }
    if (context.advisory) {
        const auto& a = *context.advisory;
        std::snprintf(buf, sizeof buf, "%.2f", a.speed_mps);
        os << "\nActive advisory " << a.advisory_id << ": segment " << a.segment_id << " advisory speed " << buf
           << " m/s.\n";
    }
    if (!context.feed_summary.empty()) {
        os << "\nTraffic feed:\n";
        for (const auto& line : context.feed_summary) {
            os << "- " << line << "\n";
        }
    }
    return os.str();
}

std::size_t count_tokens(const std::string& text) {
    std::istringstream in(text);
    std::size_t n = 0;
    for (std::string word; in >> word;) {
        ++n;
    }
    return n;
}

Sample request(ModelClient& client, const std::string& prompt, std::chrono::milliseconds timeout) {
    Sample s;
    const auto start = Clock::now();
    try {
        s.text = client.complete(prompt, timeout);
        s.ok = true;
        s.token_count = count_tokens(s.text);
    } catch (const TimeoutError& e) {
        s.error = std::string("timeout: ") + e.what();
    } catch (const TransportError& e) {
        s.error = std::string("transport: ") + e.what();
    }
    s.latency_s = std::chrono::duration<double>(Clock::now() - start).count();
    return s;
}

LatencyReport aggregate_stats(const std::string& model, const std::string& runner,
                              const std::vector<Sample>& samples) {
    std::vector<double> latencies;
    double tokens = 0.0;
    LatencyReport r{model, runner};
    for (const auto& s : samples) {
        if (!s.ok) {
            ++r.n_failed;
            continue;
        }
        latencies.push_back(s.latency_s);
        tokens += static_cast<double>(s.token_count);
    }
    if (latencies.empty()) {
        throw std::invalid_argument("no successful samples");
    }
    std::sort(latencies.begin(), latencies.end());
    const std::size_t n = latencies.size();
    double sum = 0.0;
    for (const double x : latencies) {
        sum += x;
    }
    r.n_samples = n;
    r.mean_s = sum / static_cast<double>(n);
    r.median_s = n % 2 == 1 ? latencies[n / 2] : (latencies[n / 2 - 1] + latencies[n / 2]) / 2.0;
    r.avg_tokens = std::lround(tokens / static_cast<double>(n));
    return r;
}

std::string csv_header() { return "model,runner,mean_s,median_s,avg_tokens"; }

std::string csv_row(const LatencyReport& report) {
    char buf[64];
    std::snprintf(buf, sizeof buf, ",%.2f,%.2f,%ld", report.mean_s, report.median_s, report.avg_tokens);
    return report.model + "," + report.runner + buf;
}

void StatsAccumulator::add(Sample s) {
    std::lock_guard lock(mutex_);
    samples_.push_back(std::move(s));
}

std::vector<Sample> StatsAccumulator::samples() const {
    std::lock_guard lock(mutex_);
    return samples_;
}

std::size_t StatsAccumulator::failures() const {
    std::lock_guard lock(mutex_);
    return static_cast<std::size_t>(std::count_if(samples_.begin(), samples_.end(), [](const Sample& s) { return !s.ok; }));
}

}  // namespace cda::genai
