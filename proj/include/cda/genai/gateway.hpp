#pragma once

#include <chrono>
#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace cda::genai {

class TransportError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class TimeoutError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A completion backend. complete() returns the full response text or throws
/// TransportError / TimeoutError.
class ModelClient {
public:
    virtual ~ModelClient() = default;
    virtual const std::string& name() const = 0;
    virtual const std::string& runner() const = 0;
    virtual std::string complete(const std::string& prompt, std::chrono::milliseconds timeout) = 0;
};

struct ScriptStep {
    std::uint32_t delay_ms = 0;
    std::string response_text;
};

/// Parses a fixture document: [{"delay_ms": N, "response_text": "..."}, ...].
/// Throws std::invalid_argument on a malformed or empty script.
std::vector<ScriptStep> parse_script(const std::string& json_text);
std::vector<ScriptStep> load_script(const std::string& path);

/// Replays a script in order, wrapping around at the end. The prompt is
/// ignored, so a given call index always yields the same response.
class MockClient : public ModelClient {
public:
    MockClient(std::string name, std::string runner, std::vector<ScriptStep> script);

    const std::string& name() const override { return name_; }
    const std::string& runner() const override { return runner_; }
    std::string complete(const std::string& prompt, std::chrono::milliseconds timeout) override;

private:
    std::string name_;
    std::string runner_;
    std::vector<ScriptStep> script_;
    std::size_t next_ = 0;
    std::mutex mutex_;
};

/// Minimal completion contract: POST {"prompt": "..."} to the endpoint and
/// read {"text": "..."} back. The bearer token comes from CDA_MODEL_TOKEN
/// when that variable is set.
class HttpClient : public ModelClient {
public:
    /// Throws std::invalid_argument for a URL that is not http(s)://host[:port]/path.
    HttpClient(std::string name, std::string runner, const std::string& endpoint_url);

    const std::string& name() const override { return name_; }
    const std::string& runner() const override { return runner_; }
    std::string complete(const std::string& prompt, std::chrono::milliseconds timeout) override;

private:
    std::string name_;
    std::string runner_;
    std::string base_;  // scheme://host:port
    std::string path_;
};

struct PromptVehicle {
    std::uint32_t vehicle_id = 0;
    std::uint16_t segment_id = 0;
    double speed_mps = 0.0;
    double driver_set_speed_mps = 0.0;
};

struct PromptAdvisory {
    std::uint16_t advisory_id = 0;
    std::uint16_t segment_id = 0;
    double speed_mps = 0.0;
};

struct PromptContext {
    std::optional<PromptVehicle> vehicle;
    std::optional<PromptAdvisory> advisory;
    std::vector<std::string> feed_summary;
};

/// Fixed instructions describing the metaaction grammar followed by the
/// serialized context. Identical contexts give identical prompts.
std::string build_prompt(const PromptContext& context);

/// Whitespace-delimited token count.
std::size_t count_tokens(const std::string& text);

struct Sample {
    bool ok = false;
    std::string text;
    double latency_s = 0.0;
    std::size_t token_count = 0;
    std::string error;  // "timeout: ..." or "transport: ..." when !ok
};

inline constexpr std::chrono::milliseconds kDefaultTimeout{30000};

/// Times one completion from send to full response. Failures come back as
/// samples with ok == false.
Sample request(ModelClient& client, const std::string& prompt, std::chrono::milliseconds timeout = kDefaultTimeout);

struct LatencyReport {
    std::string model;
    std::string runner;
    double mean_s = 0.0;
    double median_s = 0.0;
    long avg_tokens = 0;
    std::size_t n_samples = 0;
    std::size_t n_failed = 0;
};

/// Mean and median latency plus rounded mean token count over the
/// successful samples. Throws std::invalid_argument when there are none.
LatencyReport aggregate_stats(const std::string& model, const std::string& runner,
                              const std::vector<Sample>& samples);

std::string csv_header();
/// model,runner,mean_s,median_s,avg_tokens with two-decimal seconds.
std::string csv_row(const LatencyReport& report);

/// Thread-safe sample sink.
class StatsAccumulator {
public:
    void add(Sample s);
    std::vector<Sample> samples() const;
    std::size_t failures() const;

private:
    mutable std::mutex mutex_;
    std::vector<Sample> samples_;
};

}  // namespace cda::genai
