#pragma once

#include "cda/pubsub/socket.hpp"

#include <nlohmann/json.hpp>

#include <stdexcept>
#include <string>
#include <vector>

namespace cda::advisory {

class LogError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Append-only log of JSON lines. Every append is flushed to disk before it
/// returns.
class AdvisoryLog {
public:
    /// Opens (creating if needed) and reads the existing entries. A torn last
    /// line left by a crash is dropped and truncated away; an unparsable line
    /// anywhere else throws LogError.
    explicit AdvisoryLog(std::string path);

    const std::vector<nlohmann::json>& recovered() const { return recovered_; }
    void append(const nlohmann::json& entry);
    const std::string& path() const { return path_; }

private:
    std::string path_;
    pubsub::Fd fd_;
    std::vector<nlohmann::json> recovered_;
};

}  // namespace cda::advisory
