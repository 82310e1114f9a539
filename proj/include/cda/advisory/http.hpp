#pragma once

#include "cda/advisory/service.hpp"
#include "cda/pubsub/socket.hpp"

#include <memory>
#include <thread>

namespace httplib {
class Server;
}

namespace cda::advisory {

/// HTTP surface of the service:
///   POST /advisories, DELETE /advisories/{id}, GET /advisories[/{id}],
///   GET /fleet, GET /traffic, GET /stream (one JSON event per line).
class HttpFrontend {
public:
    /// Binds immediately (port 0 picks an ephemeral port) and serves on a
    /// background thread. Throws std::system_error when the bind fails.
    HttpFrontend(AdvisoryService& service, const pubsub::Endpoint& bind);
    ~HttpFrontend();

    HttpFrontend(const HttpFrontend&) = delete;
    HttpFrontend& operator=(const HttpFrontend&) = delete;

    std::uint16_t port() const { return port_; }
    void stop();

private:
    AdvisoryService& service_;
    std::unique_ptr<httplib::Server> server_;
    std::uint16_t port_ = 0;
    std::thread thread_;
};

}  // namespace cda::advisory
