#include "cda/advisory/http.hpp"

#include <httplib.h>

#include <cerrno>
#include <system_error>

namespace cda::advisory {

namespace {

void send_json(httplib::Response& res, int status, const nlohmann::json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& message, const std::string& field = {}) {
    nlohmann::json body{{"error", message}};
    if (!field.empty()) {
        body["field"] = field;
    }
    send_json(res, status, body);
}

std::optional<std::uint16_t> parse_id(const std::string& text) {
    try {
        const auto v = std::stoul(text);
        if (v <= 65535) {
            return static_cast<std::uint16_t>(v);
        }
    } catch (const std::exception&) {
    }
    return std::nullopt;
}

nlohmann::json record_with_state(const AdvisoryService& svc, const AdvisoryRecord& r) {
    auto j = to_json(r);
    j["pending"] = svc.is_pending(r.advisory_id);
    return j;
}

}  // namespace

HttpFrontend::HttpFrontend(AdvisoryService& service, const pubsub::Endpoint& bind)
    : service_(service), server_(std::make_unique<httplib::Server>()) {
    auto& srv = *server_;
    srv.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                             {"Access-Control-Allow-Methods", "GET, POST, DELETE, OPTIONS"},
                             {"Access-Control-Allow-Headers", "Content-Type"}});
    srv.Options(R"(/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });

    srv.Post("/advisories", [this](const httplib::Request& req, httplib::Response& res) {
        nlohmann::json body;
        try {
            body = nlohmann::json::parse(req.body);
        } catch (const nlohmann::json::parse_error&) {
            return send_error(res, 400, "request body is not JSON");
        }
        try {
            const auto r = service_.create(parse_create_request(body));
            send_json(res, 201, record_with_state(service_, r));
        } catch (const ValidationError& e) {
            send_error(res, 422, e.what(), e.field());
        } catch (const Conflict& e) {
            send_error(res, 409, e.what());
        }
    });

    srv.Delete(R"(/advisories/(\d+))", [this](const httplib::Request& req, httplib::Response& res) {
        const auto id = parse_id(req.matches[1]);
        if (!id) {
            return send_error(res, 404, "no such advisory");
        }
        try {
            send_json(res, 200, record_with_state(service_, service_.cancel(*id)));
        } catch (const NotFound& e) {
            send_error(res, 404, e.what());
        } catch (const Conflict& e) {
            send_error(res, 409, e.what());
        }
    });

    srv.Get("/advisories", [this](const httplib::Request&, httplib::Response& res) {
        nlohmann::json out = nlohmann::json::array();
        for (const auto& r : service_.advisories()) {
            out.push_back(record_with_state(service_, r));
        }
        send_json(res, 200, out);
    });

    srv.Get(R"(/advisories/(\d+))", [this](const httplib::Request& req, httplib::Response& res) {
        const auto id = parse_id(req.matches[1]);
        const auto r = id ? service_.find(*id) : std::nullopt;
        if (!r) {
            return send_error(res, 404, "no such advisory");
        }
        send_json(res, 200, record_with_state(service_, *r));
    });

    srv.Get("/fleet", [this](const httplib::Request&, httplib::Response& res) {
        nlohmann::json out = nlohmann::json::array();
        for (const auto& e : service_.fleet()) {
            out.push_back(to_json(e));
        }
        send_json(res, 200, out);
    });

    srv.Get("/traffic", [this](const httplib::Request&, httplib::Response& res) {
        const auto snap = service_.traffic();
        nlohmann::json events = nlohmann::json::array();
        for (const auto& e : snap.events) {
            events.push_back(to_json(e));
        }
        send_json(res, 200, {{"events", events}, {"diagnostics", snap.diagnostics}});
    });

    srv.Get("/stream", [this](const httplib::Request&, httplib::Response& res) {
        auto sub = service_.stream();
        res.set_header("Cache-Control", "no-cache");
        res.set_chunked_content_provider(
            "application/x-ndjson",
            [sub](std::size_t, httplib::DataSink& sink) {
                if (!sink.is_writable()) {
                    sub->close();
                    return false;
                }
                if (auto line = sub->next(std::chrono::milliseconds(250))) {
                    line->push_back('\n');
                    return sink.write(line->data(), line->size());
                }
                if (sub->closed()) {
                    sink.done();
                }
                return true;
            },
            [sub](bool) { sub->close(); });
    });

    const int port = bind.port == 0 ? srv.bind_to_any_port(bind.host) : (srv.bind_to_port(bind.host, bind.port) ? bind.port : -1);
    if (port < 0) {
        throw std::system_error(EADDRINUSE, std::generic_category(), "cannot bind HTTP on " + bind.str());
    }
    port_ = static_cast<std::uint16_t>(port);
    thread_ = std::thread([this] { server_->listen_after_bind(); });
    server_->wait_until_ready();
}

HttpFrontend::~HttpFrontend() { stop(); }

void HttpFrontend::stop() {
    if (!thread_.joinable()) {
        return;
    }
    service_.hub().close_all();
    server_->stop();
    thread_.join();
}

}  // namespace cda::advisory
