#include "cda/pubsub/broker.hpp"

#include "cda/pubsub/topic.hpp"
#include "cda/wire/codec.hpp"

#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>

#include <array>
#include <cerrno>
#include <condition_variable>
#include <deque>
#include <iostream>

namespace cda::pubsub {

struct TcpBroker::Connection {
    explicit Connection(Fd socket) : fd(std::move(socket)) {}

    Fd fd;
    std::string client_id;  // written once by the reader thread, before registration

    std::mutex mutex;
    std::condition_variable cv;
    std::deque<std::vector<std::uint8_t>> out;
    bool closing = false;

    std::atomic<bool> reader_done{false};
    std::atomic<bool> writer_done{false};
    std::thread reader;
    std::thread writer;
};

TcpBroker::TcpBroker(BrokerOptions options) : options_(std::move(options)) {
    listener_ = tcp_listen(options_.tcp);
    tcp_port_ = local_port(listener_.get());
    if (options_.udp) {
        udp_ = udp_bind(*options_.udp);
        udp_port_ = local_port(udp_.get());
        udp_thread_ = std::thread([this] { udp_loop(); });
    }
    accept_thread_ = std::thread([this] { accept_loop(); });
}

TcpBroker::~TcpBroker() { stop(); }

void TcpBroker::stop() {
    if (stopping_.exchange(true)) {
        return;
    }
    ::shutdown(listener_.get(), SHUT_RDWR);
    if (accept_thread_.joinable()) {
        accept_thread_.join();
    }
    if (udp_thread_.joinable()) {
        udp_thread_.join();
    }
    std::list<std::shared_ptr<Connection>> all;
    {
        std::lock_guard lock(connections_mutex_);
        all.swap(connections_);
        by_client_.clear();
    }
    for (const auto& conn : all) {
        {
            std::lock_guard lock(conn->mutex);
            conn->closing = true;
        }
        conn->cv.notify_all();
        ::shutdown(conn->fd.get(), SHUT_RDWR);
    }
    for (const auto& conn : all) {
        if (conn->reader.joinable()) {
            conn->reader.join();
        }
        if (conn->writer.joinable()) {
            conn->writer.join();
        }
    }
}

TcpBroker::Stats TcpBroker::stats() const {
    Stats s;
    s.accepted = accepted_.load();
    s.protocol_disconnects = protocol_disconnects_.load();
    s.overflow_disconnects = overflow_disconnects_.load();
    s.datagrams_routed = datagrams_routed_.load();
    s.datagrams_rejected = datagrams_rejected_.load();
    {
        std::lock_guard lock(connections_mutex_);
        s.live_connections = by_client_.size();
    }
    s.routing = core_.stats();
    return s;
}

void TcpBroker::accept_loop() {
    while (!stopping_) {
        reap_finished();
        if (!wait_readable(listener_.get(), std::chrono::milliseconds(200))) {
            continue;
        }
        const int fd = ::accept4(listener_.get(), nullptr, nullptr, SOCK_CLOEXEC);
        if (fd < 0) {
            if (stopping_) {
                break;
            }
            continue;
        }
        const int one = 1;
        ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
        auto conn = std::make_shared<Connection>(Fd(fd));
        ++accepted_;
        {
            std::lock_guard lock(connections_mutex_);
            connections_.push_back(conn);
        }
        conn->writer = std::thread([this, conn] { write_loop(conn); });
        conn->reader = std::thread([this, conn] { serve(conn); });
    }
}

void TcpBroker::reap_finished() {
    std::list<std::shared_ptr<Connection>> done;
    {
        std::lock_guard lock(connections_mutex_);
        for (auto it = connections_.begin(); it != connections_.end();) {
            if ((*it)->reader_done && (*it)->writer_done) {
                done.push_back(*it);
                it = connections_.erase(it);
            } else {
                ++it;
            }
        }
    }
    for (const auto& conn : done) {
        conn->reader.join();
        conn->writer.join();
    }
}

namespace {

// Queue a frame for the writer. Returns false when the connection is closing
// or the queue is full; in the latter case the queue is replaced by a NOTICE
// and the connection is marked closing.
bool push_frame(std::mutex& m, std::condition_variable& cv, std::deque<std::vector<std::uint8_t>>& out,
                bool& closing, std::size_t limit, std::vector<std::uint8_t> frame, bool* overflowed) {
    {
        std::lock_guard lock(m);
        if (closing) {
            return false;
        }
        if (out.size() >= limit) {
            out.clear();
            out.push_back(encode_control(Op::Notice, "outbound queue overflow"));
            closing = true;
            if (overflowed) {
                *overflowed = true;
            }
        } else {
            out.push_back(std::move(frame));
        }
    }
    cv.notify_one();
    return true;
}

}  // namespace

void TcpBroker::enqueue(const std::string& client, const Envelope& envelope) {
    std::shared_ptr<Connection> conn;
    {
        std::lock_guard lock(connections_mutex_);
        const auto it = by_client_.find(client);
        if (it == by_client_.end()) {
            return;
        }
        conn = it->second;
    }
    bool overflowed = false;
    push_frame(conn->mutex, conn->cv, conn->out, conn->closing, options_.queue_limit,
               encode_control(Op::Pub, encode_pub_body(envelope)), &overflowed);
    if (overflowed) {
        ++overflow_disconnects_;
    }
}

void TcpBroker::write_loop(const std::shared_ptr<Connection>& conn) {
    while (true) {
        std::vector<std::uint8_t> frame;
        {
            std::unique_lock lock(conn->mutex);
            conn->cv.wait(lock, [&] { return !conn->out.empty() || conn->closing; });
            if (conn->out.empty()) {
                break;
            }
            frame = std::move(conn->out.front());
            conn->out.pop_front();
        }
        if (!write_all(conn->fd.get(), frame)) {
            std::lock_guard lock(conn->mutex);
            conn->closing = true;
            conn->out.clear();
            break;
        }
    }
    ::shutdown(conn->fd.get(), SHUT_RDWR);
    conn->writer_done = true;
}

void TcpBroker::serve(const std::shared_ptr<Connection>& conn) {
    FrameReader reader;
    std::array<std::uint8_t, 16 * 1024> buf{};
    bool open = true;
    while (open && !stopping_) {
        const ssize_t n = ::recv(conn->fd.get(), buf.data(), buf.size(), 0);
        if (n < 0 && errno == EINTR) {
            continue;
        }
        if (n <= 0) {
            break;
        }
        {
            std::lock_guard lock(conn->mutex);
            if (conn->closing) {
                break;
            }
        }
        try {
            reader.append(std::span<const std::uint8_t>(buf.data(), static_cast<std::size_t>(n)));
            while (auto frame = reader.next()) {
                handle(conn, *frame);
            }
        } catch (const ProtocolError& e) {
            ++protocol_disconnects_;
            {
                std::lock_guard lock(conn->mutex);
                if (!conn->closing) {
                    conn->out.push_back(encode_control(Op::Notice, std::string("protocol error: ") + e.what()));
                    conn->closing = true;
                }
            }
            conn->cv.notify_one();
            open = false;
        }
    }
    if (!conn->client_id.empty()) {
        bool owner = false;
        {
            std::lock_guard lock(connections_mutex_);
            const auto it = by_client_.find(conn->client_id);
            if (it != by_client_.end() && it->second == conn) {
                by_client_.erase(it);
                owner = true;
            }
        }
        if (owner) {
            core_.disconnect(conn->client_id);
        }
    }
    {
        std::lock_guard lock(conn->mutex);
        conn->closing = true;
    }
    conn->cv.notify_one();
    conn->reader_done = true;
}

void TcpBroker::handle(const std::shared_ptr<Connection>& conn, const ControlFrame& frame) {
    const auto reply = [&](std::vector<std::uint8_t> bytes) {
        bool overflowed = false;
        push_frame(conn->mutex, conn->cv, conn->out, conn->closing, options_.queue_limit, std::move(bytes),
                   &overflowed);
        if (overflowed) {
            ++overflow_disconnects_;
        }
    };
    const auto deliver = [this](const std::string& client, const Envelope& e) { enqueue(client, e); };

    if (conn->client_id.empty() && frame.op != Op::Connect) {
        throw ProtocolError("first frame must be CONNECT");
    }
    switch (frame.op) {
        case Op::Connect: {
            if (!conn->client_id.empty()) {
                throw ProtocolError("duplicate CONNECT");
            }
            const std::string id = decode_client_id(frame.body);
            std::shared_ptr<Connection> previous;
            core_.connect(id);
            {
                std::lock_guard lock(connections_mutex_);
                auto& slot = by_client_[id];
                previous = std::exchange(slot, conn);
            }
            conn->client_id = id;
            if (previous) {
                {
                    std::lock_guard lock(previous->mutex);
                    if (!previous->closing) {
                        previous->out.push_back(encode_control(Op::Notice, "session taken over"));
                        previous->closing = true;
                    }
                }
                previous->cv.notify_one();
            }
            break;
        }
        case Op::Sub:
        case Op::Unsub: {
            TopicPattern pattern;
            try {
                pattern = TopicPattern::parse(std::string(frame.body.begin(), frame.body.end()));
            } catch (const std::invalid_argument& e) {
                throw ProtocolError(e.what());
            }
            if (frame.op == Op::Sub) {
                core_.subscribe(conn->client_id, pattern, deliver);
            } else {
                core_.unsubscribe(conn->client_id, pattern);
            }
            break;
        }
        case Op::Pub: {
            const Envelope envelope = decode_pub_body(frame.body);
            core_.publish(conn->client_id, envelope, deliver);
            if (envelope.qos == Qos::AtLeastOnce) {
                reply(encode_control(Op::Ack, encode_ack_body(envelope.seq)));
            }
            break;
        }
        case Op::Ping:
            reply(encode_control(Op::Pong));
            break;
        case Op::Ack:
        case Op::Pong:
            break;
        case Op::Notice:
            throw ProtocolError("NOTICE is broker-to-client only");
    }
}

void TcpBroker::udp_loop() {
    std::array<std::uint8_t, 2048> buf{};
    while (!stopping_) {
        if (!wait_readable(udp_.get(), std::chrono::milliseconds(200))) {
            continue;
        }
        const ssize_t n = ::recv(udp_.get(), buf.data(), buf.size(), 0);
        if (n <= 0) {
            continue;
        }
        const std::span<const std::uint8_t> bytes(buf.data(), static_cast<std::size_t>(n));
        try {
            const auto decoded = wire::decode_frame(bytes);
            const auto* bsm = std::get_if<wire::BsmPayload>(&decoded.message);
            if (bsm == nullptr) {
                ++datagrams_rejected_;
                continue;
            }
            Envelope e{bsm_topic(options_.region, bsm->temp_id)};
            e.body.assign(bytes.begin(), bytes.end());
            core_.publish("udp", e, [this](const std::string& client, const Envelope& env) { enqueue(client, env); });
            ++datagrams_routed_;
        } catch (const wire::CodecError&) {
            ++datagrams_rejected_;
        }
    }
}

}  // namespace cda::pubsub
