#include "cda/pubsub/client.hpp"

#include <sys/socket.h>

#include <array>
#include <cerrno>
#include <system_error>

namespace cda::pubsub {

namespace {

constexpr std::chrono::milliseconds kBarrierTimeout{5000};

}  // namespace

BrokerClient::BrokerClient(const Endpoint& broker, std::string client_id, ClientOptions options)
    : id_(std::move(client_id)), options_(std::move(options)) {
    if (options_.impairment) {
        options_.impairment->validate();
        rng_.emplace(options_.impairment_seed);
    }
    try {
        fd_ = tcp_connect(broker, options_.connect_timeout);
    } catch (const std::system_error& e) {
        throw ConnectionError(std::string("cannot reach broker: ") + e.what());
    }
    open_ = true;
    reader_ = std::thread([this] { read_loop(); });
    send_frame(encode_control(Op::Connect, id_));
    barrier();
}

BrokerClient::~BrokerClient() { close(); }

void BrokerClient::close() {
    open_ = false;
    if (fd_.valid()) {
        ::shutdown(fd_.get(), SHUT_RDWR);
    }
    if (reader_.joinable()) {
        reader_.join();
    }
    cv_.notify_all();
}

std::optional<std::string> BrokerClient::notice() const {
    std::lock_guard lock(mutex_);
    return notice_;
}

BrokerClient::Stats BrokerClient::stats() const {
    std::lock_guard lock(mutex_);
    return stats_;
}

void BrokerClient::send_frame(const std::vector<std::uint8_t>& frame) {
    if (!open_) {
        throw ConnectionError("connection closed");
    }
    std::lock_guard lock(write_mutex_);
    if (!write_all(fd_.get(), frame)) {
        open_ = false;
        throw ConnectionError("connection lost while writing");
    }
}

bool BrokerClient::impaired_drop() {
    if (!rng_ || options_.impairment->loss_rate <= 0.0) {
        return false;
    }
    std::lock_guard lock(rng_mutex_);
    return rng_->unit() < options_.impairment->loss_rate;
}

void BrokerClient::barrier() {
    std::unique_lock lock(mutex_);
    const std::uint64_t target = pongs_ + 1;
    lock.unlock();
    send_frame(encode_control(Op::Ping));
    lock.lock();
    const bool ok = cv_.wait_for(lock, kBarrierTimeout, [&] { return pongs_ >= target || !open_; });
    if (!ok || pongs_ < target) {
        throw ConnectionError(notice_ ? "broker closed the session: " + *notice_ : "broker did not answer PING");
    }
}

void BrokerClient::subscribe(std::string_view pattern) {
    TopicPattern::parse(pattern);
    send_frame(encode_control(Op::Sub, pattern));
    barrier();
}

void BrokerClient::unsubscribe(std::string_view pattern) {
    TopicPattern::parse(pattern);
    send_frame(encode_control(Op::Unsub, pattern));
    barrier();
}

std::uint64_t BrokerClient::publish(const Topic& topic, std::span<const std::uint8_t> body, Qos qos, bool retain) {
    if (!open_) {
        throw ConnectionError("connection closed");
    }
    Envelope envelope{topic, qos, retain, 0, {body.begin(), body.end()}};
    {
        std::lock_guard lock(mutex_);
        envelope.seq = next_seq_++;
    }
    const auto frame = encode_control(Op::Pub, encode_pub_body(envelope));
    if (qos == Qos::BestEffort) {
        if (impaired_drop()) {
            std::lock_guard lock(mutex_);
            ++stats_.simulated_drops;
        } else {
            send_frame(frame);
        }
        return envelope.seq;
    }
    for (int attempt = 0; attempt < options_.max_attempts; ++attempt) {
        if (attempt > 0) {
            std::lock_guard lock(mutex_);
            ++stats_.retransmits;
        }
        if (impaired_drop()) {
            std::lock_guard lock(mutex_);
            ++stats_.simulated_drops;
        } else {
            send_frame(frame);
        }
        std::unique_lock lock(mutex_);
        const bool acked = cv_.wait_for(lock, options_.ack_timeout,
                                        [&] { return acked_.count(envelope.seq) != 0 || !open_; });
        if (acked && acked_.erase(envelope.seq) != 0) {
            return envelope.seq;
        }
        if (!open_) {
            throw ConnectionError("connection closed while awaiting ACK");
        }
    }
    throw DeliveryError("no ACK for seq " + std::to_string(envelope.seq) + " after " +
                        std::to_string(options_.max_attempts) + " attempts");
}

std::optional<Envelope> BrokerClient::receive(std::chrono::milliseconds timeout) {
    const auto deadline = std::chrono::steady_clock::now() + timeout;
    std::unique_lock lock(mutex_);
    while (true) {
        if (!inbox_.empty()) {
            const auto ready = inbox_.front().ready_at;
            if (ready <= std::chrono::steady_clock::now()) {
                Envelope e = std::move(inbox_.front().envelope);
                inbox_.pop_front();
                return e;
            }
            if (ready > deadline) {
                cv_.wait_until(lock, deadline);
                return std::nullopt;
            }
            cv_.wait_until(lock, ready);
            continue;
        }
        if (!open_) {
            return std::nullopt;
        }
        if (cv_.wait_until(lock, deadline) == std::cv_status::timeout && inbox_.empty()) {
            return std::nullopt;
        }
    }
}

void BrokerClient::read_loop() {
    FrameReader reader;
    std::array<std::uint8_t, 16 * 1024> buf{};
    while (true) {
        const ssize_t n = ::recv(fd_.get(), buf.data(), buf.size(), 0);
        if (n < 0 && errno == EINTR) {
            continue;
        }
        if (n <= 0) {
            break;
        }
        try {
            reader.append(std::span<const std::uint8_t>(buf.data(), static_cast<std::size_t>(n)));
            while (auto frame = reader.next()) {
                switch (frame->op) {
                    case Op::Ack: {
                        const auto seq = decode_ack_body(frame->body);
                        if (impaired_drop()) {
                            std::lock_guard lock(mutex_);
                            ++stats_.simulated_drops;
                            break;
                        }
                        std::lock_guard lock(mutex_);
                        acked_.insert(seq);
                        break;
                    }
                    case Op::Pong: {
                        std::lock_guard lock(mutex_);
                        ++pongs_;
                        break;
                    }
                    case Op::Pub: {
                        Envelope e = decode_pub_body(frame->body);
                        auto ready = std::chrono::steady_clock::now();
                        if (rng_) {
                            std::lock_guard rng_lock(rng_mutex_);
                            ready += std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                                std::chrono::duration<double, std::milli>(
                                    linksim::sample_delay_ms(*options_.impairment, *rng_)));
                        }
                        std::lock_guard lock(mutex_);
                        // The stream is ordered, so a sampled delay never lets a
                        // frame overtake the one before it.
                        if (!inbox_.empty() && inbox_.back().ready_at > ready) {
                            ready = inbox_.back().ready_at;
                        }
                        inbox_.push_back(Inbound{ready, std::move(e)});
                        break;
                    }
                    case Op::Notice: {
                        std::lock_guard lock(mutex_);
                        notice_ = std::string(frame->body.begin(), frame->body.end());
                        break;
                    }
                    default:
                        break;
                }
                cv_.notify_all();
            }
        } catch (const ProtocolError&) {
            break;
        }
    }
    open_ = false;
    cv_.notify_all();
}

}  // namespace cda::pubsub
