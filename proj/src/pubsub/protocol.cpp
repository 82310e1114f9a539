#include "cda/pubsub/protocol.hpp"

#include <algorithm>

namespace cda::pubsub {

namespace {

constexpr std::uint8_t kFlagAtLeastOnce = 0x01;
constexpr std::uint8_t kFlagRetain = 0x02;

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
    out.push_back(static_cast<std::uint8_t>(v >> 8));
    out.push_back(static_cast<std::uint8_t>(v & 0xFF));
}

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
    for (int shift = 56; shift >= 0; shift -= 8) {
        out.push_back(static_cast<std::uint8_t>((v >> shift) & 0xFF));
    }
}

std::uint64_t get_be(std::span<const std::uint8_t> bytes) {
    std::uint64_t v = 0;
    for (const std::uint8_t b : bytes) {
        v = (v << 8) | b;
    }
    return v;
}

bool known_op(std::uint8_t code) {
    return code >= static_cast<std::uint8_t>(Op::Connect) && code <= static_cast<std::uint8_t>(Op::Notice);
}

}  // namespace

std::vector<std::uint8_t> encode_control(Op op, std::span<const std::uint8_t> body) {
    const std::size_t len = body.size() + 1;
    if (len > kMaxControlFrame) {
        throw ProtocolError("control frame exceeds " + std::to_string(kMaxControlFrame) + " bytes");
    }
    std::vector<std::uint8_t> out;
    out.reserve(len + 4);
    for (int shift = 24; shift >= 0; shift -= 8) {
        out.push_back(static_cast<std::uint8_t>((len >> shift) & 0xFF));
    }
    out.push_back(static_cast<std::uint8_t>(op));
    out.insert(out.end(), body.begin(), body.end());
    return out;
}

std::vector<std::uint8_t> encode_control(Op op, std::string_view text) {
    const auto* p = reinterpret_cast<const std::uint8_t*>(text.data());
    return encode_control(op, std::span<const std::uint8_t>(p, text.size()));
}

std::vector<std::uint8_t> encode_pub_body(const Envelope& envelope) {
    const std::string& topic = envelope.topic.str();
    if (topic.size() > 0xFFFF) {
        throw ProtocolError("topic too long");
    }
    std::vector<std::uint8_t> out;
    out.reserve(11 + topic.size() + envelope.body.size());
    std::uint8_t flags = 0;
    if (envelope.qos == Qos::AtLeastOnce) {
        flags |= kFlagAtLeastOnce;
    }
    if (envelope.retain) {
        flags |= kFlagRetain;
    }
    out.push_back(flags);
    put_u64(out, envelope.seq);
    put_u16(out, static_cast<std::uint16_t>(topic.size()));
    out.insert(out.end(), topic.begin(), topic.end());
    out.insert(out.end(), envelope.body.begin(), envelope.body.end());
    return out;
}

Envelope decode_pub_body(std::span<const std::uint8_t> body) {
    if (body.size() < 11) {
        throw ProtocolError("PUB body truncated");
    }
    const std::uint8_t flags = body[0];
    if (flags & ~(kFlagAtLeastOnce | kFlagRetain)) {
        throw ProtocolError("PUB carries unknown flag bits");
    }
    const std::uint64_t seq = get_be(body.subspan(1, 8));
    const std::size_t topic_len = get_be(body.subspan(9, 2));
    if (body.size() < 11 + topic_len) {
        throw ProtocolError("PUB topic truncated");
    }
    const auto topic_bytes = body.subspan(11, topic_len);
    Envelope e{[&] {
        try {
            return Topic::parse(std::string(topic_bytes.begin(), topic_bytes.end()));
        } catch (const std::invalid_argument& err) {
            throw ProtocolError(err.what());
        }
    }()};
    e.qos = (flags & kFlagAtLeastOnce) ? Qos::AtLeastOnce : Qos::BestEffort;
    e.retain = (flags & kFlagRetain) != 0;
    e.seq = seq;
    const auto payload = body.subspan(11 + topic_len);
    e.body.assign(payload.begin(), payload.end());
    return e;
}

std::vector<std::uint8_t> encode_ack_body(std::uint64_t seq) {
    std::vector<std::uint8_t> out;
    put_u64(out, seq);
    return out;
}

std::uint64_t decode_ack_body(std::span<const std::uint8_t> body) {
    if (body.size() != 8) {
        throw ProtocolError("ACK body must be 8 bytes");
    }
    return get_be(body);
}

std::string decode_client_id(std::span<const std::uint8_t> body) {
    if (body.empty() || body.size() > kMaxClientIdLength) {
        throw ProtocolError("client id must be 1.." + std::to_string(kMaxClientIdLength) + " bytes");
    }
    if (!std::all_of(body.begin(), body.end(), [](std::uint8_t c) { return c > 0x20 && c < 0x7F; })) {
        throw ProtocolError("client id must be printable ASCII without spaces");
    }
    return {body.begin(), body.end()};
}

void FrameReader::append(std::span<const std::uint8_t> bytes) {
    if (read_pos_ > 0 && read_pos_ == buffer_.size()) {
        buffer_.clear();
        read_pos_ = 0;
    }
    buffer_.insert(buffer_.end(), bytes.begin(), bytes.end());
}

std::optional<ControlFrame> FrameReader::next() {
    const std::size_t available = buffer_.size() - read_pos_;
    if (available < 4) {
        return std::nullopt;
    }
    const auto header = std::span<const std::uint8_t>(buffer_).subspan(read_pos_, 4);
    const std::size_t len = get_be(header);
    if (len == 0 || len > kMaxControlFrame) {
        throw ProtocolError("bad control frame length " + std::to_string(len));
    }
    if (available < 4 + len) {
        return std::nullopt;
    }
    const std::uint8_t op = buffer_[read_pos_ + 4];
    if (!known_op(op)) {
        throw ProtocolError("unknown op " + std::to_string(op));
    }
    ControlFrame frame{static_cast<Op>(op), {}};
    const auto begin = buffer_.begin() + static_cast<std::ptrdiff_t>(read_pos_ + 5);
    frame.body.assign(begin, begin + static_cast<std::ptrdiff_t>(len - 1));
    read_pos_ += 4 + len;
    if (read_pos_ > 4096 && read_pos_ * 2 > buffer_.size()) {
        buffer_.erase(buffer_.begin(), buffer_.begin() + static_cast<std::ptrdiff_t>(read_pos_));
        read_pos_ = 0;
    }
    return frame;
}

}  // namespace cda::pubsub
