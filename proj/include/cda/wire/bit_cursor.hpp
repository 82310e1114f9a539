#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace cda::wire {

/// Appends unsigned fields most-significant bit first.
class BitWriter {
public:
    /// Throws std::out_of_range when value does not fit in width bits
    /// or width is outside 1..64.
    BitWriter& pack_uint(std::uint64_t value, unsigned width);

    /// Zero-fills up to the next byte boundary.
    BitWriter& pad_to_byte();

    std::size_t bit_offset() const { return bit_offset_; }
    const std::vector<std::uint8_t>& bytes() const { return buffer_; }
    std::vector<std::uint8_t> take() && { return std::move(buffer_); }

private:
    std::vector<std::uint8_t> buffer_;
    std::size_t bit_offset_ = 0;
};

class BitReader {
public:
    explicit BitReader(std::span<const std::uint8_t> buffer) : buffer_(buffer) {}

    /// Throws std::out_of_range when fewer than width bits remain.
    std::uint64_t read_uint(unsigned width);

    std::size_t bit_offset() const { return bit_offset_; }
    std::size_t bits_remaining() const { return buffer_.size() * 8 - bit_offset_; }

    /// True when every bit from the cursor to the end of the buffer is zero.
    bool rest_is_zero() const;

private:
    std::span<const std::uint8_t> buffer_;
    std::size_t bit_offset_ = 0;
};

/// value + offset, checked against [0, 2^width). Throws std::out_of_range.
std::uint64_t encode_offset_field(std::int64_t value, std::int64_t offset, unsigned width);

inline std::int64_t decode_offset_field(std::uint64_t raw, std::int64_t offset) {
    return static_cast<std::int64_t>(raw) - offset;
}

}  // namespace cda::wire
