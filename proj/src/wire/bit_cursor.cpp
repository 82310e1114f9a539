#include "cda/wire/bit_cursor.hpp"

#include <stdexcept>
#include <string>

namespace cda::wire {

namespace {

void check_width(unsigned width) {
    if (width == 0 || width > 64) {
        throw std::out_of_range("bit width " + std::to_string(width) + " outside 1..64");
    }
}

bool fits(std::uint64_t value, unsigned width) {
    return width == 64 || value < (std::uint64_t{1} << width);
}

}  // namespace

BitWriter& BitWriter::pack_uint(std::uint64_t value, unsigned width) {
    check_width(width);
    if (!fits(value, width)) {
        throw std::out_of_range("value " + std::to_string(value) + " does not fit in " +
                                std::to_string(width) + " bits");
    }
    for (unsigned i = width; i-- > 0;) {
        if (bit_offset_ % 8 == 0) {
            buffer_.push_back(0);
        }
        if ((value >> i) & 1U) {
            buffer_.back() |= static_cast<std::uint8_t>(0x80U >> (bit_offset_ % 8));
        }
        ++bit_offset_;
    }
    return *this;
}

BitWriter& BitWriter::pad_to_byte() {
    bit_offset_ = buffer_.size() * 8;
    return *this;
}

std::uint64_t BitReader::read_uint(unsigned width) {
    check_width(width);
    if (bits_remaining() < width) {
        throw std::out_of_range("read past end of buffer");
    }
    std::uint64_t value = 0;
    for (unsigned i = 0; i < width; ++i) {
        const std::uint8_t byte = buffer_[bit_offset_ / 8];
        const unsigned bit = (byte >> (7 - bit_offset_ % 8)) & 1U;
        value = (value << 1) | bit;
        ++bit_offset_;
    }
    return value;
}

bool BitReader::rest_is_zero() const {
    for (std::size_t pos = bit_offset_; pos < buffer_.size() * 8; ++pos) {
        if ((buffer_[pos / 8] >> (7 - pos % 8)) & 1U) {
            return false;
        }
    }
    return true;
}

std::uint64_t encode_offset_field(std::int64_t value, std::int64_t offset, unsigned width) {
    check_width(width);
    const std::int64_t shifted = value + offset;
    if (shifted < 0 || !fits(static_cast<std::uint64_t>(shifted), width)) {
        throw std::out_of_range("offset field " + std::to_string(value) + "+" +
                                std::to_string(offset) + " outside " + std::to_string(width) +
                                "-bit range");
    }
    return static_cast<std::uint64_t>(shifted);
}

}  // namespace cda::wire
