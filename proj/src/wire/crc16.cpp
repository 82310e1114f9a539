#include "cda/wire/crc16.hpp"

#include <array>

namespace cda::wire {

namespace {

constexpr std::array<std::uint16_t, 256> make_table() {
    std::array<std::uint16_t, 256> table{};
    for (unsigned n = 0; n < 256; ++n) {
        std::uint16_t c = static_cast<std::uint16_t>(n << 8);
        for (int k = 0; k < 8; ++k) {
            c = (c & 0x8000U) ? static_cast<std::uint16_t>((c << 1) ^ 0x1021U)
                              : static_cast<std::uint16_t>(c << 1);
        }
        table[n] = c;
    }
    return table;
}

constexpr auto kTable = make_table();

}  // namespace

std::uint16_t crc16_update(std::uint16_t crc, std::span<const std::uint8_t> bytes) {
    for (const std::uint8_t b : bytes) {
        crc = static_cast<std::uint16_t>((crc << 8) ^ kTable[((crc >> 8) ^ b) & 0xFFU]);
    }
    return crc;
}

}  // namespace cda::wire
