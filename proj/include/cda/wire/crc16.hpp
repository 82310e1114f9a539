#pragma once

#include <cstdint>
#include <span>

namespace cda::wire {

// CRC-16/CCITT-FALSE: poly 0x1021, init 0xFFFF, no reflection, no final xor.
inline constexpr std::uint16_t kCrc16Init = 0xFFFF;

std::uint16_t crc16_update(std::uint16_t crc, std::span<const std::uint8_t> bytes);

inline std::uint16_t crc16(std::span<const std::uint8_t> bytes) {
    return crc16_update(kCrc16Init, bytes);
}

}  // namespace cda::wire
