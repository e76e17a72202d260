#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>

namespace qsb {

using Digest256 = std::array<uint8_t, 32>;

Digest256 sha256(std::span<const uint8_t> data);

std::string hex_digest(const Digest256& digest);

inline constexpr Digest256 zero_digest() { return Digest256{}; }

}  // namespace qsb
