#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace qsb {

// Binary strings are held one bit per element, each 0 or 1.
using BitVec = std::vector<uint8_t>;

// LSB-first packing into 64-bit words, zero-padded with a guard word so
// shifted window reads never run off the end.
std::vector<uint64_t> pack_bits(std::span<const uint8_t> bits);

// MSB-first byte packing; the final partial byte is zero-padded.
std::vector<uint8_t> bytes_from_bits(std::span<const uint8_t> bits);
BitVec bits_from_bytes(std::span<const uint8_t> bytes);

BitVec xor_bits(std::span<const uint8_t> a, std::span<const uint8_t> b);

std::string to_hex(std::span<const uint8_t> bytes);

// Canonical serializer: fixed-width big-endian integers, length-prefixed
// byte strings, fields written in declaration order.
class ByteWriter {
 public:
  void u8(uint8_t v);
  void u32(uint32_t v);
  void u64(uint64_t v);
  void f64(double v);  // IEEE-754 bit pattern, big-endian
  void raw(std::span<const uint8_t> bytes);
  void bytes(std::span<const uint8_t> bytes);  // u64 count, then raw
  void bits(std::span<const uint8_t> bits);    // u64 bit count, then packed

  std::span<const uint8_t> data() const { return buf_; }
  std::vector<uint8_t> take() && { return std::move(buf_); }

 private:
  std::vector<uint8_t> buf_;
};

}  // namespace qsb
