#include "qsb/bits.hpp"

namespace qsb {

std::vector<uint64_t> pack_bits(std::span<const uint8_t> bits) {
  std::vector<uint64_t> words(bits.size() / 64 + 2, 0);
  for (size_t i = 0; i < bits.size(); ++i) {
    words[i >> 6] |= static_cast<uint64_t>(bits[i] & 1u) << (i & 63u);
  }
  return words;
}

std::vector<uint8_t> bytes_from_bits(std::span<const uint8_t> bits) {
  std::vector<uint8_t> out((bits.size() + 7) / 8, 0);
  for (size_t i = 0; i < bits.size(); ++i) {
    out[i >> 3] |= static_cast<uint8_t>((bits[i] & 1u) << (7 - (i & 7u)));
  }
  return out;
}

BitVec bits_from_bytes(std::span<const uint8_t> bytes) {
  BitVec out(bytes.size() * 8);
  for (size_t i = 0; i < out.size(); ++i) {
    out[i] = (bytes[i >> 3] >> (7 - (i & 7u))) & 1u;
  }
  return out;
}

BitVec xor_bits(std::span<const uint8_t> a, std::span<const uint8_t> b) {
  BitVec out(a.size() < b.size() ? a.size() : b.size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = (a[i] ^ b[i]) & 1u;
  return out;
}

std::string to_hex(std::span<const uint8_t> bytes) {
  static const char* digits = "0123456789abcdef";
  std::string out;
  out.reserve(bytes.size() * 2);
  for (uint8_t b : bytes) {
    out.push_back(digits[b >> 4]);
    out.push_back(digits[b & 0x0f]);
  }
  return out;
}

void ByteWriter::u8(uint8_t v) { buf_.push_back(v); }

void ByteWriter::u32(uint32_t v) {
  for (int shift = 24; shift >= 0; shift -= 8) {
    buf_.push_back(static_cast<uint8_t>(v >> shift));
  }
}

void ByteWriter::u64(uint64_t v) {
  for (int shift = 56; shift >= 0; shift -= 8) {
    buf_.push_back(static_cast<uint8_t>(v >> shift));
  }
}

void ByteWriter::f64(double v) {
  uint64_t pattern;
  static_assert(sizeof(pattern) == sizeof(v));
  __builtin_memcpy(&pattern, &v, sizeof(pattern));
  u64(pattern);
}

void ByteWriter::raw(std::span<const uint8_t> bytes) {
  buf_.insert(buf_.end(), bytes.begin(), bytes.end());
}

void ByteWriter::bytes(std::span<const uint8_t> bytes) {
  u64(bytes.size());
  raw(bytes);
}

void ByteWriter::bits(std::span<const uint8_t> bits) {
  u64(bits.size());
  raw(bytes_from_bits(bits));
}

}  // namespace qsb
