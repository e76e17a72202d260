#pragma once

#include <cstdint>
#include <random>

#include "qsb/bits.hpp"

namespace qsb {

// Seeded deterministic random source. All simulation randomness flows
// through an explicit instance; draws() exposes how many engine words an
// operation consumed.
class Rng {
 public:
  explicit Rng(uint64_t seed) : engine_(seed) {}

  uint64_t word() {
    ++draws_;
    return engine_();
  }

  uint8_t bit() { return static_cast<uint8_t>(word() & 1u); }

  BitVec bits(size_t n);

  // Uniform in [0, 1).
  double uniform01() { return static_cast<double>(word() >> 11) * 0x1.0p-53; }

  // True with probability p; degenerate p consumes no randomness so that
  // an absent effect leaves the draw stream untouched.
  bool chance(double p) {
    if (p <= 0.0) return false;
    if (p >= 1.0) return true;
    return uniform01() < p;
  }

  // Uniform over [0, n).
  uint64_t below(uint64_t n);

  double exponential(double rate);

  uint64_t draws() const { return draws_; }

  // Independent child stream; advances this stream by one word.
  Rng fork() { return Rng(word() ^ 0x9e3779b97f4a7c15ull); }

 private:
  std::mt19937_64 engine_;
  uint64_t draws_ = 0;
};

}  // namespace qsb
