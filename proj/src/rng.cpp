#include "qsb/rng.hpp"

#include <cmath>

#include "qsb/errors.hpp"

namespace qsb {

BitVec Rng::bits(size_t n) {
  BitVec out(n);
  for (size_t i = 0; i < n; ++i) out[i] = bit();
  return out;
}

uint64_t Rng::below(uint64_t n) {
  require(n > 0, Errc::invalid_input, "below(0)");
  // Lemire multiply-shift; bias is < n / 2^64, irrelevant at simulation scale.
  return static_cast<uint64_t>(
      (static_cast<unsigned __int128>(word()) * n) >> 64);
}

double Rng::exponential(double rate) {
  require(rate > 0.0, Errc::invalid_input, "exponential rate must be > 0");
  return -std::log1p(-uniform01()) / rate;
}

}  // namespace qsb
