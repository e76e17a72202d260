#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "qsb/bits.hpp"
#include "qsb/errors.hpp"
#include "qsb/rng.hpp"

namespace qsb {

// Rectilinear is the 0/90 degree pair, diagonal the +45/-45 pair.
enum class Basis : uint8_t { rectilinear = 0, diagonal = 1 };

struct Qubit {
  uint8_t bit = 0;
  Basis basis = Basis::rectilinear;
  bool lost = false;
};

// Simple stochastic channel: independent photon loss, an intercept-resend
// eavesdropper measuring in a uniform random basis, and a bit-flip noise
// term affecting subsequent same-basis measurement.
struct ChannelModel {
  double loss_probability = 0.0;
  double flip_probability = 0.0;
  double eavesdrop_fraction = 0.0;

  void validate() const;
};

struct SessionParams {
  size_t n_qubits = 0;
  double sample_fraction = 0.25;  // sifted bits sacrificed for the estimate
  double qber_threshold = 0.11;
  size_t security_parameter = 32;  // extra bits removed in amplification
  double ec_efficiency = 1.2;      // reconciliation overhead factor

  void validate() const;
};

enum class AbortReason : uint8_t {
  none = 0,
  eavesdropper_suspected,
  key_exhausted,
  insufficient_sample,
  reconciliation_impossible,
};

const char* abort_reason_name(AbortReason reason);

struct SessionOutcome {
  bool delivered = false;
  AbortReason abort_reason = AbortReason::none;
  double qber_estimate = 0.0;
  size_t sifted_length = 0;
  size_t final_length = 0;
  BitVec key;
};

struct Detection {
  uint8_t bit = 0;
  bool detected = false;
};

struct Reconciliation {
  BitVec key;
  size_t leaked_bits = 0;
};

std::vector<Qubit> encode(std::span<const uint8_t> bits,
                          std::span<const Basis> bases);

std::vector<Qubit> transmit(std::vector<Qubit> qubits,
                            const ChannelModel& channel, Rng& rng);

std::vector<Detection> measure(std::span<const Qubit> qubits,
                               std::span<const Basis> bases, Rng& rng);

// Indices where a photon was detected and both parties used the same basis.
std::vector<size_t> sift(std::span<const Basis> alice_bases,
                         std::span<const Basis> bob_bases,
                         std::span<const uint8_t> detected);

// Mismatch fraction over the sampled positions; the caller removes those
// positions from the working keys afterwards.
double estimate_qber(std::span<const uint8_t> alice_key,
                     std::span<const uint8_t> bob_key,
                     std::span<const size_t> sample_indices);

double binary_entropy(double q);

// Oracle reconciliation: the simulator holds both keys, so Bob's string is
// corrected outright while the information-theoretic leak
// ceil(efficiency * n * h2(qber)) is charged against the key budget.
Result<Reconciliation> correct_errors(std::span<const uint8_t> alice_key,
                                      std::span<const uint8_t> bob_key,
                                      double qber, double ec_efficiency);

// Secret bits left after amplification; <= 0 means the session is worthless.
int64_t pa_output_length(size_t n_bits, size_t leaked_bits, double qber,
                         size_t security_parameter);

// Toeplitz compression of the reconciled key down to the pa_output_length;
// the seed must hold (output + n - 1) bits of public randomness.
Result<BitVec> privacy_amplify(std::span<const uint8_t> key,
                               size_t leaked_bits, double qber,
                               size_t security_parameter,
                               std::span<const uint8_t> pa_seed);

// Full session: encode, transmit, measure, sift, estimate, reconcile,
// amplify. Aborts instead of delivering whenever the estimate exceeds the
// threshold or the key budget runs out.
SessionOutcome run_session(const SessionParams& params,
                           const ChannelModel& channel, Rng& rng);

}  // namespace qsb
