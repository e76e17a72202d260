#include "qsb/qkd.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "qsb/crypto.hpp"

namespace qsb {

namespace {

void require_probability(double p, const char* name) {
  require(p >= 0.0 && p <= 1.0, Errc::invalid_input,
          std::string(name) + " must lie in [0,1]");
}

std::vector<Basis> random_bases(size_t n, Rng& rng) {
  std::vector<Basis> bases(n);
  for (auto& b : bases) {
    b = rng.bit() ? Basis::diagonal : Basis::rectilinear;
  }
  return bases;
}

// k distinct positions out of [0, n), ascending.
std::vector<size_t> sample_positions(size_t n, size_t k, Rng& rng) {
  std::vector<size_t> idx(n);
  std::iota(idx.begin(), idx.end(), size_t{0});
  for (size_t i = 0; i < k; ++i) {
    size_t j = i + static_cast<size_t>(rng.below(n - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(k);
  std::sort(idx.begin(), idx.end());
  return idx;
}

BitVec erase_positions(const BitVec& key, const std::vector<size_t>& sorted) {
  BitVec out;
  out.reserve(key.size() - sorted.size());
  size_t next = 0;
  for (size_t i = 0; i < key.size(); ++i) {
    if (next < sorted.size() && sorted[next] == i) {
      ++next;
      continue;
    }
    out.push_back(key[i]);
  }
  return out;
}

}  // namespace

void ChannelModel::validate() const {
  require_probability(loss_probability, "loss_probability");
  require_probability(flip_probability, "flip_probability");
  require_probability(eavesdrop_fraction, "eavesdrop_fraction");
}

void SessionParams::validate() const {
  require(n_qubits > 0, Errc::invalid_input, "n_qubits must be positive");
  require(sample_fraction > 0.0 && sample_fraction < 1.0, Errc::invalid_input,
          "sample_fraction must lie in (0,1)");
  require_probability(qber_threshold, "qber_threshold");
  require(ec_efficiency >= 1.0, Errc::invalid_input,
          "ec_efficiency must be >= 1");
}

const char* abort_reason_name(AbortReason reason) {
  switch (reason) {
    case AbortReason::none: return "None";
    case AbortReason::eavesdropper_suspected: return "EavesdropperSuspected";
    case AbortReason::key_exhausted: return "KeyExhausted";
    case AbortReason::insufficient_sample: return "InsufficientSample";
    case AbortReason::reconciliation_impossible:
      return "ReconciliationImpossible";
  }
  return "Unknown";
}

std::vector<Qubit> encode(std::span<const uint8_t> bits,
                          std::span<const Basis> bases) {
  require(bits.size() == bases.size(), Errc::invalid_input,
          "bit and basis strings differ in length");
  std::vector<Qubit> qubits(bits.size());
  for (size_t i = 0; i < bits.size(); ++i) {
    qubits[i] = Qubit{static_cast<uint8_t>(bits[i] & 1u), bases[i], false};
  }
  return qubits;
}

std::vector<Qubit> transmit(std::vector<Qubit> qubits,
                            const ChannelModel& channel, Rng& rng) {
  channel.validate();
  for (auto& q : qubits) {
    if (rng.chance(channel.loss_probability)) {
      q.lost = true;
      continue;
    }
    if (rng.chance(channel.eavesdrop_fraction)) {
      // Intercept-resend: Eve measures in a uniform basis and re-prepares
      // the photon in her basis carrying her measurement result.
      Basis eve = rng.bit() ? Basis::diagonal : Basis::rectilinear;
      uint8_t result = (eve == q.basis) ? q.bit : rng.bit();
      q.basis = eve;
      q.bit = result;
    }
    if (rng.chance(channel.flip_probability)) {
      q.bit ^= 1u;
    }
  }
  return qubits;
}

std::vector<Detection> measure(std::span<const Qubit> qubits,
                               std::span<const Basis> bases, Rng& rng) {
  require(qubits.size() == bases.size(), Errc::invalid_input,
          "qubit and basis strings differ in length");
  std::vector<Detection> out(qubits.size());
  for (size_t i = 0; i < qubits.size(); ++i) {
    if (qubits[i].lost) {
      out[i] = Detection{0, false};
    } else if (qubits[i].basis == bases[i]) {
      out[i] = Detection{qubits[i].bit, true};
    } else {
      out[i] = Detection{rng.bit(), true};
    }
  }
  return out;
}

std::vector<size_t> sift(std::span<const Basis> alice_bases,
                         std::span<const Basis> bob_bases,
                         std::span<const uint8_t> detected) {
  require(alice_bases.size() == bob_bases.size() &&
              alice_bases.size() == detected.size(),
          Errc::invalid_input, "sift inputs differ in length");
  std::vector<size_t> kept;
  for (size_t i = 0; i < alice_bases.size(); ++i) {
    if (detected[i] && alice_bases[i] == bob_bases[i]) kept.push_back(i);
  }
  return kept;
}

double estimate_qber(std::span<const uint8_t> alice_key,
                     std::span<const uint8_t> bob_key,
                     std::span<const size_t> sample_indices) {
  require(alice_key.size() == bob_key.size(), Errc::invalid_input,
          "keys differ in length");
  require(!sample_indices.empty(), Errc::insufficient_sample,
          "empty estimation sample");
  size_t mismatches = 0;
  for (size_t idx : sample_indices) {
    require(idx < alice_key.size(), Errc::invalid_input,
            "sample index out of range");
    mismatches += (alice_key[idx] != bob_key[idx]) ? 1u : 0u;
  }
  return static_cast<double>(mismatches) /
         static_cast<double>(sample_indices.size());
}

double binary_entropy(double q) {
  if (q <= 0.0 || q >= 1.0) return 0.0;
  return -q * std::log2(q) - (1.0 - q) * std::log2(1.0 - q);
}

Result<Reconciliation> correct_errors(std::span<const uint8_t> alice_key,
                                      std::span<const uint8_t> bob_key,
                                      double qber, double ec_efficiency) {
  require(alice_key.size() == bob_key.size(), Errc::invalid_input,
          "keys differ in length");
  require(ec_efficiency >= 1.0, Errc::invalid_input,
          "ec_efficiency must be >= 1");
  if (qber >= 0.5) {
    return {Errc::reconciliation_impossible,
            "error rate leaves no extractable information"};
  }
  Reconciliation rec;
  rec.key.assign(alice_key.begin(), alice_key.end());
  rec.leaked_bits = static_cast<size_t>(
      std::ceil(ec_efficiency * static_cast<double>(alice_key.size()) *
                binary_entropy(qber)));
  return rec;
}

int64_t pa_output_length(size_t n_bits, size_t leaked_bits, double qber,
                         size_t security_parameter) {
  double usable =
      std::floor(static_cast<double>(n_bits) * (1.0 - binary_entropy(qber)));
  return static_cast<int64_t>(usable) - static_cast<int64_t>(leaked_bits) -
         static_cast<int64_t>(security_parameter);
}

Result<BitVec> privacy_amplify(std::span<const uint8_t> key,
                               size_t leaked_bits, double qber,
                               size_t security_parameter,
                               std::span<const uint8_t> pa_seed) {
  require(!key.empty(), Errc::invalid_input, "empty key");
  int64_t out_len =
      pa_output_length(key.size(), leaked_bits, qber, security_parameter);
  if (out_len <= 0) {
    return {Errc::key_starved, "privacy amplification leaves no key"};
  }
  return toeplitz_tag(pa_seed, key, static_cast<size_t>(out_len));
}

SessionOutcome run_session(const SessionParams& params,
                           const ChannelModel& channel, Rng& rng) {
  params.validate();
  channel.validate();

  SessionOutcome out;
  auto abort = [&out](AbortReason reason) -> SessionOutcome& {
    out.delivered = false;
    out.abort_reason = reason;
    return out;
  };

  const size_t n = params.n_qubits;
  BitVec alice_bits = rng.bits(n);
  auto alice_bases = random_bases(n, rng);
  auto qubits = transmit(encode(alice_bits, alice_bases), channel, rng);
  auto bob_bases = random_bases(n, rng);
  auto detections = measure(qubits, bob_bases, rng);

  BitVec detected(n);
  for (size_t i = 0; i < n; ++i) detected[i] = detections[i].detected;
  auto kept = sift(alice_bases, bob_bases, detected);
  out.sifted_length = kept.size();

  BitVec alice_key(kept.size());
  BitVec bob_key(kept.size());
  for (size_t i = 0; i < kept.size(); ++i) {
    alice_key[i] = alice_bits[kept[i]];
    bob_key[i] = detections[kept[i]].bit;
  }

  const size_t sample_count = static_cast<size_t>(
      std::floor(params.sample_fraction * static_cast<double>(kept.size())));
  if (sample_count == 0 || sample_count >= kept.size()) {
    return abort(AbortReason::insufficient_sample);
  }

  auto sample = sample_positions(kept.size(), sample_count, rng);
  out.qber_estimate = estimate_qber(alice_key, bob_key, sample);
  alice_key = erase_positions(alice_key, sample);
  bob_key = erase_positions(bob_key, sample);

  if (out.qber_estimate > params.qber_threshold) {
    return abort(AbortReason::eavesdropper_suspected);
  }

  auto reconciled =
      correct_errors(alice_key, bob_key, out.qber_estimate, params.ec_efficiency);
  if (!reconciled) {
    return abort(AbortReason::reconciliation_impossible);
  }

  int64_t out_len =
      pa_output_length(reconciled.value().key.size(),
                       reconciled.value().leaked_bits, out.qber_estimate,
                       params.security_parameter);
  if (out_len <= 0) {
    return abort(AbortReason::key_exhausted);
  }

  BitVec pa_seed = rng.bits(static_cast<size_t>(out_len) +
                            reconciled.value().key.size() - 1);
  auto key = privacy_amplify(reconciled.value().key,
                             reconciled.value().leaked_bits, out.qber_estimate,
                             params.security_parameter, pa_seed);
  out.key = std::move(key).take();
  out.final_length = out.key.size();
  out.delivered = true;
  return out;
}

}  // namespace qsb
