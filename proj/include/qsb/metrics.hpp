#pragma once

#include <cstdint>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace qsb {

struct LatencyStats {
  uint64_t count = 0;
  double mean = 0.0;
  double p50 = 0.0;
  double p95 = 0.0;
  double max = 0.0;

  static LatencyStats from_samples(std::vector<double> samples);
};

struct LinkQkdMetrics {
  std::string link;
  uint64_t sessions = 0;
  uint64_t aborted = 0;
  double mean_qber = 0.0;
  uint64_t key_bits = 0;
  double key_rate_bits_per_s = 0.0;
};

struct MetricsReport {
  // traffic
  uint64_t arrivals = 0;
  uint64_t established = 0;
  uint64_t departed = 0;
  uint64_t pending_at_end = 0;
  uint64_t blocked_total = 0;
  uint64_t blocked_no_route = 0;
  uint64_t blocked_no_wavelength = 0;
  uint64_t blocked_key_starved = 0;
  double blocking_probability = 0.0;

  // qkd
  uint64_t qkd_sessions = 0;
  uint64_t qkd_aborted_eavesdrop = 0;
  uint64_t qkd_aborted_other = 0;
  uint64_t qkd_bits_delivered = 0;
  std::vector<LinkQkdMetrics> qkd_per_link;

  // consensus
  uint64_t rounds_started = 0;
  uint64_t rounds_committed = 0;
  LatencyStats commit_latency;
  uint64_t messages_sent = 0;
  uint64_t messages_dropped = 0;
  uint64_t forged_rejected = 0;
  uint64_t forged_accepted = 0;
  uint64_t pool_desyncs = 0;
  uint64_t sign_failures = 0;

  // ledger
  std::map<std::string, uint64_t> ledger_heights;
  bool divergence_honest = false;
  bool divergence_any = false;
  uint64_t tamper_events = 0;
  uint64_t tamper_detected = 0;
  std::map<std::string, uint64_t> audit_first_invalid;
  uint64_t committed_establish_txs = 0;
  uint64_t committed_release_txs = 0;

  // adversary
  uint64_t sybil_tx_submitted = 0;
  uint64_t sybil_tx_accepted = 0;
  uint64_t sybil_votes_submitted = 0;
  uint64_t sybil_votes_counted = 0;

  // run
  double duration = 0.0;
  uint64_t seed = 0;
  uint64_t events_processed = 0;

  nlohmann::json to_json() const;
};

// Canonical form: keys sorted, floating-point numbers fixed to six decimal
// places, two-space indentation. Non-finite numbers are refused since they
// always indicate a simulator bug.
void write_canonical_json(const nlohmann::json& doc, std::ostream& os);

}  // namespace qsb
