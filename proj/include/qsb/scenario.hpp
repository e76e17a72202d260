#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "qsb/qkd.hpp"
#include "qsb/topology.hpp"
#include "qsb/types.hpp"

namespace qsb {

struct TrafficConfig {
  double lambda = 0.0;          // request arrival rate, 1/s
  double mu = 1.0;              // holding-time rate, 1/s (mean 1/mu)
  double secure_fraction = 0.0;
  uint32_t required_key_bits = 256;
};

struct QkdConfig {
  bool enabled = true;
  size_t n_qubits = 20000;
  double sample_fraction = 0.25;
  double qber_threshold = 0.11;
  size_t security_parameter = 32;
  double ec_efficiency = 1.2;
  size_t watermark_bits = 4096;
  double session_interval = 0.25;       // background replenishment cadence
  uint32_t max_sessions_per_request = 8;
};

struct CryptoConfig {
  uint32_t tag_bits = 32;            // transaction MACs
  uint32_t consensus_tag_bits = 32;  // consensus message MACs
  uint32_t bootstrap_key_bits = 256; // pre-shared per node pair
};

struct ConsensusConfig {
  double round_timeout = 0.05;
  double processing_delay = 0.0005;
  uint32_t max_block_txs = 64;
  double min_round_interval = 0.01;
  std::string equivocator;  // name of a validator scripted to equivocate
};

enum class AttackKind : uint8_t {
  eavesdrop,
  sybil,
  tamper_ledger,
  node_failure,
};

const char* attack_kind_name(AttackKind kind);

struct AttackSpec {
  AttackKind kind = AttackKind::eavesdrop;
  SimTime time = 0.0;
  size_t link = SIZE_MAX;    // eavesdrop
  double fraction = 0.0;     // eavesdrop
  uint32_t count = 0;        // sybil
  double interval = 0.25;    // sybil emission cadence
  NodeId node = kNoNode;     // tamper / failure
  uint64_t height = 0;       // tamper
  uint64_t bit = 0;          // tamper
};

struct SimConfig {
  double duration = 10.0;
  uint64_t seed = 1;
};

struct Scenario {
  Topology topology;
  TrafficConfig traffic;
  QkdConfig qkd;
  CryptoConfig crypto;
  ConsensusConfig consensus;
  std::vector<AttackSpec> attacks;
  SimConfig sim;

  // Both throw ConfigError naming the offending field path.
  static Scenario from_json(const nlohmann::json& doc);
  static Scenario from_file(const std::string& path);
};

}  // namespace qsb
