#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include "qsb/consensus.hpp"
#include "qsb/crypto.hpp"
#include "qsb/ledger.hpp"
#include "qsb/metrics.hpp"
#include "qsb/qkd.hpp"
#include "qsb/rng.hpp"
#include "qsb/scenario.hpp"
#include "qsb/topology.hpp"
#include "qsb/types.hpp"

namespace qsb {

struct LightpathRequest {
  uint64_t id = 0;
  NodeId source = kNoNode;
  NodeId destination = kNoNode;
  uint32_t required_key_bits = 0;
  double holding_time = 0.0;
  SimTime arrival_time = 0.0;
  bool security_required = false;
};

// "established" means resources are debited and the establishment record is
// signed and submitted; service begins once consensus commits it.
struct ProvisionResult {
  enum class Status { established, blocked };
  Status status = Status::blocked;
  Errc block_reason = Errc::internal_error;
  std::vector<NodeId> path;
  uint32_t tdch_wavelength = 0;
  uint64_t ledger_tx = 0;

  bool ok() const { return status == Status::established; }
};

enum class LightpathState { pending_commit, established, released };

struct Lightpath {
  LightpathRequest request;
  std::vector<NodeId> path;
  uint32_t tdch_wavelength = 0;
  LightpathState state = LightpathState::pending_commit;
  SimTime established_at = 0.0;
  uint64_t establish_tx = 0;
  uint64_t release_tx = 0;
};

struct RoundInfo {
  uint64_t round = 0;
  NodeId leader = kNoNode;
  SimTime started = 0.0;
  bool committed = false;
  bool closed = false;
  double commit_latency = 0.0;
  std::set<NodeId> deciders;
  uint32_t proposals_sent = 0;
  uint32_t votes_sent = 0;
  uint32_t decides_sent = 0;
};

// Single-timeline discrete-event simulation of the five-plane architecture:
// request generation, distributed control, QKD key production, blockchain
// recording via consensus, and lightpath transport over shared wavelengths.
class Simulation {
 public:
  Simulation(const Scenario& scenario, uint64_t seed);

  // Full run: schedules traffic, background key generation and attacks,
  // processes the queue to the horizon and finalizes the report.
  MetricsReport run(std::ostream* trace = nullptr);

  // Step-wise variants for tests.
  void prime();
  void run_until(SimTime t);
  MetricsReport finalize();

  ProvisionResult provision(const LightpathRequest& request);
  void release_lightpath(uint64_t lightpath_id);

  // Adversary surface; triggers arrive through the scenario's attack list
  // but are also callable directly.
  void inject_eavesdropper(size_t link, double fraction);
  void inject_sybils(uint32_t count, double emission_interval);
  void tamper_block_bit(NodeId node, uint64_t height, uint64_t bit);
  void fail_node(NodeId node);

  // Introspection.
  SimTime now() const { return now_; }
  const Topology& topology() const { return topo_; }
  KeyPoolTable& pools() { return pools_; }
  const KeyPoolTable& pools() const { return pools_; }
  const WavelengthMap& wavelengths() const { return wavelengths_; }
  const Ledger& ledger_of(NodeId node) const { return runtimes_.at(node).ledger; }
  bool node_failed(NodeId node) const { return runtimes_.at(node).failed; }
  const std::vector<NodeId>& validators() const { return validators_; }
  const std::map<uint64_t, Lightpath>& lightpaths() const { return lightpaths_; }
  const std::map<uint64_t, RoundInfo>& rounds() const { return round_info_; }
  size_t pending_txs() const { return pending_.size(); }
  const MetricsReport& metrics() const { return metrics_; }
  std::string node_name(NodeId id) const;

 private:
  struct NodeRuntime {
    explicit NodeRuntime(NodeId id) : ledger(id) {}
    Ledger ledger;
    std::optional<ConsensusNode> consensus;
    bool failed = false;
    bool tampered = false;
    bool equivocator = false;
  };

  struct PerLinkQkd {
    uint64_t sessions = 0;
    uint64_t aborted = 0;
    double qber_sum = 0.0;
    uint64_t key_bits = 0;
  };

  // event machinery
  void schedule(SimTime t, const char* kind, std::string detail,
                std::function<void()> fn);
  void trace_note(const char* kind, const std::string& detail);
  void process_until(SimTime horizon);

  // traffic
  void on_arrival();
  void schedule_next_arrival();

  // qkd plane
  void on_qkd_due();
  bool run_link_session(size_t link_index);
  bool ensure_pair_bits(NodeId a, NodeId b, size_t n_bits);

  // blockchain plane
  bool submit_transaction(Transaction tx, bool forged);
  void maybe_start_round();
  void on_round_start();
  void on_round_deadline(uint64_t round);
  void close_round(uint64_t round);
  void broadcast(NodeId from, const ConsensusMessage& msg);
  void deliver(NodeId to, const ConsensusMessage& msg);
  void on_decide(NodeId node, uint64_t round, Block block);
  void apply_commit(const Block& block);
  void send_ledger_updates(NodeId from, const Block& block);
  void equivocate_propose(uint64_t round);
  void emit_sybil_votes(uint64_t round, const Digest256& digest);
  void submit_sybil_transaction(NodeId sybil);
  void sybil_emit();
  void absorb(const MessageCounters& counters);

  double link_latency(size_t link_index) const;
  Result<double> path_latency(NodeId from, NodeId to) const;
  std::vector<NodeId> live_validators() const;
  std::vector<uint8_t> failed_mask() const;
  Result<Transaction> make_lightpath_tx(const Lightpath& lp, TxKind kind);
  bool ensure_signing_bits(NodeId sender, NodeId recipient,
                           size_t payload_bits, bool encrypt);

  void finalize_ledger_metrics();

  // configuration
  Scenario scenario_;
  Topology& topo_;  // alias into scenario_
  uint64_t seed_;
  Rng rng_;

  // mutable network state
  KeyPoolTable pools_;
  WavelengthMap wavelengths_;
  std::vector<NodeRuntime> runtimes_;
  std::vector<ChannelModel> link_channels_;
  std::vector<NodeId> validators_;
  std::vector<NodeId> dcn_nodes_;
  uint32_t tx_quorum_ = 1;

  // event queue
  std::map<std::pair<SimTime, uint64_t>,
           std::tuple<std::string, std::string, std::function<void()>>>
      queue_;
  uint64_t next_seq_ = 0;
  SimTime now_ = 0.0;
  bool primed_ = false;
  bool finalized_ = false;
  bool draining_ = false;
  std::ostream* trace_ = nullptr;

  // blockchain
  std::vector<Transaction> pending_;
  uint64_t next_tx_id_ = 1;
  std::optional<uint64_t> active_round_;
  uint64_t round_counter_ = 0;
  SimTime last_round_start_ = -1.0;
  bool round_start_scheduled_ = false;
  std::map<uint64_t, RoundInfo> round_info_;
  std::vector<double> commit_latencies_;
  std::map<uint64_t, uint64_t> tx_to_lightpath_;

  // lightpaths
  std::map<uint64_t, Lightpath> lightpaths_;
  uint64_t next_lightpath_id_ = 1;

  // adversary
  uint32_t sybil_count_ = 0;
  double sybil_interval_ = 0.25;
  bool sybil_chain_active_ = false;

  // stats
  std::vector<PerLinkQkd> link_qkd_;
  MetricsReport metrics_;
};

}  // namespace qsb
