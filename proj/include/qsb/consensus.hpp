#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "qsb/crypto.hpp"
#include "qsb/hash.hpp"
#include "qsb/ledger.hpp"
#include "qsb/types.hpp"

namespace qsb {

enum class Phase : uint8_t { propose = 0, vote = 1, decide = 2 };

const char* phase_name(Phase phase);

struct ConsensusMessage {
  uint64_t round = 0;
  Phase phase = Phase::propose;
  Digest256 block_digest{};
  NodeId sender = kNoNode;
  TagSet tags;                  // one MAC per recipient
  std::optional<Block> block;   // carried by proposals only
  bool forged = false;          // adversary ground truth, never serialized

  std::vector<uint8_t> core_bytes() const;
  Digest256 core_digest() const;
};

struct RoundState {
  uint64_t round = 0;
  NodeId leader = kNoNode;
  std::optional<Digest256> proposed;
  std::optional<Block> proposed_block;
  std::map<NodeId, Digest256> votes;  // at most one entry per voter
  std::optional<Digest256> decided;
  SimTime deadline = 0.0;
  bool voted = false;
  uint32_t decides_seen = 0;
};

inline size_t fault_tolerance(size_t n_validators) {
  return (n_validators - 1) / 3;
}

inline uint32_t quorum_size(size_t n_validators) {
  return static_cast<uint32_t>(2 * fault_tolerance(n_validators) + 1);
}

NodeId round_leader(std::span<const NodeId> validators, uint64_t round);

struct ConsensusParams {
  std::vector<NodeId> validators;
  uint32_t tag_bits = 32;
};

struct MessageCounters {
  uint32_t dropped = 0;
  uint32_t forged_rejected = 0;
  uint32_t forged_accepted = 0;
  uint32_t desyncs = 0;
  uint32_t sign_failures = 0;

  void operator+=(const MessageCounters& other) {
    dropped += other.dropped;
    forged_rejected += other.forged_rejected;
    forged_accepted += other.forged_accepted;
    desyncs += other.desyncs;
    sign_failures += other.sign_failures;
  }
};

// Round-based, MAC-authenticated agreement: the round leader proposes a
// block, every validator votes for the first verified proposal, and a node
// decides once 2f+1 distinct verified voters agree on a digest. The decide
// broadcast is bookkeeping; the vote quorum alone carries the decision.
class ConsensusNode {
 public:
  struct Emission {
    std::vector<ConsensusMessage> outgoing;
    std::optional<Block> decided;
    MessageCounters counters;
  };

  ConsensusNode(NodeId self, ConsensusParams params);

  NodeId self() const { return self_; }
  uint32_t quorum() const { return quorum_; }

  void begin_round(uint64_t round, SimTime now, SimTime deadline);

  // Leader path: records the proposal and self-vote, returns the propose
  // and vote broadcasts. Fails without consuming key material when the
  // leader's pools cannot cover the MACs.
  Result<Emission> make_proposal(uint64_t round, Block block,
                                 KeyPoolTable& pools);

  // Unverifiable messages are dropped without touching round state.
  Emission handle_message(const ConsensusMessage& msg, KeyPoolTable& pools);

  const RoundState* round_state(uint64_t round) const;
  bool decided(uint64_t round) const;
  uint64_t current_round() const { return current_round_; }

 private:
  RoundState& state_for(uint64_t round);
  void record_vote(RoundState& st, NodeId voter, const Digest256& digest,
                   Emission& out, KeyPoolTable& pools);
  std::optional<ConsensusMessage> sign_outgoing(uint64_t round, Phase phase,
                                                const Digest256& digest,
                                                std::optional<Block> block,
                                                KeyPoolTable& pools,
                                                MessageCounters& counters);

  NodeId self_;
  ConsensusParams params_;
  uint32_t quorum_;
  uint64_t current_round_ = 0;
  std::map<uint64_t, RoundState> rounds_;
};

}  // namespace qsb
