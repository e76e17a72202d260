#include "qsb/consensus.hpp"

#include <algorithm>

namespace qsb {

const char* phase_name(Phase phase) {
  switch (phase) {
    case Phase::propose: return "Propose";
    case Phase::vote: return "Vote";
    case Phase::decide: return "Decide";
  }
  return "Unknown";
}

std::vector<uint8_t> ConsensusMessage::core_bytes() const {
  ByteWriter w;
  w.u64(round);
  w.u8(static_cast<uint8_t>(phase));
  w.raw(block_digest);
  w.u32(sender);
  return std::move(w).take();
}

Digest256 ConsensusMessage::core_digest() const {
  return sha256(core_bytes());
}

NodeId round_leader(std::span<const NodeId> validators, uint64_t round) {
  require(!validators.empty(), Errc::invalid_input, "no validators");
  return validators[round % validators.size()];
}

ConsensusNode::ConsensusNode(NodeId self, ConsensusParams params)
    : self_(self),
      params_(std::move(params)),
      quorum_(quorum_size(params_.validators.size())) {
  require(!params_.validators.empty(), Errc::invalid_input, "no validators");
  require(std::find(params_.validators.begin(), params_.validators.end(),
                    self_) != params_.validators.end(),
          Errc::invalid_input, "node is not in the validator set");
}

void ConsensusNode::begin_round(uint64_t round, SimTime now,
                                SimTime deadline) {
  (void)now;
  RoundState& st = state_for(round);
  st.deadline = deadline;
  current_round_ = std::max(current_round_, round);
}

RoundState& ConsensusNode::state_for(uint64_t round) {
  RoundState& st = rounds_[round];
  if (st.leader == kNoNode) {
    st.round = round;
    st.leader = round_leader(params_.validators, round);
  }
  return st;
}

std::optional<ConsensusMessage> ConsensusNode::sign_outgoing(
    uint64_t round, Phase phase, const Digest256& digest,
    std::optional<Block> block, KeyPoolTable& pools,
    MessageCounters& counters) {
  ConsensusMessage msg;
  msg.round = round;
  msg.phase = phase;
  msg.block_digest = digest;
  msg.sender = self_;
  msg.block = std::move(block);

  std::vector<NodeId> recipients;
  for (NodeId v : params_.validators) {
    if (v != self_) recipients.push_back(v);
  }
  if (recipients.empty()) return msg;  // single-validator network

  BitVec core = bits_from_bytes(msg.core_digest());
  auto tags = sign_message(core, self_, recipients, pools, params_.tag_bits);
  if (!tags) {
    ++counters.sign_failures;
    return std::nullopt;
  }
  msg.tags = std::move(tags).take();
  return msg;
}

Result<ConsensusNode::Emission> ConsensusNode::make_proposal(
    uint64_t round, Block block, KeyPoolTable& pools) {
  RoundState& st = state_for(round);
  require(st.leader == self_, Errc::invalid_input,
          "only the round leader proposes");
  if (st.proposed) {
    return {Errc::internal_error, "round already has a proposal"};
  }

  Emission out;
  Digest256 digest = block_hash(block.header);
  const auto snapshot = pools.snapshot();
  auto propose =
      sign_outgoing(round, Phase::propose, digest, block, pools, out.counters);
  if (!propose) {
    pools.rewind(snapshot);
    return {Errc::signing_failed, "leader key-starved, round skipped"};
  }
  auto vote = sign_outgoing(round, Phase::vote, digest, std::nullopt, pools,
                            out.counters);
  if (!vote) {
    pools.rewind(snapshot);
    return {Errc::signing_failed, "leader key-starved, round skipped"};
  }

  st.proposed = digest;
  st.proposed_block = std::move(block);
  st.voted = true;
  out.outgoing.push_back(std::move(*propose));
  out.outgoing.push_back(std::move(*vote));
  record_vote(st, self_, digest, out, pools);
  return out;
}

ConsensusNode::Emission ConsensusNode::handle_message(
    const ConsensusMessage& msg, KeyPoolTable& pools) {
  Emission out;

  auto it = msg.tags.find(self_);
  if (it == msg.tags.end()) {
    ++out.counters.dropped;
    if (msg.forged) ++out.counters.forged_rejected;
    return out;
  }
  BitVec core = bits_from_bytes(msg.core_digest());
  switch (verify_tag(core, it->second, self_, msg.sender, pools)) {
    case VerifyStatus::valid:
      if (msg.forged) ++out.counters.forged_accepted;
      break;
    case VerifyStatus::invalid:
      ++out.counters.dropped;
      if (msg.forged) ++out.counters.forged_rejected;
      return out;
    case VerifyStatus::desync:
      ++out.counters.dropped;
      ++out.counters.desyncs;
      if (msg.forged) ++out.counters.forged_rejected;
      return out;
  }

  RoundState& st = state_for(msg.round);
  switch (msg.phase) {
    case Phase::propose: {
      if (msg.sender != st.leader) break;
      if (!msg.block.has_value()) break;
      if (block_hash(msg.block->header) != msg.block_digest) break;
      Digest256 expected_root = msg.block->transactions.empty()
                                    ? zero_digest()
                                    : merkle_root(msg.block->transactions);
      if (msg.block->header.merkle_root != expected_root) break;
      if (!st.proposed) {
        st.proposed = msg.block_digest;
        st.proposed_block = msg.block;
      }
      // An equivocating leader's second digest is ignored; nodes vote once.
      if (!st.voted && *st.proposed == msg.block_digest) {
        st.voted = true;
        auto vote = sign_outgoing(msg.round, Phase::vote, msg.block_digest,
                                  std::nullopt, pools, out.counters);
        if (vote) out.outgoing.push_back(std::move(*vote));
        record_vote(st, self_, msg.block_digest, out, pools);
      }
      break;
    }
    case Phase::vote:
      record_vote(st, msg.sender, msg.block_digest, out, pools);
      break;
    case Phase::decide:
      ++st.decides_seen;
      break;
  }
  return out;
}

void ConsensusNode::record_vote(RoundState& st, NodeId voter,
                                const Digest256& digest, Emission& out,
                                KeyPoolTable& pools) {
  if (st.votes.contains(voter)) return;
  st.votes.emplace(voter, digest);
  if (st.decided) return;

  uint32_t tally = 0;
  for (const auto& [_, d] : st.votes) {
    if (d == digest) ++tally;
  }
  if (tally < quorum_) return;
  if (!st.proposed_block || !st.proposed || *st.proposed != digest) return;

  st.decided = digest;
  out.decided = st.proposed_block;
  auto decide = sign_outgoing(st.round, Phase::decide, digest, std::nullopt,
                              pools, out.counters);
  if (decide) out.outgoing.push_back(std::move(*decide));
}

const RoundState* ConsensusNode::round_state(uint64_t round) const {
  auto it = rounds_.find(round);
  return it == rounds_.end() ? nullptr : &it->second;
}

bool ConsensusNode::decided(uint64_t round) const {
  const RoundState* st = round_state(round);
  return st != nullptr && st->decided.has_value();
}

}  // namespace qsb
