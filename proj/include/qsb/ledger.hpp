#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <vector>

#include "qsb/bits.hpp"
#include "qsb/crypto.hpp"
#include "qsb/errors.hpp"
#include "qsb/hash.hpp"
#include "qsb/types.hpp"

namespace qsb {

enum class TxKind : uint8_t {
  lightpath_establish = 0,
  lightpath_release = 1,
  generic = 2,
};

const char* tx_kind_name(TxKind kind);

// Where the payload's one-time-pad key lives: the pool shared with `peer`,
// starting at `offset`. Only the peer holding that pool can decrypt.
struct OtpRef {
  NodeId peer = kNoNode;
  uint64_t offset = 0;
  uint64_t n_bits = 0;
  bool operator==(const OtpRef&) const = default;
};

struct Transaction {
  uint64_t id = 0;
  NodeId sender = kNoNode;
  BitVec payload_ciphertext;
  SimTime timestamp = 0.0;
  TxKind kind = TxKind::generic;
  OtpRef otp;
  TagSet tags;

  // Canonical bytes without the tags; this is what the MACs cover.
  std::vector<uint8_t> signed_bytes() const;
  // Full canonical record, used for Merkle leaves and dumps.
  std::vector<uint8_t> canonical_bytes() const;
  Digest256 digest() const;  // over signed_bytes

  bool operator==(const Transaction&) const = default;
};

struct BlockHeader {
  uint64_t height = 0;
  Digest256 prev_hash{};
  Digest256 merkle_root{};
  SimTime timestamp = 0.0;

  std::vector<uint8_t> canonical_bytes() const;
  bool operator==(const BlockHeader&) const = default;
};

struct Block {
  BlockHeader header;
  std::vector<Transaction> transactions;

  std::vector<uint8_t> canonical_bytes() const;
  bool operator==(const Block&) const = default;
};

// Leaf = H(0x00 || tx bytes); internal = H(0x01 || left || right); an odd
// level duplicates its last node.
Digest256 merkle_root(std::span<const Transaction> txs);

Digest256 block_hash(const BlockHeader& header);

enum class Verdict : uint8_t { accept, reject };

struct ValidationReport {
  Verdict verdict = Verdict::reject;
  uint32_t valid_tags = 0;
  uint32_t desyncs = 0;
};

// Each validator checks its own tag against the transaction digest; the
// transaction is accepted when at least `quorum` of them verify.
ValidationReport validate_transaction(const Transaction& tx,
                                      std::span<const NodeId> validators,
                                      const KeyPoolTable& pools,
                                      uint32_t quorum);

// Encrypts the payload under the pool shared with `recipient` (unless
// `encrypt` is false, for records without a confidentiality requirement) and
// signs the transaction digest for every verifier. A failed step rewinds
// every pool draw so peers observe no partial consumption.
Result<Transaction> make_transaction(std::span<const uint8_t> payload_bits,
                                     NodeId sender, NodeId recipient,
                                     std::span<const NodeId> verifiers,
                                     KeyPoolTable& pools, uint32_t tag_bits,
                                     SimTime now, uint64_t id, TxKind kind,
                                     bool encrypt = true);

Result<BitVec> decrypt_payload(const Transaction& tx,
                               const KeyPoolTable& pools);

// prev == nullptr builds the genesis block: height 0, all-zero prev hash.
// Every supplied verdict must be accept.
Block assemble_block(std::vector<Transaction> txs,
                     std::span<const Verdict> verdicts, const Block* prev,
                     SimTime now);

class Ledger {
 public:
  explicit Ledger(NodeId owner);

  NodeId owner() const { return owner_; }
  const std::vector<Block>& chain() const { return chain_; }
  const Block& tip() const { return chain_.back(); }
  uint64_t height() const { return tip().header.height; }

  Status append(Block block);

  // Recomputes every merkle root and hash link from genesis; returns the
  // lowest height whose stored values mismatch, or nullopt when clean.
  std::optional<uint64_t> audit() const;

  Digest256 tip_hash() const { return block_hash(tip().header); }

  // Digest over the full canonical chain bytes; any stored bit anywhere in
  // the replica changes it, which is what tip hashes alone cannot show for
  // interior tampering.
  Digest256 replica_digest() const;

  // One block per line: height, block hash, prev hash, merkle root,
  // timestamp, transaction count, transaction ids.
  void dump(std::ostream& os) const;

  Block& block_at(uint64_t height);

  bool operator==(const Ledger&) const = default;

 private:
  NodeId owner_;
  std::vector<Block> chain_;
};

}  // namespace qsb
