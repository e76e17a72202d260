#pragma once

#include <map>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "qsb/bits.hpp"
#include "qsb/errors.hpp"
#include "qsb/rng.hpp"
#include "qsb/types.hpp"

namespace qsb {

// Tag = T * message over GF(2), where T is the t x m Toeplitz matrix with
// T[i][j] = seed[i + (m-1) - j]. The seed must hold exactly t + m - 1 bits.
BitVec toeplitz_tag(std::span<const uint8_t> seed,
                    std::span<const uint8_t> message, size_t tag_bits);

// Bitwise XOR of data under the leading len(data) key bits; involution.
BitVec otp_apply(std::span<const uint8_t> key, std::span<const uint8_t> data);

// Pairwise consume-once key material. One object serves both endpoints of
// the unordered pair; draws advance a monotone offset and no bit is ever
// issued twice. slice() re-reads already-written bits for verification.
class KeyPool {
 public:
  KeyPool() = default;

  void deposit(std::span<const uint8_t> bits);

  size_t available() const { return buffer_.size() - consumed_; }
  uint64_t consumed() const { return consumed_; }
  uint64_t deposited() const { return buffer_.size(); }
  uint32_t epoch() const { return epoch_; }

  // Consumes the next n bits; std::nullopt when the pool is short.
  std::optional<BitVec> draw(size_t n_bits);

  // Reads previously deposited bits without consuming them (the verifier
  // side of a recorded offset); std::nullopt if the range was never written.
  std::optional<BitVec> slice(uint64_t offset, size_t n_bits) const;

  struct Mark {
    uint64_t deposited = 0;
    uint64_t consumed = 0;
    uint32_t epoch = 0;
  };
  Mark mark() const { return {buffer_.size(), consumed_, epoch_}; }
  void rewind(const Mark& m);

  bool operator==(const KeyPool&) const = default;

 private:
  BitVec buffer_;
  uint64_t consumed_ = 0;
  uint32_t epoch_ = 0;
};

class KeyPoolTable {
 public:
  using PairKey = std::pair<NodeId, NodeId>;

  static PairKey key_for(NodeId a, NodeId b);

  KeyPool& create(NodeId a, NodeId b);
  KeyPool* find(NodeId a, NodeId b);
  const KeyPool* find(NodeId a, NodeId b) const;
  bool contains(NodeId a, NodeId b) const { return find(a, b) != nullptr; }

  const std::map<PairKey, KeyPool>& all() const { return pools_; }

  struct Snapshot {
    std::map<PairKey, KeyPool::Mark> marks;
  };
  Snapshot snapshot() const;
  void rewind(const Snapshot& snap);

  bool operator==(const KeyPoolTable&) const = default;

 private:
  std::map<PairKey, KeyPool> pools_;
};

struct MacTag {
  BitVec bits;
  uint64_t seed_offset = 0;
  uint64_t mask_offset = 0;
  bool operator==(const MacTag&) const = default;
};

// One MAC per intended verifier, keyed by verifier id.
using TagSet = std::map<NodeId, MacTag>;

// Wegman-Carter style authentication: a fresh Toeplitz seed plus a one-time
// mask per verifier, both drawn from the pairwise pool; tag = T*m XOR mask.
// Offsets are recorded so the verifier can re-derive the same key material.
// On any starvation the touched pools are rewound and nothing is consumed.
Result<TagSet> sign_message(std::span<const uint8_t> message, NodeId sender,
                            std::span<const NodeId> verifiers,
                            KeyPoolTable& pools, size_t tag_bits);

enum class VerifyStatus { valid, invalid, desync };

VerifyStatus verify_tag(std::span<const uint8_t> message, const MacTag& tag,
                        NodeId verifier, NodeId sender,
                        const KeyPoolTable& pools);

// Hop-by-hop trusted relay: a fresh end-to-end key generated at the source
// travels one-time-pad encrypted under each hop key. Debits n_bits from
// every hop pool; on failure no pool is touched. A two-node path degenerates
// to a plain draw from the single pool.
Result<BitVec> relay_key(std::span<const NodeId> path, KeyPoolTable& pools,
                         size_t n_bits, Rng& rng);

}  // namespace qsb
