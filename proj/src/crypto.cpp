#include "qsb/crypto.hpp"

#include <algorithm>
#include <bit>
#include <string>

namespace qsb {

BitVec toeplitz_tag(std::span<const uint8_t> seed,
                    std::span<const uint8_t> message, size_t tag_bits) {
  require(tag_bits > 0, Errc::invalid_input, "tag length must be positive");
  const size_t m = message.size();
  require(seed.size() == tag_bits + m - 1, Errc::invalid_seed,
          "toeplitz seed must hold tag_bits + message_bits - 1 bits, got " +
              std::to_string(seed.size()));

  BitVec tag(tag_bits, 0);
  if (m == 0) return tag;

  // Row i of T is seed[i .. i+m-1] read back to front, so tag[i] is the
  // parity of seed[i .. i+m-1] AND reverse(message): a sliding correlation.
  BitVec reversed(m);
  for (size_t k = 0; k < m; ++k) reversed[k] = message[m - 1 - k] & 1u;

  const auto seed_words = pack_bits(seed);
  const auto msg_words = pack_bits(reversed);
  const size_t n_words = (m + 63) / 64;

  for (size_t i = 0; i < tag_bits; ++i) {
    const size_t word_off = i >> 6;
    const size_t shift = i & 63u;
    uint64_t acc = 0;
    for (size_t w = 0; w < n_words; ++w) {
      uint64_t window = seed_words[word_off + w] >> shift;
      if (shift != 0) {
        window |= seed_words[word_off + w + 1] << (64 - shift);
      }
      acc ^= window & msg_words[w];
    }
    tag[i] = static_cast<uint8_t>(std::popcount(acc) & 1);
  }
  return tag;
}

BitVec otp_apply(std::span<const uint8_t> key, std::span<const uint8_t> data) {
  require(key.size() >= data.size(), Errc::key_too_short,
          "one-time pad key shorter than data");
  BitVec out(data.size());
  for (size_t i = 0; i < data.size(); ++i) out[i] = (key[i] ^ data[i]) & 1u;
  return out;
}

void KeyPool::deposit(std::span<const uint8_t> bits) {
  if (bits.empty()) return;
  buffer_.reserve(buffer_.size() + bits.size());
  for (uint8_t b : bits) buffer_.push_back(b & 1u);
  ++epoch_;
}

std::optional<BitVec> KeyPool::draw(size_t n_bits) {
  require(n_bits > 0, Errc::invalid_input, "draw of zero bits");
  if (available() < n_bits) return std::nullopt;
  BitVec out(buffer_.begin() + static_cast<ptrdiff_t>(consumed_),
             buffer_.begin() + static_cast<ptrdiff_t>(consumed_ + n_bits));
  consumed_ += n_bits;
  return out;
}

std::optional<BitVec> KeyPool::slice(uint64_t offset, size_t n_bits) const {
  if (offset + n_bits > buffer_.size()) return std::nullopt;
  return BitVec(buffer_.begin() + static_cast<ptrdiff_t>(offset),
                buffer_.begin() + static_cast<ptrdiff_t>(offset + n_bits));
}

void KeyPool::rewind(const Mark& m) {
  require(m.deposited <= buffer_.size() && m.consumed <= m.deposited,
          Errc::internal_error, "pool rewind past live state");
  buffer_.resize(m.deposited);
  consumed_ = m.consumed;
  epoch_ = m.epoch;
}

KeyPoolTable::PairKey KeyPoolTable::key_for(NodeId a, NodeId b) {
  return a < b ? PairKey{a, b} : PairKey{b, a};
}

KeyPool& KeyPoolTable::create(NodeId a, NodeId b) {
  require(a != b, Errc::invalid_input, "key pool needs two distinct nodes");
  return pools_[key_for(a, b)];
}

KeyPool* KeyPoolTable::find(NodeId a, NodeId b) {
  auto it = pools_.find(key_for(a, b));
  return it == pools_.end() ? nullptr : &it->second;
}

const KeyPool* KeyPoolTable::find(NodeId a, NodeId b) const {
  auto it = pools_.find(key_for(a, b));
  return it == pools_.end() ? nullptr : &it->second;
}

KeyPoolTable::Snapshot KeyPoolTable::snapshot() const {
  Snapshot snap;
  for (const auto& [key, pool] : pools_) snap.marks.emplace(key, pool.mark());
  return snap;
}

void KeyPoolTable::rewind(const Snapshot& snap) {
  for (auto& [key, pool] : pools_) {
    auto it = snap.marks.find(key);
    require(it != snap.marks.end(), Errc::internal_error,
            "pool created after snapshot cannot be rewound");
    pool.rewind(it->second);
  }
}

Result<TagSet> sign_message(std::span<const uint8_t> message, NodeId sender,
                            std::span<const NodeId> verifiers,
                            KeyPoolTable& pools, size_t tag_bits) {
  require(tag_bits > 0, Errc::invalid_input, "tag length must be positive");
  require(!verifiers.empty(), Errc::invalid_input, "no verifiers given");

  struct Touched {
    KeyPool* pool;
    KeyPool::Mark mark;
  };
  std::vector<Touched> touched;
  auto rollback = [&touched]() {
    for (auto it = touched.rbegin(); it != touched.rend(); ++it) {
      it->pool->rewind(it->mark);
    }
  };

  const size_t seed_len = tag_bits + message.size() - 1;
  TagSet tags;
  for (NodeId v : verifiers) {
    KeyPool* pool = pools.find(sender, v);
    if (pool == nullptr) {
      rollback();
      return {Errc::signing_failed,
              "no shared pool with verifier " + std::to_string(v)};
    }
    touched.push_back({pool, pool->mark()});

    MacTag tag;
    tag.seed_offset = pool->consumed();
    auto seed = pool->draw(seed_len);
    if (!seed) {
      rollback();
      return {Errc::signing_failed,
              "key-starved signing for verifier " + std::to_string(v)};
    }
    tag.mask_offset = pool->consumed();
    auto mask = pool->draw(tag_bits);
    if (!mask) {
      rollback();
      return {Errc::signing_failed,
              "key-starved signing for verifier " + std::to_string(v)};
    }
    tag.bits = otp_apply(*mask, toeplitz_tag(*seed, message, tag_bits));
    tags.emplace(v, std::move(tag));
  }
  return tags;
}

VerifyStatus verify_tag(std::span<const uint8_t> message, const MacTag& tag,
                        NodeId verifier, NodeId sender,
                        const KeyPoolTable& pools) {
  if (tag.bits.empty()) return VerifyStatus::invalid;
  const KeyPool* pool = pools.find(sender, verifier);
  if (pool == nullptr) return VerifyStatus::invalid;

  const size_t tag_bits = tag.bits.size();
  const size_t seed_len = tag_bits + message.size() - 1;
  auto seed = pool->slice(tag.seed_offset, seed_len);
  if (!seed) return VerifyStatus::desync;
  auto mask = pool->slice(tag.mask_offset, tag_bits);
  if (!mask) return VerifyStatus::desync;

  BitVec expected = otp_apply(*mask, toeplitz_tag(*seed, message, tag_bits));
  return expected == tag.bits ? VerifyStatus::valid : VerifyStatus::invalid;
}

Result<BitVec> relay_key(std::span<const NodeId> path, KeyPoolTable& pools,
                         size_t n_bits, Rng& rng) {
  require(path.size() >= 2, Errc::invalid_input,
          "relay path needs at least two nodes");
  require(n_bits > 0, Errc::invalid_input, "relay of zero bits");

  // All-or-nothing: every hop is checked before any bit is consumed.
  std::vector<KeyPool*> hops;
  hops.reserve(path.size() - 1);
  for (size_t i = 0; i + 1 < path.size(); ++i) {
    KeyPool* pool = pools.find(path[i], path[i + 1]);
    if (pool == nullptr || pool->available() < n_bits) {
      return {Errc::relay_failed, "hop " + std::to_string(i) + " key-starved"};
    }
    hops.push_back(pool);
  }

  if (hops.size() == 1) {
    return *hops[0]->draw(n_bits);
  }

  BitVec key = rng.bits(n_bits);
  BitVec forwarded = key;
  for (KeyPool* hop : hops) {
    auto hop_key = hop->draw(n_bits);
    BitVec ciphertext = otp_apply(*hop_key, forwarded);
    // The next trusted node strips the hop pad before re-encrypting.
    forwarded = otp_apply(*hop_key, ciphertext);
  }
  require(forwarded == key, Errc::internal_error, "relay XOR chain corrupted");
  return forwarded;
}

}  // namespace qsb
