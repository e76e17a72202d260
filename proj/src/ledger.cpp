#include "qsb/ledger.hpp"

#include <cinttypes>
#include <cstdio>
#include <string>

namespace qsb {

namespace {

void write_signed_fields(ByteWriter& w, const Transaction& tx) {
  w.u64(tx.id);
  w.u32(tx.sender);
  w.bits(tx.payload_ciphertext);
  w.f64(tx.timestamp);
  w.u8(static_cast<uint8_t>(tx.kind));
  w.u32(tx.otp.peer);
  w.u64(tx.otp.offset);
  w.u64(tx.otp.n_bits);
}

std::string format_time(SimTime t) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", t);
  return buf;
}

}  // namespace

const char* tx_kind_name(TxKind kind) {
  switch (kind) {
    case TxKind::lightpath_establish: return "LightpathEstablish";
    case TxKind::lightpath_release: return "LightpathRelease";
    case TxKind::generic: return "Generic";
  }
  return "Unknown";
}

std::vector<uint8_t> Transaction::signed_bytes() const {
  ByteWriter w;
  write_signed_fields(w, *this);
  return std::move(w).take();
}

std::vector<uint8_t> Transaction::canonical_bytes() const {
  ByteWriter w;
  write_signed_fields(w, *this);
  w.u64(tags.size());
  for (const auto& [verifier, tag] : tags) {
    w.u32(verifier);
    w.bits(tag.bits);
    w.u64(tag.seed_offset);
    w.u64(tag.mask_offset);
  }
  return std::move(w).take();
}

Digest256 Transaction::digest() const { return sha256(signed_bytes()); }

std::vector<uint8_t> BlockHeader::canonical_bytes() const {
  ByteWriter w;
  w.u64(height);
  w.raw(prev_hash);
  w.raw(merkle_root);
  w.f64(timestamp);
  return std::move(w).take();
}

std::vector<uint8_t> Block::canonical_bytes() const {
  ByteWriter w;
  w.raw(header.canonical_bytes());
  w.u64(transactions.size());
  for (const auto& tx : transactions) w.raw(tx.canonical_bytes());
  return std::move(w).take();
}

Digest256 merkle_root(std::span<const Transaction> txs) {
  require(!txs.empty(), Errc::invalid_input,
          "merkle root of an empty transaction list");
  std::vector<Digest256> level;
  level.reserve(txs.size());
  for (const auto& tx : txs) {
    ByteWriter w;
    w.u8(0x00);
    w.raw(tx.canonical_bytes());
    level.push_back(sha256(w.data()));
  }
  while (level.size() > 1) {
    if (level.size() % 2 != 0) level.push_back(level.back());
    std::vector<Digest256> next;
    next.reserve(level.size() / 2);
    for (size_t i = 0; i < level.size(); i += 2) {
      ByteWriter w;
      w.u8(0x01);
      w.raw(level[i]);
      w.raw(level[i + 1]);
      next.push_back(sha256(w.data()));
    }
    level = std::move(next);
  }
  return level[0];
}

Digest256 block_hash(const BlockHeader& header) {
  return sha256(header.canonical_bytes());
}

ValidationReport validate_transaction(const Transaction& tx,
                                      std::span<const NodeId> validators,
                                      const KeyPoolTable& pools,
                                      uint32_t quorum) {
  require(quorum >= 1 && quorum <= validators.size(), Errc::invalid_input,
          "quorum outside validator count");
  ValidationReport report;
  BitVec digest_bits = bits_from_bytes(tx.digest());
  for (NodeId v : validators) {
    auto it = tx.tags.find(v);
    if (it == tx.tags.end()) continue;
    switch (verify_tag(digest_bits, it->second, v, tx.sender, pools)) {
      case VerifyStatus::valid: ++report.valid_tags; break;
      case VerifyStatus::desync: ++report.desyncs; break;
      case VerifyStatus::invalid: break;
    }
  }
  report.verdict =
      report.valid_tags >= quorum ? Verdict::accept : Verdict::reject;
  return report;
}

Result<Transaction> make_transaction(std::span<const uint8_t> payload_bits,
                                     NodeId sender, NodeId recipient,
                                     std::span<const NodeId> verifiers,
                                     KeyPoolTable& pools, uint32_t tag_bits,
                                     SimTime now, uint64_t id, TxKind kind,
                                     bool encrypt) {
  require(!verifiers.empty(), Errc::invalid_input,
          "transaction needs at least one verifier");

  Transaction tx;
  tx.id = id;
  tx.sender = sender;
  tx.timestamp = now;
  tx.kind = kind;
  tx.otp = OtpRef{recipient, 0, 0};

  if (!encrypt) {
    tx.payload_ciphertext.assign(payload_bits.begin(), payload_bits.end());
  }

  KeyPool* otp_pool = nullptr;
  KeyPool::Mark otp_mark;
  if (encrypt && !payload_bits.empty()) {
    otp_pool = pools.find(sender, recipient);
    if (otp_pool == nullptr) {
      return {Errc::transaction_failed,
              "no pool shared with recipient " + std::to_string(recipient)};
    }
    otp_mark = otp_pool->mark();
    tx.otp.offset = otp_pool->consumed();
    tx.otp.n_bits = payload_bits.size();
    auto key = otp_pool->draw(payload_bits.size());
    if (!key) {
      return {Errc::transaction_failed, "payload encryption key-starved"};
    }
    tx.payload_ciphertext = otp_apply(*key, payload_bits);
  }

  BitVec digest_bits = bits_from_bytes(tx.digest());
  auto tags = sign_message(digest_bits, sender, verifiers, pools, tag_bits);
  if (!tags) {
    if (otp_pool != nullptr) otp_pool->rewind(otp_mark);
    return {Errc::transaction_failed, tags.message()};
  }
  tx.tags = std::move(tags).take();
  return tx;
}

Result<BitVec> decrypt_payload(const Transaction& tx,
                               const KeyPoolTable& pools) {
  if (tx.otp.n_bits == 0) return tx.payload_ciphertext;  // stored in the clear
  const KeyPool* pool = pools.find(tx.sender, tx.otp.peer);
  if (pool == nullptr) {
    return {Errc::pool_desync, "no pool for recorded payload key"};
  }
  auto key = pool->slice(tx.otp.offset, tx.otp.n_bits);
  if (!key) {
    return {Errc::pool_desync, "recorded payload key offsets out of range"};
  }
  return otp_apply(*key, tx.payload_ciphertext);
}

Block assemble_block(std::vector<Transaction> txs,
                     std::span<const Verdict> verdicts, const Block* prev,
                     SimTime now) {
  require(txs.size() == verdicts.size(), Errc::invalid_input,
          "one verdict per transaction required");
  for (size_t i = 0; i < verdicts.size(); ++i) {
    require(verdicts[i] == Verdict::accept, Errc::invalid_block,
            "transaction " + std::to_string(txs[i].id) + " not accepted");
  }
  Block block;
  block.transactions = std::move(txs);
  block.header.height = prev ? prev->header.height + 1 : 0;
  block.header.prev_hash = prev ? block_hash(prev->header) : zero_digest();
  block.header.merkle_root = block.transactions.empty()
                                 ? zero_digest()
                                 : merkle_root(block.transactions);
  block.header.timestamp = now;
  return block;
}

Ledger::Ledger(NodeId owner) : owner_(owner) {
  chain_.push_back(assemble_block({}, {}, nullptr, 0.0));
}

Status Ledger::append(Block block) {
  const Block& prev = tip();
  if (block.header.height != prev.header.height + 1) {
    return {Errc::append_rejected,
            "expected height " + std::to_string(prev.header.height + 1) +
                ", got " + std::to_string(block.header.height)};
  }
  if (block.header.prev_hash != block_hash(prev.header)) {
    return {Errc::append_rejected, "stale prev hash"};
  }
  Digest256 expected_root = block.transactions.empty()
                                ? zero_digest()
                                : merkle_root(block.transactions);
  if (block.header.merkle_root != expected_root) {
    return {Errc::append_rejected, "merkle root mismatch"};
  }
  chain_.push_back(std::move(block));
  return ok_status();
}

std::optional<uint64_t> Ledger::audit() const {
  for (size_t i = 0; i < chain_.size(); ++i) {
    const Block& block = chain_[i];
    if (block.header.height != i) return i;
    if (i == 0) {
      if (block.header.prev_hash != zero_digest()) return i;
    } else if (block.header.prev_hash != block_hash(chain_[i - 1].header)) {
      return i;
    }
    Digest256 expected_root = block.transactions.empty()
                                  ? zero_digest()
                                  : merkle_root(block.transactions);
    if (block.header.merkle_root != expected_root) return i;
  }
  return std::nullopt;
}

Digest256 Ledger::replica_digest() const {
  ByteWriter w;
  for (const auto& block : chain_) w.raw(block.canonical_bytes());
  return sha256(w.data());
}

void Ledger::dump(std::ostream& os) const {
  for (const auto& block : chain_) {
    os << block.header.height << ' ' << hex_digest(block_hash(block.header))
       << ' ' << hex_digest(block.header.prev_hash) << ' '
       << hex_digest(block.header.merkle_root) << ' '
       << format_time(block.header.timestamp) << ' '
       << block.transactions.size() << ' ';
    if (block.transactions.empty()) {
      os << '-';
    } else {
      for (size_t i = 0; i < block.transactions.size(); ++i) {
        if (i) os << ',';
        os << block.transactions[i].id;
      }
    }
    os << '\n';
  }
}

Block& Ledger::block_at(uint64_t height) {
  require(height < chain_.size(), Errc::config_error,
          "block height " + std::to_string(height) + " out of range");
  return chain_[height];
}

}  // namespace qsb
