#include <cmath>

#include "doctest.h"
#include "qsb/crypto.hpp"

using namespace qsb;

namespace {

// Independent oracle: build T explicitly from the index convention and
// multiply over GF(2).
BitVec naive_toeplitz(const BitVec& seed, const BitVec& msg, size_t t) {
  const size_t m = msg.size();
  BitVec tag(t, 0);
  for (size_t i = 0; i < t; ++i) {
    uint8_t acc = 0;
    for (size_t j = 0; j < m; ++j) {
      acc ^= seed[i + (m - 1) - j] & msg[j];
    }
    tag[i] = acc;
  }
  return tag;
}

KeyPoolTable table_with(NodeId a, NodeId b, const BitVec& bits) {
  KeyPoolTable pools;
  pools.create(a, b).deposit(bits);
  return pools;
}

}  // namespace

TEST_CASE("toeplitz: zero seed gives zero tag") {
  BitVec seed(16 + 8 - 1, 0);
  BitVec msg{1, 0, 1, 1, 0, 0, 1, 1};
  CHECK(toeplitz_tag(seed, msg, 16) == BitVec(16, 0));
}

TEST_CASE("toeplitz: 1x1 identity") {
  CHECK(toeplitz_tag(BitVec{1}, BitVec{1}, 1) == BitVec{1});
}

TEST_CASE("toeplitz: pinned 2x3 vector") {
  // T rows are [1,0,1] and [1,1,0] for this seed; hand multiplication
  // against msg [1,1,0] gives [1,0].
  BitVec seed{1, 0, 1, 1};
  BitVec msg{1, 1, 0};
  CHECK(toeplitz_tag(seed, msg, 2) == BitVec{1, 0});
}

TEST_CASE("toeplitz: seed length mismatch rejected") {
  CHECK_THROWS_AS(toeplitz_tag(BitVec{1, 0}, BitVec{1, 1, 0}, 2), Error);
}

TEST_CASE("toeplitz: matches the naive matrix oracle") {
  Rng rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    size_t t = 1 + static_cast<size_t>(rng.below(70));
    size_t m = 1 + static_cast<size_t>(rng.below(200));
    BitVec seed = rng.bits(t + m - 1);
    BitVec msg = rng.bits(m);
    CHECK(toeplitz_tag(seed, msg, t) == naive_toeplitz(seed, msg, t));
  }
}

TEST_CASE("toeplitz: linear in the message") {
  Rng rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    size_t t = 8;
    size_t m = 64;
    BitVec seed = rng.bits(t + m - 1);
    BitVec x = rng.bits(m);
    BitVec y = rng.bits(m);
    BitVec sum = xor_bits(x, y);
    CHECK(xor_bits(toeplitz_tag(seed, x, t), toeplitz_tag(seed, y, t)) ==
          toeplitz_tag(seed, sum, t));
  }
}

TEST_CASE("toeplitz: two-universal collision rate near 2^-16") {
  // For fixed x != y, Pr[tag(x) = tag(y)] <= 2^-t over uniform seeds.
  const size_t t = 16;
  const size_t m = 64;
  const int trials = 20000;
  Rng rng(123);
  BitVec x = rng.bits(m);
  BitVec y = x;
  y[3] ^= 1;
  y[40] ^= 1;
  int collisions = 0;
  for (int i = 0; i < trials; ++i) {
    BitVec seed = rng.bits(t + m - 1);
    if (toeplitz_tag(seed, x, t) == toeplitz_tag(seed, y, t)) ++collisions;
  }
  const double p = std::pow(2.0, -16.0);
  const double sigma = std::sqrt(trials * p * (1 - p));
  CHECK(std::abs(collisions - trials * p) <= 3.0 * sigma + 1e-9);
}

TEST_CASE("otp: zero key is the identity") {
  BitVec data{1, 0, 1, 1};
  CHECK(otp_apply(BitVec(4, 0), data) == data);
}

TEST_CASE("otp: pinned xor") {
  CHECK(otp_apply(BitVec{1, 0, 1}, BitVec{1, 1, 1}) == BitVec{0, 1, 0});
}

TEST_CASE("otp: involution for random keys and data") {
  Rng rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    size_t n = 1 + static_cast<size_t>(rng.below(128));
    BitVec key = rng.bits(n);
    BitVec data = rng.bits(n);
    CHECK(otp_apply(key, otp_apply(key, data)) == data);
  }
}

TEST_CASE("otp: short key rejected") {
  CHECK_THROWS_AS(otp_apply(BitVec{1}, BitVec{1, 0}), Error);
}

TEST_CASE("key pool: exhaustion and consume-once") {
  KeyPool pool;
  Rng rng(1);
  pool.deposit(rng.bits(10));
  auto first = pool.draw(10);
  REQUIRE(first.has_value());
  CHECK(pool.available() == 0);
  CHECK_FALSE(pool.draw(1).has_value());

  pool.deposit(rng.bits(20));
  auto a = pool.draw(8);
  auto b = pool.draw(8);
  REQUIRE(a.has_value());
  REQUIRE(b.has_value());
  // Disjoint ranges: re-reading by offset reproduces each draw exactly.
  CHECK(pool.slice(10, 8) == a);
  CHECK(pool.slice(18, 8) == b);
}

TEST_CASE("key pool: zero-bit draw rejected") {
  KeyPool pool;
  CHECK_THROWS_AS(pool.draw(0), Error);
}

TEST_CASE("key pool: rewind restores size, offset and epoch") {
  KeyPool pool;
  Rng rng(2);
  pool.deposit(rng.bits(16));
  auto mark = pool.mark();
  (void)pool.draw(8);
  pool.deposit(rng.bits(8));
  pool.rewind(mark);
  CHECK(pool.available() == 16);
  CHECK(pool.deposited() == 16);
  CHECK(pool.epoch() == 1);
}

TEST_CASE("relay: two-node path degenerates to a single draw") {
  Rng rng(3);
  BitVec bits = rng.bits(64);
  auto pools = table_with(0, 1, bits);
  std::vector<NodeId> path{0, 1};
  auto key = relay_key(path, pools, 32, rng);
  REQUIRE(key.ok());
  CHECK(key.value() == BitVec(bits.begin(), bits.begin() + 32));
  CHECK(pools.find(0, 1)->available() == 32);
}

TEST_CASE("relay: three-node path debits every hop and agrees end to end") {
  Rng rng(4);
  KeyPoolTable pools;
  pools.create(0, 1).deposit(rng.bits(100));
  pools.create(1, 2).deposit(rng.bits(100));
  std::vector<NodeId> path{0, 1, 2};
  auto key = relay_key(path, pools, 40, rng);
  REQUIRE(key.ok());
  CHECK(key.value().size() == 40);
  CHECK(pools.find(0, 1)->available() == 60);
  CHECK(pools.find(1, 2)->available() == 60);

  // XOR-chain oracle: pad on, pad off returns the original key.
  auto k1 = pools.find(0, 1)->slice(0, 40);
  REQUIRE(k1.has_value());
  CHECK(otp_apply(*k1, otp_apply(*k1, key.value())) == key.value());
}

TEST_CASE("relay: starved middle hop fails without touching any pool") {
  Rng rng(5);
  KeyPoolTable pools;
  pools.create(0, 1).deposit(rng.bits(100));
  pools.create(1, 2).deposit(rng.bits(8));
  auto before = pools.snapshot();
  std::vector<NodeId> path{0, 1, 2};
  auto key = relay_key(path, pools, 40, rng);
  CHECK_FALSE(key.ok());
  CHECK(key.code() == Errc::relay_failed);
  CHECK(pools.find(0, 1)->available() == 100);
  CHECK(pools.find(1, 2)->available() == 8);
  auto after = pools.snapshot();
  CHECK(before.marks == after.marks);
}

TEST_CASE("sign/verify: roundtrip for a single verifier") {
  Rng rng(6);
  auto pools = table_with(1, 2, rng.bits(4096));
  BitVec msg = rng.bits(256);
  std::vector<NodeId> verifiers{2};
  auto tags = sign_message(msg, 1, verifiers, pools, 32);
  REQUIRE(tags.ok());
  REQUIRE(tags.value().size() == 1);
  CHECK(verify_tag(msg, tags.value().at(2), 2, 1, pools) ==
        VerifyStatus::valid);
}

TEST_CASE("sign/verify: flipped message bit is rejected") {
  // Tag difference is T*delta, nonzero with probability 1 - 2^-t over
  // uniform seeds; with t=16 over 1e4 trials at most ~1 false accept is
  // statistically tolerable.
  Rng rng(7);
  KeyPoolTable pools;
  pools.create(1, 2).deposit(rng.bits(4000 * 1200));
  int accepted = 0;
  const int trials = 10000;
  for (int i = 0; i < trials; ++i) {
    BitVec msg = rng.bits(64);
    std::vector<NodeId> verifiers{2};
    auto tags = sign_message(msg, 1, verifiers, pools, 16);
    REQUIRE(tags.ok());
    msg[static_cast<size_t>(rng.below(64))] ^= 1;
    if (verify_tag(msg, tags.value().at(2), 2, 1, pools) ==
        VerifyStatus::valid) {
      ++accepted;
    }
  }
  const double expect = trials * std::pow(2.0, -16.0);
  const double sigma = std::sqrt(expect);
  CHECK(accepted <= static_cast<int>(expect + 3.0 * sigma + 1.0));
}

TEST_CASE("sign/verify: verifier without a shared pool cannot be served") {
  Rng rng(8);
  auto pools = table_with(1, 2, rng.bits(1024));
  std::vector<NodeId> verifiers{2, 3};
  auto tags = sign_message(rng.bits(64), 1, verifiers, pools, 16);
  CHECK_FALSE(tags.ok());
  CHECK(tags.code() == Errc::signing_failed);
}

TEST_CASE("sign/verify: starvation rewinds every touched pool") {
  Rng rng(9);
  KeyPoolTable pools;
  pools.create(1, 2).deposit(rng.bits(1024));
  pools.create(1, 3).deposit(rng.bits(8));  // cannot cover seed + mask
  auto before = pools.snapshot();
  std::vector<NodeId> verifiers{2, 3};
  auto tags = sign_message(rng.bits(64), 1, verifiers, pools, 16);
  CHECK_FALSE(tags.ok());
  CHECK(pools.snapshot().marks == before.marks);
}

TEST_CASE("sign/verify: random tags are rejected and desyncs detected") {
  Rng rng(10);
  auto pools = table_with(1, 2, rng.bits(2048));
  BitVec msg = rng.bits(128);
  std::vector<NodeId> verifiers{2};
  auto tags = sign_message(msg, 1, verifiers, pools, 32);
  REQUIRE(tags.ok());

  MacTag random_tag = tags.value().at(2);
  random_tag.bits = rng.bits(32);
  CHECK(verify_tag(msg, random_tag, 2, 1, pools) != VerifyStatus::valid);

  MacTag oob = tags.value().at(2);
  oob.seed_offset = 1u << 20;
  CHECK(verify_tag(msg, oob, 2, 1, pools) == VerifyStatus::desync);
}

TEST_CASE("consume-once over a whole table") {
  Rng rng(11);
  KeyPoolTable pools;
  pools.create(0, 1).deposit(rng.bits(512));
  pools.create(1, 2).deposit(rng.bits(512));
  uint64_t drawn = 0;
  for (int i = 0; i < 40; ++i) {
    NodeId a = static_cast<NodeId>(rng.below(3));
    NodeId b = (a + 1 + static_cast<NodeId>(rng.below(2))) % 3;
    if (pools.find(a, b) == nullptr) continue;
    size_t n = 1 + static_cast<size_t>(rng.below(32));
    if (auto bits = pools.find(a, b)->draw(n)) drawn += bits->size();
  }
  uint64_t consumed = 0;
  uint64_t deposited = 0;
  for (const auto& [_, pool] : pools.all()) {
    consumed += pool.consumed();
    deposited += pool.deposited();
  }
  CHECK(drawn == consumed);
  CHECK(consumed <= deposited);
}
