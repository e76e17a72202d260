#include "qsb/network.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace qsb {

namespace {

constexpr double kLightSpeedKmPerS = 2.0e5;  // propagation in fiber

std::string pair_name(const Topology& topo, NodeId a, NodeId b) {
  return topo.node(a).name + "-" + topo.node(b).name;
}

}  // namespace

Simulation::Simulation(const Scenario& scenario, uint64_t seed)
    : scenario_(scenario),
      topo_(scenario_.topology),
      seed_(seed),
      rng_(seed),
      wavelengths_(topo_),
      link_qkd_(topo_.link_count()) {
  const size_t n = topo_.node_count();
  runtimes_.reserve(n);
  for (NodeId i = 0; i < n; ++i) runtimes_.emplace_back(i);

  validators_ = topo_.controllers();
  require(!validators_.empty(), Errc::config_error,
          "at least one controller node is required");
  tx_quorum_ = static_cast<uint32_t>((2 * validators_.size() + 2) / 3);

  ConsensusParams params{validators_, scenario_.crypto.consensus_tag_bits};
  for (NodeId v : validators_) {
    runtimes_[v].consensus.emplace(v, params);
  }
  if (!scenario_.consensus.equivocator.empty()) {
    auto id = topo_.find_node(scenario_.consensus.equivocator);
    require(id.has_value(), Errc::config_error, "unknown equivocator node");
    runtimes_[*id].equivocator = true;
  }

  dcn_nodes_ = topo_.dcn_nodes();

  for (size_t i = 0; i < topo_.link_count(); ++i) {
    link_channels_.push_back(topo_.link(i).channel);
  }

  // Every node pair starts from a small pre-shared key so the first
  // authenticated exchanges can run before QKD has produced anything.
  Rng bootstrap = rng_.fork();
  for (NodeId a = 0; a < n; ++a) {
    for (NodeId b = a + 1; b < n; ++b) {
      KeyPool& pool = pools_.create(a, b);
      if (scenario_.crypto.bootstrap_key_bits > 0) {
        pool.deposit(bootstrap.bits(scenario_.crypto.bootstrap_key_bits));
      }
    }
  }

  metrics_.seed = seed_;
  metrics_.duration = scenario_.sim.duration;
}

std::string Simulation::node_name(NodeId id) const {
  if (id < topo_.node_count()) return topo_.node(id).name;
  return "sybil" + std::to_string(id - topo_.node_count());
}

// ---------------------------------------------------------------------------
// event machinery

void Simulation::schedule(SimTime t, const char* kind, std::string detail,
                          std::function<void()> fn) {
  queue_.emplace(std::pair{t, next_seq_++},
                 std::tuple{std::string(kind), std::move(detail), std::move(fn)});
}

void Simulation::trace_note(const char* kind, const std::string& detail) {
  if (trace_ == nullptr) return;
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6f", now_);
  std::string quoted = detail;
  size_t pos = 0;
  while ((pos = quoted.find('"', pos)) != std::string::npos) {
    quoted.insert(pos, 1, '"');
    pos += 2;
  }
  (*trace_) << buf << ',' << kind << ",\"" << quoted << "\"\n";
}

void Simulation::process_until(SimTime horizon) {
  while (!queue_.empty() && queue_.begin()->first.first <= horizon) {
    auto node = queue_.extract(queue_.begin());
    now_ = node.key().first;
    auto& [kind, detail, fn] = node.mapped();
    trace_note(kind.c_str(), detail);
    fn();
    ++metrics_.events_processed;
  }
}

void Simulation::prime() {
  if (primed_) return;
  primed_ = true;
  schedule(0.0, "QkdSessionDue", "background key generation",
           [this] { on_qkd_due(); });
  if (scenario_.traffic.lambda > 0.0) {
    SimTime first = rng_.exponential(scenario_.traffic.lambda);
    schedule(first, "Arrival", "lightpath request", [this] { on_arrival(); });
  }
  for (const AttackSpec& attack : scenario_.attacks) {
    AttackSpec spec = attack;
    schedule(spec.time, "AttackTrigger", attack_kind_name(spec.kind),
             [this, spec] {
               switch (spec.kind) {
                 case AttackKind::eavesdrop:
                   inject_eavesdropper(spec.link, spec.fraction);
                   break;
                 case AttackKind::sybil:
                   inject_sybils(spec.count, spec.interval);
                   break;
                 case AttackKind::tamper_ledger:
                   tamper_block_bit(spec.node, spec.height, spec.bit);
                   break;
                 case AttackKind::node_failure:
                   fail_node(spec.node);
                   break;
               }
             });
  }
}

void Simulation::run_until(SimTime t) {
  prime();
  process_until(t);
}

MetricsReport Simulation::run(std::ostream* trace) {
  trace_ = trace;
  if (trace_ != nullptr) (*trace_) << "time,kind,detail\n";
  prime();
  process_until(scenario_.sim.duration);
  // Quiescence drain: finish in-flight consensus traffic so replicas settle,
  // without admitting new arrivals, sessions or rounds.
  draining_ = true;
  process_until(std::numeric_limits<double>::infinity());
  return finalize();
}

// ---------------------------------------------------------------------------
// traffic

void Simulation::schedule_next_arrival() {
  if (draining_) return;
  SimTime next = now_ + rng_.exponential(scenario_.traffic.lambda);
  schedule(next, "Arrival", "lightpath request", [this] { on_arrival(); });
}

void Simulation::on_arrival() {
  if (draining_) return;
  ++metrics_.arrivals;

  LightpathRequest req;
  req.id = next_lightpath_id_++;
  const size_t n_dcn = dcn_nodes_.size();
  size_t si = static_cast<size_t>(rng_.below(n_dcn));
  size_t di = static_cast<size_t>(rng_.below(n_dcn - 1));
  if (di >= si) ++di;
  req.source = dcn_nodes_[si];
  req.destination = dcn_nodes_[di];
  req.security_required = rng_.chance(scenario_.traffic.secure_fraction);
  req.required_key_bits =
      req.security_required ? scenario_.traffic.required_key_bits : 0;
  req.holding_time = rng_.exponential(scenario_.traffic.mu);
  req.arrival_time = now_;

  ProvisionResult result = provision(req);
  std::ostringstream note;
  note << "request " << req.id << ' ' << node_name(req.source) << "->"
       << node_name(req.destination) << (req.security_required ? " secure" : "");
  if (result.ok()) {
    note << " submitted tx " << result.ledger_tx;
  } else {
    note << " blocked " << errc_name(result.block_reason);
    ++metrics_.blocked_total;
    switch (result.block_reason) {
      case Errc::no_route: ++metrics_.blocked_no_route; break;
      case Errc::no_wavelength: ++metrics_.blocked_no_wavelength; break;
      default: ++metrics_.blocked_key_starved; break;
    }
  }
  trace_note("Provision", note.str());
  schedule_next_arrival();
}

ProvisionResult Simulation::provision(const LightpathRequest& req) {
  require(req.source < topo_.node_count() &&
              req.destination < topo_.node_count(),
          Errc::invalid_input, "request endpoint out of range");
  require(req.source != req.destination, Errc::invalid_input,
          "request endpoints coincide");
  require(req.holding_time > 0.0, Errc::invalid_input,
          "holding time must be positive");

  const auto pool_snapshot = pools_.snapshot();
  const WavelengthMap wavelengths_before = wavelengths_;
  ProvisionResult res;
  auto blocked = [&](Errc reason) {
    wavelengths_ = wavelengths_before;
    pools_.rewind(pool_snapshot);
    res.status = ProvisionResult::Status::blocked;
    res.block_reason = reason;
    return res;
  };

  auto mask = failed_mask();
  auto path = topo_.route(req.source, req.destination, mask);
  if (!path.ok()) return blocked(Errc::no_route);

  auto tdch = wavelengths_.assign(topo_, path.value(), ChannelClass::tdch);
  if (!tdch.ok()) return blocked(Errc::no_wavelength);

  if (req.security_required && req.required_key_bits > 0) {
    if (!ensure_pair_bits(req.source, req.destination, req.required_key_bits)) {
      return blocked(Errc::key_starved);
    }
    // Data-plane pad for the lightpath itself; spent on provisioning.
    (void)pools_.find(req.source, req.destination)->draw(req.required_key_bits);
  }

  Lightpath lp;
  lp.request = req;
  lp.path = path.value();
  lp.tdch_wavelength = tdch.value();

  auto tx = make_lightpath_tx(lp, TxKind::lightpath_establish);
  if (!tx.ok()) return blocked(Errc::key_starved);
  lp.establish_tx = tx.value().id;
  if (!submit_transaction(std::move(tx).take(), false)) {
    return blocked(Errc::key_starved);
  }

  tx_to_lightpath_.emplace(lp.establish_tx, req.id);
  lightpaths_.emplace(req.id, lp);

  res.status = ProvisionResult::Status::established;
  res.path = lp.path;
  res.tdch_wavelength = lp.tdch_wavelength;
  res.ledger_tx = lp.establish_tx;
  return res;
}

void Simulation::release_lightpath(uint64_t lightpath_id) {
  auto it = lightpaths_.find(lightpath_id);
  require(it != lightpaths_.end(), Errc::internal_error,
          "unknown lightpath " + std::to_string(lightpath_id));
  Lightpath& lp = it->second;
  require(lp.state == LightpathState::established, Errc::internal_error,
          "lightpath " + std::to_string(lightpath_id) + " is not established");

  wavelengths_.release(topo_, lp.path, ChannelClass::tdch, lp.tdch_wavelength);
  lp.state = LightpathState::released;
  ++metrics_.departed;

  // The release is recorded whenever consensus can commit it; the resources
  // are freed regardless.
  if (!runtimes_[lp.request.source].failed) {
    auto tx = make_lightpath_tx(lp, TxKind::lightpath_release);
    if (tx.ok()) {
      lp.release_tx = tx.value().id;
      tx_to_lightpath_.emplace(lp.release_tx, lightpath_id);
      submit_transaction(std::move(tx).take(), false);
    } else {
      trace_note("Release", "release record failed: " + tx.message());
    }
  }
  trace_note("Release", "lightpath " + std::to_string(lightpath_id));
}

Result<Transaction> Simulation::make_lightpath_tx(const Lightpath& lp,
                                                  TxKind kind) {
  const LightpathRequest& req = lp.request;
  ByteWriter w;
  w.u64(req.id);
  w.u32(req.source);
  w.u32(req.destination);
  w.u32(lp.tdch_wavelength);
  w.u64(req.required_key_bits);
  w.f64(kind == TxKind::lightpath_establish ? req.holding_time : now_);
  BitVec payload = bits_from_bytes(w.data());

  std::vector<NodeId> verifiers;
  for (NodeId v : live_validators()) {
    if (v != req.source) verifiers.push_back(v);
  }
  if (verifiers.empty()) {
    return {Errc::transaction_failed, "no live verifier available"};
  }
  bool encrypt = req.security_required;
  if (!ensure_signing_bits(req.source, req.destination, payload.size(),
                           encrypt)) {
    return {Errc::transaction_failed, "key pools cannot cover the record"};
  }
  return make_transaction(payload, req.source, req.destination, verifiers,
                          pools_, scenario_.crypto.tag_bits, now_,
                          next_tx_id_++, kind, encrypt);
}

bool Simulation::ensure_signing_bits(NodeId sender, NodeId recipient,
                                     size_t payload_bits, bool encrypt) {
  const size_t per_verifier =
      scenario_.crypto.tag_bits + 256 - 1 + scenario_.crypto.tag_bits;
  for (NodeId v : live_validators()) {
    if (v == sender) continue;
    size_t need = per_verifier;
    if (encrypt && v == recipient) need += payload_bits;
    if (!ensure_pair_bits(sender, v, need)) return false;
  }
  if (encrypt && payload_bits > 0) {
    bool recipient_is_verifier = false;
    for (NodeId v : live_validators()) {
      if (v == recipient && v != sender) recipient_is_verifier = true;
    }
    if (!recipient_is_verifier &&
        !ensure_pair_bits(sender, recipient, payload_bits)) {
      return false;
    }
  }
  return true;
}

// ---------------------------------------------------------------------------
// qkd plane

void Simulation::on_qkd_due() {
  if (draining_) return;
  if (scenario_.qkd.enabled) {
    // Hop pools first, then relayed end-to-end pools.
    for (size_t i = 0; i < topo_.link_count(); ++i) {
      const LinkDef& link = topo_.link(i);
      if (runtimes_[link.a].failed || runtimes_[link.b].failed) continue;
      const KeyPool* pool = pools_.find(link.a, link.b);
      if (pool->available() < scenario_.qkd.watermark_bits) {
        run_link_session(i);
      }
    }
    for (const auto& [key, pool] : pools_.all()) {
      if (pool.available() >= scenario_.qkd.watermark_bits) continue;
      if (topo_.link_between(key.first, key.second).has_value()) continue;
      if (runtimes_[key.first].failed || runtimes_[key.second].failed) continue;
      ensure_pair_bits(key.first, key.second, scenario_.qkd.watermark_bits);
    }
  }
  schedule(now_ + scenario_.qkd.session_interval, "QkdSessionDue",
           "background key generation", [this] { on_qkd_due(); });
}

bool Simulation::run_link_session(size_t link_index) {
  const LinkDef& link = topo_.link(link_index);
  if (link.wavelengths[static_cast<size_t>(ChannelClass::qsch)] == 0 ||
      link.wavelengths[static_cast<size_t>(ChannelClass::pich)] == 0) {
    return false;
  }

  SessionParams params;
  params.n_qubits = scenario_.qkd.n_qubits;
  params.sample_fraction = scenario_.qkd.sample_fraction;
  params.qber_threshold = scenario_.qkd.qber_threshold;
  params.security_parameter = scenario_.qkd.security_parameter;
  params.ec_efficiency = scenario_.qkd.ec_efficiency;

  SessionOutcome outcome =
      run_session(params, link_channels_[link_index], rng_);

  PerLinkQkd& stats = link_qkd_[link_index];
  ++stats.sessions;
  ++metrics_.qkd_sessions;
  stats.qber_sum += outcome.qber_estimate;
  if (outcome.delivered) {
    stats.key_bits += outcome.final_length;
    metrics_.qkd_bits_delivered += outcome.final_length;
    pools_.find(link.a, link.b)->deposit(outcome.key);
    return true;
  }
  ++stats.aborted;
  if (outcome.abort_reason == AbortReason::eavesdropper_suspected) {
    ++metrics_.qkd_aborted_eavesdrop;
    trace_note("QkdAbort", "link " + pair_name(topo_, link.a, link.b) +
                               " qber " + std::to_string(outcome.qber_estimate));
  } else {
    ++metrics_.qkd_aborted_other;
  }
  return false;
}

bool Simulation::ensure_pair_bits(NodeId a, NodeId b, size_t n_bits) {
  KeyPool* pool = pools_.find(a, b);
  if (pool == nullptr) return false;
  if (pool->available() >= n_bits) return true;
  if (runtimes_[a].failed || runtimes_[b].failed) return false;
  if (!scenario_.qkd.enabled) return false;

  auto link = topo_.link_between(a, b);
  if (link.has_value()) {
    uint32_t attempts = 0;
    while (pool->available() < n_bits &&
           attempts < scenario_.qkd.max_sessions_per_request) {
      ++attempts;
      if (!run_link_session(*link)) {
        const LinkDef& def = topo_.link(*link);
        if (def.wavelengths[static_cast<size_t>(ChannelClass::qsch)] == 0 ||
            def.wavelengths[static_cast<size_t>(ChannelClass::pich)] == 0) {
          break;  // this hop can never produce keys
        }
      }
    }
    return pool->available() >= n_bits;
  }

  auto path = topo_.route(a, b, failed_mask());
  if (!path.ok()) return false;
  const size_t need = n_bits - pool->available();
  for (size_t i = 0; i + 1 < path.value().size(); ++i) {
    if (!ensure_pair_bits(path.value()[i], path.value()[i + 1], need)) {
      return false;
    }
  }
  auto key = relay_key(path.value(), pools_, need, rng_);
  if (!key.ok()) return false;
  pool->deposit(key.value());
  return pool->available() >= n_bits;
}

// ---------------------------------------------------------------------------
// blockchain plane

bool Simulation::submit_transaction(Transaction tx, bool forged) {
  auto live = live_validators();
  if (forged) ++metrics_.sybil_tx_submitted;
  if (live.empty()) return false;

  std::vector<NodeId> checkers;
  uint32_t quorum = tx_quorum_;
  for (NodeId v : live) {
    if (v == tx.sender) {
      // The sender's own approval is implicit in having signed it.
      quorum = quorum > 0 ? quorum - 1 : 0;
      continue;
    }
    checkers.push_back(v);
  }
  if (checkers.empty()) {
    pending_.push_back(std::move(tx));
    maybe_start_round();
    return true;
  }
  quorum = std::max<uint32_t>(
      1, std::min<uint32_t>(quorum, static_cast<uint32_t>(checkers.size())));

  ValidationReport report = validate_transaction(tx, checkers, pools_, quorum);
  metrics_.pool_desyncs += report.desyncs;
  if (forged && report.verdict == Verdict::accept) {
    ++metrics_.sybil_tx_accepted;
  }
  if (report.verdict != Verdict::accept) {
    trace_note("TxRejected", "tx " + std::to_string(tx.id) + " from " +
                                 node_name(tx.sender) + " valid_tags " +
                                 std::to_string(report.valid_tags));
    return false;
  }
  pending_.push_back(std::move(tx));
  maybe_start_round();
  return true;
}

void Simulation::maybe_start_round() {
  if (draining_ || round_start_scheduled_ || active_round_.has_value()) return;
  if (pending_.empty()) return;
  round_start_scheduled_ = true;
  SimTime t = std::max(
      now_, last_round_start_ + scenario_.consensus.min_round_interval);
  schedule(t, "ConsensusTimer", "round start", [this] {
    round_start_scheduled_ = false;
    on_round_start();
  });
}

void Simulation::on_round_start() {
  if (draining_ || active_round_.has_value() || pending_.empty()) return;

  const uint64_t round = round_counter_++;
  active_round_ = round;
  last_round_start_ = now_;
  ++metrics_.rounds_started;

  RoundInfo& info = round_info_[round];
  info.round = round;
  info.leader = round_leader(validators_, round);
  info.started = now_;

  const SimTime deadline = now_ + scenario_.consensus.round_timeout;
  for (NodeId v : validators_) {
    if (runtimes_[v].failed || !runtimes_[v].consensus) continue;
    runtimes_[v].consensus->begin_round(round, now_, deadline);
  }
  schedule(deadline, "ConsensusTimer",
           "round " + std::to_string(round) + " deadline",
           [this, round] { on_round_deadline(round); });

  NodeRuntime& leader = runtimes_[info.leader];
  Digest256 sybil_target{};
  bool have_proposal = false;
  if (!leader.failed && leader.consensus.has_value()) {
    if (leader.equivocator) {
      equivocate_propose(round);
    } else {
      std::vector<Transaction> txs(
          pending_.begin(),
          pending_.begin() +
              std::min<size_t>(pending_.size(),
                               scenario_.consensus.max_block_txs));
      std::vector<Verdict> verdicts(txs.size(), Verdict::accept);
      Block block =
          assemble_block(std::move(txs), verdicts, &leader.ledger.tip(), now_);
      auto emission =
          leader.consensus->make_proposal(round, std::move(block), pools_);
      if (emission.ok()) {
        sybil_target = emission.value().outgoing.front().block_digest;
        have_proposal = true;
        for (const auto& msg : emission.value().outgoing) {
          broadcast(info.leader, msg);
        }
        absorb(emission.value().counters);
        if (emission.value().decided.has_value()) {
          on_decide(info.leader, round, *emission.value().decided);
        }
      } else {
        ++metrics_.sign_failures;
        trace_note("Consensus", "round " + std::to_string(round) +
                                    " leader key-starved, skipped");
      }
    }
  }

  if (sybil_count_ > 0) {
    if (!have_proposal) {
      auto digest_bits = rng_.bits(256);
      auto bytes = bytes_from_bits(digest_bits);
      std::copy(bytes.begin(), bytes.end(), sybil_target.begin());
    }
    emit_sybil_votes(round, sybil_target);
  }
}

void Simulation::on_round_deadline(uint64_t round) {
  RoundInfo& info = round_info_[round];
  if (info.closed) return;
  if (!info.committed) {
    trace_note("Consensus", "round " + std::to_string(round) + " timed out");
  }
  close_round(round);
}

void Simulation::close_round(uint64_t round) {
  RoundInfo& info = round_info_[round];
  if (info.closed) return;
  info.closed = true;
  if (active_round_.has_value() && *active_round_ == round) {
    active_round_.reset();
  }
  maybe_start_round();
}

void Simulation::broadcast(NodeId from, const ConsensusMessage& msg) {
  RoundInfo& info = round_info_[msg.round];
  switch (msg.phase) {
    case Phase::propose: ++info.proposals_sent; break;
    case Phase::vote: ++info.votes_sent; break;
    case Phase::decide: ++info.decides_sent; break;
  }
  for (NodeId v : validators_) {
    if (v == from || runtimes_[v].failed) continue;
    auto latency = path_latency(from, v);
    if (!latency.ok()) {
      ++metrics_.messages_dropped;
      continue;
    }
    ++metrics_.messages_sent;
    ConsensusMessage copy = msg;
    schedule(now_ + latency.value(), "MessageDelivery",
             std::string(phase_name(msg.phase)) + " r" +
                 std::to_string(msg.round) + " " + node_name(from) + "->" +
                 node_name(v),
             [this, v, copy = std::move(copy)] { deliver(v, copy); });
  }
}

void Simulation::deliver(NodeId to, const ConsensusMessage& msg) {
  NodeRuntime& rt = runtimes_[to];
  if (rt.failed || !rt.consensus.has_value()) {
    ++metrics_.messages_dropped;
    return;
  }
  auto emission = rt.consensus->handle_message(msg, pools_);
  absorb(emission.counters);
  if (msg.forged && msg.phase == Phase::vote &&
      emission.counters.forged_accepted > 0) {
    ++metrics_.sybil_votes_counted;
  }
  for (const auto& out : emission.outgoing) {
    broadcast(to, out);
  }
  if (emission.decided.has_value()) {
    on_decide(to, msg.round, std::move(*emission.decided));
  }
}

void Simulation::on_decide(NodeId node, uint64_t round, Block block) {
  RoundInfo& info = round_info_[round];
  const bool first = info.deciders.empty();
  info.deciders.insert(node);

  if (first) {
    info.committed = true;
    info.commit_latency = now_ - info.started;
    commit_latencies_.push_back(info.commit_latency);
    ++metrics_.rounds_committed;
    for (const auto& tx : block.transactions) {
      auto it = std::find_if(pending_.begin(), pending_.end(),
                             [&](const Transaction& p) { return p.id == tx.id; });
      if (it != pending_.end()) pending_.erase(it);
    }
    apply_commit(block);
    send_ledger_updates(node, block);
    trace_note("Commit", "round " + std::to_string(round) + " height " +
                             std::to_string(block.header.height) + " txs " +
                             std::to_string(block.transactions.size()));
  }

  auto status = runtimes_[node].ledger.append(block);
  if (!status.ok() && !runtimes_[node].tampered) {
    fail(Errc::invariant_violation,
         "honest node " + node_name(node) +
             " rejected a decided block: " + status.message());
  }

  size_t live = 0;
  for (NodeId v : validators_) {
    if (!runtimes_[v].failed) ++live;
  }
  if (info.deciders.size() >= live) close_round(round);
}

void Simulation::apply_commit(const Block& block) {
  for (const auto& tx : block.transactions) {
    auto it = tx_to_lightpath_.find(tx.id);
    if (it == tx_to_lightpath_.end()) continue;
    auto lp_it = lightpaths_.find(it->second);
    if (lp_it == lightpaths_.end()) continue;
    Lightpath& lp = lp_it->second;
    if (tx.kind == TxKind::lightpath_establish &&
        lp.state == LightpathState::pending_commit) {
      lp.state = LightpathState::established;
      lp.established_at = now_;
      ++metrics_.established;
      const uint64_t id = lp.request.id;
      schedule(now_ + lp.request.holding_time, "Departure",
               "lightpath " + std::to_string(id), [this, id] {
                 if (draining_) return;
                 release_lightpath(id);
               });
    }
  }
}

void Simulation::send_ledger_updates(NodeId from, const Block& block) {
  for (NodeId n = 0; n < topo_.node_count(); ++n) {
    if (n == from || runtimes_[n].failed) continue;
    if (runtimes_[n].consensus.has_value()) continue;  // validators decide
    auto latency = path_latency(from, n);
    if (!latency.ok()) continue;
    Block copy = block;
    schedule(now_ + latency.value(), "MessageDelivery",
             "LedgerUpdate h" + std::to_string(block.header.height) + " ->" +
                 node_name(n),
             [this, n, copy = std::move(copy)] {
               NodeRuntime& rt = runtimes_[n];
               if (rt.failed) return;
               auto status = rt.ledger.append(copy);
               if (!status.ok() && !rt.tampered) {
                 fail(Errc::invariant_violation,
                      "replica " + node_name(n) +
                          " rejected a committed block: " + status.message());
               }
             });
  }
}

void Simulation::equivocate_propose(uint64_t round) {
  RoundInfo& info = round_info_[round];
  NodeRuntime& leader = runtimes_[info.leader];

  std::vector<Transaction> txs(
      pending_.begin(),
      pending_.begin() + std::min<size_t>(pending_.size(),
                                          scenario_.consensus.max_block_txs));
  std::vector<Verdict> verdicts(txs.size(), Verdict::accept);
  Block block_a = assemble_block(txs, verdicts, &leader.ledger.tip(), now_);
  Block block_b = block_a;
  block_b.header.timestamp += 1e-9;  // distinct digest, same transactions

  std::vector<NodeId> others;
  for (NodeId v : validators_) {
    if (v != info.leader && !runtimes_[v].failed) others.push_back(v);
  }

  auto send_half = [&](const Block& block, size_t parity) {
    std::vector<NodeId> group;
    for (size_t i = 0; i < others.size(); ++i) {
      if (i % 2 == parity) group.push_back(others[i]);
    }
    if (group.empty()) return;
    ConsensusMessage msg;
    msg.round = round;
    msg.phase = Phase::propose;
    msg.block_digest = block_hash(block.header);
    msg.sender = info.leader;
    msg.block = block;
    BitVec core = bits_from_bytes(msg.core_digest());
    auto tags = sign_message(core, info.leader, group, pools_,
                             scenario_.crypto.consensus_tag_bits);
    if (!tags.ok()) {
      ++metrics_.sign_failures;
      return;
    }
    msg.tags = std::move(tags).take();
    ++info.proposals_sent;
    for (NodeId v : group) {
      auto latency = path_latency(info.leader, v);
      if (!latency.ok()) {
        ++metrics_.messages_dropped;
        continue;
      }
      ++metrics_.messages_sent;
      ConsensusMessage copy = msg;
      schedule(now_ + latency.value(), "MessageDelivery",
               "Propose(equivocal) r" + std::to_string(round) + " ->" +
                   node_name(v),
               [this, v, copy = std::move(copy)] { deliver(v, copy); });
    }
  };
  send_half(block_a, 0);
  send_half(block_b, 1);
  trace_note("Consensus",
             "round " + std::to_string(round) + " equivocating proposals");
}

void Simulation::emit_sybil_votes(uint64_t round, const Digest256& digest) {
  for (uint32_t k = 0; k < sybil_count_; ++k) {
    const NodeId sybil = static_cast<NodeId>(topo_.node_count() + k);
    ConsensusMessage msg;
    msg.round = round;
    msg.phase = Phase::vote;
    msg.block_digest = digest;
    msg.sender = sybil;
    msg.forged = true;
    for (NodeId v : validators_) {
      if (runtimes_[v].failed) continue;
      MacTag tag;
      tag.bits = rng_.bits(scenario_.crypto.consensus_tag_bits);
      tag.seed_offset = rng_.below(4096);
      tag.mask_offset = rng_.below(4096);
      msg.tags.emplace(v, std::move(tag));
    }
    ++metrics_.sybil_votes_submitted;
    for (NodeId v : validators_) {
      if (runtimes_[v].failed) continue;
      ++metrics_.messages_sent;
      ConsensusMessage copy = msg;
      schedule(now_ + scenario_.consensus.processing_delay, "MessageDelivery",
               "SybilVote r" + std::to_string(round) + " ->" + node_name(v),
               [this, v, copy = std::move(copy)] { deliver(v, copy); });
    }
  }
}

void Simulation::submit_sybil_transaction(NodeId sybil) {
  Transaction tx;
  tx.id = next_tx_id_++;
  tx.sender = sybil;
  tx.payload_ciphertext = rng_.bits(64);
  tx.timestamp = now_;
  tx.kind = TxKind::generic;
  for (NodeId v : validators_) {
    if (runtimes_[v].failed) continue;
    MacTag tag;
    tag.bits = rng_.bits(scenario_.crypto.tag_bits);
    tag.seed_offset = rng_.below(4096);
    tag.mask_offset = rng_.below(4096);
    tx.tags.emplace(v, std::move(tag));
  }
  submit_transaction(std::move(tx), true);
}

void Simulation::absorb(const MessageCounters& counters) {
  metrics_.messages_dropped += counters.dropped;
  metrics_.forged_rejected += counters.forged_rejected;
  metrics_.forged_accepted += counters.forged_accepted;
  metrics_.pool_desyncs += counters.desyncs;
  metrics_.sign_failures += counters.sign_failures;
}

// ---------------------------------------------------------------------------
// adversary surface

void Simulation::inject_eavesdropper(size_t link, double fraction) {
  require(link < topo_.link_count(), Errc::config_error,
          "unknown link index " + std::to_string(link));
  require(fraction >= 0.0 && fraction <= 1.0, Errc::config_error,
          "eavesdrop fraction must lie in [0,1]");
  link_channels_[link].eavesdrop_fraction = fraction;
  trace_note("Attack", "eavesdropper on " +
                           pair_name(topo_, topo_.link(link).a,
                                     topo_.link(link).b) +
                           " fraction " + std::to_string(fraction));
}

void Simulation::inject_sybils(uint32_t count, double emission_interval) {
  require(count >= 1, Errc::config_error, "sybil count must be >= 1");
  sybil_count_ += count;
  sybil_interval_ = emission_interval;
  trace_note("Attack", "sybil nodes " + std::to_string(count));
  if (!sybil_chain_active_) {
    sybil_chain_active_ = true;
    schedule(now_, "AttackTrigger", "sybil emissions",
             [this] { sybil_emit(); });
  }
}

void Simulation::sybil_emit() {
  if (draining_) return;
  for (uint32_t k = 0; k < sybil_count_; ++k) {
    submit_sybil_transaction(static_cast<NodeId>(topo_.node_count() + k));
  }
  schedule(now_ + sybil_interval_, "AttackTrigger", "sybil emissions",
           [this] { sybil_emit(); });
}

void Simulation::tamper_block_bit(NodeId node, uint64_t height, uint64_t bit) {
  require(node < topo_.node_count(), Errc::config_error, "unknown node");
  Ledger& ledger = runtimes_[node].ledger;
  require(height < ledger.chain().size(), Errc::config_error,
          "tamper height beyond chain tip");
  Block& block = ledger.block_at(height);

  size_t payload_bits = 0;
  for (const auto& tx : block.transactions) {
    payload_bits += tx.payload_ciphertext.size();
  }
  if (payload_bits > 0) {
    size_t pos = static_cast<size_t>(bit % payload_bits);
    for (auto& tx : block.transactions) {
      if (pos < tx.payload_ciphertext.size()) {
        tx.payload_ciphertext[pos] ^= 1u;
        break;
      }
      pos -= tx.payload_ciphertext.size();
    }
  } else {
    // No transaction payload to corrupt; hit the stored header digests.
    size_t pos = static_cast<size_t>(bit % 512);
    Digest256& target =
        pos < 256 ? block.header.prev_hash : block.header.merkle_root;
    size_t p = pos % 256;
    target[p / 8] ^= static_cast<uint8_t>(1u << (7 - (p % 8)));
  }

  runtimes_[node].tampered = true;
  ++metrics_.tamper_events;
  auto bad = ledger.audit();
  if (bad.has_value()) {
    ++metrics_.tamper_detected;
    const std::string name = node_name(node);
    if (!metrics_.audit_first_invalid.contains(name)) {
      metrics_.audit_first_invalid.emplace(name, *bad);
    }
  }
  trace_note("Attack", "tampered " + node_name(node) + " height " +
                           std::to_string(height));
}

void Simulation::fail_node(NodeId node) {
  require(node < topo_.node_count(), Errc::config_error, "unknown node");
  runtimes_[node].failed = true;
  trace_note("Attack", "node failure " + node_name(node));
}

// ---------------------------------------------------------------------------
// helpers and finalization

double Simulation::link_latency(size_t link_index) const {
  return topo_.link(link_index).length_km / kLightSpeedKmPerS +
         scenario_.consensus.processing_delay;
}

Result<double> Simulation::path_latency(NodeId from, NodeId to) const {
  if (from >= topo_.node_count() || to >= topo_.node_count()) {
    return scenario_.consensus.processing_delay;  // sybil fabric injection
  }
  auto path = topo_.route(from, to, failed_mask());
  if (!path.ok()) return {Errc::no_route, path.message()};
  double latency = 0.0;
  const auto& nodes = path.value();
  for (size_t i = 0; i + 1 < nodes.size(); ++i) {
    latency += link_latency(*topo_.link_between(nodes[i], nodes[i + 1]));
  }
  return latency;
}

std::vector<NodeId> Simulation::live_validators() const {
  std::vector<NodeId> live;
  for (NodeId v : validators_) {
    if (!runtimes_[v].failed) live.push_back(v);
  }
  return live;
}

std::vector<uint8_t> Simulation::failed_mask() const {
  std::vector<uint8_t> mask(topo_.node_count(), 0);
  for (NodeId i = 0; i < topo_.node_count(); ++i) {
    mask[i] = runtimes_[i].failed ? 1 : 0;
  }
  return mask;
}

void Simulation::finalize_ledger_metrics() {
  for (NodeId i = 0; i < topo_.node_count(); ++i) {
    metrics_.ledger_heights[node_name(i)] = runtimes_[i].ledger.height();
    auto bad = runtimes_[i].ledger.audit();
    if (bad.has_value() &&
        !metrics_.audit_first_invalid.contains(node_name(i))) {
      metrics_.audit_first_invalid.emplace(node_name(i), *bad);
    }
  }

  std::optional<Digest256> honest_digest;
  bool honest_diverged = false;
  bool any_diverged = false;
  for (NodeId i = 0; i < topo_.node_count(); ++i) {
    const NodeRuntime& rt = runtimes_[i];
    if (rt.failed) continue;
    Digest256 digest = rt.ledger.replica_digest();
    bool honest = !rt.tampered && !rt.equivocator;
    if (honest) {
      if (!honest_digest.has_value()) {
        honest_digest = digest;
      } else if (digest != *honest_digest) {
        honest_diverged = true;
      }
    }
  }
  if (honest_digest.has_value()) {
    for (NodeId i = 0; i < topo_.node_count(); ++i) {
      const NodeRuntime& rt = runtimes_[i];
      if (rt.failed) continue;
      if (rt.ledger.replica_digest() != *honest_digest) any_diverged = true;
    }
  }
  metrics_.divergence_honest = honest_diverged;
  metrics_.divergence_any = any_diverged;

  // Committed record counts from the first honest validator's replica.
  for (NodeId v : validators_) {
    const NodeRuntime& rt = runtimes_[v];
    if (rt.failed || rt.tampered || rt.equivocator) continue;
    for (const auto& block : rt.ledger.chain()) {
      for (const auto& tx : block.transactions) {
        if (tx.kind == TxKind::lightpath_establish) {
          ++metrics_.committed_establish_txs;
        } else if (tx.kind == TxKind::lightpath_release) {
          ++metrics_.committed_release_txs;
        }
      }
    }
    break;
  }
}

MetricsReport Simulation::finalize() {
  if (finalized_) return metrics_;
  finalized_ = true;

  metrics_.duration = scenario_.sim.duration;
  metrics_.seed = seed_;

  for (const auto& [id, lp] : lightpaths_) {
    if (lp.state == LightpathState::pending_commit) ++metrics_.pending_at_end;
  }
  const uint64_t resolved = metrics_.blocked_total + metrics_.established;
  metrics_.blocking_probability =
      resolved == 0 ? 0.0
                    : static_cast<double>(metrics_.blocked_total) /
                          static_cast<double>(resolved);

  for (size_t i = 0; i < topo_.link_count(); ++i) {
    const PerLinkQkd& stats = link_qkd_[i];
    LinkQkdMetrics out;
    out.link = pair_name(topo_, topo_.link(i).a, topo_.link(i).b);
    out.sessions = stats.sessions;
    out.aborted = stats.aborted;
    out.mean_qber =
        stats.sessions == 0
            ? 0.0
            : stats.qber_sum / static_cast<double>(stats.sessions);
    out.key_bits = stats.key_bits;
    out.key_rate_bits_per_s =
        static_cast<double>(stats.key_bits) / scenario_.sim.duration;
    metrics_.qkd_per_link.push_back(std::move(out));
  }

  metrics_.commit_latency = LatencyStats::from_samples(commit_latencies_);
  finalize_ledger_metrics();
  return metrics_;
}

}  // namespace qsb
