#include "qsb/scenario.hpp"

#include <fstream>

#include <nlohmann/json.hpp>

namespace qsb {

namespace {

using nlohmann::json;

[[noreturn]] void bad_field(const std::string& path, const std::string& what) {
  fail(Errc::config_error, path + ": " + what);
}

const json& member(const json& obj, const char* key, const std::string& path) {
  if (!obj.is_object()) bad_field(path, "expected an object");
  auto it = obj.find(key);
  if (it == obj.end()) bad_field(path + "." + key, "missing required field");
  return *it;
}

const json* opt_member(const json& obj, const char* key,
                       const std::string& path) {
  if (!obj.is_object()) bad_field(path, "expected an object");
  auto it = obj.find(key);
  return it == obj.end() ? nullptr : &*it;
}

double as_number(const json& v, const std::string& path) {
  if (!v.is_number()) bad_field(path, "expected a number");
  return v.get<double>();
}

double opt_number(const json& obj, const char* key, double dflt,
                  const std::string& path) {
  const json* v = opt_member(obj, key, path);
  return v == nullptr ? dflt : as_number(*v, path + "." + key);
}

uint64_t opt_count(const json& obj, const char* key, uint64_t dflt,
                   const std::string& path) {
  const json* v = opt_member(obj, key, path);
  if (v == nullptr) return dflt;
  const std::string p = path + "." + key;
  if (!v->is_number_integer() || v->get<int64_t>() < 0) {
    bad_field(p, "expected a non-negative integer");
  }
  return v->get<uint64_t>();
}

bool opt_bool(const json& obj, const char* key, bool dflt,
              const std::string& path) {
  const json* v = opt_member(obj, key, path);
  if (v == nullptr) return dflt;
  if (!v->is_boolean()) bad_field(path + "." + key, "expected a boolean");
  return v->get<bool>();
}

std::string as_string(const json& v, const std::string& path) {
  if (!v.is_string()) bad_field(path, "expected a string");
  return v.get<std::string>();
}

double probability(const json& obj, const char* key, double dflt,
                   const std::string& path) {
  double p = opt_number(obj, key, dflt, path);
  if (p < 0.0 || p > 1.0) bad_field(path + "." + key, "must lie in [0,1]");
  return p;
}

ChannelModel parse_channel(const json& obj, const ChannelModel& defaults,
                           const std::string& path) {
  ChannelModel ch = defaults;
  ch.loss_probability =
      probability(obj, "loss_probability", defaults.loss_probability, path);
  ch.flip_probability =
      probability(obj, "flip_probability", defaults.flip_probability, path);
  ch.eavesdrop_fraction = probability(obj, "eavesdrop_fraction",
                                      defaults.eavesdrop_fraction, path);
  return ch;
}

Topology parse_topology(const json& doc, const ChannelModel& channel_defaults,
                        const std::string& path) {
  const json& nodes_j = member(doc, "nodes", path);
  if (!nodes_j.is_array() || nodes_j.empty()) {
    bad_field(path + ".nodes", "expected a non-empty array");
  }

  std::vector<NodeDef> nodes;
  for (size_t i = 0; i < nodes_j.size(); ++i) {
    const std::string np = path + ".nodes[" + std::to_string(i) + "]";
    const json& nj = nodes_j[i];
    NodeDef def;
    def.name = as_string(member(nj, "id", np), np + ".id");
    if (const json* roles = opt_member(nj, "roles", np)) {
      if (!roles->is_array()) bad_field(np + ".roles", "expected an array");
      for (size_t r = 0; r < roles->size(); ++r) {
        std::string role = as_string(
            (*roles)[r], np + ".roles[" + std::to_string(r) + "]");
        if (role == "controller") {
          def.controller = true;
        } else if (role == "dcn") {
          def.dcn = true;
        } else if (role == "qkd-endpoint") {
          def.qkd_endpoint = true;
        } else {
          bad_field(np + ".roles[" + std::to_string(r) + "]",
                    "unknown role '" + role + "'");
        }
      }
    }
    nodes.push_back(std::move(def));
  }

  auto find_node = [&nodes](const std::string& name) -> std::optional<NodeId> {
    for (NodeId i = 0; i < nodes.size(); ++i) {
      if (nodes[i].name == name) return i;
    }
    return std::nullopt;
  };

  const json& links_j = member(doc, "links", path);
  if (!links_j.is_array()) bad_field(path + ".links", "expected an array");
  std::vector<LinkDef> links;
  for (size_t i = 0; i < links_j.size(); ++i) {
    const std::string lp = path + ".links[" + std::to_string(i) + "]";
    const json& lj = links_j[i];
    LinkDef def;
    std::string a = as_string(member(lj, "a", lp), lp + ".a");
    std::string b = as_string(member(lj, "b", lp), lp + ".b");
    auto na = find_node(a);
    if (!na) bad_field(lp + ".a", "unknown node '" + a + "'");
    auto nb = find_node(b);
    if (!nb) bad_field(lp + ".b", "unknown node '" + b + "'");
    def.a = *na;
    def.b = *nb;
    def.length_km = opt_number(lj, "length_km", 1.0, lp);
    if (def.length_km <= 0.0) bad_field(lp + ".length_km", "must be > 0");
    if (const json* wj = opt_member(lj, "wavelengths", lp)) {
      const std::string wp = lp + ".wavelengths";
      def.wavelengths[0] =
          static_cast<uint32_t>(opt_count(*wj, "qsch", 0, wp));
      def.wavelengths[1] =
          static_cast<uint32_t>(opt_count(*wj, "pich", 0, wp));
      def.wavelengths[2] =
          static_cast<uint32_t>(opt_count(*wj, "bcch", 0, wp));
      def.wavelengths[3] =
          static_cast<uint32_t>(opt_count(*wj, "tdch", 0, wp));
    }
    def.channel = channel_defaults;
    if (const json* cj = opt_member(lj, "channel", lp)) {
      def.channel = parse_channel(*cj, channel_defaults, lp + ".channel");
    }
    links.push_back(def);
  }

  try {
    return Topology(std::move(nodes), std::move(links));
  } catch (const Error& e) {
    bad_field(path, e.what());
  }
}

AttackKind parse_attack_kind(const std::string& kind, const std::string& path) {
  if (kind == "eavesdrop") return AttackKind::eavesdrop;
  if (kind == "sybil") return AttackKind::sybil;
  if (kind == "tamper") return AttackKind::tamper_ledger;
  if (kind == "node_failure") return AttackKind::node_failure;
  bad_field(path, "unknown attack kind '" + kind + "'");
}

}  // namespace

const char* attack_kind_name(AttackKind kind) {
  switch (kind) {
    case AttackKind::eavesdrop: return "eavesdrop";
    case AttackKind::sybil: return "sybil";
    case AttackKind::tamper_ledger: return "tamper";
    case AttackKind::node_failure: return "node_failure";
  }
  return "unknown";
}

Scenario Scenario::from_json(const json& doc) {
  if (!doc.is_object()) fail(Errc::config_error, "scenario: expected an object");
  Scenario sc;

  if (const json* qj = opt_member(doc, "qkd", "scenario")) {
    const std::string qp = "qkd";
    sc.qkd.enabled = opt_bool(*qj, "enabled", sc.qkd.enabled, qp);
    sc.qkd.n_qubits = opt_count(*qj, "n_qubits", sc.qkd.n_qubits, qp);
    if (sc.qkd.n_qubits == 0) bad_field("qkd.n_qubits", "must be positive");
    sc.qkd.sample_fraction =
        opt_number(*qj, "sample_fraction", sc.qkd.sample_fraction, qp);
    if (sc.qkd.sample_fraction <= 0.0 || sc.qkd.sample_fraction >= 1.0) {
      bad_field("qkd.sample_fraction", "must lie in (0,1)");
    }
    sc.qkd.qber_threshold =
        probability(*qj, "qber_threshold", sc.qkd.qber_threshold, qp);
    sc.qkd.security_parameter =
        opt_count(*qj, "security_parameter", sc.qkd.security_parameter, qp);
    sc.qkd.ec_efficiency =
        opt_number(*qj, "ec_efficiency", sc.qkd.ec_efficiency, qp);
    if (sc.qkd.ec_efficiency < 1.0) {
      bad_field("qkd.ec_efficiency", "must be >= 1");
    }
    sc.qkd.watermark_bits =
        opt_count(*qj, "watermark_bits", sc.qkd.watermark_bits, qp);
    sc.qkd.session_interval =
        opt_number(*qj, "session_interval", sc.qkd.session_interval, qp);
    if (sc.qkd.session_interval <= 0.0) {
      bad_field("qkd.session_interval", "must be > 0");
    }
    sc.qkd.max_sessions_per_request = static_cast<uint32_t>(opt_count(
        *qj, "max_sessions_per_request", sc.qkd.max_sessions_per_request, qp));
  }

  ChannelModel channel_defaults;
  if (const json* qj = opt_member(doc, "qkd", "scenario")) {
    if (const json* cj = opt_member(*qj, "channel", "qkd")) {
      channel_defaults =
          parse_channel(*cj, channel_defaults, "qkd.channel");
    }
  }

  sc.topology =
      parse_topology(member(doc, "topology", "scenario"), channel_defaults,
                     "topology");

  if (const json* tj = opt_member(doc, "traffic", "scenario")) {
    const std::string tp = "traffic";
    sc.traffic.lambda = opt_number(*tj, "lambda", sc.traffic.lambda, tp);
    if (sc.traffic.lambda < 0.0) bad_field("traffic.lambda", "must be >= 0");
    sc.traffic.mu = opt_number(*tj, "mu", sc.traffic.mu, tp);
    if (sc.traffic.mu <= 0.0) bad_field("traffic.mu", "must be > 0");
    sc.traffic.secure_fraction =
        probability(*tj, "secure_fraction", sc.traffic.secure_fraction, tp);
    sc.traffic.required_key_bits = static_cast<uint32_t>(opt_count(
        *tj, "required_key_bits", sc.traffic.required_key_bits, tp));
  }

  if (const json* cj = opt_member(doc, "crypto", "scenario")) {
    const std::string cp = "crypto";
    sc.crypto.tag_bits = static_cast<uint32_t>(
        opt_count(*cj, "tag_bits", sc.crypto.tag_bits, cp));
    if (sc.crypto.tag_bits == 0) bad_field("crypto.tag_bits", "must be > 0");
    sc.crypto.consensus_tag_bits = static_cast<uint32_t>(opt_count(
        *cj, "consensus_tag_bits", sc.crypto.consensus_tag_bits, cp));
    if (sc.crypto.consensus_tag_bits == 0) {
      bad_field("crypto.consensus_tag_bits", "must be > 0");
    }
    sc.crypto.bootstrap_key_bits = static_cast<uint32_t>(opt_count(
        *cj, "bootstrap_key_bits", sc.crypto.bootstrap_key_bits, cp));
  }

  if (const json* cj = opt_member(doc, "consensus", "scenario")) {
    const std::string cp = "consensus";
    sc.consensus.round_timeout =
        opt_number(*cj, "timeout", sc.consensus.round_timeout, cp);
    if (sc.consensus.round_timeout <= 0.0) {
      bad_field("consensus.timeout", "must be > 0");
    }
    sc.consensus.processing_delay = opt_number(
        *cj, "processing_delay", sc.consensus.processing_delay, cp);
    if (sc.consensus.processing_delay < 0.0) {
      bad_field("consensus.processing_delay", "must be >= 0");
    }
    sc.consensus.max_block_txs = static_cast<uint32_t>(
        opt_count(*cj, "max_block_txs", sc.consensus.max_block_txs, cp));
    if (sc.consensus.max_block_txs == 0) {
      bad_field("consensus.max_block_txs", "must be > 0");
    }
    sc.consensus.min_round_interval = opt_number(
        *cj, "min_round_interval", sc.consensus.min_round_interval, cp);
    if (const json* ej = opt_member(*cj, "equivocator", cp)) {
      sc.consensus.equivocator = as_string(*ej, "consensus.equivocator");
      auto id = sc.topology.find_node(sc.consensus.equivocator);
      if (!id || !sc.topology.node(*id).controller) {
        bad_field("consensus.equivocator",
                  "'" + sc.consensus.equivocator + "' is not a controller");
      }
    }
  }

  if (const json* aj = opt_member(doc, "attacks", "scenario")) {
    if (!aj->is_array()) bad_field("attacks", "expected an array");
    for (size_t i = 0; i < aj->size(); ++i) {
      const std::string ap = "attacks[" + std::to_string(i) + "]";
      const json& a = (*aj)[i];
      AttackSpec spec;
      spec.kind =
          parse_attack_kind(as_string(member(a, "kind", ap), ap + ".kind"),
                            ap + ".kind");
      spec.time = as_number(member(a, "time", ap), ap + ".time");
      if (spec.time < 0.0) bad_field(ap + ".time", "must be >= 0");
      switch (spec.kind) {
        case AttackKind::eavesdrop: {
          const json& lj = member(a, "link", ap);
          if (!lj.is_array() || lj.size() != 2) {
            bad_field(ap + ".link", "expected [\"node\", \"node\"]");
          }
          std::string a_name = as_string(lj[0], ap + ".link[0]");
          std::string b_name = as_string(lj[1], ap + ".link[1]");
          auto na = sc.topology.find_node(a_name);
          auto nb = sc.topology.find_node(b_name);
          if (!na || !nb) {
            bad_field(ap + ".link", "unknown node in link reference");
          }
          auto link = sc.topology.link_between(*na, *nb);
          if (!link) {
            bad_field(ap + ".link", "no link between '" + a_name + "' and '" +
                                        b_name + "'");
          }
          spec.link = *link;
          spec.fraction =
              probability(a, "fraction", 1.0, ap);
          break;
        }
        case AttackKind::sybil: {
          spec.count = static_cast<uint32_t>(opt_count(a, "count", 0, ap));
          if (spec.count < 1) bad_field(ap + ".count", "must be >= 1");
          spec.interval = opt_number(a, "interval", spec.interval, ap);
          if (spec.interval <= 0.0) bad_field(ap + ".interval", "must be > 0");
          break;
        }
        case AttackKind::tamper_ledger: {
          std::string name =
              as_string(member(a, "node", ap), ap + ".node");
          auto id = sc.topology.find_node(name);
          if (!id) bad_field(ap + ".node", "unknown node '" + name + "'");
          spec.node = *id;
          spec.height = opt_count(a, "height", 0, ap);
          spec.bit = opt_count(a, "bit", 0, ap);
          break;
        }
        case AttackKind::node_failure: {
          std::string name =
              as_string(member(a, "node", ap), ap + ".node");
          auto id = sc.topology.find_node(name);
          if (!id) bad_field(ap + ".node", "unknown node '" + name + "'");
          spec.node = *id;
          break;
        }
      }
      sc.attacks.push_back(spec);
    }
  }

  const json& sj = member(doc, "sim", "scenario");
  sc.sim.duration = as_number(member(sj, "duration", "sim"), "sim.duration");
  if (sc.sim.duration <= 0.0) bad_field("sim.duration", "must be > 0");
  sc.sim.seed = opt_count(sj, "seed", sc.sim.seed, "sim");

  for (size_t i = 0; i < sc.attacks.size(); ++i) {
    if (sc.attacks[i].time > sc.sim.duration) {
      bad_field("attacks[" + std::to_string(i) + "].time",
                "beyond the simulation horizon");
    }
  }

  if (sc.traffic.lambda > 0.0 && sc.topology.dcn_nodes().size() < 2) {
    bad_field("topology.nodes",
              "traffic requires at least two nodes with the dcn role");
  }
  if (sc.topology.controllers().empty()) {
    bad_field("topology.nodes", "at least one controller node is required");
  }

  return sc;
}

Scenario Scenario::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(Errc::io_error, "cannot open scenario file '" + path + "'");
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    fail(Errc::config_error, "scenario '" + path + "': " + e.what());
  }
  return from_json(doc);
}

}  // namespace qsb
