#include "qsb/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include <nlohmann/json.hpp>

#include "qsb/errors.hpp"

namespace qsb {

namespace {

using nlohmann::json;

void write_value(const json& v, std::ostream& os, int indent);

void write_string(const std::string& s, std::ostream& os) {
  os << '"';
  for (char c : s) {
    switch (c) {
      case '"': os << "\\\""; break;
      case '\\': os << "\\\\"; break;
      case '\n': os << "\\n"; break;
      case '\r': os << "\\r"; break;
      case '\t': os << "\\t"; break;
      default:
        if (static_cast<unsigned char>(c) < 0x20) {
          char buf[8];
          std::snprintf(buf, sizeof(buf), "\\u%04x", c);
          os << buf;
        } else {
          os << c;
        }
    }
  }
  os << '"';
}

void indent_to(std::ostream& os, int indent) {
  for (int i = 0; i < indent; ++i) os << ' ';
}

void write_value(const json& v, std::ostream& os, int indent) {
  switch (v.type()) {
    case json::value_t::object: {
      if (v.empty()) {
        os << "{}";
        return;
      }
      os << "{\n";
      size_t i = 0;
      for (auto it = v.begin(); it != v.end(); ++it, ++i) {
        indent_to(os, indent + 2);
        write_string(it.key(), os);
        os << ": ";
        write_value(it.value(), os, indent + 2);
        if (i + 1 < v.size()) os << ',';
        os << '\n';
      }
      indent_to(os, indent);
      os << '}';
      return;
    }
    case json::value_t::array: {
      if (v.empty()) {
        os << "[]";
        return;
      }
      os << "[\n";
      for (size_t i = 0; i < v.size(); ++i) {
        indent_to(os, indent + 2);
        write_value(v[i], os, indent + 2);
        if (i + 1 < v.size()) os << ',';
        os << '\n';
      }
      indent_to(os, indent);
      os << ']';
      return;
    }
    case json::value_t::string:
      write_string(v.get<std::string>(), os);
      return;
    case json::value_t::boolean:
      os << (v.get<bool>() ? "true" : "false");
      return;
    case json::value_t::number_integer:
      os << v.get<int64_t>();
      return;
    case json::value_t::number_unsigned:
      os << v.get<uint64_t>();
      return;
    case json::value_t::number_float: {
      double d = v.get<double>();
      require(std::isfinite(d), Errc::invariant_violation,
              "non-finite metric value");
      char buf[64];
      std::snprintf(buf, sizeof(buf), "%.6f", d);
      os << buf;
      return;
    }
    case json::value_t::null:
      os << "null";
      return;
    default:
      fail(Errc::internal_error, "unsupported json value type");
  }
}

}  // namespace

LatencyStats LatencyStats::from_samples(std::vector<double> samples) {
  LatencyStats stats;
  stats.count = samples.size();
  if (samples.empty()) return stats;
  std::sort(samples.begin(), samples.end());
  double sum = 0.0;
  for (double s : samples) sum += s;
  stats.mean = sum / static_cast<double>(samples.size());
  auto quantile = [&samples](double q) {
    size_t idx = static_cast<size_t>(
        q * static_cast<double>(samples.size() - 1) + 0.5);
    return samples[std::min(idx, samples.size() - 1)];
  };
  stats.p50 = quantile(0.50);
  stats.p95 = quantile(0.95);
  stats.max = samples.back();
  return stats;
}

json MetricsReport::to_json() const {
  json doc;
  doc["traffic"] = {
      {"arrivals", arrivals},
      {"established", established},
      {"departed", departed},
      {"pending_at_end", pending_at_end},
      {"blocked",
       {{"total", blocked_total},
        {"no_route", blocked_no_route},
        {"no_wavelength", blocked_no_wavelength},
        {"key_starved", blocked_key_starved}}},
      {"blocking_probability", blocking_probability},
  };

  json per_link = json::array();
  for (const auto& link : qkd_per_link) {
    per_link.push_back({{"link", link.link},
                        {"sessions", link.sessions},
                        {"aborted", link.aborted},
                        {"mean_qber", link.mean_qber},
                        {"key_bits", link.key_bits},
                        {"key_rate_bits_per_s", link.key_rate_bits_per_s}});
  }
  doc["qkd"] = {
      {"sessions", qkd_sessions},
      {"aborted_eavesdrop", qkd_aborted_eavesdrop},
      {"aborted_other", qkd_aborted_other},
      {"bits_delivered", qkd_bits_delivered},
      {"per_link", per_link},
  };

  doc["consensus"] = {
      {"rounds_started", rounds_started},
      {"rounds_committed", rounds_committed},
      {"commit_latency",
       {{"count", commit_latency.count},
        {"mean", commit_latency.mean},
        {"p50", commit_latency.p50},
        {"p95", commit_latency.p95},
        {"max", commit_latency.max}}},
      {"messages_sent", messages_sent},
      {"messages_dropped", messages_dropped},
      {"forged_rejected", forged_rejected},
      {"forged_accepted", forged_accepted},
      {"pool_desyncs", pool_desyncs},
      {"sign_failures", sign_failures},
  };

  json heights = json::object();
  for (const auto& [name, h] : ledger_heights) heights[name] = h;
  json audits = json::object();
  for (const auto& [name, h] : audit_first_invalid) audits[name] = h;
  doc["ledger"] = {
      {"heights", heights},
      {"divergence_honest", divergence_honest},
      {"divergence_any", divergence_any},
      {"tamper_events", tamper_events},
      {"tamper_detected", tamper_detected},
      {"audit_first_invalid", audits},
      {"committed_establish_txs", committed_establish_txs},
      {"committed_release_txs", committed_release_txs},
  };

  doc["adversary"] = {
      {"sybil_tx_submitted", sybil_tx_submitted},
      {"sybil_tx_accepted", sybil_tx_accepted},
      {"sybil_votes_submitted", sybil_votes_submitted},
      {"sybil_votes_counted", sybil_votes_counted},
  };

  doc["run"] = {
      {"duration", duration},
      {"seed", seed},
      {"events_processed", events_processed},
  };
  return doc;
}

void write_canonical_json(const json& doc, std::ostream& os) {
  write_value(doc, os, 0);
  os << '\n';
}

}  // namespace qsb
