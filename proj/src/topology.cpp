#include "qsb/topology.hpp"

#include <algorithm>
#include <deque>
#include <limits>
#include <map>

namespace qsb {

const char* channel_class_name(ChannelClass cls) {
  switch (cls) {
    case ChannelClass::qsch: return "QSCh";
    case ChannelClass::pich: return "PICh";
    case ChannelClass::bcch: return "BCCh";
    case ChannelClass::tdch: return "TDCh";
  }
  return "Unknown";
}

Topology::Topology(std::vector<NodeDef> nodes, std::vector<LinkDef> links)
    : nodes_(std::move(nodes)), links_(std::move(links)) {
  require(!nodes_.empty(), Errc::config_error, "topology has no nodes");

  std::map<std::string_view, NodeId> by_name;
  for (NodeId i = 0; i < nodes_.size(); ++i) {
    require(!nodes_[i].name.empty(), Errc::config_error,
            "node " + std::to_string(i) + " has an empty name");
    auto [_, inserted] = by_name.emplace(nodes_[i].name, i);
    require(inserted, Errc::config_error,
            "duplicate node name '" + nodes_[i].name + "'");
  }

  ranks_.resize(nodes_.size());
  uint32_t rank = 0;
  for (const auto& [_, id] : by_name) ranks_[id] = rank++;

  adjacency_.resize(nodes_.size());
  std::map<std::pair<NodeId, NodeId>, size_t> seen;
  for (size_t i = 0; i < links_.size(); ++i) {
    const LinkDef& link = links_[i];
    require(link.a < nodes_.size() && link.b < nodes_.size(),
            Errc::config_error,
            "link " + std::to_string(i) + " references an unknown node");
    require(link.a != link.b, Errc::config_error,
            "link " + std::to_string(i) + " is a self-loop");
    require(link.length_km > 0.0, Errc::config_error,
            "link " + std::to_string(i) + " needs a positive length");
    auto key = std::minmax(link.a, link.b);
    auto [_, inserted] = seen.emplace(std::pair{key.first, key.second}, i);
    require(inserted, Errc::config_error,
            "duplicate link between '" + nodes_[link.a].name + "' and '" +
                nodes_[link.b].name + "'");
    if (link.wavelengths[static_cast<size_t>(ChannelClass::qsch)] > 0) {
      require(link.wavelengths[static_cast<size_t>(ChannelClass::pich)] > 0,
              Errc::config_error,
              "link " + std::to_string(i) +
                  " has QSCh wavelengths but no PICh wavelength");
    }
    link.channel.validate();
    adjacency_[link.a].push_back(link.b);
    adjacency_[link.b].push_back(link.a);
  }
  for (auto& neigh : adjacency_) {
    std::sort(neigh.begin(), neigh.end(),
              [this](NodeId x, NodeId y) { return ranks_[x] < ranks_[y]; });
  }

  // Connectivity over the full (failure-free) graph.
  std::vector<uint8_t> reached(nodes_.size(), 0);
  std::deque<NodeId> frontier{0};
  reached[0] = 1;
  while (!frontier.empty()) {
    NodeId at = frontier.front();
    frontier.pop_front();
    for (NodeId next : adjacency_[at]) {
      if (!reached[next]) {
        reached[next] = 1;
        frontier.push_back(next);
      }
    }
  }
  for (NodeId i = 0; i < nodes_.size(); ++i) {
    require(reached[i], Errc::config_error,
            "topology is disconnected: node '" + nodes_[i].name +
                "' is unreachable");
  }
}

std::optional<NodeId> Topology::find_node(std::string_view name) const {
  for (NodeId i = 0; i < nodes_.size(); ++i) {
    if (nodes_[i].name == name) return i;
  }
  return std::nullopt;
}

std::optional<size_t> Topology::link_between(NodeId a, NodeId b) const {
  for (size_t i = 0; i < links_.size(); ++i) {
    if ((links_[i].a == a && links_[i].b == b) ||
        (links_[i].a == b && links_[i].b == a)) {
      return i;
    }
  }
  return std::nullopt;
}

const std::vector<NodeId>& Topology::neighbors(NodeId id) const {
  return adjacency_.at(id);
}

Result<std::vector<NodeId>> Topology::route(
    NodeId src, NodeId dst, std::span<const uint8_t> failed) const {
  require(src < nodes_.size() && dst < nodes_.size(), Errc::invalid_input,
          "route endpoint out of range");
  require(src != dst, Errc::invalid_input, "route endpoints coincide");

  auto down = [&failed](NodeId id) {
    return !failed.empty() && failed[id] != 0;
  };
  if (down(src) || down(dst)) {
    return {Errc::no_route, "endpoint unavailable"};
  }

  constexpr size_t kUnreached = std::numeric_limits<size_t>::max();
  std::vector<size_t> dist(nodes_.size(), kUnreached);
  dist[src] = 0;
  std::vector<NodeId> level{src};
  std::vector<std::vector<NodeId>> order;  // nodes grouped by distance
  while (!level.empty()) {
    order.push_back(level);
    std::vector<NodeId> next;
    for (NodeId at : level) {
      for (NodeId n : adjacency_[at]) {
        if (down(n) || dist[n] != kUnreached) continue;
        dist[n] = dist[at] + 1;
        next.push_back(n);
      }
    }
    level = std::move(next);
  }
  if (dist[dst] == kUnreached) {
    return {Errc::no_route, "no path between '" + nodes_[src].name +
                                "' and '" + nodes_[dst].name + "'"};
  }

  // Level-synchronous DP: the best path to a node extends the smallest
  // best path among its previous-level neighbors, so lexicographic order
  // over name ranks is preserved under extension.
  auto rank_less = [this](const std::vector<NodeId>& x,
                          const std::vector<NodeId>& y) {
    for (size_t i = 0; i < x.size() && i < y.size(); ++i) {
      if (ranks_[x[i]] != ranks_[y[i]]) return ranks_[x[i]] < ranks_[y[i]];
    }
    return x.size() < y.size();
  };
  std::vector<std::vector<NodeId>> best(nodes_.size());
  best[src] = {src};
  for (size_t d = 1; d < order.size(); ++d) {
    for (NodeId v : order[d]) {
      std::vector<NodeId>* chosen = nullptr;
      for (NodeId u : adjacency_[v]) {
        if (down(u) || dist[u] != d - 1 || best[u].empty()) continue;
        if (chosen == nullptr || rank_less(best[u], *chosen)) {
          chosen = &best[u];
        }
      }
      if (chosen != nullptr) {
        best[v] = *chosen;
        best[v].push_back(v);
      }
    }
  }
  return best[dst];
}

std::vector<NodeId> Topology::controllers() const {
  std::vector<NodeId> out;
  for (NodeId i = 0; i < nodes_.size(); ++i) {
    if (nodes_[i].controller) out.push_back(i);
  }
  return out;
}

std::vector<NodeId> Topology::dcn_nodes() const {
  std::vector<NodeId> out;
  for (NodeId i = 0; i < nodes_.size(); ++i) {
    if (nodes_[i].dcn) out.push_back(i);
  }
  return out;
}

WavelengthMap::WavelengthMap(const Topology& topo) {
  busy_.resize(topo.link_count());
  for (size_t i = 0; i < topo.link_count(); ++i) {
    for (size_t c = 0; c < kChannelClassCount; ++c) {
      busy_[i][c].assign(topo.link(i).wavelengths[c], 0);
    }
  }
}

Result<uint32_t> WavelengthMap::assign(const Topology& topo,
                                       std::span<const NodeId> path,
                                       ChannelClass cls) {
  require(path.size() >= 2, Errc::invalid_input, "path too short");
  std::vector<size_t> hops;
  uint32_t limit = std::numeric_limits<uint32_t>::max();
  for (size_t i = 0; i + 1 < path.size(); ++i) {
    auto link = topo.link_between(path[i], path[i + 1]);
    require(link.has_value(), Errc::invalid_input,
            "path hop without a link");
    hops.push_back(*link);
    limit = std::min(limit, configured(topo, *link, cls));
  }
  for (uint32_t idx = 0; idx < limit; ++idx) {
    bool free = true;
    for (size_t link : hops) {
      if (busy_[link][static_cast<size_t>(cls)][idx]) {
        free = false;
        break;
      }
    }
    if (free) {
      for (size_t link : hops) busy_[link][static_cast<size_t>(cls)][idx] = 1;
      return idx;
    }
  }
  return {Errc::no_wavelength,
          std::string("no free ") + channel_class_name(cls) + " wavelength"};
}

void WavelengthMap::release(const Topology& topo, std::span<const NodeId> path,
                            ChannelClass cls, uint32_t index) {
  for (size_t i = 0; i + 1 < path.size(); ++i) {
    auto link = topo.link_between(path[i], path[i + 1]);
    require(link.has_value(), Errc::internal_error,
            "release along a missing link");
    auto& slot = busy_.at(*link)[static_cast<size_t>(cls)].at(index);
    require(slot != 0, Errc::internal_error,
            "releasing a wavelength that is not held");
    slot = 0;
  }
}

uint32_t WavelengthMap::configured(const Topology& topo, size_t link,
                                   ChannelClass cls) const {
  return topo.link(link).wavelengths[static_cast<size_t>(cls)];
}

uint32_t WavelengthMap::busy_count(size_t link, ChannelClass cls) const {
  uint32_t n = 0;
  for (uint8_t b : busy_.at(link)[static_cast<size_t>(cls)]) n += b;
  return n;
}

bool WavelengthMap::is_busy(size_t link, ChannelClass cls,
                            uint32_t index) const {
  return busy_.at(link)[static_cast<size_t>(cls)].at(index) != 0;
}

}  // namespace qsb
