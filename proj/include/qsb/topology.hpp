#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "qsb/errors.hpp"
#include "qsb/qkd.hpp"
#include "qsb/types.hpp"

namespace qsb {

// QSCh carries qubits, PICh the sifting dialogue, BCCh the blockchain
// traffic, TDCh the provisioned data lightpaths.
enum class ChannelClass : uint8_t { qsch = 0, pich = 1, bcch = 2, tdch = 3 };
inline constexpr size_t kChannelClassCount = 4;

const char* channel_class_name(ChannelClass cls);

struct NodeDef {
  std::string name;
  bool controller = false;
  bool dcn = false;
  bool qkd_endpoint = false;
};

struct LinkDef {
  NodeId a = kNoNode;
  NodeId b = kNoNode;
  double length_km = 1.0;
  std::array<uint32_t, kChannelClassCount> wavelengths{};
  ChannelModel channel;
};

class Topology {
 public:
  Topology() = default;
  Topology(std::vector<NodeDef> nodes, std::vector<LinkDef> links);

  size_t node_count() const { return nodes_.size(); }
  size_t link_count() const { return links_.size(); }
  const NodeDef& node(NodeId id) const { return nodes_.at(id); }
  const LinkDef& link(size_t index) const { return links_.at(index); }

  std::optional<NodeId> find_node(std::string_view name) const;
  std::optional<size_t> link_between(NodeId a, NodeId b) const;
  const std::vector<NodeId>& neighbors(NodeId id) const;

  // Rank of a node's name in lexicographic order over all names.
  uint32_t name_rank(NodeId id) const { return ranks_.at(id); }

  // Hop-count shortest path, ties broken by the lexicographically smallest
  // node-name sequence. `failed` (when nonempty) removes nodes from the
  // graph.
  Result<std::vector<NodeId>> route(NodeId src, NodeId dst,
                                    std::span<const uint8_t> failed = {}) const;

  std::vector<NodeId> controllers() const;
  std::vector<NodeId> dcn_nodes() const;

 private:
  std::vector<NodeDef> nodes_;
  std::vector<LinkDef> links_;
  std::vector<std::vector<NodeId>> adjacency_;
  std::vector<uint32_t> ranks_;
};

// Per-link, per-class wavelength occupancy with first-fit assignment under
// the wavelength-continuity constraint.
class WavelengthMap {
 public:
  WavelengthMap() = default;
  explicit WavelengthMap(const Topology& topo);

  Result<uint32_t> assign(const Topology& topo, std::span<const NodeId> path,
                          ChannelClass cls);
  void release(const Topology& topo, std::span<const NodeId> path,
               ChannelClass cls, uint32_t index);

  uint32_t configured(const Topology& topo, size_t link,
                      ChannelClass cls) const;
  uint32_t busy_count(size_t link, ChannelClass cls) const;
  bool is_busy(size_t link, ChannelClass cls, uint32_t index) const;

  bool operator==(const WavelengthMap&) const = default;

 private:
  std::vector<std::array<std::vector<uint8_t>, kChannelClassCount>> busy_;
};

}  // namespace qsb
