#pragma once

#include <cstdint>

namespace qsb {

// Nodes are dense indices into the topology's node table; names live there.
using NodeId = uint32_t;
inline constexpr NodeId kNoNode = 0xffffffffu;

// Simulated seconds on the discrete-event timeline.
using SimTime = double;

}  // namespace qsb
