#pragma once

#include "dar/graph/flow_network.hpp"

#include <cstdint>
#include <vector>

namespace dar {

/// Per-node predecessor index; a node pointing to itself has no predecessor.
using Predecessors = std::vector<NodeId>;

/// Hint tape of one Ford-Fulkerson execution.
///
/// Step t holds the augmenting path found at iteration t (path nodes point to
/// their predecessor, every other node to itself) and the flow after
/// augmenting along it. Flows are dense n x n, antisymmetric, positive in the
/// direction of travel. Cut labels are 0 on the source side, 1 otherwise.
struct Trajectory {
    struct Step {
        Predecessors pred;
        std::vector<double> flow;
        bool operator==(const Step&) const = default;
    };

    std::vector<Step> steps;
    std::vector<double> final_flow;
    std::vector<std::uint8_t> cut;

    std::size_t T() const { return steps.size(); }
    bool operator==(const Trajectory&) const = default;
};

} // namespace dar
