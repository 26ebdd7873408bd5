#pragma once

#include "dar/algo/trajectory.hpp"
#include "dar/graph/flow_network.hpp"

#include <optional>
#include <span>
#include <vector>

namespace dar {

/// Residual arcs with capacity below this are treated as saturated.
inline constexpr double kResidualTol = 1e-12;

/// Shortest-path tree from the source over arcs with residual capacity
/// C(u, v) - F(u, v) > 0, weighted by FlowNetwork::residual_weight.
///
/// Among equally short paths the fewest-hop one wins, then the smallest
/// predecessor index. Unreached nodes point to themselves. Returns nullopt
/// when the sink is unreachable.
std::optional<Predecessors> bellman_ford_path(const FlowNetwork& net, std::span<const double> flow);

/// Predecessor vector restricted to the s -> t path encoded in `tree`.
Predecessors path_only(const Predecessors& tree, NodeId source, NodeId sink);

struct MaxFlowResult {
    std::vector<double> flow;
    double value = 0.0;
    Trajectory trajectory;
};

/// Ford-Fulkerson with Bellman-Ford augmenting paths, recording every step.
MaxFlowResult ford_fulkerson(const FlowNetwork& net);

/// Net flow leaving the source.
double flow_value(const FlowNetwork& net, std::span<const double> flow);

/// 0 for nodes reachable from the source in the residual graph of `flow`, 1
/// otherwise. Throws InvalidFlow when the sink is still reachable.
std::vector<std::uint8_t> min_cut_labels(const FlowNetwork& net, std::span<const double> flow);

/// Total capacity of edges going from label-0 to label-1 nodes.
double cut_capacity(const FlowNetwork& net, std::span<const std::uint8_t> labels);

/// Minimum s-t cut capacity by exhaustive enumeration of the 2^(n-2) node
/// bipartitions. Equals the max-flow value by strong duality. n <= 8.
double brute_force_max_flow(const FlowNetwork& net);

inline constexpr std::size_t kBruteForceMaxNodes = 8;

} // namespace dar
