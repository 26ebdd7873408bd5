#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace dar {

using NodeId = std::uint32_t;

enum class Family { two_community, bipartite };

std::string_view to_string(Family f);
Family family_from_string(std::string_view s);

struct Edge {
    NodeId from = 0;
    NodeId to = 0;
    bool operator==(const Edge&) const = default;
};

/// Directed capacitated graph with terminals and Bellman-Ford weights.
///
/// Capacity and weight are stored densely (n x n, row-major). An ordered pair
/// (i, j) is an edge iff capacity(i, j) > 0; weights are only meaningful on
/// edges and are zero elsewhere.
struct FlowNetwork {
    std::size_t n = 0;
    std::vector<Edge> edges;
    std::vector<double> capacity;
    std::vector<double> weight;
    NodeId source = 0;
    NodeId sink = 1;
    Family family = Family::two_community;

    static FlowNetwork empty(std::size_t n, Family family);

    double cap(NodeId i, NodeId j) const { return capacity[i * n + j]; }
    double w(NodeId i, NodeId j) const { return weight[i * n + j]; }
    bool has_edge(NodeId i, NodeId j) const { return capacity[i * n + j] > 0.0; }

    /// Inserts or overwrites edge (i, j). A non-positive capacity removes it.
    void set_edge(NodeId i, NodeId j, double cap, double w);
    /// Rebuilds `edges` from the capacity matrix in row-major order.
    void rebuild_edge_list();

    /// Weight of the residual arc u -> v: W(u, v) if (u, v) is an edge,
    /// otherwise W(v, u) (the arc cancels flow on the reverse edge).
    double residual_weight(NodeId u, NodeId v) const;

    /// Capacity bound on net flow u -> v: C(u, v) on edges, else C(v, u).
    /// Zero for pairs with no edge in either direction.
    std::vector<double> capacity_envelope() const;

    /// Ordered pairs (i, j), i != j, with an edge in either direction,
    /// sorted by (i, j). This is the support of any antisymmetric flow.
    std::vector<std::pair<NodeId, NodeId>> symmetric_support() const;

    /// Throws InvalidArgument when an invariant does not hold.
    void validate() const;

    bool operator==(const FlowNetwork&) const = default;
};

/// True when t is reachable from s through arcs with residual capacity
/// C(u, v) - F(u, v) > tol. An empty flow means F = 0.
bool reachable(const FlowNetwork& net, NodeId from, NodeId to, const std::vector<double>& flow = {},
               double tol = 1e-12);

} // namespace dar
