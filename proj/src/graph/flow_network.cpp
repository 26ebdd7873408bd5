#include "dar/graph/flow_network.hpp"

#include "dar/error.hpp"

#include <cmath>
#include <deque>

namespace dar {

std::string_view to_string(Family f) {
    switch (f) {
    case Family::two_community: return "two_community";
    case Family::bipartite: return "bipartite";
    }
    return "unknown";
}

Family family_from_string(std::string_view s) {
    if (s == "two_community") return Family::two_community;
    if (s == "bipartite") return Family::bipartite;
    throw InvalidArgument("unknown graph family '" + std::string(s) + "'");
}

FlowNetwork FlowNetwork::empty(std::size_t n, Family family) {
    FlowNetwork net;
    net.n = n;
    net.capacity.assign(n * n, 0.0);
    net.weight.assign(n * n, 0.0);
    net.family = family;
    return net;
}

void FlowNetwork::set_edge(NodeId i, NodeId j, double c, double wt) {
    if (c > 0.0) {
        capacity[i * n + j] = c;
        weight[i * n + j] = wt;
    } else {
        capacity[i * n + j] = 0.0;
        weight[i * n + j] = 0.0;
    }
}

void FlowNetwork::rebuild_edge_list() {
    edges.clear();
    for (NodeId i = 0; i < n; ++i)
        for (NodeId j = 0; j < n; ++j)
            if (has_edge(i, j)) edges.push_back({i, j});
}

double FlowNetwork::residual_weight(NodeId u, NodeId v) const {
    return has_edge(u, v) ? w(u, v) : w(v, u);
}

std::vector<double> FlowNetwork::capacity_envelope() const {
    std::vector<double> env(n * n, 0.0);
    for (NodeId i = 0; i < n; ++i)
        for (NodeId j = 0; j < n; ++j) env[i * n + j] = has_edge(i, j) ? cap(i, j) : cap(j, i);
    return env;
}

std::vector<std::pair<NodeId, NodeId>> FlowNetwork::symmetric_support() const {
    std::vector<std::pair<NodeId, NodeId>> out;
    for (NodeId i = 0; i < n; ++i)
        for (NodeId j = 0; j < n; ++j)
            if (i != j && (has_edge(i, j) || has_edge(j, i))) out.emplace_back(i, j);
    return out;
}

void FlowNetwork::validate() const {
    auto fail = [](const std::string& what) { throw InvalidArgument("FlowNetwork: " + what); };
    if (capacity.size() != n * n || weight.size() != n * n) fail("dense matrices must be n x n");
    if (source >= n || sink >= n) fail("terminal outside [0, n)");
    if (source == sink) fail("source equals sink");
    std::size_t count = 0;
    for (NodeId i = 0; i < n; ++i)
        for (NodeId j = 0; j < n; ++j) {
            const double c = cap(i, j);
            if (!(c >= 0.0) || !std::isfinite(c)) fail("capacity must be finite and non-negative");
            if (c > 0.0) {
                if (i == j) fail("self-loop edge");
                ++count;
                if (!(w(i, j) >= 0.0 && w(i, j) <= 1.0)) fail("weight outside [0, 1]");
                if (family == Family::bipartite && c != 1.0) fail("bipartite capacity must be 0 or 1");
            }
        }
    if (count != edges.size()) fail("edge list does not match capacity support");
    for (const auto& e : edges)
        if (e.from >= n || e.to >= n || !has_edge(e.from, e.to)) fail("edge list entry without capacity");
}

bool reachable(const FlowNetwork& net, NodeId from, NodeId to, const std::vector<double>& flow,
               double tol) {
    const std::size_t n = net.n;
    std::vector<char> seen(n, 0);
    std::deque<NodeId> queue{from};
    seen[from] = 1;
    while (!queue.empty()) {
        NodeId u = queue.front();
        queue.pop_front();
        if (u == to) return true;
        for (NodeId v = 0; v < n; ++v) {
            if (seen[v]) continue;
            const double f = flow.empty() ? 0.0 : flow[u * n + v];
            if (net.cap(u, v) - f > tol) {
                seen[v] = 1;
                queue.push_back(v);
            }
        }
    }
    return false;
}

} // namespace dar
