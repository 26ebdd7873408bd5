#include "dar/algo/max_flow.hpp"

#include "dar/error.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>

namespace dar {

namespace {

constexpr double kDistTol = 1e-12;

double residual(const FlowNetwork& net, std::span<const double> flow, NodeId u, NodeId v) {
    return net.cap(u, v) - flow[u * net.n + v];
}

} // namespace

std::optional<Predecessors> bellman_ford_path(const FlowNetwork& net, std::span<const double> flow) {
    const std::size_t n = net.n;
    constexpr double inf = std::numeric_limits<double>::infinity();
    std::vector<double> dist(n, inf);
    std::vector<std::size_t> hops(n, n + 1);
    dist[net.source] = 0.0;
    hops[net.source] = 0;

    // Relax to a fixed point on the (distance, hop count) order.
    for (std::size_t round = 0; round < n; ++round) {
        bool changed = false;
        for (NodeId v = 0; v < n; ++v) {
            for (NodeId u = 0; u < n; ++u) {
                if (u == v || dist[u] == inf || residual(net, flow, u, v) <= kResidualTol) continue;
                const double cand = dist[u] + net.residual_weight(u, v);
                const bool shorter = cand < dist[v] - kDistTol;
                const bool same = !shorter && cand <= dist[v] + kDistTol;
                if (shorter || (same && hops[u] + 1 < hops[v])) {
                    dist[v] = cand;
                    hops[v] = hops[u] + 1;
                    changed = true;
                }
            }
        }
        if (!changed) break;
    }
    if (dist[net.sink] == inf) return std::nullopt;

    Predecessors pred(n);
    for (NodeId v = 0; v < n; ++v) pred[v] = v;
    for (NodeId v = 0; v < n; ++v) {
        if (v == net.source || dist[v] == inf) continue;
        for (NodeId u = 0; u < n; ++u) {
            if (u == v || dist[u] == inf || residual(net, flow, u, v) <= kResidualTol) continue;
            const double cand = dist[u] + net.residual_weight(u, v);
            if (std::abs(cand - dist[v]) <= kDistTol && hops[u] + 1 == hops[v]) {
                pred[v] = u;
                break;
            }
        }
    }
    return pred;
}

Predecessors path_only(const Predecessors& tree, NodeId source, NodeId sink) {
    Predecessors out(tree.size());
    for (NodeId v = 0; v < tree.size(); ++v) out[v] = v;
    NodeId v = sink;
    for (std::size_t guard = 0; v != source; ++guard) {
        if (guard > tree.size() || tree[v] == v)
            throw InvalidFlow("path_only: predecessor chain does not reach the source");
        out[v] = tree[v];
        v = tree[v];
    }
    return out;
}

MaxFlowResult ford_fulkerson(const FlowNetwork& net) {
    const std::size_t n = net.n;
    MaxFlowResult res;
    res.flow.assign(n * n, 0.0);
    while (auto tree = bellman_ford_path(net, res.flow)) {
        Predecessors pred = path_only(*tree, net.source, net.sink);
        double df = std::numeric_limits<double>::infinity();
        for (NodeId v = net.sink; v != net.source; v = pred[v])
            df = std::min(df, residual(net, res.flow, pred[v], v));
        for (NodeId v = net.sink; v != net.source; v = pred[v]) {
            const NodeId u = pred[v];
            res.flow[u * n + v] += df;
            res.flow[v * n + u] -= df;
        }
        res.trajectory.steps.push_back({std::move(pred), res.flow});
    }
    res.value = flow_value(net, res.flow);
    res.trajectory.final_flow = res.flow;
    res.trajectory.cut = min_cut_labels(net, res.flow);
    return res;
}

double flow_value(const FlowNetwork& net, std::span<const double> flow) {
    double v = 0.0;
    for (NodeId j = 0; j < net.n; ++j) v += flow[net.source * net.n + j];
    return v;
}

std::vector<std::uint8_t> min_cut_labels(const FlowNetwork& net, std::span<const double> flow) {
    const std::size_t n = net.n;
    std::vector<std::uint8_t> label(n, 1);
    std::deque<NodeId> queue{net.source};
    label[net.source] = 0;
    while (!queue.empty()) {
        const NodeId u = queue.front();
        queue.pop_front();
        for (NodeId v = 0; v < n; ++v)
            if (label[v] == 1 && residual(net, flow, u, v) > kResidualTol) {
                label[v] = 0;
                queue.push_back(v);
            }
    }
    if (label[net.sink] == 0)
        throw InvalidFlow("min_cut_labels: sink reachable in the residual graph; flow is not maximal");
    return label;
}

double cut_capacity(const FlowNetwork& net, std::span<const std::uint8_t> labels) {
    double c = 0.0;
    for (const auto& e : net.edges)
        if (labels[e.from] == 0 && labels[e.to] == 1) c += net.cap(e.from, e.to);
    return c;
}

double brute_force_max_flow(const FlowNetwork& net) {
    if (net.n > kBruteForceMaxNodes)
        throw InvalidArgument("brute_force_max_flow: refusing n=" + std::to_string(net.n) +
                              " (limit " + std::to_string(kBruteForceMaxNodes) + ")");
    std::vector<NodeId> free_nodes;
    for (NodeId v = 0; v < net.n; ++v)
        if (v != net.source && v != net.sink) free_nodes.push_back(v);
    double best = std::numeric_limits<double>::infinity();
    std::vector<std::uint8_t> labels(net.n);
    for (std::uint32_t mask = 0; mask < (1U << free_nodes.size()); ++mask) {
        labels[net.source] = 0;
        labels[net.sink] = 1;
        for (std::size_t k = 0; k < free_nodes.size(); ++k) labels[free_nodes[k]] = (mask >> k) & 1U;
        best = std::min(best, cut_capacity(net, labels));
    }
    return best;
}

} // namespace dar
