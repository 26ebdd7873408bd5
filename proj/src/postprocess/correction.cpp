#include "dar/postprocess/correction.hpp"

#include "dar/error.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <optional>

namespace dar {

namespace {

constexpr double kAntisymmetryTol = 1e-9;

void check_antisymmetric(const FlowNetwork& net, std::span<const double> flow) {
    const std::size_t n = net.n;
    if (flow.size() != n * n)
        throw ContractError("flow has " + std::to_string(flow.size()) + " entries, expected " +
                            std::to_string(n * n));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i; j < n; ++j) {
            const double a = flow[i * n + j], b = flow[j * n + i];
            if (std::abs(a + b) > kAntisymmetryTol * std::max(1.0, std::abs(a)))
                throw ContractError("flow is not antisymmetric at (" + std::to_string(i) + ", " +
                                    std::to_string(j) + ")");
        }
}

double net_out(const std::vector<double>& f, std::size_t n, NodeId v) {
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) s += f[v * n + j];
    return s;
}

struct Repair {
    const FlowNetwork& net;
    std::vector<double> f;
    std::size_t cancelled = 0;
    std::size_t clamps = 0;
    std::size_t drains = 0;
    std::size_t budget;

    bool internal(NodeId v) const { return v != net.source && v != net.sink; }
    double r(NodeId v) const { return net_out(f, net.n, v); }

    void push(NodeId a, NodeId b, double delta) {
        f[a * net.n + b] += delta;
        f[b * net.n + a] -= delta;
    }

    void spend() {
        if (cancelled++ > budget)
            throw CorrectionFailure("correct_flow: exceeded " + std::to_string(budget) +
                                    " path cancellations without converging");
    }

    // BFS over arcs carrying flow. backward=true follows u -> v arcs into the
    // frontier node (tracing where its in-flow came from). Returns the path
    // from the chosen end to `start` as a predecessor map plus the end node.
    std::optional<std::pair<NodeId, std::vector<NodeId>>> trace(NodeId start, bool backward,
                                                                NodeId preferred, bool want_positive) const {
        const std::size_t n = net.n;
        std::vector<NodeId> prev(n, static_cast<NodeId>(n));
        prev[start] = start;
        std::deque<NodeId> queue{start};
        std::optional<NodeId> fallback;
        while (!queue.empty()) {
            const NodeId x = queue.front();
            queue.pop_front();
            if (x == preferred) return std::make_pair(x, prev);
            if (x != start && !fallback) {
                const double rx = r(x);
                if (want_positive ? rx > kConservationTol : rx < -kConservationTol) fallback = x;
            }
            for (NodeId y = 0; y < n; ++y) {
                if (prev[y] != n) continue;
                const double carried = backward ? f[y * n + x] : f[x * n + y];
                if (carried > kConservationTol) {
                    prev[y] = x;
                    queue.push_back(y);
                }
            }
        }
        if (fallback) return std::make_pair(*fallback, prev);
        return std::nullopt;
    }

    // Cancels the excess held by an internal node with r(v) < 0.
    bool drain_excess(NodeId v) {
        bool changed = false;
        while (internal(v) && r(v) < -kConservationTol) {
            spend();
            changed = true;
            const double excess = -r(v);
            auto found = trace(v, /*backward=*/true, net.source, /*want_positive=*/true);
            if (!found) {
                ++drains;
                double left = excess;
                for (NodeId u = 0; u < net.n && left > 0.0; ++u) {
                    const double in = f[u * net.n + v];
                    if (in <= 0.0) continue;
                    const double take = std::min(in, left);
                    push(u, v, -take);
                    left -= take;
                }
                if (left > kConservationTol)
                    throw CorrectionFailure("correct_flow: node " + std::to_string(v) +
                                            " holds flow it never received");
                continue;
            }
            const auto& [end, prev] = *found;
            double delta = excess;
            if (internal(end)) delta = std::min(delta, r(end));
            // prev walks from `end` back to v; the flow runs end -> ... -> v.
            for (NodeId x = end; x != v; x = prev[x]) delta = std::min(delta, f[x * net.n + prev[x]]);
            for (NodeId x = end; x != v; x = prev[x]) {
                const NodeId y = prev[x];
                if (f[x * net.n + y] == delta) {
                    f[x * net.n + y] = 0.0;
                    f[y * net.n + x] = 0.0;
                } else {
                    push(x, y, -delta);
                }
            }
        }
        return changed;
    }

    // Cancels the surplus of an internal node with r(v) > 0.
    bool drain_surplus(NodeId v) {
        bool changed = false;
        while (internal(v) && r(v) > kConservationTol) {
            spend();
            changed = true;
            const double surplus = r(v);
            auto found = trace(v, /*backward=*/false, net.sink, /*want_positive=*/false);
            if (!found) {
                ++drains;
                double left = surplus;
                for (NodeId w = 0; w < net.n && left > 0.0; ++w) {
                    const double out = f[v * net.n + w];
                    if (out <= 0.0) continue;
                    const double take = std::min(out, left);
                    push(v, w, -take);
                    left -= take;
                }
                if (left > kConservationTol)
                    throw CorrectionFailure("correct_flow: node " + std::to_string(v) +
                                            " emits flow it never sent");
                continue;
            }
            const auto& [end, prev] = *found;
            double delta = surplus;
            if (internal(end)) delta = std::min(delta, -r(end));
            // Flow runs v -> ... -> end; prev walks from end back to v.
            for (NodeId x = end; x != v; x = prev[x]) delta = std::min(delta, f[prev[x] * net.n + x]);
            for (NodeId x = end; x != v; x = prev[x]) {
                const NodeId y = prev[x];
                if (f[y * net.n + x] == delta) {
                    f[y * net.n + x] = 0.0;
                    f[x * net.n + y] = 0.0;
                } else {
                    push(y, x, -delta);
                }
            }
        }
        return changed;
    }

    bool clamp_capacities() {
        bool changed = false;
        const std::size_t n = net.n;
        for (NodeId i = 0; i < n; ++i)
            for (NodeId j = 0; j < n; ++j) {
                if (f[i * n + j] > net.cap(i, j)) {
                    f[i * n + j] = net.cap(i, j);
                    f[j * n + i] = -net.cap(i, j);
                    ++clamps;
                    changed = true;
                }
            }
        return changed;
    }
};

} // namespace

ConservationReport conservation_residuals(const FlowNetwork& net, std::span<const double> flow) {
    check_antisymmetric(net, flow);
    const std::size_t n = net.n;
    ConservationReport rep;
    rep.residual.resize(n);
    for (NodeId v = 0; v < n; ++v) {
        double s = 0.0;
        for (std::size_t j = 0; j < n; ++j) s += flow[v * n + j];
        rep.residual[v] = s;
        if (v == net.source || v == net.sink) continue;
        rep.max_internal = std::max(rep.max_internal, std::abs(s));
        if (s < -kConservationTol) rep.negative.push_back(v);
        if (s > kConservationTol) rep.positive.push_back(v);
    }
    for (NodeId i = 0; i < n; ++i)
        for (NodeId j = 0; j < n; ++j)
            rep.max_capacity_excess = std::max(rep.max_capacity_excess, flow[i * n + j] - net.cap(i, j));
    return rep;
}

CorrectionResult correct_flow(const FlowNetwork& net, std::span<const double> flow) {
    CorrectionResult res;
    res.before = conservation_residuals(net, flow);
    Repair rep{net, std::vector<double>(flow.begin(), flow.end()), 0, 0, 0,
               64 * net.n * net.n + 1024};
    // Negative nodes first, then positive ones, then capacity; repeat until a
    // full pass leaves the flow untouched.
    for (int pass = 0;; ++pass) {
        if (pass > 16) throw CorrectionFailure("correct_flow: passes did not reach a fixed point");
        bool changed = false;
        for (NodeId v = 0; v < net.n; ++v) changed |= rep.drain_excess(v);
        for (NodeId v = 0; v < net.n; ++v) changed |= rep.drain_surplus(v);
        changed |= rep.clamp_capacities();
        if (!changed) break;
    }
    res.flow = std::move(rep.f);
    res.after = conservation_residuals(net, res.flow);
    res.paths_cancelled = rep.cancelled;
    res.capacity_clamps = rep.clamps;
    res.fallback_drains = rep.drains;
    return res;
}

nlohmann::json report_to_json(const ConservationReport& r) {
    return {{"residual", r.residual},
            {"negative", r.negative},
            {"positive", r.positive},
            {"max_internal", r.max_internal},
            {"max_capacity_excess", r.max_capacity_excess}};
}

} // namespace dar
