#pragma once

// Independent checks shared by the unit and acceptance suites. Nothing here
// calls into the code under test beyond reading plain data.

#include "dar/algo/trajectory.hpp"
#include "dar/graph/flow_network.hpp"

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

namespace oracle {

inline double max_antisymmetry(std::span<const double> f, std::size_t n) {
    double worst = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) worst = std::max(worst, std::abs(f[i * n + j] + f[j * n + i]));
    return worst;
}

// Largest F(i, j) - C(i, j) over ordered pairs, floored at zero.
inline double max_capacity_excess(const dar::FlowNetwork& net, std::span<const double> f) {
    double worst = 0.0;
    for (std::size_t k = 0; k < net.n * net.n; ++k) worst = std::max(worst, f[k] - net.capacity[k]);
    return worst;
}

inline double max_internal_residual(const dar::FlowNetwork& net, std::span<const double> f) {
    double worst = 0.0;
    for (std::size_t v = 0; v < net.n; ++v) {
        if (v == net.source || v == net.sink) continue;
        double r = 0.0;
        for (std::size_t j = 0; j < net.n; ++j) r += f[v * net.n + j];
        worst = std::max(worst, std::abs(r));
    }
    return worst;
}

inline double out_of_source(const dar::FlowNetwork& net, std::span<const double> f) {
    double r = 0.0;
    for (std::size_t j = 0; j < net.n; ++j) r += f[net.source * net.n + j];
    return r;
}

// Minimum s-t cut by enumerating every side assignment of the internal
// nodes. Exponential; n <= 12.
inline double min_cut_by_enumeration(const dar::FlowNetwork& net) {
    std::vector<std::size_t> internal;
    for (std::size_t v = 0; v < net.n; ++v)
        if (v != net.source && v != net.sink) internal.push_back(v);
    double best = INFINITY;
    for (std::size_t mask = 0; mask < (std::size_t{1} << internal.size()); ++mask) {
        std::vector<bool> source_side(net.n, false);
        source_side[net.source] = true;
        for (std::size_t k = 0; k < internal.size(); ++k)
            if (mask >> k & 1) source_side[internal[k]] = true;
        double c = 0.0;
        for (std::size_t i = 0; i < net.n; ++i)
            for (std::size_t j = 0; j < net.n; ++j)
                if (source_side[i] && !source_side[j]) c += net.capacity[i * net.n + j];
        best = std::min(best, c);
    }
    return best;
}

// Empty string when every structural property of a trajectory holds,
// otherwise a description of the first violation. `conservation_tol` is 0
// for integer capacities; sums of normalized capacities carry rounding.
inline std::string trajectory_violation(const dar::FlowNetwork& net, const dar::Trajectory& tr,
                                        double tol = 1e-12, double conservation_tol = 0.0) {
    const std::size_t n = net.n;
    for (std::size_t t = 0; t < tr.T(); ++t) {
        const auto& st = tr.steps[t];
        const std::string at = "step " + std::to_string(t) + ": ";
        if (st.flow.size() != n * n || st.pred.size() != n) return at + "bad sizes";
        if (max_antisymmetry(st.flow, n) > tol) return at + "not antisymmetric";
        if (max_capacity_excess(net, st.flow) > tol) return at + "capacity exceeded";
        if (max_internal_residual(net, st.flow) > conservation_tol) return at + "conservation broken";
        if (st.pred[net.source] != net.source) return at + "pred[s] != s";
        // Walk back from t: must reach s through distinct nodes.
        std::vector<bool> on_path(n, false);
        std::size_t v = net.sink, hops = 0;
        on_path[v] = true;
        while (v != net.source) {
            const std::size_t u = st.pred[v];
            if (u == v || ++hops > n || on_path[u]) return at + "pred does not encode an s-t path";
            v = u;
            on_path[v] = true;
        }
        for (std::size_t u = 0; u < n; ++u)
            if (!on_path[u] && st.pred[u] != u) return at + "off-path node has a predecessor";
        // Each augmentation pushes positive flow out of s.
        const double before = t == 0 ? 0.0 : out_of_source(net, tr.steps[t - 1].flow);
        if (!(out_of_source(net, st.flow) > before)) return at + "value did not increase";
    }
    if (tr.T() > 0 && tr.final_flow != tr.steps.back().flow) return "final flow != last step";
    if (tr.T() == 0 && std::any_of(tr.final_flow.begin(), tr.final_flow.end(), [](double x) { return x != 0.0; }))
        return "empty trajectory with non-zero flow";
    if (tr.cut.size() != n || tr.cut[net.source] != 0 || tr.cut[net.sink] != 1) return "bad cut labels";
    return {};
}

} // namespace oracle
