#pragma once

#include "dar/graph/flow_network.hpp"

#include <json.hpp>

#include <span>
#include <vector>

namespace dar {

/// Imbalances at or below this magnitude count as conserved.
inline constexpr double kConservationTol = 1e-12;

/// Per-node conservation error of an antisymmetric flow.
///
/// residual[v] is the net flow leaving v. Internal nodes with a negative
/// residual keep part of their in-flow (V-); positive ones emit more than
/// they receive (V+). The source and sink are never classified.
struct ConservationReport {
    std::vector<double> residual;
    std::vector<NodeId> negative;
    std::vector<NodeId> positive;
    double max_internal = 0.0;
    /// max over ordered pairs of F(i, j) - C(i, j), floored at zero.
    double max_capacity_excess = 0.0;
};

ConservationReport conservation_residuals(const FlowNetwork& net, std::span<const double> flow);

struct CorrectionResult {
    std::vector<double> flow;
    ConservationReport before;
    ConservationReport after;
    std::size_t paths_cancelled = 0;
    std::size_t capacity_clamps = 0;
    /// Imbalances with no flow-carrying path, zeroed by draining the node's
    /// own edges instead.
    std::size_t fallback_drains = 0;
};

/// Restores capacity feasibility and conservation at internal nodes.
///
/// Excess at a V- node is sent back towards the source along flow-carrying
/// arcs, V+ nodes cut their out-flow towards the sink, and capacity
/// violations are clamped, re-balancing until nothing changes. Only ever
/// shrinks flows along their direction of travel, so the result is a
/// feasible flow whose value cannot exceed the maximum.
CorrectionResult correct_flow(const FlowNetwork& net, std::span<const double> flow);

nlohmann::json report_to_json(const ConservationReport& r);

} // namespace dar
