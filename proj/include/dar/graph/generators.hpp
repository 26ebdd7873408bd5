#pragma once

#include "dar/graph/flow_network.hpp"

#include <cstdint>
#include <utility>

namespace dar {

struct TwoCommunityParams {
    double p_intra = 0.75;
    double p_inter = 0.05;
};

enum class CapacityScale {
    normalized,  // integers from U{0..10}, min-max scaled per graph
    raw_integer, // integers from U{0..10}, left unscaled
};

inline constexpr int kMaxRawCapacity = 10;
inline constexpr int kMaxGenerationAttempts = 1000;

/// Two Erdos-Renyi blocks of n/2 nodes (directed sampling). Edges carry unit
/// capacity and uniform weights; terminals are chosen by select_source_sink.
/// Resamples until a valid (s, t) exists.
FlowNetwork gen_two_community(std::size_t n, std::uint64_t seed, TwoCommunityParams params = {});

/// Bipartite graph with n/2 left and n/2 right nodes plus a super-source
/// (node n, feeding every left node) and a super-sink (node n + 1, fed by
/// every right node). Cross edges run left to right with capacity drawn
/// from {0, 1}; zero-capacity pairs are not edges.
FlowNetwork gen_bipartite(std::size_t n, std::uint64_t seed);

/// Redraws capacities and weights of a two-community network. Zero
/// capacities drop the edge. Does not re-check s-t connectivity.
FlowNetwork sample_capacities(const FlowNetwork& net, std::uint64_t seed,
                              CapacityScale scale = CapacityScale::normalized);

std::pair<NodeId, NodeId> select_source_sink(const FlowNetwork& net, std::uint64_t seed);

/// Full generation pipeline for one dataset item: topology, capacities and
/// terminals, retried until max-flow > 0.
FlowNetwork make_instance(Family family, std::size_t n, std::uint64_t seed,
                          CapacityScale scale = CapacityScale::normalized);

/// SplitMix64 finaliser; derives independent stream seeds.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

} // namespace dar
