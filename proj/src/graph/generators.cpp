#include "dar/graph/generators.hpp"

#include "dar/error.hpp"

#include <algorithm>
#include <random>

namespace dar {

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

namespace {

void check_size(std::size_t n, const char* what) {
    if (n < 4 || n % 2 != 0)
        throw InvalidArgument(std::string(what) + ": node count must be even and >= 4, got " +
                              std::to_string(n));
}

// Stream ids keep the different random draws of one generation independent.
enum Stream : std::uint64_t { topology = 1, terminals = 2, capacities = 3, attempt = 4 };

} // namespace

FlowNetwork gen_two_community(std::size_t n, std::uint64_t seed, TwoCommunityParams params) {
    check_size(n, "gen_two_community");
    const std::size_t half = n / 2;
    for (int attempt = 0; attempt < kMaxGenerationAttempts; ++attempt) {
        const std::uint64_t s = mix_seed(seed, Stream::attempt * 1000003ULL + attempt);
        std::mt19937_64 rng(mix_seed(s, Stream::topology));
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        FlowNetwork net = FlowNetwork::empty(n, Family::two_community);
        for (NodeId i = 0; i < n; ++i)
            for (NodeId j = 0; j < n; ++j) {
                if (i == j) continue;
                const bool same = (i < half) == (j < half);
                const double p = same ? params.p_intra : params.p_inter;
                const double draw = unit(rng);
                const double wt = unit(rng);
                if (draw < p) net.set_edge(i, j, 1.0, wt);
            }
        net.rebuild_edge_list();
        try {
            auto [src, snk] = select_source_sink(net, mix_seed(s, Stream::terminals));
            net.source = src;
            net.sink = snk;
            return net;
        } catch (const GenerationFailure&) {
        }
    }
    throw GenerationFailure("gen_two_community: no s-t connected sample in " +
                            std::to_string(kMaxGenerationAttempts) + " attempts (n=" +
                            std::to_string(n) + ")");
}

FlowNetwork gen_bipartite(std::size_t n, std::uint64_t seed) {
    check_size(n, "gen_bipartite");
    const std::size_t half = n / 2;
    const auto src = static_cast<NodeId>(n);
    const auto snk = static_cast<NodeId>(n + 1);
    for (int attempt = 0; attempt < kMaxGenerationAttempts; ++attempt) {
        std::mt19937_64 rng(mix_seed(seed, Stream::attempt * 1000003ULL + attempt));
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        std::uniform_int_distribution<int> coin(0, 1);
        FlowNetwork net = FlowNetwork::empty(n + 2, Family::bipartite);
        for (NodeId l = 0; l < half; ++l) net.set_edge(src, l, 1.0, unit(rng));
        for (auto r = static_cast<NodeId>(half); r < n; ++r) net.set_edge(r, snk, 1.0, unit(rng));
        for (NodeId l = 0; l < half; ++l)
            for (auto r = static_cast<NodeId>(half); r < n; ++r) {
                const int c = coin(rng);
                const double wt = unit(rng);
                if (c == 1) net.set_edge(l, r, 1.0, wt);
            }
        net.rebuild_edge_list();
        net.source = src;
        net.sink = snk;
        if (reachable(net, src, snk)) return net;
    }
    throw GenerationFailure("gen_bipartite: no s-t connected sample in " +
                            std::to_string(kMaxGenerationAttempts) + " attempts");
}

FlowNetwork sample_capacities(const FlowNetwork& net, std::uint64_t seed, CapacityScale scale) {
    if (net.family != Family::two_community)
        throw InvalidArgument("sample_capacities: only two_community networks carry integer capacities");
    if (net.edges.empty()) throw InvalidArgument("sample_capacities: network has no edges");
    for (int attempt = 0; attempt < kMaxGenerationAttempts; ++attempt) {
        std::mt19937_64 rng(mix_seed(seed, Stream::capacities * 1000003ULL + attempt));
        std::uniform_int_distribution<int> cap(0, kMaxRawCapacity);
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        std::vector<int> raw(net.edges.size());
        std::vector<double> wts(net.edges.size());
        for (std::size_t k = 0; k < raw.size(); ++k) {
            raw[k] = cap(rng);
            wts[k] = unit(rng);
        }
        const auto [lo, hi] = std::minmax_element(raw.begin(), raw.end());
        if (*lo == *hi) continue; // degenerate min-max; redraw
        FlowNetwork out = net;
        std::fill(out.capacity.begin(), out.capacity.end(), 0.0);
        std::fill(out.weight.begin(), out.weight.end(), 0.0);
        for (std::size_t k = 0; k < raw.size(); ++k) {
            const double c = scale == CapacityScale::normalized
                                 ? static_cast<double>(raw[k] - *lo) / static_cast<double>(*hi - *lo)
                                 : static_cast<double>(raw[k]);
            out.set_edge(net.edges[k].from, net.edges[k].to, c, wts[k]);
        }
        out.rebuild_edge_list();
        return out;
    }
    throw GenerationFailure("sample_capacities: every draw was degenerate");
}

std::pair<NodeId, NodeId> select_source_sink(const FlowNetwork& net, std::uint64_t seed) {
    if (net.family == Family::bipartite) {
        const auto src = static_cast<NodeId>(net.n - 2);
        const auto snk = static_cast<NodeId>(net.n - 1);
        if (!reachable(net, src, snk))
            throw GenerationFailure("select_source_sink: super-sink unreachable from super-source");
        return {src, snk};
    }
    const std::size_t half = net.n / 2;
    std::vector<std::pair<NodeId, NodeId>> valid;
    for (NodeId s = 0; s < half; ++s)
        for (auto t = static_cast<NodeId>(half); t < net.n; ++t)
            if (reachable(net, s, t)) valid.emplace_back(s, t);
    if (valid.empty())
        throw GenerationFailure("select_source_sink: no community-0 node reaches community 1");
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> pick(0, valid.size() - 1);
    return valid[pick(rng)];
}

FlowNetwork make_instance(Family family, std::size_t n, std::uint64_t seed, CapacityScale scale) {
    if (family == Family::bipartite) return gen_bipartite(n, seed);
    for (int attempt = 0; attempt < kMaxGenerationAttempts; ++attempt) {
        const std::uint64_t s = mix_seed(seed, 7919ULL * attempt + 17);
        FlowNetwork net = sample_capacities(gen_two_community(n, s), mix_seed(s, Stream::capacities), scale);
        try {
            auto [src, snk] = select_source_sink(net, mix_seed(s, Stream::terminals));
            net.source = src;
            net.sink = snk;
            return net;
        } catch (const GenerationFailure&) {
        }
    }
    throw GenerationFailure("make_instance: capacity sampling never left an s-t path");
}

} // namespace dar
