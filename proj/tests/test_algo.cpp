#include "dar/algo/max_flow.hpp"
#include "dar/error.hpp"
#include "dar/graph/dataset.hpp"
#include "dar/graph/generators.hpp"
#include "oracles.hpp"

#include <doctest.h>

using namespace dar;

namespace {

FlowNetwork single_edge() {
    FlowNetwork net = FlowNetwork::empty(2, Family::two_community);
    net.set_edge(0, 1, 5.0, 0.3);
    net.rebuild_edge_list();
    net.source = 0;
    net.sink = 1;
    return net;
}

// s=0, a=1, b=2, t=3. Path through a weighs 0.2, through b 0.9.
FlowNetwork diamond() {
    FlowNetwork net = FlowNetwork::empty(4, Family::two_community);
    net.set_edge(0, 1, 3.0, 0.1);
    net.set_edge(0, 2, 2.0, 0.4);
    net.set_edge(1, 3, 2.0, 0.1);
    net.set_edge(2, 3, 3.0, 0.5);
    net.rebuild_edge_list();
    net.source = 0;
    net.sink = 3;
    return net;
}

// Largest s-t flow over every integer edge assignment that conserves flow
// at a and b.
int diamond_integer_optimum() {
    int best = 0;
    for (int sa = 0; sa <= 3; ++sa)
        for (int sb = 0; sb <= 2; ++sb)
            for (int at = 0; at <= 2; ++at)
                for (int bt = 0; bt <= 3; ++bt)
                    if (sa == at && sb == bt) best = std::max(best, sa + sb);
    return best;
}

} // namespace

TEST_SUITE("algo") {

TEST_CASE("bellman-ford on small graphs") {
    const std::vector<double> zero2(4, 0.0), zero4(16, 0.0);
    auto p = bellman_ford_path(single_edge(), zero2);
    REQUIRE(p);
    CHECK((*p)[1] == 0);

    auto d = bellman_ford_path(diamond(), zero4);
    REQUIRE(d);
    // Oracle: compare the two path weights directly.
    const auto net = diamond();
    const double wa = net.w(0, 1) + net.w(1, 3), wb = net.w(0, 2) + net.w(2, 3);
    CHECK(wa < wb);
    CHECK((*d)[3] == 1);

    FlowNetwork cut = FlowNetwork::empty(3, Family::two_community);
    cut.set_edge(0, 1, 1.0, 0.5);
    cut.rebuild_edge_list();
    cut.source = 0;
    cut.sink = 2;
    CHECK_FALSE(bellman_ford_path(cut, std::vector<double>(9, 0.0)));
}

TEST_CASE("ford-fulkerson examples") {
    auto one = ford_fulkerson(single_edge());
    CHECK(one.value == 5.0);
    CHECK(one.trajectory.T() == 1);
    CHECK(min_cut_labels(single_edge(), one.flow) == std::vector<std::uint8_t>{0, 1});

    auto d = ford_fulkerson(diamond());
    CHECK(d.value == diamond_integer_optimum());
    CHECK(d.value == 4.0);
    CHECK(brute_force_max_flow(diamond()) == 4.0);
    CHECK(oracle::min_cut_by_enumeration(diamond()) == 4.0);
    auto labels = min_cut_labels(diamond(), d.flow);
    CHECK(cut_capacity(diamond(), labels) == 4.0);
    CHECK(oracle::trajectory_violation(diamond(), d.trajectory).empty());

    FlowNetwork cut = FlowNetwork::empty(3, Family::two_community);
    cut.set_edge(0, 1, 1.0, 0.5);
    cut.rebuild_edge_list();
    cut.source = 0;
    cut.sink = 2;
    auto none = ford_fulkerson(cut);
    CHECK(none.trajectory.T() == 0);
    CHECK(none.value == 0.0);
    for (double f : none.flow) CHECK(f == 0.0);
    CHECK(brute_force_max_flow(cut) == 0.0);
}

TEST_CASE("min cut rejects a non-maximal flow") {
    CHECK_THROWS_AS(min_cut_labels(diamond(), std::vector<double>(16, 0.0)), InvalidFlow);
}

TEST_CASE("trajectory properties on generated graphs") {
    for (std::uint64_t seed = 0; seed < 40; ++seed) {
        for (auto fam : {Family::two_community, Family::bipartite}) {
            auto net = make_instance(fam, fam == Family::bipartite ? 8 : 12, seed);
            auto res = ford_fulkerson(net);
            INFO("seed " << seed);
            CHECK(oracle::trajectory_violation(net, res.trajectory, 1e-12, 1e-12) == "");
            CHECK(res.value == doctest::Approx(oracle::min_cut_by_enumeration(net)).epsilon(1e-12));
            CHECK(ford_fulkerson(net).trajectory == res.trajectory);
        }
    }
}

TEST_CASE("raw integer capacities give exact agreement") {
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
        auto net = make_instance(Family::two_community, 8, seed, CapacityScale::raw_integer);
        const double v = ford_fulkerson(net).value;
        CHECK(v == brute_force_max_flow(net));
        CHECK(v == oracle::min_cut_by_enumeration(net));
        CHECK(v == std::floor(v));
        CHECK(oracle::trajectory_violation(net, ford_fulkerson(net).trajectory) == "");
    }
}

TEST_CASE("path_only keeps just the augmenting path") {
    Predecessors tree{0, 0, 1, 1};
    auto p = path_only(tree, 0, 3);
    CHECK(p == Predecessors{0, 0, 2, 1});
}

}
