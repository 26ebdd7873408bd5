#include "dar/error.hpp"
#include "dar/graph/dataset.hpp"
#include "dar/graph/generators.hpp"

#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>

using namespace dar;

TEST_SUITE("graph") {

TEST_CASE("two-community intra density over 1000 seeds") {
    // Monte-Carlo estimate: fraction of ordered same-block pairs that are edges.
    double edges = 0.0, pairs = 0.0;
    for (std::uint64_t seed = 0; seed < 1000; ++seed) {
        auto net = gen_two_community(16, seed);
        for (NodeId i = 0; i < 16; ++i)
            for (NodeId j = 0; j < 16; ++j) {
                if (i == j || (i < 8) != (j < 8)) continue;
                pairs += 1.0;
                edges += net.has_edge(i, j);
            }
    }
    const double density = edges / pairs;
    CHECK(density >= 0.70);
    CHECK(density <= 0.80);
}

TEST_CASE("forced cross probability links every cross pair") {
    auto net = gen_two_community(4, 3, {0.75, 1.0});
    for (NodeId i = 0; i < 4; ++i)
        for (NodeId j = 0; j < 4; ++j)
            if ((i < 2) != (j < 2)) CHECK(net.has_edge(i, j));
}

TEST_CASE("bad node counts are rejected") {
    CHECK_THROWS_AS(gen_two_community(3, 0), InvalidArgument);
    CHECK_THROWS_AS(gen_bipartite(3, 0), InvalidArgument);
}

TEST_CASE("bipartite construction") {
    auto net = gen_bipartite(4, 1);
    CHECK(net.n == 6);
    CHECK(net.source == 4);
    CHECK(net.sink == 5);
    for (const auto& e : net.edges) {
        CHECK(net.cap(e.from, e.to) == 1.0);
        const bool left_from = e.from < 2, left_to = e.to < 2;
        if (e.from < 4 && e.to < 4) CHECK(left_from != left_to);
    }
    auto big = gen_bipartite(64, 9);
    CHECK(big.n == 66);
    for (double c : big.capacity) CHECK((c == 0.0 || c == 1.0));
}

TEST_CASE("capacity sampling: range, zero drop, determinism") {
    auto topo = gen_two_community(16, 5);
    auto a = sample_capacities(topo, 11);
    auto b = sample_capacities(topo, 11);
    CHECK(a == b);
    CHECK(a.edges.size() <= topo.edges.size());
    for (const auto& e : a.edges) {
        CHECK(a.cap(e.from, e.to) > 0.0);
        CHECK(a.cap(e.from, e.to) <= 1.0);
        CHECK(a.w(e.from, e.to) >= 0.0);
        CHECK(a.w(e.from, e.to) <= 1.0);
    }
    auto raw = sample_capacities(topo, 11, CapacityScale::raw_integer);
    // Every normalized capacity is the min-max image of the raw integer.
    int lo = 10, hi = 0;
    for (std::size_t k = 0; k < topo.edges.size(); ++k) {
        const auto& e = topo.edges[k];
        const int r = static_cast<int>(raw.cap(e.from, e.to));
        lo = std::min(lo, r);
        hi = std::max(hi, r);
    }
    for (const auto& e : raw.edges) {
        const double r = raw.cap(e.from, e.to);
        CHECK(r == std::floor(r));
        CHECK(a.cap(e.from, e.to) == doctest::Approx((r - lo) / (hi - lo)).epsilon(1e-15));
    }
    for (const auto& e : topo.edges)
        if (raw.cap(e.from, e.to) == 0.0) CHECK_FALSE(a.has_edge(e.from, e.to));
}

TEST_CASE("terminals") {
    auto bip = gen_bipartite(4, 2);
    auto [s, t] = select_source_sink(bip, 0);
    CHECK(s == 4);
    CHECK(t == 5);

    FlowNetwork split = FlowNetwork::empty(4, Family::two_community);
    split.set_edge(0, 1, 1.0, 0.5);
    split.set_edge(2, 3, 1.0, 0.5);
    split.rebuild_edge_list();
    CHECK_THROWS_AS(select_source_sink(split, 0), GenerationFailure);

    auto net = gen_two_community(16, 21);
    CHECK(select_source_sink(net, 8) == select_source_sink(net, 8));
}

TEST_CASE("generated instances are valid and connected") {
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        for (auto fam : {Family::two_community, Family::bipartite}) {
            auto net = make_instance(fam, 16, seed);
            CHECK_NOTHROW(net.validate());
            CHECK(net.source != net.sink);
            CHECK(reachable(net, net.source, net.sink));
            CHECK(make_instance(fam, 16, seed) == net);
        }
    }
}

TEST_CASE("dataset round trip, truncation and empty sets") {
    auto ds = make_dataset(Split::valid, Family::two_community, 8, 5, 3);
    const auto path = std::filesystem::temp_directory_path() / "dar_test_dataset.json";
    write_dataset(ds, path);
    CHECK(read_dataset(path) == ds);

    std::ifstream in(path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    in.close();
    {
        std::ofstream out(path);
        out << text.substr(0, text.size() / 2);
    }
    CHECK_THROWS_AS(read_dataset(path), ParseError);

    Dataset empty;
    write_dataset(empty, path);
    auto back = read_dataset(path);
    CHECK(back.items.empty());
    std::filesystem::remove(path);
}

TEST_CASE("dataset parse errors name the field") {
    auto ds = make_dataset(Split::train, Family::two_community, 8, 1, 0);
    auto j = dataset_to_json(ds);
    j["items"][0].erase("s");
    try {
        dataset_from_json(j);
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(std::string(e.what()).find("items[0]") != std::string::npos);
    }
}

}
