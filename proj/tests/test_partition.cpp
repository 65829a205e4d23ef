#include <catch2/catch_amalgamated.hpp>

#include <set>

#include "ropf/matpower.hpp"
#include "ropf/network.hpp"
#include "ropf/partition.hpp"
#include "test_support.hpp"

using namespace ropf;
using ropf_test::data_path;

namespace {

Graph case_graph(const std::string& name) {
    return Graph::from_network(to_network(load_case(data_path(name))));
}

}  // namespace

TEST_CASE("case9 partitions into two regions with the deterministic rule") {
    Graph g = case_graph("case9.m");
    Partition p = radial_partition(g);
    CHECK(p.num_regions() == 2);
    CHECK(verify_radial(g, p).valid);
}

TEST_CASE("a single node is one region") {
    Graph g(1, {});
    Partition p = radial_partition(g);
    REQUIRE(p.num_regions() == 1);
    CHECK(p.regions[0] == std::vector<int>{0});
}

TEST_CASE("empty graphs are rejected") {
    Graph g(0, {});
    CHECK_THROWS_AS(radial_partition(g), EmptyGraphError);
}

TEST_CASE("triangle with the lowest-index start splits {v1,v3} | {v2}") {
    // hand trace: start at 0, stack [1,2]; pop 2 (parent 0), no non-parent
    // neighbor in the region yet, add it and push 1; pop 1 (parent 2): 0 is a
    // non-parent member, reject; pop 1 (parent 0): 2 is a non-parent member,
    // reject. Residual {1} becomes its own region.
    Graph g(3, {{0, 1}, {1, 2}, {0, 2}});
    Partition p = radial_partition(g);
    REQUIRE(p.num_regions() == 2);
    CHECK(p.regions[0] == std::vector<int>{0, 2});
    CHECK(p.regions[1] == std::vector<int>{1});
    CHECK(verify_radial(g, p).valid);
}

TEST_CASE("any tree is a single region") {
    for (unsigned seed : {1u, 2u, 3u, 4u, 5u}) {
        std::mt19937 rng(seed);
        int n = std::uniform_int_distribution<int>(2, 60)(rng);
        std::vector<std::pair<int, int>> edges;
        for (int i = 1; i < n; ++i)
            edges.emplace_back(i, std::uniform_int_distribution<int>(0, i - 1)(rng));
        Graph g(n, std::move(edges));
        Partition p = radial_partition(g);
        INFO("seed " << seed << " n " << n);
        CHECK(p.num_regions() == 1);
        CHECK(verify_radial(g, p).valid);
    }
}

TEST_CASE("verify_radial flags non-trees and accepts singleton partitions") {
    Graph c3(3, {{0, 1}, {1, 2}, {0, 2}});
    Partition whole;
    whole.regions = {{0, 1, 2}};
    auto rep = verify_radial(c3, whole);
    CHECK_FALSE(rep.valid);
    REQUIRE_FALSE(rep.violations.empty());
    CHECK(rep.violations[0].find("cycle") != std::string::npos);

    Partition singletons;
    singletons.regions = {{0}, {1}, {2}};
    CHECK(verify_radial(c3, singletons).valid);

    Partition duplicated;
    duplicated.regions = {{0, 1}, {1, 2}};
    CHECK_FALSE(verify_radial(c3, duplicated).valid);

    Partition missing;
    missing.regions = {{0, 1}};
    CHECK_FALSE(verify_radial(c3, missing).valid);
}

TEST_CASE("partition invariants hold on random connected graphs") {
    for (unsigned seed = 0; seed < 40; ++seed) {
        Graph g = ropf_test::random_connected_graph(seed, 5, 120);
        for (StartRule rule : {StartRule::LowestLabel, StartRule::SeededRandom}) {
            Partition p = radial_partition(g, rule, seed);
            INFO("seed " << seed);
            CHECK(verify_radial(g, p).valid);
        }
    }
}

TEST_CASE("deterministic rule is reproducible, seeded rule depends only on the seed") {
    Graph g = case_graph("case30.m");
    Partition a = radial_partition(g);
    Partition b = radial_partition(g);
    CHECK(a.regions == b.regions);
    Partition s1 = radial_partition(g, StartRule::SeededRandom, 11);
    Partition s2 = radial_partition(g, StartRule::SeededRandom, 11);
    CHECK(s1.regions == s2.regions);
}

TEST_CASE("region closures on the published case9 split") {
    Graph g = case_graph("case9.m");
    // the two-region split shown for this network: {1,4,5,9} and the rest
    std::vector<int> labels = g.labels();
    auto index_of = [&](int label) {
        for (int i = 0; i < g.num_nodes(); ++i)
            if (labels[i] == label) return i;
        FAIL("label not found");
        return -1;
    };
    Partition p;
    p.regions = {{index_of(1), index_of(4), index_of(5), index_of(9)},
                 {index_of(2), index_of(3), index_of(6), index_of(7), index_of(8)}};
    for (auto& r : p.regions) std::sort(r.begin(), r.end());
    REQUIRE(verify_radial(g, p).valid);

    ClosureSet cs = region_closures(g, p);
    int shared_nodes = 0;
    for (int i = 0; i < g.num_nodes(); ++i) shared_nodes += cs.shared.node_shared(i);
    int shared_directed_lines = 0;
    for (size_t e = 0; e < g.edges().size(); ++e)
        shared_directed_lines += cs.shared.line_shared(static_cast<int>(e)) ? 2 : 0;
    CHECK(shared_nodes == 4);
    CHECK(shared_directed_lines == 4);
}

TEST_CASE("single-region partition has no shared entities") {
    Graph g = case_graph("case14.m");
    Partition p;
    p.regions.push_back({});
    for (int i = 0; i < g.num_nodes(); ++i) p.regions[0].push_back(i);
    ClosureSet cs = region_closures(g, p);
    for (int i = 0; i < g.num_nodes(); ++i) CHECK_FALSE(cs.shared.node_shared(i));
    for (size_t e = 0; e < g.edges().size(); ++e) CHECK_FALSE(cs.shared.line_shared(static_cast<int>(e)));
    CHECK(cs.closures[0].boundary.empty());
}

TEST_CASE("two singleton regions on a path share both nodes and the line") {
    Graph g(2, {{0, 1}});
    Partition p;
    p.regions = {{0}, {1}};
    ClosureSet cs = region_closures(g, p);
    CHECK(cs.shared.node_regions[0] == std::vector<int>{0, 1});
    CHECK(cs.shared.node_regions[1] == std::vector<int>{0, 1});
    CHECK(cs.shared.line_shared(0));
    CHECK(cs.closures[0].boundary == std::vector<int>{1});
    CHECK(cs.closures[1].boundary == std::vector<int>{0});
}

TEST_CASE("closure structure invariants on random graphs") {
    for (unsigned seed = 100; seed < 120; ++seed) {
        Graph g = ropf_test::random_connected_graph(seed, 5, 80);
        Partition p = radial_partition(g);
        ClosureSet cs = region_closures(g, p);

        // every node's balance is owned exactly once
        std::vector<int> owned_count(g.num_nodes(), 0);
        for (const auto& cl : cs.closures)
            for (int u : cl.owned) ++owned_count[u];
        for (int u = 0; u < g.num_nodes(); ++u) CHECK(owned_count[u] == 1);

        // every line belongs to >= 1 closure; shared iff endpoints owned apart
        std::vector<int> owner(g.num_nodes(), -1);
        for (size_t k = 0; k < p.regions.size(); ++k)
            for (int u : p.regions[k]) owner[u] = static_cast<int>(k);
        for (size_t e = 0; e < g.edges().size(); ++e) {
            auto [a, b] = g.edges()[e];
            size_t count = cs.shared.line_regions[e][0].size();
            CHECK(count >= 1);
            CHECK((count > 1) == (owner[a] != owner[b]));
        }

        // boundary nodes are adjacent to an owned node; closure lines have an owned endpoint
        for (const auto& cl : cs.closures) {
            for (int bnd : cl.boundary) {
                bool touches = false;
                for (int w : g.neighbors(bnd)) touches |= cl.owns(w);
                CHECK(touches);
            }
            for (int e : cl.lines) {
                auto [a, b] = g.edges()[e];
                CHECK((cl.owns(a) || cl.owns(b)));
                CHECK((cl.contains(a) && cl.contains(b)));
            }
        }
    }
}

TEST_CASE("partition JSON round trip and validation") {
    Graph g = case_graph("case9.m");
    Partition p = radial_partition(g);
    nlohmann::json j = partition_to_json(g, p);
    Partition q = partition_from_json(g, j);
    CHECK(p.regions == q.regions);

    nlohmann::json bad = {{"regions", {{1, 2}, {2, 3}}}};
    CHECK_THROWS_AS(partition_from_json(g, bad), IoError);
}
