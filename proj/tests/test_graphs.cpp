#include <doctest.h>

#include <random>

#include "mcstab/errors.hpp"
#include "mcstab/graphs.hpp"
#include "fixtures.hpp"

using namespace mcstab;
using namespace mcstab::graphs;

TEST_CASE("connectivity") {
    CHECK(is_strongly_connected(fixtures::cycle123()));
    CHECK(is_strongly_connected(DirectedGraph(1, {})));
    const DirectedGraph path(3, {{1, 2}, {2, 3}});
    CHECK_FALSE(is_strongly_connected(path));
    CHECK(is_weakly_connected(path));
    DirectedGraph isolated;
    isolated.m = 2;
    CHECK_FALSE(is_weakly_connected(isolated));
    CHECK(is_weakly_connected(fixtures::cycle123()));
}

TEST_CASE("scc ordering is deterministic") {
    const DirectedGraph g(5, {{1, 2}, {2, 1}, {3, 4}, {4, 3}, {2, 3}});
    const auto comps = strongly_connected_components(g);
    REQUIRE(comps.size() == 3);
    CHECK(comps[0] == std::vector<int>{1, 2});
    CHECK(comps[1] == std::vector<int>{3, 4});
    CHECK(comps[2] == std::vector<int>{5});
}

TEST_CASE("neighbor and follower sets") {
    const auto nbrs = neighbor_sets(fixtures::cycle123());
    CHECK(nbrs[1] == std::vector<int>{1, 2});  // N_2 on 1->2->3->1

    DirectedGraph self_only;
    self_only.m = 3;
    for (const auto& s : neighbor_sets(self_only)) CHECK(s.size() == 1);

    // Two shared 2-cycles: agent 2 sends to both ends.
    const auto fols = follower_sets(fixtures::two_cycles3());
    CHECK(fols[1] == std::vector<int>{1, 2, 3});
    CHECK(fols[0] == std::vector<int>{1, 2});

    const auto listen = neighbor_sets(fixtures::listening_cycle3());
    CHECK(listen[0] == std::vector<int>{1, 2});
    CHECK(listen[1] == std::vector<int>{2, 3});
    CHECK(listen[2] == std::vector<int>{1, 3});
}

TEST_CASE("spanning_tree") {
    const auto tree = spanning_tree(fixtures::cycle123(), 1);
    CHECK(tree.parent.at(2) == 1);
    CHECK(tree.parent.at(3) == 2);
    CHECK(tree.parent.size() == 2);

    const DirectedGraph star(4, {{2, 1}, {2, 3}, {2, 4}});
    const auto stree = spanning_tree(star, 2);
    CHECK(stree.parent.at(1) == 2);
    CHECK(stree.parent.at(3) == 2);
    CHECK(stree.parent.at(4) == 2);

    const DirectedGraph two(2, {{1, 2}, {2, 1}});
    CHECK(spanning_tree(two, 2).parent.at(1) == 2);

    CHECK_THROWS_AS(spanning_tree(DirectedGraph(3, {{1, 2}}), 1), DomainError);
}

TEST_CASE("spanning_tree arcs come from the graph") {
    std::mt19937_64 rng(23);
    for (int trial = 0; trial < 50; ++trial) {
        const auto g = fixtures::random_strongly_connected(rng, 2 + static_cast<int>(rng() % 7));
        const int q = 1 + static_cast<int>(rng() % g.m);
        const auto tree = spanning_tree(g, q);
        CHECK(static_cast<int>(tree.parent.size()) == g.m - 1);
        for (const auto& [child, parent] : tree.parent) CHECK(g.has_arc(parent, child));
    }
}

TEST_CASE("graph_union") {
    DirectedGraph empty;
    empty.m = 3;
    const auto g = fixtures::cycle123();
    CHECK(graph_union(g, empty).arcs == g.arcs);
    const auto two = graph_union(DirectedGraph(2, {{1, 2}}), DirectedGraph(2, {{2, 1}}));
    CHECK(is_strongly_connected(two));
    CHECK_THROWS_AS(graph_union(g, DirectedGraph(2, {})), InvalidInputError);
}

TEST_CASE("neighborhood_of_set") {
    const auto g = fixtures::listening_cycle3();
    CHECK(neighborhood_of_set(g, {1, 2, 3}) == std::vector<int>{1, 2, 3});
    CHECK(neighborhood_of_set(g, {}).empty());
    CHECK(neighborhood_of_set(g, {2}) == std::vector<int>{2, 3});
    // On the ascending cycle, N_2 = {1,2}.
    CHECK(neighborhood_of_set(fixtures::cycle123(), {2}) == std::vector<int>{1, 2});
}

TEST_CASE("neighborhood_of_set is monotone") {
    std::mt19937_64 rng(29);
    for (int trial = 0; trial < 60; ++trial) {
        const int m = 2 + static_cast<int>(rng() % 7);
        const auto g = fixtures::random_strongly_connected(rng, m);
        std::vector<int> small, big;
        for (int i = 1; i <= m; ++i) {
            const bool in_big = rng() % 2 == 0;
            if (in_big) big.push_back(i);
            if (in_big && rng() % 2 == 0) small.push_back(i);
        }
        const auto ns = neighborhood_of_set(g, small);
        const auto nb = neighborhood_of_set(g, big);
        for (int v : ns) CHECK(std::binary_search(nb.begin(), nb.end(), v));
    }
}

TEST_CASE("strong connectivity implies weak connectivity") {
    std::mt19937_64 rng(31);
    for (int trial = 0; trial < 60; ++trial) {
        const auto g = fixtures::random_strongly_connected(rng, 2 + static_cast<int>(rng() % 7));
        REQUIRE(is_strongly_connected(g));
        CHECK(is_weakly_connected(g));
    }
}

TEST_CASE("delayed graph validation") {
    auto dg = fixtures::delayed_two_cycles();
    CHECK(dg.max_outgoing_delay() == std::vector<int>{1, 2, 2});
    CHECK(dg.delay_of(2, 2) == 0);
    CHECK(dg.delay_of(3, 2) == 2);

    dg.delay[{1, 3}] = 1;  // no such arc
    CHECK_THROWS_AS(dg.validate(), InvalidInputError);

    auto missing = fixtures::delayed_two_cycles();
    missing.delay.erase({1, 2});
    CHECK_THROWS_AS(missing.validate(), InvalidInputError);
}
