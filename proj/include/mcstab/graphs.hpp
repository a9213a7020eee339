#pragma once

#include <map>
#include <set>
#include <utility>
#include <vector>

namespace mcstab::graphs {

/// Directed graph on vertices labeled 1..m. An arc (j,i) means "j -> i",
/// i.e. vertex i receives from vertex j. Self-arcs are representable but
/// every vertex is implicitly its own neighbor regardless.
struct DirectedGraph {
    int m{0};
    std::set<std::pair<int, int>> arcs;  // (from, to)

    DirectedGraph() = default;
    DirectedGraph(int vertex_count, std::initializer_list<std::pair<int, int>> arc_list);

    void add_arc(int from, int to);
    bool has_arc(int from, int to) const { return arcs.count({from, to}) > 0; }
    void validate() const;
};

/// Directed graph with a fixed nonnegative integer delay on each arc.
/// Implicit self-arcs have delay 0.
struct DelayedGraph {
    DirectedGraph graph;
    std::map<std::pair<int, int>, int> delay;

    void validate() const;
    /// Delay from vertex `from` to vertex `to`; 0 for from == to.
    int delay_of(int from, int to) const;
    /// d_i = max delay over the outgoing arcs of vertex i (0 if none).
    std::vector<int> max_outgoing_delay() const;
};

struct SpanningTree {
    int root{0};
    std::map<int, int> parent;                 // vertex -> parent (root excluded)
    std::map<int, std::vector<int>> children;  // vertex -> sorted children
};

bool is_strongly_connected(const DirectedGraph& g);
bool is_weakly_connected(const DirectedGraph& g);

/// Strongly connected components, each sorted ascending, components ordered
/// by their lowest vertex label.
std::vector<std::vector<int>> strongly_connected_components(const DirectedGraph& g);

/// N_i for i = 1..m (element [i-1]), always containing i itself.
std::vector<std::vector<int>> neighbor_sets(const DirectedGraph& g);
/// F_i for i = 1..m (element [i-1]): vertices that receive from i, plus i itself.
std::vector<std::vector<int>> follower_sets(const DirectedGraph& g);

/// BFS tree rooted at q with arcs oriented away from q, lowest labels first.
/// Throws DomainError when q does not reach every vertex.
SpanningTree spanning_tree(const DirectedGraph& g, int q);

DirectedGraph graph_union(const DirectedGraph& a, const DirectedGraph& b);

/// Union of N_i over i in s, sorted ascending.
std::vector<int> neighborhood_of_set(const DirectedGraph& g, const std::vector<int>& s);

}  // namespace mcstab::graphs
