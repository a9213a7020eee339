#include "mcstab/graphs.hpp"

#include <algorithm>
#include <functional>
#include <string>

#include "mcstab/errors.hpp"

namespace mcstab::graphs {

DirectedGraph::DirectedGraph(int vertex_count, std::initializer_list<std::pair<int, int>> arc_list)
    : m(vertex_count) {
    for (const auto& a : arc_list) add_arc(a.first, a.second);
    validate();
}

void DirectedGraph::add_arc(int from, int to) { arcs.insert({from, to}); }

void DirectedGraph::validate() const {
    if (m < 1) throw InvalidInputError("graph: vertex count must be >= 1");
    for (const auto& [from, to] : arcs)
        if (from < 1 || from > m || to < 1 || to > m)
            throw InvalidInputError("graph: arc endpoint outside 1.." + std::to_string(m));
}

void DelayedGraph::validate() const {
    graph.validate();
    for (const auto& [from, to] : graph.arcs) {
        if (from == to) continue;
        if (!delay.count({from, to}))
            throw InvalidInputError("delayed graph: arc " + std::to_string(from) + "->" +
                                    std::to_string(to) + " is missing a delay");
    }
    for (const auto& [arc, d] : delay) {
        if (d < 0) throw InvalidInputError("delayed graph: negative delay");
        if (arc.first == arc.second && d != 0)
            throw InvalidInputError("delayed graph: self delay must be 0");
        if (arc.first != arc.second && !graph.has_arc(arc.first, arc.second))
            throw InvalidInputError("delayed graph: delay given for absent arc " +
                                    std::to_string(arc.first) + "->" + std::to_string(arc.second));
    }
}

int DelayedGraph::delay_of(int from, int to) const {
    if (from == to) return 0;
    auto it = delay.find({from, to});
    if (it == delay.end())
        throw InvalidInputError("delayed graph: no delay for arc " + std::to_string(from) + "->" +
                                std::to_string(to));
    return it->second;
}

std::vector<int> DelayedGraph::max_outgoing_delay() const {
    std::vector<int> d(graph.m, 0);
    for (const auto& [arc, dv] : delay)
        if (arc.first != arc.second) d[arc.first - 1] = std::max(d[arc.first - 1], dv);
    return d;
}

namespace {

std::vector<std::vector<int>> out_adjacency(const DirectedGraph& g, bool include_self) {
    std::vector<std::vector<int>> adj(g.m);
    for (const auto& [from, to] : g.arcs) {
        if (from == to && !include_self) continue;
        adj[from - 1].push_back(to);
    }
    for (auto& row : adj) {
        std::sort(row.begin(), row.end());
        row.erase(std::unique(row.begin(), row.end()), row.end());
    }
    return adj;
}

}  // namespace

std::vector<std::vector<int>> strongly_connected_components(const DirectedGraph& g) {
    g.validate();
    const auto adj = out_adjacency(g, false);
    const int m = g.m;
    std::vector<int> index(m, -1), low(m, 0), stack;
    std::vector<char> on_stack(m, false);
    std::vector<std::vector<int>> comps;
    int counter = 0;

    std::function<void(int)> strongconnect = [&](int v) {
        index[v] = low[v] = counter++;
        stack.push_back(v);
        on_stack[v] = true;
        for (int w1 : adj[v]) {
            const int w = w1 - 1;
            if (index[w] < 0) {
                strongconnect(w);
                low[v] = std::min(low[v], low[w]);
            } else if (on_stack[w]) {
                low[v] = std::min(low[v], index[w]);
            }
        }
        if (low[v] == index[v]) {
            std::vector<int> comp;
            int w;
            do {
                w = stack.back();
                stack.pop_back();
                on_stack[w] = false;
                comp.push_back(w + 1);
            } while (w != v);
            std::sort(comp.begin(), comp.end());
            comps.push_back(std::move(comp));
        }
    };
    for (int v = 0; v < m; ++v)
        if (index[v] < 0) strongconnect(v);
    std::sort(comps.begin(), comps.end(),
              [](const auto& a, const auto& b) { return a.front() < b.front(); });
    return comps;
}

bool is_strongly_connected(const DirectedGraph& g) {
    return strongly_connected_components(g).size() == 1;
}

bool is_weakly_connected(const DirectedGraph& g) {
    g.validate();
    const int m = g.m;
    std::vector<std::vector<int>> adj(m);
    for (const auto& [from, to] : g.arcs) {
        if (from == to) continue;
        adj[from - 1].push_back(to - 1);
        adj[to - 1].push_back(from - 1);
    }
    std::vector<char> seen(m, false);
    std::vector<int> frontier{0};
    seen[0] = true;
    int count = 1;
    while (!frontier.empty()) {
        const int v = frontier.back();
        frontier.pop_back();
        for (int w : adj[v]) {
            if (!seen[w]) {
                seen[w] = true;
                ++count;
                frontier.push_back(w);
            }
        }
    }
    return count == m;
}

std::vector<std::vector<int>> neighbor_sets(const DirectedGraph& g) {
    g.validate();
    std::vector<std::set<int>> sets(g.m);
    for (int i = 1; i <= g.m; ++i) sets[i - 1].insert(i);
    for (const auto& [from, to] : g.arcs) sets[to - 1].insert(from);
    std::vector<std::vector<int>> out(g.m);
    for (int i = 0; i < g.m; ++i) out[i].assign(sets[i].begin(), sets[i].end());
    return out;
}

std::vector<std::vector<int>> follower_sets(const DirectedGraph& g) {
    g.validate();
    std::vector<std::set<int>> sets(g.m);
    for (int i = 1; i <= g.m; ++i) sets[i - 1].insert(i);
    for (const auto& [from, to] : g.arcs) sets[from - 1].insert(to);
    std::vector<std::vector<int>> out(g.m);
    for (int i = 0; i < g.m; ++i) out[i].assign(sets[i].begin(), sets[i].end());
    return out;
}

SpanningTree spanning_tree(const DirectedGraph& g, int q) {
    g.validate();
    if (q < 1 || q > g.m) throw InvalidInputError("spanning_tree: root outside 1..m");
    const auto adj = out_adjacency(g, false);
    SpanningTree tree;
    tree.root = q;
    std::vector<char> seen(g.m, false);
    seen[q - 1] = true;
    std::vector<int> frontier{q};
    int reached = 1;
    while (!frontier.empty()) {
        std::vector<int> next;
        for (int u : frontier) {
            for (int w : adj[u - 1]) {
                if (!seen[w - 1]) {
                    seen[w - 1] = true;
                    ++reached;
                    tree.parent[w] = u;
                    tree.children[u].push_back(w);
                    next.push_back(w);
                }
            }
        }
        std::sort(next.begin(), next.end());
        frontier = std::move(next);
    }
    if (reached != g.m)
        throw DomainError("spanning_tree: root " + std::to_string(q) +
                          " does not reach every vertex");
    for (auto& [v, kids] : tree.children) std::sort(kids.begin(), kids.end());
    return tree;
}

DirectedGraph graph_union(const DirectedGraph& a, const DirectedGraph& b) {
    if (a.m != b.m) throw InvalidInputError("graph_union: vertex count mismatch");
    DirectedGraph u;
    u.m = a.m;
    u.arcs = a.arcs;
    u.arcs.insert(b.arcs.begin(), b.arcs.end());
    return u;
}

std::vector<int> neighborhood_of_set(const DirectedGraph& g, const std::vector<int>& s) {
    const auto nbrs = neighbor_sets(g);
    std::set<int> out;
    for (int i : s) {
        if (i < 1 || i > g.m) throw InvalidInputError("neighborhood_of_set: vertex outside 1..m");
        out.insert(nbrs[i - 1].begin(), nbrs[i - 1].end());
    }
    return {out.begin(), out.end()};
}

}  // namespace mcstab::graphs
