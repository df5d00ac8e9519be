#pragma once

// Tree cost over edge probabilities and a greedy tree extractor. The
// extractor is a heuristic stand-in for an exact delineation optimizer and is
// not guaranteed to find the minimum-cost tree.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <queue>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "alcurve/errors.hpp"
#include "alcurve/graph.hpp"

namespace alcurve {

inline constexpr double kProbabilityClip = 1e-6;

// -log(p / (1 - p)) with p clipped to [eps, 1 - eps].
inline double edge_cost(double p) {
    const double q = std::clamp(p, kProbabilityClip, 1.0 - kProbabilityClip);
    return -std::log(q / (1.0 - q));
}

struct Tree {
    // Node index in the source SpatialGraph.
    std::size_t root = 0;
    // Indices into SpatialGraph::edges, in the order they were added.
    std::vector<std::size_t> edges;
};

inline double tree_cost(const Tree& t, std::span<const double> probs) {
    double c = 0.0;
    for (std::size_t e : t.edges) c += edge_cost(probs[e]);
    return c;
}

// Connected, acyclic, made of distinct existing edges, and touching its root
// (a bare root with no edges counts).
inline bool is_valid_tree(const SpatialGraph& g, const Tree& t) {
    if (t.root >= g.nodes.size()) return false;
    if (t.edges.empty()) return true;
    std::vector<std::size_t> parent(g.nodes.size());
    for (std::size_t i = 0; i < parent.size(); ++i) parent[i] = i;
    auto find = [&](std::size_t x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    };
    std::vector<bool> touched(g.nodes.size(), false);
    std::vector<bool> used(g.edges.size(), false);
    for (std::size_t e : t.edges) {
        if (e >= g.edges.size() || used[e]) return false;
        used[e] = true;
        const auto& edge = g.edges[e];
        const std::size_t a = find(edge.node_a);
        const std::size_t b = find(edge.node_b);
        if (a == b) return false;
        parent[a] = b;
        touched[edge.node_a] = true;
        touched[edge.node_b] = true;
    }
    if (!touched[t.root]) return false;
    const std::size_t root = find(t.root);
    for (std::size_t n = 0; n < g.nodes.size(); ++n) {
        if (touched[n] && find(n) != root) return false;
    }
    return true;
}

namespace detail {

class TreeGrower {
public:
    TreeGrower(const SpatialGraph& g, std::span<const double> probs) : g_(g), cost_(g.edges.size()), inc_(g.nodes.size()) {
        for (std::size_t e = 0; e < g.edges.size(); ++e) {
            cost_[e] = edge_cost(probs[e]);
            const auto& edge = g.edges[e];
            if (edge.node_a == edge.node_b) continue;
            inc_[edge.node_a].push_back({edge.node_b, e});
            inc_[edge.node_b].push_back({edge.node_a, e});
        }
    }

    Tree grow(std::size_t root) {
        std::vector<bool> in_tree(g_.nodes.size(), false);
        in_tree[root] = true;
        Tree t{root, {}};
        absorb(in_tree, t.edges);
        while (bridge(in_tree, t.edges)) {
        }
        return t;
    }

private:
    struct Link {
        std::size_t other;
        std::size_t edge;
    };

    std::size_t outside_end(std::size_t e, const std::vector<bool>& in_tree) const {
        const auto& edge = g_.edges[e];
        if (in_tree[edge.node_a] == in_tree[edge.node_b]) return npos;
        return in_tree[edge.node_a] ? edge.node_b : edge.node_a;
    }

    // Prim growth over negative edges: always the most negative frontier
    // edge, ties by edge index. Returns the cost added.
    double absorb(std::vector<bool>& in_tree, std::vector<std::size_t>& added) const {
        using Entry = std::pair<double, std::size_t>;
        std::priority_queue<Entry, std::vector<Entry>, std::greater<>> frontier;
        auto push_from = [&](std::size_t node) {
            for (const auto& [other, e] : inc_[node]) {
                if (!in_tree[other] && cost_[e] < 0.0) frontier.emplace(cost_[e], e);
            }
        };
        for (std::size_t n = 0; n < in_tree.size(); ++n) {
            if (in_tree[n]) push_from(n);
        }
        double total = 0.0;
        while (!frontier.empty()) {
            const auto [c, e] = frontier.top();
            frontier.pop();
            const std::size_t node = outside_end(e, in_tree);
            if (node == npos) continue;
            in_tree[node] = true;
            added.push_back(e);
            total += c;
            push_from(node);
        }
        return total;
    }

    // Tries every shortest nonnegative-cost path from the tree to an outside
    // node, followed by the negative growth it unlocks; commits the best one
    // if it strictly lowers the total cost.
    bool bridge(std::vector<bool>& in_tree, std::vector<std::size_t>& edges) const {
        const std::size_t n = g_.nodes.size();
        std::vector<double> dist(n, std::numeric_limits<double>::infinity());
        std::vector<std::size_t> via(n, npos);
        using Entry = std::pair<double, std::size_t>;
        std::priority_queue<Entry, std::vector<Entry>, std::greater<>> queue;
        for (std::size_t v = 0; v < n; ++v) {
            if (in_tree[v]) {
                dist[v] = 0.0;
                queue.emplace(0.0, v);
            }
        }
        while (!queue.empty()) {
            const auto [d, u] = queue.top();
            queue.pop();
            if (d > dist[u]) continue;
            for (const auto& [v, e] : inc_[u]) {
                if (in_tree[v]) continue;
                const double nd = d + std::max(cost_[e], 0.0);
                if (nd < dist[v]) {
                    dist[v] = nd;
                    via[v] = e;
                    queue.emplace(nd, v);
                }
            }
        }

        double best_value = 0.0;
        std::vector<std::size_t> best_edges;
        std::vector<bool> best_nodes;
        for (std::size_t v = 0; v < n; ++v) {
            if (in_tree[v] || via[v] == npos) continue;
            std::vector<bool> trial = in_tree;
            std::vector<std::size_t> added;
            double value = 0.0;
            // Walk back to the tree, collecting the path.
            for (std::size_t x = v; !in_tree[x];) {
                const std::size_t e = via[x];
                added.push_back(e);
                value += cost_[e];
                trial[x] = true;
                const auto& edge = g_.edges[e];
                x = edge.node_a == x ? edge.node_b : edge.node_a;
            }
            std::reverse(added.begin(), added.end());
            value += absorb(trial, added);
            if (value < best_value) {
                best_value = value;
                best_edges = std::move(added);
                best_nodes = std::move(trial);
            }
        }
        if (best_edges.empty()) return false;
        in_tree = std::move(best_nodes);
        edges.insert(edges.end(), best_edges.begin(), best_edges.end());
        return true;
    }

    static constexpr std::size_t npos = std::numeric_limits<std::size_t>::max();

    const SpatialGraph& g_;
    std::vector<double> cost_;
    std::vector<std::vector<Link>> inc_;
};

} // namespace detail

// Greedy tree growth from `root` over edge costs -log(p/(1-p)). Negative
// frontier edges are added most-negative first; when none remain, the
// cheapest path through non-negative edges that unlocks a net gain is added.
// Every step strictly lowers the total cost, so the result never costs more
// than the bare root (0).
inline Tree extract_tree(const SpatialGraph& g, std::span<const double> probs, std::size_t root) {
    if (root >= g.nodes.size()) throw GraphError("root node " + std::to_string(root) + " is not in the graph");
    if (probs.size() != g.edges.size()) throw GraphError("need one probability per edge");
    return detail::TreeGrower(g, probs).grow(root);
}

// {"root": <node id>, "edges": [<edge id>, ...]} using the graph's own ids.
inline nlohmann::json tree_to_json(const SpatialGraph& g, const Tree& t) {
    nlohmann::json edges = nlohmann::json::array();
    for (std::size_t e : t.edges) edges.push_back(g.edges.at(e).id);
    return nlohmann::json{{"root", g.nodes.at(t.root).id}, {"edges", std::move(edges)}};
}

} // namespace alcurve
