#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "lightrec/corpus.hpp"
#include "lightrec/util.hpp"

namespace lightrec {

enum class NodeKind { User, Item };

/// Undirected weighted graph with integer count weights.
/// Edges are stored once per unordered pair (a < b).
struct WeightedGraph {
    struct Node {
        NodeKind kind;
        int entity;  // index into the user or item vocabulary
    };

    std::vector<Node> nodes;
    std::map<std::pair<int, int>, std::int64_t> edges;  // key: (min, max) node ids

    int size() const { return static_cast<int>(nodes.size()); }

    std::int64_t weight(int a, int b) const {
        if (a == b) return 0;
        auto it = edges.find({std::min(a, b), std::max(a, b)});
        return it == edges.end() ? 0 : it->second;
    }

    void add_edge(int a, int b, std::int64_t w) {
        if (a == b) throw error("self-loops are not allowed");
        if (w < 1) throw error("edge weights must be >= 1");
        edges[{std::min(a, b), std::max(a, b)}] += w;
    }

    std::vector<std::vector<std::pair<int, std::int64_t>>> adjacency() const {
        std::vector<std::vector<std::pair<int, std::int64_t>>> adj(nodes.size());
        for (const auto& [key, w] : edges) {
            adj[key.first].push_back({key.second, w});
            adj[key.second].push_back({key.first, w});
        }
        return adj;
    }
};

namespace detail {

inline std::vector<std::set<int>> distinct_items_per_user(const SplitDataset& train) {
    std::vector<std::set<int>> sets(train.num_users);
    for (int u = 0; u < train.num_users; ++u)
        sets[u].insert(train.train[u].begin(), train.train[u].end());
    return sets;
}

}  // namespace detail

/// User-user edges weighted by the number of distinct items both users interacted with.
inline WeightedGraph build_user_graph(const SplitDataset& train) {
    WeightedGraph g;
    for (int u = 0; u < train.num_users; ++u) g.nodes.push_back({NodeKind::User, u});

    // Invert to item -> users, then count shared items per user pair.
    std::vector<std::vector<int>> item_users(train.num_items);
    auto sets = detail::distinct_items_per_user(train);
    for (int u = 0; u < train.num_users; ++u)
        for (int i : sets[u]) item_users[i].push_back(u);

    std::map<std::pair<int, int>, std::int64_t> counts;
    for (const auto& us : item_users)
        for (std::size_t a = 0; a < us.size(); ++a)
            for (std::size_t b = a + 1; b < us.size(); ++b) counts[{us[a], us[b]}] += 1;
    g.edges = std::move(counts);
    return g;
}

/// Item-item edges weighted by the number of users whose history contains both items.
inline WeightedGraph build_item_graph(const SplitDataset& train) {
    WeightedGraph g;
    for (int i = 0; i < train.num_items; ++i) g.nodes.push_back({NodeKind::Item, i});

    std::map<std::pair<int, int>, std::int64_t> counts;
    auto sets = detail::distinct_items_per_user(train);
    for (const auto& items : sets) {
        std::vector<int> v(items.begin(), items.end());
        for (std::size_t a = 0; a < v.size(); ++a)
            for (std::size_t b = a + 1; b < v.size(); ++b) counts[{v[a], v[b]}] += 1;
    }
    g.edges = std::move(counts);
    return g;
}

/// Joint graph: users first, then items. User-user and item-item edges as above,
/// user-item edges weighted by interaction record multiplicity.
inline WeightedGraph build_user_item_graph(const SplitDataset& train) {
    WeightedGraph g;
    for (int u = 0; u < train.num_users; ++u) g.nodes.push_back({NodeKind::User, u});
    for (int i = 0; i < train.num_items; ++i) g.nodes.push_back({NodeKind::Item, i});
    const int offset = train.num_users;

    WeightedGraph ug = build_user_graph(train);
    WeightedGraph ig = build_item_graph(train);
    g.edges = std::move(ug.edges);
    for (const auto& [key, w] : ig.edges) g.edges[{key.first + offset, key.second + offset}] = w;

    for (int u = 0; u < train.num_users; ++u) {
        std::map<int, std::int64_t> counts;
        for (int i : train.train[u]) counts[i] += 1;
        for (const auto& [i, w] : counts) g.edges[{u, offset + i}] = w;
    }
    return g;
}

inline void save_graph(const WeightedGraph& g, const InteractionLog& log, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw error("cannot write " + path);
    out << "# node_a\tnode_b\tweight (nodes tagged u:/i:)\n";
    auto name = [&](int n) {
        const auto& node = g.nodes[n];
        return node.kind == NodeKind::User ? "u:" + log.users[node.entity] : "i:" + log.items[node.entity];
    };
    for (const auto& [key, w] : g.edges) out << name(key.first) << '\t' << name(key.second) << '\t' << w << '\n';
}

}  // namespace lightrec
