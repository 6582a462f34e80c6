#pragma once

#include <map>
#include <string>
#include <vector>

#include "lightrec/indexer.hpp"
#include "lightrec/util.hpp"

namespace lightrec {

/// Prefix tree over the item-ID token sequences. Terminal nodes carry the item
/// entity; the ID set must be prefix-free so every terminal is a leaf.
struct IdTrie {
    struct Node {
        std::map<int, int> children;  // token -> node index
        int item = -1;                // >= 0 at terminals
    };

    std::vector<Node> nodes{Node{}};  // nodes[0] is the root
    int num_items = 0;

    const Node& root() const { return nodes[0]; }

    int step(int node, int token) const {
        auto it = nodes[node].children.find(token);
        return it == nodes[node].children.end() ? -1 : it->second;
    }

    std::vector<int> allowed_tokens(int node) const {
        std::vector<int> out;
        out.reserve(nodes[node].children.size());
        for (const auto& [tok, child] : nodes[node].children) out.push_back(tok);
        return out;
    }

    bool terminal(int node) const { return nodes[node].item >= 0; }

    int max_branching() const {
        std::size_t mx = 0;
        for (const auto& n : nodes) mx = std::max(mx, n.children.size());
        return static_cast<int>(mx);
    }

    void insert(const std::vector<int>& seq, int item) {
        if (seq.empty()) throw error("empty item ID");
        int node = 0;
        for (std::size_t k = 0; k < seq.size(); ++k) {
            if (nodes[node].item >= 0)
                throw error("prefix conflict: item " + std::to_string(nodes[node].item) +
                            "'s ID is a prefix of item " + std::to_string(item) + "'s ID");
            int next = step(node, seq[k]);
            if (next < 0) {
                next = static_cast<int>(nodes.size());
                nodes[node].children.emplace(seq[k], next);
                nodes.push_back(Node{});
            }
            node = next;
        }
        if (nodes[node].item >= 0)
            throw error("duplicate item ID shared by items " + std::to_string(nodes[node].item) + " and " +
                        std::to_string(item));
        if (!nodes[node].children.empty())
            throw error("prefix conflict: item " + std::to_string(item) +
                        "'s ID is a prefix of an already inserted ID");
        nodes[node].item = item;
        ++num_items;
    }
};

inline IdTrie build_trie(const IndexDictionary& item_index) {
    IdTrie trie;
    for (std::size_t i = 0; i < item_index.sequences.size(); ++i)
        trie.insert(item_index.sequences[i], static_cast<int>(i));
    return trie;
}

}  // namespace lightrec
