#pragma once

#include <algorithm>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "lightrec/bpr.hpp"
#include "lightrec/gcn.hpp"
#include "lightrec/graph.hpp"
#include "lightrec/kmeans.hpp"
#include "lightrec/spectral.hpp"
#include "lightrec/util.hpp"

namespace lightrec {

enum class IndexMethod { SCI, GCI };
enum class IndexTarget { U, I, UI, CoUI };

struct IndexConfig {
    IndexMethod method = IndexMethod::SCI;
    IndexTarget target = IndexTarget::CoUI;
    int clusters = 20;        // N, clusters per level
    int max_cluster = 100;    // M, max entries per final cluster
    int max_levels = 10;      // K
    int embedding_size = 64;  // E, GCI only
    std::uint64_t seed = 42;

    void validate() const {
        if (clusters < 2 || clusters > 999) throw error("IndexConfig: N must be in [2, 999]");
        if (max_cluster < 1 || max_cluster > 999) throw error("IndexConfig: M must be in [1, 999]");
        if (max_levels < 1) throw error("IndexConfig: K must be >= 1");
        if (embedding_size < 1) throw error("IndexConfig: E must be >= 1");
    }
};

struct IndexDictionary {
    NodeKind side = NodeKind::Item;
    std::vector<std::vector<int>> sequences;  // per entity, tokens in [1, 999]
    bool fallback = false;                    // true when this side got sequential IDs
    bool depth_limit_hit = false;             // a cluster was still > M at depth K
};

inline std::string render_id(const std::vector<int>& seq) {
    std::string out;
    for (std::size_t k = 0; k < seq.size(); ++k) {
        if (seq[k] < 1 || seq[k] > 999)
            throw error("ID token out of range [1, 999]: " + std::to_string(seq[k]));
        if (k) out.push_back(' ');
        out += std::to_string(seq[k]);
    }
    return out;
}

/// Clustering callback: maps a subset of entity ids to 1-based labels, one per
/// subset element, with at most `clusters` distinct values.
using ClusterFn = std::function<ClusterLabels(const std::vector<int>&)>;

/// Hierarchical ID construction: cluster everything, re-cluster every group
/// larger than M until all groups fit or depth K is reached, then break the
/// remaining collisions with a 1-based ordinal token in entity order.
inline IndexDictionary hierarchical_ids(int num_entities, const ClusterFn& cluster_fn, const IndexConfig& cfg) {
    cfg.validate();
    IndexDictionary dict;
    dict.sequences.assign(num_entities, {});
    if (num_entities == 0) return dict;

    std::vector<int> all(num_entities);
    for (int e = 0; e < num_entities; ++e) all[e] = e;

    auto assign = [&](const std::vector<int>& subset) {
        ClusterLabels labels = cluster_fn(subset);
        if (static_cast<int>(labels.size()) != static_cast<int>(subset.size()))
            throw error("cluster_fn returned wrong label count");
        for (std::size_t k = 0; k < subset.size(); ++k) {
            if (labels[k] < 1 || labels[k] > cfg.clusters)
                throw error("cluster_fn label out of range [1, N]");
            dict.sequences[subset[k]].push_back(labels[k]);
        }
    };

    assign(all);
    for (int level = 2; level <= cfg.max_levels; ++level) {
        std::map<std::vector<int>, std::vector<int>> groups;
        for (int e = 0; e < num_entities; ++e) groups[dict.sequences[e]].push_back(e);
        std::vector<const std::vector<int>*> oversized;
        for (const auto& [seq, members] : groups)
            if (static_cast<int>(members.size()) > cfg.max_cluster) oversized.push_back(&members);
        if (oversized.empty()) break;
        for (const auto* members : oversized) assign(*members);
    }

    // Deduplicate: entities sharing a sequence get an extra ordinal token.
    std::map<std::vector<int>, std::vector<int>> final_groups;
    for (int e = 0; e < num_entities; ++e) final_groups[dict.sequences[e]].push_back(e);
    for (const auto& [seq, members] : final_groups) {
        if (static_cast<int>(members.size()) > cfg.max_cluster) dict.depth_limit_hit = true;
        if (members.size() > 1) {
            if (members.size() > 999)
                throw error("cluster of " + std::to_string(members.size()) +
                            " entities at depth K: dedup ordinal would exceed 999");
            for (std::size_t k = 0; k < members.size(); ++k)
                dict.sequences[members[k]].push_back(static_cast<int>(k) + 1);
        }
    }
    return dict;
}

/// Fixed-length base-999 sequential IDs for the side that is not indexed.
/// Fixed length keeps the set prefix-free, which the decoding trie requires.
inline IndexDictionary fallback_ids(int num_entities) {
    IndexDictionary dict;
    dict.fallback = true;
    dict.sequences.assign(std::max(num_entities, 0), {});
    if (num_entities <= 0) return dict;
    int width = 1;
    for (long long cap = 999; cap < num_entities; cap *= 999) ++width;
    for (int e = 0; e < num_entities; ++e) {
        std::vector<int> seq(width, 1);  // digit 0 encodes as token 1
        int v = e;
        for (int pos = width - 1; pos >= 0; --pos) {
            seq[pos] = v % 999 + 1;
            v /= 999;
        }
        dict.sequences[e] = std::move(seq);
    }
    return dict;
}

namespace detail {

inline WeightedGraph induced_subgraph(const WeightedGraph& g, const std::vector<int>& subset) {
    WeightedGraph sub;
    std::map<int, int> remap;
    for (std::size_t k = 0; k < subset.size(); ++k) {
        sub.nodes.push_back(g.nodes[subset[k]]);
        remap[subset[k]] = static_cast<int>(k);
    }
    for (const auto& [key, w] : g.edges) {
        auto a = remap.find(key.first), b = remap.find(key.second);
        if (a != remap.end() && b != remap.end()) sub.edges[{a->second, b->second}] = w;
    }
    return sub;
}

inline ClusterFn spectral_cluster_fn(WeightedGraph graph, int clusters, std::uint64_t seed) {
    return [graph = std::move(graph), clusters, seed](const std::vector<int>& subset) {
        int n = std::min<int>(clusters, static_cast<int>(subset.size()));
        if (n <= 1) return ClusterLabels(subset.size(), 1);
        WeightedGraph sub = induced_subgraph(graph, subset);
        return spectral_cluster(sub, n, seed);
    };
}

inline ClusterFn kmeans_cluster_fn(Eigen::MatrixXd embeddings, int clusters, std::uint64_t seed) {
    return [emb = std::move(embeddings), clusters, seed](const std::vector<int>& subset) {
        int n = std::min<int>(clusters, static_cast<int>(subset.size()));
        if (n <= 1) return ClusterLabels(subset.size(), 1);
        Eigen::MatrixXd rows(subset.size(), emb.cols());
        for (std::size_t k = 0; k < subset.size(); ++k) rows.row(k) = emb.row(subset[k]);
        return kmeans(rows, n, seed).labels;
    };
}

// Split a joint-graph dictionary (users first, then items) into per-side ones.
inline std::pair<IndexDictionary, IndexDictionary> split_joint(const IndexDictionary& joint, int num_users,
                                                               int num_items) {
    IndexDictionary users, items;
    users.side = NodeKind::User;
    items.side = NodeKind::Item;
    users.depth_limit_hit = items.depth_limit_hit = joint.depth_limit_hit;
    users.sequences.assign(joint.sequences.begin(), joint.sequences.begin() + num_users);
    items.sequences.assign(joint.sequences.begin() + num_users, joint.sequences.begin() + num_users + num_items);
    return {std::move(users), std::move(items)};
}

}  // namespace detail

struct IndexPair {
    IndexDictionary user_index;
    IndexDictionary item_index;
};

/// Build collaborative IDs for the configured target. The side without a
/// learned index receives fallback sequential IDs.
inline IndexPair build_index(const InteractionLog& log, const SplitDataset& split, const IndexConfig& cfg) {
    cfg.validate();
    IndexPair out;
    const int m = log.num_users(), n = log.num_items();

    auto index_side = [&](NodeKind side) {
        WeightedGraph g = side == NodeKind::User ? build_user_graph(split) : build_item_graph(split);
        int count = side == NodeKind::User ? m : n;
        ClusterFn fn;
        if (cfg.method == IndexMethod::SCI) {
            fn = detail::spectral_cluster_fn(g, cfg.clusters, cfg.seed);
        } else {
            ClusterLabels gt = spectral_cluster(g, std::min(cfg.clusters, g.size()), cfg.seed);
            GcnConfig gcfg;
            gcfg.embedding_size = cfg.embedding_size;
            gcfg.seed = cfg.seed;
            Eigen::MatrixXd emb = gcn_train(g, gt, gcfg);
            fn = detail::kmeans_cluster_fn(zscore(emb), cfg.clusters, cfg.seed);
        }
        IndexDictionary d = hierarchical_ids(count, fn, cfg);
        d.side = side;
        return d;
    };

    switch (cfg.target) {
        case IndexTarget::U:
            out.user_index = index_side(NodeKind::User);
            out.item_index = fallback_ids(n);
            break;
        case IndexTarget::I:
            out.item_index = index_side(NodeKind::Item);
            out.user_index = fallback_ids(m);
            out.user_index.side = NodeKind::User;
            break;
        case IndexTarget::UI:
            out.user_index = index_side(NodeKind::User);
            out.item_index = index_side(NodeKind::Item);
            break;
        case IndexTarget::CoUI: {
            IndexDictionary joint;
            if (cfg.method == IndexMethod::SCI) {
                WeightedGraph g = build_user_item_graph(split);
                joint = hierarchical_ids(m + n, detail::spectral_cluster_fn(g, cfg.clusters, cfg.seed), cfg);
            } else {
                BprConfig bcfg;
                bcfg.embedding_size = cfg.embedding_size;
                bcfg.seed = cfg.seed;
                MfModel mf = mf_bpr_train(split, bcfg);
                Eigen::MatrixXd emb(m + n, cfg.embedding_size);
                emb.topRows(m) = mf.user_emb;
                emb.bottomRows(n) = mf.item_emb;
                joint = hierarchical_ids(m + n, detail::kmeans_cluster_fn(zscore(emb), cfg.clusters, cfg.seed), cfg);
            }
            auto [u, i] = detail::split_joint(joint, m, n);
            out.user_index = std::move(u);
            out.item_index = std::move(i);
            break;
        }
    }
    out.user_index.side = NodeKind::User;
    out.item_index.side = NodeKind::Item;
    return out;
}

inline const char* to_string(IndexMethod m) { return m == IndexMethod::SCI ? "sci" : "gci"; }
inline const char* to_string(IndexTarget t) {
    switch (t) {
        case IndexTarget::U: return "u";
        case IndexTarget::I: return "i";
        case IndexTarget::UI: return "ui";
        default: return "coui";
    }
}

inline void save_index(const IndexDictionary& dict, const std::vector<std::string>& names, const IndexConfig& cfg,
                       const std::string& path, const std::string& config_hash = "") {
    std::ofstream out(path);
    if (!out) throw error("cannot write " + path);
    out << "# method " << to_string(cfg.method) << "\n# target " << to_string(cfg.target) << "\n# n "
        << cfg.clusters << "\n# m " << cfg.max_cluster << "\n# k " << cfg.max_levels << "\n# e "
        << cfg.embedding_size << "\n# seed " << cfg.seed << "\n";
    if (!config_hash.empty()) out << "# config_hash " << config_hash << "\n";
    if (dict.fallback) out << "# fallback 1\n";
    if (dict.depth_limit_hit) out << "# depth_limit_hit 1\n";
    for (std::size_t e = 0; e < dict.sequences.size(); ++e)
        out << names[e] << '\t' << render_id(dict.sequences[e]) << '\n';
}

inline IndexDictionary load_index(const std::string& path, const std::vector<std::string>& names,
                                  std::string* config_hash = nullptr) {
    std::ifstream in(path);
    if (!in) throw error("missing index file: " + path);
    std::map<std::string, int> name_to_id;
    for (std::size_t k = 0; k < names.size(); ++k) name_to_id[names[k]] = static_cast<int>(k);

    IndexDictionary dict;
    dict.sequences.assign(names.size(), {});
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (line[0] == '#') {
            auto fields = split_ws(line);
            if (fields.size() >= 3 && fields[1] == "fallback") dict.fallback = fields[2] == "1";
            if (fields.size() >= 3 && fields[1] == "depth_limit_hit") dict.depth_limit_hit = fields[2] == "1";
            if (config_hash && fields.size() >= 3 && fields[1] == "config_hash") *config_hash = fields[2];
            continue;
        }
        auto tab = line.find('\t');
        if (tab == std::string::npos) throw error("malformed index line in " + path);
        auto it = name_to_id.find(line.substr(0, tab));
        if (it == name_to_id.end()) throw error("unknown entity in index file: " + line.substr(0, tab));
        std::vector<int> seq;
        for (const auto& tok : split_ws(line.substr(tab + 1))) seq.push_back(std::stoi(tok));
        dict.sequences[it->second] = std::move(seq);
    }
    return dict;
}

}  // namespace lightrec
