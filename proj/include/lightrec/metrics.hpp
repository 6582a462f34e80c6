#pragma once

#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "lightrec/beam.hpp"
#include "lightrec/corpus.hpp"
#include "lightrec/indexer.hpp"
#include "lightrec/transformer.hpp"
#include "lightrec/trie.hpp"
#include "lightrec/util.hpp"
#include "lightrec/vocab.hpp"

namespace lightrec {

inline int hit_ratio_at_k(const std::vector<int>& recs, int truth, int k) {
    for (int r = 0; r < std::min<int>(k, static_cast<int>(recs.size())); ++r)
        if (recs[r] == truth) return 1;
    return 0;
}

/// Single-relevant-item NDCG: 1/log2(rank+1) inside the cutoff, ideal DCG = 1.
inline double ndcg_at_k(const std::vector<int>& recs, int truth, int k) {
    for (int r = 0; r < std::min<int>(k, static_cast<int>(recs.size())); ++r)
        if (recs[r] == truth) return 1.0 / std::log2(static_cast<double>(r) + 2.0);
    return 0.0;
}

struct MetricsReport {
    std::map<int, double> hr;    // K -> mean hit ratio
    std::map<int, double> ndcg;  // K -> mean NDCG
    int users_evaluated = 0;
    double wall_time = 0.0;
    int epochs = 0;
    long long param_count = 0;
    DecodeStats decode_stats;
};

struct EvalConfig {
    int beam_width = 20;
    int topk = 10;
    std::vector<int> ks{5, 10};
    bool filter_train = true;
    bool use_valid = false;  // evaluate against the validation item instead of test
};

/// Decode every user with a held-out item and average HR@K / NDCG@K.
inline MetricsReport evaluate(const Seq2SeqModel& model, const IdTrie& trie, const SplitDataset& split,
                              const IndexDictionary& user_index, const Vocabulary& vocab, const EvalConfig& cfg,
                              const std::string& prompt_template = "recommend items for user",
                              std::vector<std::vector<ScoredItem>>* per_user_recs = nullptr) {
    auto t0 = std::chrono::steady_clock::now();
    MetricsReport rep;
    for (int k : cfg.ks) {
        rep.hr[k] = 0.0;
        rep.ndcg[k] = 0.0;
    }
    int max_k = cfg.topk;
    for (int k : cfg.ks) max_k = std::max(max_k, k);

    if (per_user_recs) per_user_recs->assign(split.num_users, {});
    for (int u = 0; u < split.num_users; ++u) {
        int truth = cfg.use_valid ? split.valid[u] : split.test[u];
        if (truth < 0) continue;
        std::vector<int> prompt = make_prompt(user_index.sequences[u], vocab, prompt_template);
        int need = max_k + (cfg.filter_train ? static_cast<int>(split.train[u].size()) : 0);
        std::vector<ScoredItem> recs = constrained_beam_search(model, prompt, trie, vocab, cfg.beam_width,
                                                               need, need, &rep.decode_stats);
        if (cfg.filter_train) {
            std::set<int> seen(split.train[u].begin(), split.train[u].end());
            std::vector<ScoredItem> kept;
            for (auto& r : recs)
                if (!seen.count(r.item)) kept.push_back(std::move(r));
            recs = std::move(kept);
        }
        if (static_cast<int>(recs.size()) > max_k) recs.resize(max_k);
        std::vector<int> rec_items;
        for (const auto& r : recs) rec_items.push_back(r.item);
        for (int k : cfg.ks) {
            rep.hr[k] += hit_ratio_at_k(rec_items, truth, k);
            rep.ndcg[k] += ndcg_at_k(rec_items, truth, k);
        }
        ++rep.users_evaluated;
        if (per_user_recs) (*per_user_recs)[u] = std::move(recs);
    }
    if (rep.users_evaluated > 0) {
        for (int k : cfg.ks) {
            rep.hr[k] /= rep.users_evaluated;
            rep.ndcg[k] /= rep.users_evaluated;
        }
    }
    rep.param_count = param_count(model);
    rep.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return rep;
}

/// Metric fields only, stable across identical seeded runs (no wall time).
inline void save_metrics(const MetricsReport& rep, const std::string& path, const std::string& config_hash = "") {
    std::ofstream out(path);
    if (!out) throw error("cannot write " + path);
    out.precision(6);
    out << std::fixed;
    if (!config_hash.empty()) out << "config_hash " << config_hash << '\n';
    for (const auto& [k, v] : rep.hr) out << "hr@" << k << ' ' << v << '\n';
    for (const auto& [k, v] : rep.ndcg) out << "ndcg@" << k << ' ' << v << '\n';
    out << "users_evaluated " << rep.users_evaluated << '\n';
    out << "params " << rep.param_count << '\n';
    out << "epochs " << rep.epochs << '\n';
}

inline void save_efficiency(const MetricsReport& rep, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw error("cannot write " + path);
    out << "params " << rep.param_count << '\n';
    out << "epochs " << rep.epochs << '\n';
    out << "seconds " << rep.wall_time << '\n';
    out << "scored_tokens " << rep.decode_stats.scored_tokens << '\n';
    out << "full_vocab_baseline " << rep.decode_stats.full_vocab_baseline << '\n';
}

inline std::string csv_header() {
    return "method,target,N,M,E,w,HR@5,NDCG@5,HR@10,NDCG@10,params,epochs,seconds";
}

inline std::string csv_row(const std::string& method, const std::string& target, int n, int m, int e, int w,
                           const MetricsReport& rep) {
    char buf[512];
    auto get = [](const std::map<int, double>& mm, int k) {
        auto it = mm.find(k);
        return it == mm.end() ? 0.0 : it->second;
    };
    std::snprintf(buf, sizeof(buf), "%s,%s,%d,%d,%d,%d,%.4f,%.4f,%.4f,%.4f,%lld,%d,%.1f", method.c_str(),
                  target.c_str(), n, m, e, w, get(rep.hr, 5), get(rep.ndcg, 5), get(rep.hr, 10),
                  get(rep.ndcg, 10), rep.param_count, rep.epochs, rep.wall_time);
    return buf;
}

}  // namespace lightrec
