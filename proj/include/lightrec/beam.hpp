#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <set>
#include <vector>

#include "lightrec/transformer.hpp"
#include "lightrec/trie.hpp"
#include "lightrec/vocab.hpp"

namespace lightrec {

struct ScoredItem {
    int item = -1;
    double logprob = 0.0;
    std::vector<int> id_tokens;  // the generated ID, tokens in [1, 999]
};

/// Instrumentation for the pruning claim: how many candidate tokens were
/// actually scored versus a full-vocabulary beam baseline.
struct DecodeStats {
    long long scored_tokens = 0;
    long long full_vocab_baseline = 0;  // vocab_size per (step, beam) pair
    int max_tokens_per_step_beam = 0;
    long long steps = 0;
};

/// Beam search over the trie: at every step each beam may only extend with the
/// children of its trie cursor, scored by the model's next-token distribution.
/// Finished beams (terminals) are frozen; search stops once `min(need, ...)`
/// finished beams exist or nothing can extend. Returns up to `topk` items by
/// cumulative logprob; `need` lets callers over-generate before filtering.
inline std::vector<ScoredItem> constrained_beam_search(const Seq2SeqModel& model, const std::vector<int>& prompt,
                                                       const IdTrie& trie, const Vocabulary& vocab, int beam_width,
                                                       int topk, int need = -1, DecodeStats* stats = nullptr) {
    if (trie.num_items == 0) throw error("constrained_beam_search: empty trie");
    if (beam_width < 1 || topk < 1) throw error("constrained_beam_search: beam width and topk must be >= 1");
    if (need < topk) need = std::max(beam_width, topk);

    struct Beam {
        std::vector<int> tokens;  // ID tokens so far
        double logprob = 0.0;
        int node = 0;  // trie cursor
    };

    std::vector<Beam> active{Beam{}};
    std::vector<ScoredItem> finished;
    const int stop_count = std::max(beam_width, need);

    while (!active.empty() && static_cast<int>(finished.size()) < stop_count) {
        struct Candidate {
            double logprob;
            int parent;
            int token;
            int node;
        };
        std::vector<Candidate> candidates;
        for (std::size_t b = 0; b < active.size(); ++b) {
            std::vector<int> prefix;
            prefix.reserve(active[b].tokens.size());
            for (int t : active[b].tokens) prefix.push_back(vocab.number_id(t));
            Eigen::VectorXd dist = forward(model, prompt, prefix);
            int scored_here = 0;
            for (const auto& [tok, child] : trie.nodes[active[b].node].children) {
                double lp = active[b].logprob + std::log(std::max(dist(vocab.number_id(tok)), 1e-300));
                candidates.push_back({lp, static_cast<int>(b), tok, child});
                ++scored_here;
            }
            if (stats) {
                stats->scored_tokens += scored_here;
                stats->full_vocab_baseline += model.config.vocab_size;
                stats->max_tokens_per_step_beam = std::max(stats->max_tokens_per_step_beam, scored_here);
            }
        }
        if (stats) ++stats->steps;

        std::stable_sort(candidates.begin(), candidates.end(),
                         [](const Candidate& a, const Candidate& b) { return a.logprob > b.logprob; });
        if (static_cast<int>(candidates.size()) > beam_width) candidates.resize(beam_width);

        std::vector<Beam> next;
        for (const auto& c : candidates) {
            Beam b = active[c.parent];
            b.tokens.push_back(c.token);
            b.logprob = c.logprob;
            b.node = c.node;
            if (trie.terminal(b.node)) {
                finished.push_back({trie.nodes[b.node].item, b.logprob, b.tokens});
            } else {
                next.push_back(std::move(b));
            }
        }
        active = std::move(next);
    }

    std::stable_sort(finished.begin(), finished.end(),
                     [](const ScoredItem& a, const ScoredItem& b) { return a.logprob > b.logprob; });
    if (static_cast<int>(finished.size()) > topk) finished.resize(topk);
    return finished;
}

/// Exhaustive oracle: score every root-to-terminal path with fresh forward
/// passes. Only usable on small catalogs.
inline std::vector<ScoredItem> enumerate_all_items(const Seq2SeqModel& model, const std::vector<int>& prompt,
                                                   const IdTrie& trie, const Vocabulary& vocab) {
    std::vector<ScoredItem> out;
    std::vector<int> tokens;
    std::function<void(int, double)> walk = [&](int node, double logprob) {
        if (trie.terminal(node)) {
            out.push_back({trie.nodes[node].item, logprob, tokens});
            return;
        }
        std::vector<int> prefix;
        for (int t : tokens) prefix.push_back(vocab.number_id(t));
        Eigen::VectorXd dist = forward(model, prompt, prefix);
        for (const auto& [tok, child] : trie.nodes[node].children) {
            tokens.push_back(tok);
            walk(child, logprob + std::log(std::max(dist(vocab.number_id(tok)), 1e-300)));
            tokens.pop_back();
        }
    };
    walk(0, 0.0);
    std::stable_sort(out.begin(), out.end(),
                     [](const ScoredItem& a, const ScoredItem& b) { return a.logprob > b.logprob; });
    return out;
}

}  // namespace lightrec
