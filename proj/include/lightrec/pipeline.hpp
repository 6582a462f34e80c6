#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "lightrec/beam.hpp"
#include "lightrec/config.hpp"
#include "lightrec/corpus.hpp"
#include "lightrec/graph.hpp"
#include "lightrec/indexer.hpp"
#include "lightrec/metrics.hpp"
#include "lightrec/transformer.hpp"
#include "lightrec/trie.hpp"
#include "lightrec/vocab.hpp"

namespace lightrec {

/// Pipeline stages used by both the CLI and the integration tests. Every
/// artifact is stamped with the config hash; stages refuse inputs produced by
/// a different configuration.
namespace pipeline {

namespace fs = std::filesystem;

inline void ensure_workdir(const RunConfig& cfg) {
    for (const char* sub : {"graphs", "index", "model", "recs", "reports"})
        fs::create_directories(fs::path(cfg.workdir) / sub);
}

inline LogFormat format_of(const RunConfig& cfg) {
    if (cfg.data_format == "tsv") return LogFormat::Tsv;
    if (cfg.data_format == "csv") return LogFormat::Csv;
    throw error("unknown data format: " + cfg.data_format);
}

struct Ingested {
    InteractionLog log;
    SplitDataset split;
};

inline Ingested ingest(const RunConfig& cfg, bool write_artifacts = true) {
    Ingested out;
    out.log = load_interactions(cfg.data_path, format_of(cfg));
    out.split = leave_one_out_split(out.log);
    if (write_artifacts) {
        ensure_workdir(cfg);
        save_split(out.split, out.log, cfg.workdir);
        CorpusStats stats = corpus_stats(out.log);
        std::ofstream sf(fs::path(cfg.workdir) / "reports" / "stats.json");
        sf.precision(6);
        sf << "{\n  \"num_users\": " << stats.num_users << ",\n  \"num_items\": " << stats.num_items
           << ",\n  \"num_interactions\": " << stats.num_interactions << ",\n  \"sparsity\": " << std::fixed
           << stats.sparsity << "\n}\n";
    }
    return out;
}

inline void graphs(const RunConfig& cfg, const Ingested& data) {
    ensure_workdir(cfg);
    fs::path dir = fs::path(cfg.workdir) / "graphs";
    save_graph(build_user_graph(data.split), data.log, (dir / "user.tsv").string());
    save_graph(build_item_graph(data.split), data.log, (dir / "item.tsv").string());
    save_graph(build_user_item_graph(data.split), data.log, (dir / "user_item.tsv").string());
}

inline IndexPair index(const RunConfig& cfg, const Ingested& data, bool write_artifacts = true) {
    IndexConfig icfg = cfg.index;
    icfg.seed = cfg.seed;
    IndexPair pair = build_index(data.log, data.split, icfg);
    if (write_artifacts) {
        ensure_workdir(cfg);
        fs::path dir = fs::path(cfg.workdir) / "index";
        save_index(pair.user_index, data.log.users, icfg, (dir / "user.index").string(), cfg.hash());
        save_index(pair.item_index, data.log.items, icfg, (dir / "item.index").string(), cfg.hash());
    }
    return pair;
}

inline IndexPair load_index_pair(const RunConfig& cfg, const Ingested& data) {
    fs::path dir = fs::path(cfg.workdir) / "index";
    std::string uh, ih;
    IndexPair pair;
    pair.user_index = load_index((dir / "user.index").string(), data.log.users, &uh);
    pair.item_index = load_index((dir / "item.index").string(), data.log.items, &ih);
    if (uh != cfg.hash() || ih != cfg.hash())
        throw error("index files were produced by a different config (hash mismatch); rerun `index`");
    return pair;
}

inline std::vector<TrainPair> training_pairs(const Ingested& data, const IndexPair& idx, const Vocabulary& vocab,
                                             const std::string& prompt_template) {
    std::vector<TrainPair> pairs;
    for (int u = 0; u < data.split.num_users; ++u) {
        std::vector<int> prompt = make_prompt(idx.user_index.sequences[u], vocab, prompt_template);
        for (int i : data.split.train[u])
            pairs.push_back({prompt, make_target(idx.item_index.sequences[i], vocab)});
    }
    return pairs;
}

struct Trained {
    Seq2SeqModel model;
    Vocabulary vocab;
    std::vector<double> loss_curve;
};

inline Trained train_model(const RunConfig& cfg, const Ingested& data, const IndexPair& idx,
                           bool write_artifacts = true) {
    Trained out;
    out.vocab = Vocabulary::build(cfg.prompt_template);
    ModelConfig mcfg = cfg.model;
    mcfg.vocab_size = out.vocab.size();
    mcfg.seed = cfg.seed;
    out.model = model_init(mcfg);

    TrainConfig tcfg = cfg.train;
    tcfg.seed = cfg.seed;
    auto pairs = training_pairs(data, idx, out.vocab, cfg.prompt_template);
    out.loss_curve = lightrec::train(out.model, pairs, tcfg);

    if (write_artifacts) {
        ensure_workdir(cfg);
        fs::path dir = fs::path(cfg.workdir) / "model";
        save_checkpoint(out.model, (dir / "checkpoint.txt").string(), cfg.hash());
        std::ofstream lc(dir / "loss_curve.csv");
        lc.precision(17);
        lc << "epoch,loss\n";
        for (std::size_t e = 0; e < out.loss_curve.size(); ++e) lc << e + 1 << ',' << out.loss_curve[e] << '\n';
    }
    return out;
}

inline Seq2SeqModel load_model(const RunConfig& cfg) {
    std::string h;
    fs::path path = fs::path(cfg.workdir) / "model" / "checkpoint.txt";
    Seq2SeqModel m = load_checkpoint(path.string(), &h);
    if (h != cfg.hash())
        throw error("checkpoint was produced by a different config (hash mismatch); rerun `train`");
    return m;
}

inline MetricsReport evaluate_run(const RunConfig& cfg, const Ingested& data, const IndexPair& idx,
                                  const Seq2SeqModel& model, bool write_artifacts = true,
                                  std::vector<std::vector<ScoredItem>>* per_user = nullptr) {
    Vocabulary vocab = Vocabulary::build(cfg.prompt_template);
    IdTrie trie = build_trie(idx.item_index);
    MetricsReport rep =
        evaluate(model, trie, data.split, idx.user_index, vocab, cfg.eval, cfg.prompt_template, per_user);
    rep.epochs = cfg.train.epochs;
    if (write_artifacts) {
        ensure_workdir(cfg);
        fs::path dir = fs::path(cfg.workdir) / "reports";
        save_metrics(rep, (dir / "metrics.txt").string(), cfg.hash());
        save_efficiency(rep, (dir / "efficiency.txt").string());
        std::ofstream csv(dir / "row.csv");
        csv << csv_header() << '\n'
            << csv_row(to_string(cfg.index.method), to_string(cfg.index.target), cfg.index.clusters,
                       cfg.index.max_cluster, cfg.index.embedding_size, cfg.model.ff_inner, rep)
            << '\n';
    }
    return rep;
}

inline void recommend(const RunConfig& cfg, const Ingested& data, const IndexPair& idx, const Seq2SeqModel& model,
                      const std::vector<int>& users, int topk, std::ostream& out) {
    Vocabulary vocab = Vocabulary::build(cfg.prompt_template);
    IdTrie trie = build_trie(idx.item_index);
    for (int u : users) {
        std::vector<int> prompt = make_prompt(idx.user_index.sequences[u], vocab, cfg.prompt_template);
        int need = topk + (cfg.eval.filter_train ? static_cast<int>(data.split.train[u].size()) : 0);
        auto recs = constrained_beam_search(model, prompt, trie, vocab, cfg.eval.beam_width, need, need);
        if (cfg.eval.filter_train) {
            std::set<int> seen(data.split.train[u].begin(), data.split.train[u].end());
            std::vector<ScoredItem> kept;
            for (auto& r : recs)
                if (!seen.count(r.item)) kept.push_back(std::move(r));
            recs = std::move(kept);
        }
        if (static_cast<int>(recs.size()) > topk) recs.resize(topk);
        for (std::size_t rank = 0; rank < recs.size(); ++rank)
            out << data.log.users[u] << '\t' << rank + 1 << '\t' << data.log.items[recs[rank].item] << '\t'
                << recs[rank].logprob << '\n';
    }
}

/// ingest -> index -> train -> evaluate, writing all artifacts.
inline MetricsReport run_all(const RunConfig& cfg) {
    Ingested data = ingest(cfg);
    graphs(cfg, data);
    IndexPair idx = index(cfg, data);
    Trained trained = train_model(cfg, data, idx);
    return evaluate_run(cfg, data, idx, trained.model);
}

}  // namespace pipeline
}  // namespace lightrec
