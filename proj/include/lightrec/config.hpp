#pragma once

#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include "lightrec/indexer.hpp"
#include "lightrec/metrics.hpp"
#include "lightrec/transformer.hpp"
#include "lightrec/util.hpp"

namespace lightrec {

/// Everything a pipeline run needs; a single seed fans out to every
/// stochastic component.
struct RunConfig {
    std::string data_path;
    std::string workdir = "work";
    std::string data_format = "tsv";
    std::string prompt_template = "recommend items for user";
    IndexConfig index;
    ModelConfig model;
    TrainConfig train;
    EvalConfig eval;
    std::uint64_t seed = 42;

    void apply_seed() {
        index.seed = seed;
        model.seed = seed;
        train.seed = seed;
    }

    // Canonical text form; also the hash input for artifact stamping.
    std::string canonical() const {
        std::ostringstream out;
        out << "data=" << data_path << "\nformat=" << data_format << "\nprompt=" << prompt_template
            << "\nmethod=" << to_string(index.method) << "\ntarget=" << to_string(index.target)
            << "\nn=" << index.clusters << "\nm=" << index.max_cluster << "\nk=" << index.max_levels
            << "\ne=" << index.embedding_size << "\nd=" << model.d_model << "\nw=" << model.ff_inner
            << "\nenc_layers=" << model.enc_layers << "\ndec_layers=" << model.dec_layers
            << "\nheads=" << model.heads << "\nmax_len=" << model.max_len << "\ndropout=" << model.dropout
            << "\nlr=" << train.lr << "\nbatch=" << train.batch << "\nepochs=" << train.epochs
            << "\nbeam=" << eval.beam_width << "\ntopk=" << eval.topk
            << "\nfilter_train=" << (eval.filter_train ? 1 : 0) << "\nseed=" << seed << "\n";
        return out.str();
    }

    std::string hash() const { return hash_hex(fnv1a64(canonical())); }
};

inline IndexMethod parse_method(const std::string& s) {
    if (s == "sci" || s == "SCI") return IndexMethod::SCI;
    if (s == "gci" || s == "GCI") return IndexMethod::GCI;
    throw error("unknown index method: " + s + " (expected sci or gci)");
}

inline IndexTarget parse_target(const std::string& s) {
    if (s == "u" || s == "U") return IndexTarget::U;
    if (s == "i" || s == "I") return IndexTarget::I;
    if (s == "ui" || s == "UI") return IndexTarget::UI;
    if (s == "coui" || s == "CoUI" || s == "COUI") return IndexTarget::CoUI;
    throw error("unknown index target: " + s + " (expected u, i, ui or coui)");
}

/// key = value file, '#' comments. Unknown keys are an error so typos surface.
inline void load_config_file(RunConfig& cfg, const std::string& path) {
    std::ifstream in(path);
    if (!in) throw error("cannot open config file: " + path);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        auto hashpos = line.find('#');
        if (hashpos != std::string::npos) line = line.substr(0, hashpos);
        auto eq = line.find('=');
        if (eq == std::string::npos) {
            if (!split_ws(line).empty())
                throw error("config line " + std::to_string(line_no) + ": expected key = value");
            continue;
        }
        auto trim = [](std::string s) {
            auto b = s.find_first_not_of(" \t\r");
            auto e = s.find_last_not_of(" \t\r");
            return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
        };
        std::string key = trim(line.substr(0, eq)), value = trim(line.substr(eq + 1));
        if (key == "data") cfg.data_path = value;
        else if (key == "workdir") cfg.workdir = value;
        else if (key == "format") cfg.data_format = value;
        else if (key == "prompt") cfg.prompt_template = value;
        else if (key == "method") cfg.index.method = parse_method(value);
        else if (key == "target") cfg.index.target = parse_target(value);
        else if (key == "n") cfg.index.clusters = std::stoi(value);
        else if (key == "m") cfg.index.max_cluster = std::stoi(value);
        else if (key == "k") cfg.index.max_levels = std::stoi(value);
        else if (key == "e") cfg.index.embedding_size = std::stoi(value);
        else if (key == "d") cfg.model.d_model = std::stoi(value);
        else if (key == "w") cfg.model.ff_inner = std::stoi(value);
        else if (key == "enc_layers") cfg.model.enc_layers = std::stoi(value);
        else if (key == "dec_layers") cfg.model.dec_layers = std::stoi(value);
        else if (key == "heads") cfg.model.heads = std::stoi(value);
        else if (key == "max_len") cfg.model.max_len = std::stoi(value);
        else if (key == "dropout") cfg.model.dropout = std::stod(value);
        else if (key == "lr") cfg.train.lr = std::stod(value);
        else if (key == "batch") cfg.train.batch = std::stoi(value);
        else if (key == "epochs") cfg.train.epochs = std::stoi(value);
        else if (key == "beam") cfg.eval.beam_width = std::stoi(value);
        else if (key == "topk") cfg.eval.topk = std::stoi(value);
        else if (key == "filter_train") cfg.eval.filter_train = value == "1" || value == "true";
        else if (key == "seed") cfg.seed = std::stoull(value);
        else throw error("config line " + std::to_string(line_no) + ": unknown key '" + key + "'");
    }
}

}  // namespace lightrec
