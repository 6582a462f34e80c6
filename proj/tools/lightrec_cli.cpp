// Command-line front end for the recommendation pipeline:
// ingest -> graphs -> index -> train -> recommend -> evaluate -> sweep.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "lightrec/pipeline.hpp"

namespace fs = std::filesystem;
using namespace lightrec;

namespace {

struct CliOptions {
    std::string config_file;
    RunConfig cfg;
    std::string method, target, format;
    bool have_method = false, have_target = false;
};

void add_common_flags(CLI::App* cmd, CliOptions& opt) {
    cmd->add_option("--config", opt.config_file, "key = value config file; flags override file values");
    cmd->add_option("--data", opt.cfg.data_path, "interaction file (user<sep>item[<sep>timestamp])");
    cmd->add_option("--workdir", opt.cfg.workdir, "artifact directory");
    cmd->add_option("--fmt", opt.format, "data format: tsv or csv");
    cmd->add_option("--seed", opt.cfg.seed, "global seed");
    cmd->add_option("--method", opt.method, "indexing method: sci or gci")->each([&](const std::string&) {
        opt.have_method = true;
    });
    cmd->add_option("--target", opt.target, "indexing target: u, i, ui or coui")->each([&](const std::string&) {
        opt.have_target = true;
    });
    cmd->add_option("--n", opt.cfg.index.clusters, "clusters per level (N)");
    cmd->add_option("--m", opt.cfg.index.max_cluster, "max entries per final cluster (M)");
    cmd->add_option("--k", opt.cfg.index.max_levels, "max index levels (K)");
    cmd->add_option("--e", opt.cfg.index.embedding_size, "embedding size (E, GCI only)");
    cmd->add_option("--d", opt.cfg.model.d_model, "model width d");
    cmd->add_option("--w", opt.cfg.model.ff_inner, "feed-forward inner dimension w");
    cmd->add_option("--enc-layers", opt.cfg.model.enc_layers, "encoder layers");
    cmd->add_option("--dec-layers", opt.cfg.model.dec_layers, "decoder layers");
    cmd->add_option("--heads", opt.cfg.model.heads, "attention heads");
    cmd->add_option("--max-len", opt.cfg.model.max_len, "max sequence length T");
    cmd->add_option("--dropout", opt.cfg.model.dropout, "dropout rate during training");
    cmd->add_option("--lr", opt.cfg.train.lr, "learning rate");
    cmd->add_option("--batch", opt.cfg.train.batch, "batch size");
    cmd->add_option("--epochs", opt.cfg.train.epochs, "training epochs");
    cmd->add_option("--beam", opt.cfg.eval.beam_width, "beam width B");
    cmd->add_option("--topk", opt.cfg.eval.topk, "recommendations per user");
    cmd->add_option("--filter-train", opt.cfg.eval.filter_train, "drop already-interacted items");
    cmd->add_option("--prompt", opt.cfg.prompt_template, "prompt template words");
}

// Resolution order: built-in defaults < config file < command-line flags.
RunConfig resolve(CliOptions& opt, CLI::App* cmd) {
    RunConfig cfg;
    if (!opt.config_file.empty()) load_config_file(cfg, opt.config_file);
    auto flag = [&](const char* name) { return cmd->count(name) > 0; };
    if (flag("--data")) cfg.data_path = opt.cfg.data_path;
    if (flag("--workdir")) cfg.workdir = opt.cfg.workdir;
    if (flag("--fmt")) cfg.data_format = opt.format;
    if (flag("--seed")) cfg.seed = opt.cfg.seed;
    if (opt.have_method) cfg.index.method = parse_method(opt.method);
    if (opt.have_target) cfg.index.target = parse_target(opt.target);
    if (flag("--n")) cfg.index.clusters = opt.cfg.index.clusters;
    if (flag("--m")) cfg.index.max_cluster = opt.cfg.index.max_cluster;
    if (flag("--k")) cfg.index.max_levels = opt.cfg.index.max_levels;
    if (flag("--e")) cfg.index.embedding_size = opt.cfg.index.embedding_size;
    if (flag("--d")) cfg.model.d_model = opt.cfg.model.d_model;
    if (flag("--w")) cfg.model.ff_inner = opt.cfg.model.ff_inner;
    if (flag("--enc-layers")) cfg.model.enc_layers = opt.cfg.model.enc_layers;
    if (flag("--dec-layers")) cfg.model.dec_layers = opt.cfg.model.dec_layers;
    if (flag("--heads")) cfg.model.heads = opt.cfg.model.heads;
    if (flag("--max-len")) cfg.model.max_len = opt.cfg.model.max_len;
    if (flag("--dropout")) cfg.model.dropout = opt.cfg.model.dropout;
    if (flag("--lr")) cfg.train.lr = opt.cfg.train.lr;
    if (flag("--batch")) cfg.train.batch = opt.cfg.train.batch;
    if (flag("--epochs")) cfg.train.epochs = opt.cfg.train.epochs;
    if (flag("--beam")) cfg.eval.beam_width = opt.cfg.eval.beam_width;
    if (flag("--topk")) cfg.eval.topk = opt.cfg.eval.topk;
    if (flag("--filter-train")) cfg.eval.filter_train = opt.cfg.eval.filter_train;
    if (flag("--prompt")) cfg.prompt_template = opt.cfg.prompt_template;
    if (const char* env = std::getenv("LIGHTREC_WORKDIR"); env && !flag("--workdir")) cfg.workdir = env;
    if (cfg.data_path.empty()) throw error("no data file given (--data or config `data =`)");
    cfg.apply_seed();
    return cfg;
}

std::vector<int> parse_values(const std::string& csv) {
    std::vector<int> out;
    std::string cur;
    for (char c : csv + ",") {
        if (c == ',') {
            if (!cur.empty()) out.push_back(std::stoi(cur));
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    if (out.empty()) throw error("empty sweep value list");
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"collaborative-ID generative recommender"};
    app.require_subcommand(1);

    CliOptions opt;
    std::string rec_user;
    int rec_topk = 10;
    std::string sweep_axis, sweep_values;

    auto* c_ingest = app.add_subcommand("ingest", "load interactions, write splits and stats");
    auto* c_graphs = app.add_subcommand("graphs", "build and dump the user/item/joint graphs");
    auto* c_index = app.add_subcommand("index", "build collaborative ID index files");
    auto* c_train = app.add_subcommand("train", "train the seq2seq model");
    auto* c_rec = app.add_subcommand("recommend", "decode recommendations for users");
    auto* c_eval = app.add_subcommand("evaluate", "leave-one-out evaluation");
    auto* c_sweep = app.add_subcommand("sweep", "run the pipeline across an axis of values");

    for (auto* c : {c_ingest, c_graphs, c_index, c_train, c_rec, c_eval, c_sweep}) add_common_flags(c, opt);
    c_rec->add_option("--user", rec_user, "user handle (default: all evaluable users)");
    c_rec->add_option("--rec-topk", rec_topk, "items per user");
    c_sweep->add_option("--axis", sweep_axis, "sweep axis: w, n or e")->required();
    c_sweep->add_option("--values", sweep_values, "comma-separated values")->required();

    CLI11_PARSE(app, argc, argv);
    CLI::App* active = app.get_subcommands().front();

    try {
        RunConfig cfg = resolve(opt, active);

        if (active == c_ingest) {
            pipeline::ingest(cfg);
            CorpusStats s = corpus_stats(load_interactions(cfg.data_path, pipeline::format_of(cfg)));
            std::cout << "users " << s.num_users << "\nitems " << s.num_items << "\ninteractions "
                      << s.num_interactions << "\nsparsity " << s.sparsity << "\n";
        } else if (active == c_graphs) {
            pipeline::graphs(cfg, pipeline::ingest(cfg, false));
        } else if (active == c_index) {
            pipeline::index(cfg, pipeline::ingest(cfg, false));
            std::cout << "wrote " << cfg.workdir << "/index/{user,item}.index\n";
        } else if (active == c_train) {
            auto data = pipeline::ingest(cfg, false);
            auto idx = pipeline::load_index_pair(cfg, data);
            auto trained = pipeline::train_model(cfg, data, idx);
            std::cout << "final loss " << trained.loss_curve.back() << "\nwrote " << cfg.workdir
                      << "/model/checkpoint.txt\n";
        } else if (active == c_rec) {
            auto data = pipeline::ingest(cfg, false);
            auto idx = pipeline::load_index_pair(cfg, data);
            Seq2SeqModel model = pipeline::load_model(cfg);
            std::vector<int> users;
            if (!rec_user.empty()) {
                auto it = std::find(data.log.users.begin(), data.log.users.end(), rec_user);
                if (it == data.log.users.end()) throw error("unknown user: " + rec_user);
                users.push_back(static_cast<int>(it - data.log.users.begin()));
            } else {
                for (int u = 0; u < data.split.num_users; ++u)
                    if (data.split.has_eval(u)) users.push_back(u);
            }
            std::ofstream out(fs::path(cfg.workdir) / "recs" / "recommendations.tsv");
            pipeline::recommend(cfg, data, idx, model, users, rec_topk, out);
            pipeline::recommend(cfg, data, idx, model, users, rec_topk, std::cout);
        } else if (active == c_eval) {
            auto data = pipeline::ingest(cfg, false);
            auto idx = pipeline::load_index_pair(cfg, data);
            Seq2SeqModel model = pipeline::load_model(cfg);
            MetricsReport rep = pipeline::evaluate_run(cfg, data, idx, model);
            for (const auto& [k, v] : rep.hr) std::cout << "HR@" << k << " " << v << "\n";
            for (const auto& [k, v] : rep.ndcg) std::cout << "NDCG@" << k << " " << v << "\n";
            std::cout << "users " << rep.users_evaluated << "\n";
        } else if (active == c_sweep) {
            std::vector<int> values = parse_values(sweep_values);
            fs::create_directories(fs::path(cfg.workdir) / "reports");
            std::ofstream out(fs::path(cfg.workdir) / "reports" / "sweep.csv");
            out << csv_header() << '\n';
            std::cout << csv_header() << '\n';
            for (int v : values) {
                RunConfig run = cfg;
                if (sweep_axis == "w") run.model.ff_inner = v;
                else if (sweep_axis == "n") run.index.clusters = v;
                else if (sweep_axis == "e") run.index.embedding_size = v;
                else throw error("unknown sweep axis: " + sweep_axis);
                run.workdir = (fs::path(cfg.workdir) / ("sweep_" + sweep_axis + "_" + std::to_string(v))).string();
                std::string row;
                try {
                    MetricsReport rep = pipeline::run_all(run);
                    row = csv_row(to_string(run.index.method), to_string(run.index.target), run.index.clusters,
                                  run.index.max_cluster, run.index.embedding_size, run.model.ff_inner, rep);
                } catch (const std::exception& e) {
                    std::cerr << "sweep " << sweep_axis << "=" << v << " failed: " << e.what() << "\n";
                    row = std::string(to_string(cfg.index.method)) + "," + to_string(cfg.index.target) +
                          ",NA,NA,NA," + std::to_string(v) + ",NA,NA,NA,NA,NA,NA,NA";
                }
                out << row << '\n';
                std::cout << row << '\n';
            }
        }
    } catch (const error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
