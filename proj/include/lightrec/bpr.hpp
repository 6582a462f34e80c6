#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <set>
#include <vector>

#include "lightrec/corpus.hpp"
#include "lightrec/util.hpp"

namespace lightrec {

struct MfModel {
    Eigen::MatrixXd user_emb;  // m x E
    Eigen::MatrixXd item_emb;  // n x E

    double score(int u, int i) const { return user_emb.row(u).dot(item_emb.row(i)); }
};

enum class BprNegativeMode {
    Uniform,          // one uniform negative per positive, standard pairwise loss
    SoftmaxWeighted,  // pool of negatives, each weighted by softmax of its score
};

struct BprConfig {
    int embedding_size = 64;
    double lr = 0.05;
    int epochs = 50;
    int negatives_per_pos = 1;  // pool size in SoftmaxWeighted mode
    BprNegativeMode mode = BprNegativeMode::Uniform;
    std::uint64_t seed = 42;
};

struct BprTriple {
    int user, pos, neg;
};

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

inline double bpr_loss(const MfModel& m, const std::vector<BprTriple>& triples) {
    double loss = 0.0;
    for (const auto& t : triples)
        loss -= std::log(std::max(sigmoid(m.score(t.user, t.pos) - m.score(t.user, t.neg)), 1e-300));
    return loss;
}

struct BprGradients {
    Eigen::MatrixXd user_emb, item_emb;
};

inline BprGradients bpr_gradients(const MfModel& m, const std::vector<BprTriple>& triples) {
    BprGradients g;
    g.user_emb = Eigen::MatrixXd::Zero(m.user_emb.rows(), m.user_emb.cols());
    g.item_emb = Eigen::MatrixXd::Zero(m.item_emb.rows(), m.item_emb.cols());
    for (const auto& t : triples) {
        double s = m.score(t.user, t.pos) - m.score(t.user, t.neg);
        double c = sigmoid(s) - 1.0;  // d(-log sigmoid(s))/ds
        g.user_emb.row(t.user) += c * (m.item_emb.row(t.pos) - m.item_emb.row(t.neg));
        g.item_emb.row(t.pos) += c * m.user_emb.row(t.user);
        g.item_emb.row(t.neg) -= c * m.user_emb.row(t.user);
    }
    return g;
}

// Pool variant approximating the printed objective: each drawn negative enters
// weighted by a softmax over the pool's scores.
inline double bpr_pool_loss(const MfModel& m, int user, int pos, const std::vector<int>& pool) {
    double sp = m.score(user, pos);
    double mx = -1e300;
    std::vector<double> sn(pool.size());
    for (std::size_t j = 0; j < pool.size(); ++j) {
        sn[j] = m.score(user, pool[j]);
        mx = std::max(mx, sn[j]);
    }
    double z = 0.0, acc = 0.0;
    for (double s : sn) z += std::exp(s - mx);
    for (std::size_t j = 0; j < pool.size(); ++j) acc += sigmoid(sp - sn[j]) * std::exp(sn[j] - mx) / z;
    return -std::log(std::max(acc, 1e-300));
}

inline void bpr_pool_update(MfModel& m, int user, int pos, const std::vector<int>& pool, double lr) {
    double sp = m.score(user, pos);
    std::vector<double> sn(pool.size()), w(pool.size()), a(pool.size());
    double mx = -1e300;
    for (std::size_t j = 0; j < pool.size(); ++j) {
        sn[j] = m.score(user, pool[j]);
        mx = std::max(mx, sn[j]);
    }
    double z = 0.0;
    for (std::size_t j = 0; j < pool.size(); ++j) z += std::exp(sn[j] - mx);
    double big_a = 0.0;
    for (std::size_t j = 0; j < pool.size(); ++j) {
        w[j] = std::exp(sn[j] - mx) / z;
        a[j] = sigmoid(sp - sn[j]);
        big_a += a[j] * w[j];
    }
    big_a = std::max(big_a, 1e-300);

    // dL/d(sp) and dL/d(sn_j), sp = u.pos, sn_j = u.n_j
    double cp = 0.0;
    for (std::size_t j = 0; j < pool.size(); ++j) cp -= a[j] * (1.0 - a[j]) * w[j] / big_a;
    std::vector<double> cn(pool.size());
    for (std::size_t j = 0; j < pool.size(); ++j) cn[j] = w[j] * (1.0 - a[j] * a[j] / big_a);

    Eigen::RowVectorXd u = m.user_emb.row(user);
    Eigen::RowVectorXd du = cp * m.item_emb.row(pos);
    for (std::size_t j = 0; j < pool.size(); ++j) du += cn[j] * m.item_emb.row(pool[j]);
    m.item_emb.row(pos) -= lr * cp * u;
    for (std::size_t j = 0; j < pool.size(); ++j) m.item_emb.row(pool[j]) -= lr * cn[j] * u;
    m.user_emb.row(user) -= lr * du;
}

inline MfModel mf_init(int num_users, int num_items, int embedding_size, std::uint64_t seed) {
    MfModel m;
    Rng rng = make_rng(seed, "bpr-init");
    std::normal_distribution<double> gauss(0.0, 0.1);
    m.user_emb.resize(num_users, embedding_size);
    m.item_emb.resize(num_items, embedding_size);
    for (int r = 0; r < m.user_emb.rows(); ++r)
        for (int c = 0; c < m.user_emb.cols(); ++c) m.user_emb(r, c) = gauss(rng);
    for (int r = 0; r < m.item_emb.rows(); ++r)
        for (int c = 0; c < m.item_emb.cols(); ++c) m.item_emb(r, c) = gauss(rng);
    return m;
}

/// SGD over (user, positive, sampled negative) triples built from the train
/// split. Users whose train set covers the whole catalog are skipped.
inline MfModel mf_bpr_train(const SplitDataset& train, const BprConfig& cfg,
                            std::vector<double>* loss_curve = nullptr) {
    MfModel m = mf_init(train.num_users, train.num_items, cfg.embedding_size, cfg.seed);
    Rng rng = make_rng(cfg.seed, "bpr-sample");
    std::uniform_int_distribution<int> item_dist(0, train.num_items - 1);

    std::vector<std::set<int>> interacted(train.num_users);
    for (int u = 0; u < train.num_users; ++u)
        interacted[u].insert(train.train[u].begin(), train.train[u].end());

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        double epoch_loss = 0.0;
        long pairs = 0;
        for (int u = 0; u < train.num_users; ++u) {
            if (static_cast<int>(interacted[u].size()) >= train.num_items) continue;
            for (int pos : train.train[u]) {
                auto draw_negative = [&]() {
                    int neg;
                    do {
                        neg = item_dist(rng);
                    } while (interacted[u].count(neg));
                    return neg;
                };
                if (cfg.mode == BprNegativeMode::Uniform) {
                    BprTriple t{u, pos, draw_negative()};
                    epoch_loss += bpr_loss(m, {t});
                    BprGradients g = bpr_gradients(m, {t});
                    m.user_emb.row(u) -= cfg.lr * g.user_emb.row(u);
                    m.item_emb.row(t.pos) -= cfg.lr * g.item_emb.row(t.pos);
                    m.item_emb.row(t.neg) -= cfg.lr * g.item_emb.row(t.neg);
                } else {
                    std::vector<int> pool(std::max(1, cfg.negatives_per_pos));
                    for (auto& n : pool) n = draw_negative();
                    epoch_loss += bpr_pool_loss(m, u, pos, pool);
                    bpr_pool_update(m, u, pos, pool, cfg.lr);
                }
                ++pairs;
            }
        }
        if (!std::isfinite(epoch_loss))
            throw error("mf_bpr_train: non-finite loss at epoch " + std::to_string(epoch));
        if (loss_curve) loss_curve->push_back(pairs > 0 ? epoch_loss / pairs : 0.0);
    }
    return m;
}

}  // namespace lightrec
