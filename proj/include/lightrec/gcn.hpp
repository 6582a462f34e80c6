#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "lightrec/graph.hpp"
#include "lightrec/kmeans.hpp"
#include "lightrec/spectral.hpp"
#include "lightrec/util.hpp"

namespace lightrec {

/// Two-layer GCN over a weighted graph: learnable per-node features, symmetric
/// normalized propagation with self-loops, node classification head.
struct GcnModel {
    Eigen::MatrixXd features;  // |V| x E
    Eigen::MatrixXd w1;        // E x E
    Eigen::MatrixXd w2;        // E x C
    Eigen::MatrixXd a_hat;     // |V| x |V|, D~^{-1/2} (A+I) D~^{-1/2}
};

struct GcnConfig {
    int embedding_size = 64;
    double lr = 0.01;
    int epochs = 200;
    std::uint64_t seed = 42;
};

inline Eigen::MatrixXd normalized_adjacency(const WeightedGraph& g) {
    Eigen::MatrixXd A = adjacency_matrix(g);
    A += Eigen::MatrixXd::Identity(g.size(), g.size());
    Eigen::VectorXd deg = A.rowwise().sum();
    Eigen::VectorXd dinv = deg.unaryExpr([](double d) { return d > 0.0 ? 1.0 / std::sqrt(d) : 0.0; });
    return dinv.asDiagonal() * A * dinv.asDiagonal();
}

inline GcnModel gcn_init(const WeightedGraph& g, int embedding_size, int num_classes, std::uint64_t seed) {
    GcnModel m;
    m.a_hat = normalized_adjacency(g);
    Rng rng = make_rng(seed, "gcn-init");
    std::normal_distribution<double> gauss(0.0, 1.0);
    auto randn = [&](int r, int c, double scale) {
        Eigen::MatrixXd w(r, c);
        for (int i = 0; i < r; ++i)
            for (int j = 0; j < c; ++j) w(i, j) = gauss(rng) * scale;
        return w;
    };
    m.features = randn(g.size(), embedding_size, 0.1);
    m.w1 = randn(embedding_size, embedding_size, 1.0 / std::sqrt(embedding_size));
    m.w2 = randn(embedding_size, num_classes, 1.0 / std::sqrt(embedding_size));
    return m;
}

struct GcnForward {
    Eigen::MatrixXd hidden;  // relu(A^ F W1), |V| x E
    Eigen::MatrixXd logits;  // A^ hidden W2, |V| x C
    Eigen::MatrixXd probs;   // row-wise softmax of logits
};

inline GcnForward gcn_forward(const GcnModel& m) {
    GcnForward f;
    f.hidden = (m.a_hat * m.features * m.w1).cwiseMax(0.0);
    f.logits = m.a_hat * f.hidden * m.w2;
    f.probs.resizeLike(f.logits);
    for (int r = 0; r < f.logits.rows(); ++r) {
        Eigen::RowVectorXd row = f.logits.row(r);
        double mx = row.maxCoeff();
        Eigen::RowVectorXd e = (row.array() - mx).exp();
        f.probs.row(r) = e / e.sum();
    }
    return f;
}

/// Summed cross-entropy against 1-based cluster labels.
inline double gcn_loss(const GcnModel& m, const ClusterLabels& labels) {
    GcnForward f = gcn_forward(m);
    double loss = 0.0;
    for (int r = 0; r < f.probs.rows(); ++r) loss -= std::log(std::max(f.probs(r, labels[r] - 1), 1e-300));
    return loss;
}

struct GcnGradients {
    Eigen::MatrixXd features, w1, w2;
};

inline GcnGradients gcn_gradients(const GcnModel& m, const ClusterLabels& labels) {
    GcnForward f = gcn_forward(m);
    Eigen::MatrixXd dlogits = f.probs;
    for (int r = 0; r < dlogits.rows(); ++r) dlogits(r, labels[r] - 1) -= 1.0;

    GcnGradients g;
    Eigen::MatrixXd ah = m.a_hat * f.hidden;  // |V| x E
    g.w2 = ah.transpose() * dlogits;
    Eigen::MatrixXd dhidden = m.a_hat * dlogits * m.w2.transpose();
    Eigen::MatrixXd pre = m.a_hat * m.features * m.w1;
    Eigen::MatrixXd dpre = dhidden.cwiseProduct((pre.array() > 0.0).cast<double>().matrix());
    Eigen::MatrixXd af = m.a_hat * m.features;
    g.w1 = af.transpose() * dpre;
    g.features = m.a_hat * dpre * m.w1.transpose();
    return g;
}

/// Full-batch gradient descent on the classification loss; returns the final
/// hidden-layer representation, one row per node.
inline Eigen::MatrixXd gcn_train(const WeightedGraph& g, const ClusterLabels& labels, const GcnConfig& cfg,
                                 std::vector<double>* loss_curve = nullptr) {
    if (static_cast<int>(labels.size()) != g.size()) throw error("gcn_train: labels must cover all nodes");
    int num_classes = 0;
    for (int l : labels) num_classes = std::max(num_classes, l);
    GcnModel m = gcn_init(g, cfg.embedding_size, num_classes, cfg.seed);

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        GcnGradients grad = gcn_gradients(m, labels);
        m.features -= cfg.lr * grad.features;
        m.w1 -= cfg.lr * grad.w1;
        m.w2 -= cfg.lr * grad.w2;
        double loss = gcn_loss(m, labels);
        if (!std::isfinite(loss))
            throw error("gcn_train: non-finite loss at epoch " + std::to_string(epoch));
        if (loss_curve) loss_curve->push_back(loss);
    }
    return gcn_forward(m).hidden;
}

}  // namespace lightrec
