#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <vector>

#include "lightrec/util.hpp"

namespace lightrec {

/// Cluster labels, 1-based in [1, N].
using ClusterLabels = std::vector<int>;

/// Per-column standardization (X - mu) / sigma with population sigma.
/// Constant columns map to all-zeros.
inline Eigen::MatrixXd zscore(const Eigen::MatrixXd& X) {
    Eigen::MatrixXd Z = X;
    const double n = static_cast<double>(X.rows());
    for (int c = 0; c < X.cols(); ++c) {
        double mu = X.col(c).mean();
        double var = (X.col(c).array() - mu).square().sum() / n;
        double sigma = std::sqrt(var);
        if (sigma > 0.0)
            Z.col(c) = (X.col(c).array() - mu) / sigma;
        else
            Z.col(c).setZero();
    }
    return Z;
}

struct KMeansResult {
    ClusterLabels labels;       // 1-based
    Eigen::MatrixXd centroids;  // N x dim
    double inertia = 0.0;
};

namespace detail {

inline double sqdist(const Eigen::MatrixXd& X, int row, const Eigen::RowVectorXd& c) {
    return (X.row(row) - c).squaredNorm();
}

inline Eigen::MatrixXd kmeanspp_init(const Eigen::MatrixXd& X, int n_clusters, Rng& rng) {
    const int n = static_cast<int>(X.rows());
    Eigen::MatrixXd centers(n_clusters, X.cols());
    std::uniform_int_distribution<int> first(0, n - 1);
    centers.row(0) = X.row(first(rng));

    Eigen::VectorXd d2(n);
    for (int r = 0; r < n; ++r) d2(r) = sqdist(X, r, centers.row(0));
    for (int k = 1; k < n_clusters; ++k) {
        double total = d2.sum();
        int pick;
        if (total <= 0.0) {
            pick = first(rng);  // all remaining points coincide with a center
        } else {
            std::uniform_real_distribution<double> u(0.0, total);
            double target = u(rng), acc = 0.0;
            pick = n - 1;
            for (int r = 0; r < n; ++r) {
                acc += d2(r);
                if (acc >= target) {
                    pick = r;
                    break;
                }
            }
        }
        centers.row(k) = X.row(pick);
        for (int r = 0; r < n; ++r) d2(r) = std::min(d2(r), sqdist(X, r, centers.row(k)));
    }
    return centers;
}

inline KMeansResult lloyd(const Eigen::MatrixXd& X, int n_clusters, Rng& rng, int max_iter,
                          std::vector<double>* inertia_trace = nullptr) {
    const int n = static_cast<int>(X.rows());
    KMeansResult res;
    res.centroids = kmeanspp_init(X, n_clusters, rng);
    res.labels.assign(n, 1);

    std::vector<int> prev(n, -1);
    for (int it = 0; it < max_iter; ++it) {
        bool changed = false;
        double iter_inertia = 0.0;
        for (int r = 0; r < n; ++r) {
            int best = 0;
            double best_d = std::numeric_limits<double>::infinity();
            for (int k = 0; k < n_clusters; ++k) {
                double d = sqdist(X, r, res.centroids.row(k));
                if (d < best_d) {
                    best_d = d;
                    best = k;
                }
            }
            if (prev[r] != best) changed = true;
            prev[r] = best;
            res.labels[r] = best + 1;
            iter_inertia += best_d;
        }
        if (inertia_trace) inertia_trace->push_back(iter_inertia);
        if (!changed && it > 0) break;

        for (int k = 0; k < n_clusters; ++k) {
            Eigen::RowVectorXd sum = Eigen::RowVectorXd::Zero(X.cols());
            int count = 0;
            for (int r = 0; r < n; ++r)
                if (prev[r] == k) {
                    sum += X.row(r);
                    ++count;
                }
            if (count > 0) res.centroids.row(k) = sum / count;
            // empty clusters keep their centroid
        }
    }
    res.inertia = 0.0;
    for (int r = 0; r < n; ++r) res.inertia += sqdist(X, r, res.centroids.row(res.labels[r] - 1));
    return res;
}

}  // namespace detail

/// Lloyd's algorithm, k-means++ init, best of `restarts` runs by inertia.
inline KMeansResult kmeans(const Eigen::MatrixXd& X, int n_clusters, std::uint64_t seed,
                           int restarts = 10, int max_iter = 300) {
    if (n_clusters < 1) throw error("kmeans: need at least one cluster");
    if (n_clusters > X.rows()) throw error("kmeans: more clusters than points");

    KMeansResult best;
    best.inertia = std::numeric_limits<double>::infinity();
    for (int run = 0; run < restarts; ++run) {
        Rng rng = make_rng(seed + static_cast<std::uint64_t>(run) * 0x9e3779b97f4a7c15ull, "kmeans");
        KMeansResult r = detail::lloyd(X, n_clusters, rng, max_iter);
        if (r.inertia < best.inertia) best = std::move(r);
    }
    return best;
}

/// Single run with per-iteration inertia recorded; used by property tests.
inline KMeansResult kmeans_traced(const Eigen::MatrixXd& X, int n_clusters, std::uint64_t seed,
                                  std::vector<double>& inertia_trace, int max_iter = 300) {
    Rng rng = make_rng(seed, "kmeans");
    return detail::lloyd(X, n_clusters, rng, max_iter, &inertia_trace);
}

}  // namespace lightrec
