#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "lightrec/graph.hpp"
#include "lightrec/kmeans.hpp"
#include "lightrec/util.hpp"

namespace lightrec {

enum class LaplacianKind { Unnormalized, SymmetricNormalized };

inline Eigen::MatrixXd adjacency_matrix(const WeightedGraph& g) {
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(g.size(), g.size());
    for (const auto& [key, w] : g.edges) {
        A(key.first, key.second) = static_cast<double>(w);
        A(key.second, key.first) = static_cast<double>(w);
    }
    return A;
}

/// L = D - A with D the diagonal matrix of weighted degrees.
inline Eigen::MatrixXd laplacian(const WeightedGraph& g, LaplacianKind kind = LaplacianKind::Unnormalized) {
    if (g.size() == 0) throw error("laplacian: empty graph");
    Eigen::MatrixXd A = adjacency_matrix(g);
    Eigen::VectorXd deg = A.rowwise().sum();
    Eigen::MatrixXd L = Eigen::MatrixXd(deg.asDiagonal()) - A;
    if (kind == LaplacianKind::SymmetricNormalized) {
        Eigen::VectorXd dinv = deg.unaryExpr([](double d) { return d > 0.0 ? 1.0 / std::sqrt(d) : 0.0; });
        L = dinv.asDiagonal() * L * dinv.asDiagonal();
    }
    return L;
}

namespace detail {

// Eigenvectors for the n_ev smallest eigenvalues of symmetric L, columns in
// ascending eigenvalue order. Dense solve up to dense_cutoff nodes; above that,
// Lanczos with full reorthogonalization on sigma*I - L (largest-first there
// equals smallest-first on L).
inline Eigen::MatrixXd smallest_eigenvectors(const Eigen::MatrixXd& L, int n_ev, int dense_cutoff = 4096,
                                             double tol = 1e-8) {
    const int n = static_cast<int>(L.rows());
    if (n <= dense_cutoff) {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(L);
        if (solver.info() != Eigen::Success)
            throw error("eigensolver failed to converge on a " + std::to_string(n) + "-node Laplacian");
        return solver.eigenvectors().leftCols(n_ev);
    }

    // Gershgorin upper bound on the spectrum of L.
    double sigma = 0.0;
    for (int i = 0; i < n; ++i) sigma = std::max(sigma, L(i, i) + (L.row(i).cwiseAbs().sum() - std::abs(L(i, i))));
    sigma += 1.0;

    const long max_iter = 10l * n;
    const int m = std::min<long>(n, std::min<long>(max_iter, 2l * n_ev + 50));
    Eigen::MatrixXd Q(n, m);
    Eigen::VectorXd alpha(m), beta(m);

    Rng rng = make_rng(0xbabel, "lanczos");
    std::normal_distribution<double> gauss(0.0, 1.0);
    Eigen::VectorXd v(n);
    for (int i = 0; i < n; ++i) v(i) = gauss(rng);
    v.normalize();

    int steps = 0;
    Eigen::VectorXd w;
    for (int j = 0; j < m; ++j) {
        Q.col(j) = v;
        w = sigma * v - L * v;
        alpha(j) = v.dot(w);
        w -= alpha(j) * v;
        if (j > 0) w -= beta(j - 1) * Q.col(j - 1);
        // full reorthogonalization
        for (int r = 0; r <= j; ++r) w -= Q.col(r).dot(w) * Q.col(r);
        beta(j) = w.norm();
        steps = j + 1;
        if (beta(j) < tol) break;
        v = w / beta(j);
    }

    Eigen::MatrixXd T = Eigen::MatrixXd::Zero(steps, steps);
    for (int j = 0; j < steps; ++j) {
        T(j, j) = alpha(j);
        if (j + 1 < steps) T(j, j + 1) = T(j + 1, j) = beta(j);
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> small(T);
    if (small.info() != Eigen::Success)
        throw error("Lanczos tridiagonal solve failed after " + std::to_string(steps) + " iterations");
    if (steps < n_ev) throw error("Lanczos basis too small for requested eigenvector count");

    // Largest Ritz values of sigma*I - L, i.e. smallest eigenvalues of L,
    // reordered ascending in L's spectrum.
    Eigen::MatrixXd out(n, n_ev);
    for (int k = 0; k < n_ev; ++k) out.col(k) = Q.leftCols(steps) * small.eigenvectors().col(steps - 1 - k);
    return out;
}

}  // namespace detail

/// Spectral clustering: embed nodes by the eigenvectors of the N smallest
/// Laplacian eigenvalues, then K-means with N centers on the rows.
inline ClusterLabels spectral_cluster(const WeightedGraph& g, int n_clusters, std::uint64_t seed,
                                      LaplacianKind kind = LaplacianKind::Unnormalized) {
    if (g.size() == 0) throw error("spectral_cluster: empty graph");
    if (n_clusters < 1 || n_clusters > g.size())
        throw error("spectral_cluster: cluster count out of range");
    if (n_clusters == 1) return ClusterLabels(g.size(), 1);

    Eigen::MatrixXd L = laplacian(g, kind);
    Eigen::MatrixXd embedding = detail::smallest_eigenvectors(L, n_clusters);
    return kmeans(embedding, n_clusters, seed).labels;
}

}  // namespace lightrec
