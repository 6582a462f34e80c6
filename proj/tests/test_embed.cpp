#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "lightrec/bpr.hpp"
#include "lightrec/gcn.hpp"
#include "lightrec/kmeans.hpp"

using namespace lightrec;

namespace {

WeightedGraph two_component_graph() {
    WeightedGraph g;
    for (int k = 0; k < 6; ++k) g.nodes.push_back({NodeKind::User, k});
    g.add_edge(0, 1, 1);
    g.add_edge(1, 2, 1);
    g.add_edge(0, 2, 1);
    g.add_edge(3, 4, 1);
    g.add_edge(4, 5, 1);
    g.add_edge(3, 5, 1);
    return g;
}

SplitDataset tiny_split(int users, int items, const std::vector<std::vector<int>>& train) {
    SplitDataset s;
    s.num_users = users;
    s.num_items = items;
    s.train = train;
    s.valid.assign(users, -1);
    s.test.assign(users, -1);
    return s;
}

}  // namespace

TEST_CASE("zscore matches the direct formula") {
    Eigen::MatrixXd X(3, 1);
    X << 1, 2, 3;
    Eigen::MatrixXd Z = zscore(X);
    CHECK(Z(0, 0) == Catch::Approx(-1.2247448714));
    CHECK(Z(1, 0) == Catch::Approx(0.0).margin(1e-12));
    CHECK(Z(2, 0) == Catch::Approx(1.2247448714));
}

TEST_CASE("zscore maps constant columns to zero") {
    Eigen::MatrixXd X(3, 2);
    X << 5, 1, 5, 2, 5, 3;
    Eigen::MatrixXd Z = zscore(X);
    CHECK(Z.col(0).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("zscore is idempotent on standardized input") {
    Eigen::MatrixXd X(4, 2);
    X << 0.3, -1.1, 2.0, 0.4, -0.7, 1.8, 0.9, -2.2;
    Eigen::MatrixXd Z = zscore(X);
    CHECK((zscore(Z) - Z).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("zscore output columns standardized (property)") {
    std::mt19937 rng(2);
    std::normal_distribution<double> gauss(3.0, 7.0);
    for (int trial = 0; trial < 10; ++trial) {
        Eigen::MatrixXd X(5 + rng() % 20, 1 + rng() % 6);
        for (int r = 0; r < X.rows(); ++r)
            for (int c = 0; c < X.cols(); ++c) X(r, c) = gauss(rng);
        Eigen::MatrixXd Z = zscore(X);
        for (int c = 0; c < Z.cols(); ++c) {
            double mu = Z.col(c).mean();
            double sd = std::sqrt((Z.col(c).array() - mu).square().sum() / Z.rows());
            CHECK(std::abs(mu) < 1e-9);
            CHECK((std::abs(sd) < 1e-9 || std::abs(sd - 1.0) < 1e-9));
        }
    }
}

TEST_CASE("kmeans separates well-separated pairs") {
    Eigen::MatrixXd X(4, 1);
    X << 0.0, 0.1, 10.0, 10.1;
    auto res = kmeans(X, 2, 1);
    CHECK(res.labels[0] == res.labels[1]);
    CHECK(res.labels[2] == res.labels[3]);
    CHECK(res.labels[0] != res.labels[2]);
}

TEST_CASE("kmeans with N = rows gives zero inertia") {
    Eigen::MatrixXd X(5, 2);
    X << 1, 1, 2, 2, 3, 3, 4, 4, 5, 5;
    auto res = kmeans(X, 5, 3);
    CHECK(res.inertia == Catch::Approx(0.0).margin(1e-12));
    std::set<int> labels(res.labels.begin(), res.labels.end());
    CHECK(labels.size() == 5);
}

TEST_CASE("kmeans matches brute-force optimal 2-partition on 8 points") {
    std::mt19937 rng(9);
    std::normal_distribution<double> gauss;
    Eigen::MatrixXd X(8, 2);
    for (int r = 0; r < 8; ++r)
        for (int c = 0; c < 2; ++c) X(r, c) = gauss(rng);

    double best = 1e300;
    for (int mask = 1; mask < 127; ++mask) {  // nonempty proper subsets
        Eigen::RowVector2d ca = Eigen::RowVector2d::Zero(), cb = Eigen::RowVector2d::Zero();
        int na = 0, nb = 0;
        for (int r = 0; r < 8; ++r)
            if (mask & (1 << r)) {
                ca += X.row(r);
                ++na;
            } else {
                cb += X.row(r);
                ++nb;
            }
        ca /= na;
        cb /= nb;
        double inertia = 0.0;
        for (int r = 0; r < 8; ++r)
            inertia += (mask & (1 << r)) ? (X.row(r) - ca).squaredNorm() : (X.row(r) - cb).squaredNorm();
        best = std::min(best, inertia);
    }
    auto res = kmeans(X, 2, 4);
    CHECK(res.inertia == Catch::Approx(best).epsilon(1e-9));
}

TEST_CASE("kmeans inertia non-increasing across Lloyd iterations") {
    std::mt19937 rng(13);
    std::normal_distribution<double> gauss;
    for (int trial = 0; trial < 5; ++trial) {
        Eigen::MatrixXd X(30, 3);
        for (int r = 0; r < 30; ++r)
            for (int c = 0; c < 3; ++c) X(r, c) = gauss(rng);
        std::vector<double> trace;
        kmeans_traced(X, 4, trial, trace);
        for (std::size_t k = 1; k < trace.size(); ++k) CHECK(trace[k] <= trace[k - 1] + 1e-9);
    }
}

TEST_CASE("kmeans deterministic per seed") {
    std::mt19937 rng(21);
    std::normal_distribution<double> gauss;
    Eigen::MatrixXd X(20, 2);
    for (int r = 0; r < 20; ++r)
        for (int c = 0; c < 2; ++c) X(r, c) = gauss(rng);
    CHECK(kmeans(X, 3, 77).labels == kmeans(X, 3, 77).labels);
}

TEST_CASE("gcn_forward zero weights give uniform prediction") {
    WeightedGraph g = two_component_graph();
    GcnModel m = gcn_init(g, 4, 3, 1);
    m.w1.setZero();
    m.w2.setZero();
    GcnForward f = gcn_forward(m);
    CHECK(f.hidden.cwiseAbs().maxCoeff() == 0.0);
    CHECK((f.probs.array() - 1.0 / 3.0).abs().maxCoeff() < 1e-12);
    ClusterLabels labels{1, 1, 1, 2, 2, 2};
    CHECK(gcn_loss(m, labels) == Catch::Approx(6.0 * std::log(3.0)));
}

TEST_CASE("gcn_forward identity propagation on a single node") {
    WeightedGraph g;
    g.nodes.push_back({NodeKind::User, 0});
    GcnModel m = gcn_init(g, 2, 2, 1);
    m.features << 1, 0;
    m.w1 = Eigen::MatrixXd::Identity(2, 2);
    m.w2 = Eigen::MatrixXd::Identity(2, 2);
    GcnForward f = gcn_forward(m);
    CHECK(m.a_hat(0, 0) == Catch::Approx(1.0));
    CHECK(f.hidden(0, 0) == Catch::Approx(1.0));
    CHECK(f.hidden(0, 1) == Catch::Approx(0.0).margin(1e-12));
}

TEST_CASE("gcn logits match a hand-computed product on 2 nodes") {
    WeightedGraph g;
    g.nodes.push_back({NodeKind::User, 0});
    g.nodes.push_back({NodeKind::User, 1});
    g.add_edge(0, 1, 1);
    GcnModel m = gcn_init(g, 2, 2, 1);
    m.features << 1, 0, 0, 1;
    m.w1 << 1, 2, 3, 4;
    m.w2 << 1, 0, 0, 1;
    // A+I all-ones, degrees 2: a_hat = 0.5 everywhere
    Eigen::MatrixXd ahat(2, 2);
    ahat << 0.5, 0.5, 0.5, 0.5;
    Eigen::MatrixXd hidden = (ahat * m.features * m.w1).cwiseMax(0.0);
    Eigen::MatrixXd logits = ahat * hidden * m.w2;
    GcnForward f = gcn_forward(m);
    CHECK((f.logits - logits).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("gcn training loss decreases on labeled components") {
    WeightedGraph g = two_component_graph();
    ClusterLabels labels{1, 1, 1, 2, 2, 2};
    GcnConfig cfg;
    cfg.embedding_size = 8;
    cfg.epochs = 30;
    cfg.seed = 5;
    std::vector<double> curve;
    gcn_train(g, labels, cfg, &curve);
    REQUIRE(curve.size() >= 5);
    for (int e = 1; e < 5; ++e) CHECK(curve[e] < curve[e - 1]);
}

TEST_CASE("gcn gradients match central finite differences") {
    WeightedGraph g = two_component_graph();
    ClusterLabels labels{1, 1, 2, 2, 1, 2};
    GcnModel m = gcn_init(g, 3, 2, 11);
    GcnGradients grad = gcn_gradients(m, labels);

    std::mt19937 rng(31);
    const double h = 1e-6;
    auto check_param = [&](Eigen::MatrixXd& p, const Eigen::MatrixXd& gp) {
        for (int k = 0; k < 8; ++k) {
            int r = rng() % p.rows(), c = rng() % p.cols();
            double orig = p(r, c);
            p(r, c) = orig + h;
            double lp = gcn_loss(m, labels);
            p(r, c) = orig - h;
            double lm = gcn_loss(m, labels);
            p(r, c) = orig;
            double fd = (lp - lm) / (2 * h);
            double denom = std::max({std::abs(fd), std::abs(gp(r, c)), 1e-8});
            CHECK(std::abs(fd - gp(r, c)) / denom < 1e-4);
        }
    };
    check_param(m.features, grad.features);
    check_param(m.w1, grad.w1);
    check_param(m.w2, grad.w2);
}

TEST_CASE("gcn_train deterministic per seed") {
    WeightedGraph g = two_component_graph();
    ClusterLabels labels{1, 1, 1, 2, 2, 2};
    GcnConfig cfg;
    cfg.embedding_size = 4;
    cfg.epochs = 10;
    cfg.seed = 3;
    Eigen::MatrixXd a = gcn_train(g, labels, cfg);
    Eigen::MatrixXd b = gcn_train(g, labels, cfg);
    CHECK((a - b).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("bpr tie score loss is ln 2") {
    MfModel m = mf_init(1, 2, 4, 1);
    m.item_emb.row(1) = m.item_emb.row(0);
    CHECK(bpr_loss(m, {{0, 0, 1}}) == Catch::Approx(std::log(2.0)));
}

TEST_CASE("bpr gradients match central finite differences") {
    MfModel m = mf_init(3, 4, 3, 7);
    std::vector<BprTriple> triples{{0, 1, 2}, {1, 0, 3}, {2, 2, 0}, {0, 3, 1}};
    BprGradients grad = bpr_gradients(m, triples);

    std::mt19937 rng(41);
    const double h = 1e-6;
    auto check_param = [&](Eigen::MatrixXd& p, const Eigen::MatrixXd& gp) {
        for (int k = 0; k < 10; ++k) {
            int r = rng() % p.rows(), c = rng() % p.cols();
            double orig = p(r, c);
            p(r, c) = orig + h;
            double lp = bpr_loss(m, triples);
            p(r, c) = orig - h;
            double lm = bpr_loss(m, triples);
            p(r, c) = orig;
            double fd = (lp - lm) / (2 * h);
            double denom = std::max({std::abs(fd), std::abs(gp(r, c)), 1e-8});
            CHECK(std::abs(fd - gp(r, c)) / denom < 1e-4);
        }
    };
    check_param(m.user_emb, grad.user_emb);
    check_param(m.item_emb, grad.item_emb);
}

TEST_CASE("bpr pool update gradient agrees with finite differences of the pool loss") {
    MfModel m = mf_init(2, 5, 3, 19);
    std::vector<int> pool{2, 3, 4};
    const double h = 1e-6;
    const double lr = 1.0;

    MfModel updated = m;
    bpr_pool_update(updated, 0, 1, pool, lr);
    // grad = (m - updated) / lr; compare a few entries against finite differences
    std::mt19937 rng(43);
    for (int k = 0; k < 10; ++k) {
        bool user_side = rng() % 2 == 0;
        Eigen::MatrixXd& p = user_side ? m.user_emb : m.item_emb;
        const Eigen::MatrixXd& pu = user_side ? updated.user_emb : updated.item_emb;
        int r = rng() % p.rows(), c = rng() % p.cols();
        double analytic = (p(r, c) - pu(r, c)) / lr;
        double orig = p(r, c);
        p(r, c) = orig + h;
        double lp = bpr_pool_loss(m, 0, 1, pool);
        p(r, c) = orig - h;
        double lm = bpr_pool_loss(m, 0, 1, pool);
        p(r, c) = orig;
        double fd = (lp - lm) / (2 * h);
        CHECK(std::abs(fd - analytic) < 1e-5 * std::max(1.0, std::abs(fd)));
    }
}

TEST_CASE("bpr training separates a planted 2-block interaction matrix") {
    // users 0-4 like items 0-3, users 5-9 like items 4-7
    std::vector<std::vector<int>> train(10);
    for (int u = 0; u < 5; ++u) train[u] = {0, 1, 2, 3};
    for (int u = 5; u < 10; ++u) train[u] = {4, 5, 6, 7};
    SplitDataset s = tiny_split(10, 8, train);

    BprConfig cfg;
    cfg.embedding_size = 8;
    cfg.epochs = 40;
    cfg.seed = 2;
    MfModel m = mf_bpr_train(s, cfg);

    double in_block = 0.0, cross_block = 0.0;
    int nin = 0, ncross = 0;
    for (int u = 0; u < 10; ++u)
        for (int i = 0; i < 8; ++i) {
            bool in = (u < 5) == (i < 4);
            (in ? in_block : cross_block) += m.score(u, i);
            (in ? nin : ncross) += 1;
        }
    CHECK(in_block / nin > cross_block / ncross);
}

TEST_CASE("bpr skips users with every item interacted") {
    std::vector<std::vector<int>> train{{0, 1}, {0}};
    SplitDataset s = tiny_split(2, 2, train);
    BprConfig cfg;
    cfg.embedding_size = 2;
    cfg.epochs = 3;
    CHECK_NOTHROW(mf_bpr_train(s, cfg));
}

TEST_CASE("bpr deterministic per seed") {
    std::vector<std::vector<int>> train{{0, 2}, {1}, {0, 1}};
    SplitDataset s = tiny_split(3, 3, train);
    BprConfig cfg;
    cfg.embedding_size = 4;
    cfg.epochs = 5;
    cfg.seed = 9;
    MfModel a = mf_bpr_train(s, cfg);
    MfModel b = mf_bpr_train(s, cfg);
    CHECK((a.user_emb - b.user_emb).cwiseAbs().maxCoeff() == 0.0);
    CHECK((a.item_emb - b.item_emb).cwiseAbs().maxCoeff() == 0.0);
}
