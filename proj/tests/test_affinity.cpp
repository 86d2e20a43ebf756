#include <doctest.h>

#include "sanet/affinity.hpp"
#include "sanet/errors.hpp"
#include "support/oracles.hpp"
#include "support/synthetic.hpp"

using namespace sanet;

namespace {

Eigen::MatrixXd line_points(std::initializer_list<double> xs) {
    Eigen::MatrixXd X(static_cast<Eigen::Index>(xs.size()), 1);
    Eigen::Index i = 0;
    for (double x : xs) X(i++, 0) = x;
    return X;
}

void check_symmetric_zero_diag(const AffinityGraph& g) {
    if (g.sparse_storage) {
        const Eigen::MatrixXd W(g.sparse);
        CHECK((W - W.transpose()).cwiseAbs().maxCoeff() == 0.0);
        CHECK(W.diagonal().cwiseAbs().maxCoeff() == 0.0);
        CHECK(W.minCoeff() >= 0.0);
    } else {
        CHECK((g.dense - g.dense.transpose()).cwiseAbs().maxCoeff() == 0.0);
        CHECK(g.dense.diagonal().cwiseAbs().maxCoeff() == 0.0);
        CHECK(g.dense.minCoeff() >= 0.0);
    }
}

} // namespace

TEST_CASE("knn_graph") {
    SUBCASE("collinear 0,1,10 with k=1 keeps only the mutual pair (union rule)") {
        AffinityGraph g = knn_graph(line_points({0.0, 1.0, 10.0}), 1);
        const Eigen::MatrixXd W(g.sparse);
        CHECK(W(0, 1) == 1.0);
        CHECK(W(1, 0) == 1.0);
        // 10's nearest neighbor is 1, so union adds (1,2) as well
        CHECK(W(1, 2) == 1.0);
        CHECK(W(0, 2) == 0.0);
        check_symmetric_zero_diag(g);
    }
    SUBCASE("k = N-1 gives the complete binary graph") {
        Eigen::MatrixXd X = synthetic::blobs({{0, 0}}, 6, 1.0, 3);
        AffinityGraph g = knn_graph(X, 5);
        const Eigen::MatrixXd W(g.sparse);
        for (int i = 0; i < 6; ++i)
            for (int j = 0; j < 6; ++j) CHECK(W(i, j) == (i == j ? 0.0 : 1.0));
    }
    SUBCASE("two far blobs split into exactly 2 components (union-find oracle)") {
        std::vector<int> labels;
        Eigen::MatrixXd X = synthetic::blobs({{0, 0}, {100, 0}}, 50, 1.0, 11, &labels);
        AffinityGraph g = knn_graph(X, 5);
        const Eigen::MatrixXd W(g.sparse);
        const int oracle_components =
            oracle::component_count_bruteforce(g.n, [&](int i, int j) { return W(i, j); });
        CHECK(oracle_components == 2);
        CHECK(component_count(g) == oracle_components);
    }
    SUBCASE("degree is at least k after union symmetrization") {
        Eigen::MatrixXd X = synthetic::blobs({{0, 0}, {3, 1}}, 25, 1.3, 5);
        for (int k : {1, 3, 7}) {
            AffinityGraph g = knn_graph(X, k);
            const Eigen::MatrixXd W(g.sparse);
            for (int i = 0; i < g.n; ++i) CHECK(W.row(i).sum() >= static_cast<double>(k));
        }
    }
    SUBCASE("k >= N is a parameter error") {
        CHECK_THROWS_AS(knn_graph(line_points({0.0, 1.0}), 2), ParameterError);
    }
}

TEST_CASE("mst_longest_edge") {
    SUBCASE("points 0,1,3 on a line: longest MST edge is 2") {
        CHECK(mst_longest_edge(line_points({0.0, 1.0, 3.0})) == doctest::Approx(2.0));
    }
    SUBCASE("two points: the single edge") {
        CHECK(mst_longest_edge(line_points({-1.5, 2.5})) == doctest::Approx(4.0));
    }
    SUBCASE("matches exhaustive Kruskal on random points") {
        for (std::uint64_t seed : {1ULL, 2ULL, 3ULL}) {
            sanet::Rng rng = sanet::Rng(seed).derive("pts");
            Eigen::MatrixXd X(100, 2);
            for (int i = 0; i < 100; ++i) {
                X(i, 0) = rng.uniform();
                X(i, 1) = rng.uniform();
            }
            CHECK(mst_longest_edge(X) ==
                  doctest::Approx(oracle::mst_longest_edge_bruteforce(X)).epsilon(1e-10));
        }
    }
    SUBCASE("fewer than 2 points is a parameter error") {
        CHECK_THROWS_AS(mst_longest_edge(line_points({0.0})), ParameterError);
    }
}

TEST_CASE("eps_graph") {
    SUBCASE("eps = eta connects every point set (MST containment)") {
        for (std::uint64_t seed : {4ULL, 5ULL}) {
            std::vector<int> labels;
            Eigen::MatrixXd X = synthetic::blobs({{0, 0}, {8, 0}}, 30, 1.0, seed, &labels);
            const double eta = mst_longest_edge(X);
            AffinityGraph g = eps_graph(X, eta);
            CHECK(component_count(g) == 1);
            check_symmetric_zero_diag(g);
        }
    }
    SUBCASE("eps below the minimum pairwise distance gives an edgeless graph") {
        AffinityGraph g = eps_graph(line_points({0.0, 1.0, 2.0}), 0.5);
        CHECK(g.sparse.nonZeros() == 0);
        CHECK(component_count(g) == 3);
    }
    SUBCASE("components shrink monotonically as eps grows (union-find oracle)") {
        std::vector<int> labels;
        Eigen::MatrixXd X = synthetic::blobs({{0, 0}, {20, 0}}, 40, 1.0, 17, &labels);
        const double eta = mst_longest_edge(X);
        int previous = 1 << 30;
        for (double mult : {0.5, 1.0, 2.0}) {
            AffinityGraph g = eps_graph(X, mult * eta);
            const Eigen::MatrixXd W(g.sparse);
            const int oracle_components =
                oracle::component_count_bruteforce(g.n, [&](int i, int j) { return W(i, j); });
            CHECK(component_count(g) == oracle_components);
            CHECK(oracle_components <= previous);
            previous = oracle_components;
        }
    }
}

TEST_CASE("full_gaussian_graph") {
    SUBCASE("identical points have affinity 1") {
        Eigen::MatrixXd X(2, 2);
        X << 1.0, 2.0, 1.0, 2.0;
        AffinityGraph g = full_gaussian_graph(X, 0.3);
        CHECK(g.dense(0, 1) == doctest::Approx(1.0));
        check_symmetric_zero_diag(g);
    }
    SUBCASE("distance sqrt(2) sigma maps to exp(-1)") {
        Eigen::MatrixXd X(2, 1);
        const double sigma = 0.7;
        X << 0.0, std::sqrt(2.0) * sigma;
        AffinityGraph g = full_gaussian_graph(X, sigma);
        CHECK(g.dense(0, 1) == doctest::Approx(std::exp(-1.0)).epsilon(1e-12));
    }
    SUBCASE("off-diagonal entries lie in (0,1] at sane scales") {
        Eigen::MatrixXd X = synthetic::blobs({{0, 0}, {4, 2}}, 20, 1.0, 23);
        AffinityGraph g = full_gaussian_graph(X, 1.0);
        for (int i = 0; i < g.n; ++i) {
            for (int j = 0; j < g.n; ++j) {
                if (i == j) continue;
                CHECK(g.dense(i, j) > 0.0);
                CHECK(g.dense(i, j) <= 1.0);
            }
        }
    }
    SUBCASE("a tiny sigma underflows toward a disconnected graph") {
        Eigen::MatrixXd X = line_points({0.0, 5.0, 10.0});
        AffinityGraph g = full_gaussian_graph(X, 1e-4);
        CHECK(g.dense.maxCoeff() == 0.0);
        CHECK(component_count(g) == 3);
    }
    SUBCASE("sigma must be positive") {
        CHECK_THROWS_AS(full_gaussian_graph(line_points({0.0, 1.0}), 0.0), ParameterError);
    }
}

TEST_CASE("self_tuning_graph") {
    SUBCASE("regular simplex: every affinity is exp(-1)") {
        // equilateral triangle, edge d
        const double d = 2.0;
        Eigen::MatrixXd X(3, 2);
        X << 0.0, 0.0, d, 0.0, d / 2.0, d * std::sqrt(3.0) / 2.0;
        AffinityGraph g = self_tuning_graph(X, 1);
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j)
                if (i != j) CHECK(g.dense(i, j) == doctest::Approx(std::exp(-1.0)).epsilon(1e-9));
    }
    SUBCASE("duplicate pair with K=1: floored scale still gives affinity 1") {
        Eigen::MatrixXd X(3, 1);
        X << 0.0, 0.0, 5.0;
        AffinityGraph g = self_tuning_graph(X, 1);
        CHECK(g.dense(0, 1) == doctest::Approx(1.0));
        check_symmetric_zero_diag(g);
    }
    SUBCASE("two-scale data: within-blob affinity beats cross-blob for every node") {
        std::vector<int> labels;
        Eigen::MatrixXd tight = synthetic::blobs({{0, 0}}, 20, 0.05, 31);
        Eigen::MatrixXd loose = synthetic::blobs({{10, 0}}, 20, 1.0, 32);
        Eigen::MatrixXd X(40, 2);
        X << tight, loose;
        AffinityGraph g = self_tuning_graph(X, 7);
        for (int i = 0; i < 40; ++i) {
            const bool in_tight = i < 20;
            double best_within = 0.0, best_cross = 0.0;
            for (int j = 0; j < 40; ++j) {
                if (j == i) continue;
                const bool j_tight = j < 20;
                if (j_tight == in_tight) {
                    best_within = std::max(best_within, g.dense(i, j));
                } else {
                    best_cross = std::max(best_cross, g.dense(i, j));
                }
            }
            CHECK(best_within > best_cross);
        }
    }
    SUBCASE("K out of range is a parameter error") {
        CHECK_THROWS_AS(self_tuning_graph(line_points({0.0, 1.0}), 2), ParameterError);
    }
}

TEST_CASE("component_count") {
    SUBCASE("edgeless graph counts every node") {
        AffinityGraph g;
        g.n = 5;
        g.sparse_storage = true;
        g.sparse.resize(5, 5);
        CHECK(component_count(g) == 5);
    }
    SUBCASE("complete graph is one component") {
        AffinityGraph g = knn_graph(synthetic::blobs({{0, 0}}, 8, 1.0, 2), 7);
        CHECK(component_count(g) == 1);
    }
}

TEST_CASE("k_nearest_neighbors is deterministic with index tie-breaks") {
    // duplicate points force distance ties
    Eigen::MatrixXd X(4, 1);
    X << 0.0, 0.0, 0.0, 1.0;
    NeighborLists nn = k_nearest_neighbors(X, 2);
    CHECK(nn.indices(3, 0) == 0); // ties at distance 1 resolve to the lowest index
    CHECK(nn.indices(3, 1) == 1);
    CHECK(nn.indices(0, 0) == 1);
    CHECK(nn.indices(0, 1) == 2);
}
