#include <doctest.h>

#include "sanet/metrics.hpp"
#include "sanet/rng.hpp"
#include "support/oracles.hpp"

using namespace sanet;

namespace {

std::vector<int> random_labels(Rng& rng, int n, int k) {
    std::vector<int> v(n);
    for (int& x : v) x = static_cast<int>(rng.uniform_int(k));
    return v;
}

} // namespace

TEST_CASE("accuracy") {
    SUBCASE("relabeled partitions score 1.0") {
        CHECK(accuracy({0, 0, 1, 1}, {1, 1, 0, 0}) == doctest::Approx(1.0));
    }
    SUBCASE("the alternating case scores 0.5") {
        CHECK(accuracy({0, 0, 1, 1}, {0, 1, 0, 1}) == doctest::Approx(0.5));
    }
    SUBCASE("Hungarian equals factorial brute force, k <= 6, 200 cases") {
        Rng rng = Rng(2024).derive("acc_cases");
        for (int c = 0; c < 200; ++c) {
            const int k_true = 2 + static_cast<int>(rng.uniform_int(5));
            const int k_pred = 2 + static_cast<int>(rng.uniform_int(5));
            const int n = 12 + static_cast<int>(rng.uniform_int(30));
            std::vector<int> t = random_labels(rng, n, k_true);
            std::vector<int> p = random_labels(rng, n, k_pred);
            CHECK(accuracy(t, p) == doctest::Approx(oracle::accuracy_bruteforce(t, p)).epsilon(1e-12));
        }
    }
    SUBCASE("rectangular tables (more predicted clusters than classes)") {
        CHECK(accuracy({0, 0, 0, 0}, {0, 1, 2, 3}) == doctest::Approx(0.25));
    }
    SUBCASE("length mismatch is a consistency error") {
        CHECK_THROWS_AS(accuracy({0, 1}, {0}), ConsistencyError);
    }
}

TEST_CASE("nmi") {
    SUBCASE("identical labelings with two clusters score 1") {
        CHECK(nmi({0, 1, 0, 1}, {1, 0, 1, 0}) == doctest::Approx(1.0));
    }
    SUBCASE("one-cluster prediction against a balanced 2-class truth scores 0") {
        CHECK(nmi({0, 0, 1, 1}, {0, 0, 0, 0}) == doctest::Approx(0.0));
    }
    SUBCASE("two trivial identical partitions score 1") {
        CHECK(nmi({0, 0, 0}, {0, 0, 0}) == doctest::Approx(1.0));
    }
    SUBCASE("matches the direct-summation oracle within 1e-12") {
        Rng rng = Rng(99).derive("nmi_cases");
        for (int c = 0; c < 200; ++c) {
            const int n = 9 + static_cast<int>(rng.uniform_int(40));
            std::vector<int> t = random_labels(rng, n, 3);
            std::vector<int> p = random_labels(rng, n, 3);
            CHECK(nmi(t, p) == doctest::Approx(oracle::nmi_direct(t, p)).epsilon(1e-12));
        }
    }
}

TEST_CASE("ari") {
    SUBCASE("identical labelings score exactly 1") {
        CHECK(ari({0, 1, 2, 0, 1, 2}, {2, 0, 1, 2, 0, 1}) == 1.0);
    }
    SUBCASE("one-cluster prediction against balanced truth scores 0") {
        CHECK(ari({0, 0, 1, 1}, {0, 0, 0, 0}) == doctest::Approx(0.0));
    }
    SUBCASE("matches the pair-enumeration oracle within 1e-12") {
        Rng rng = Rng(123).derive("ari_cases");
        for (int c = 0; c < 200; ++c) {
            const int n = 8 + static_cast<int>(rng.uniform_int(40));
            std::vector<int> t = random_labels(rng, n, 4);
            std::vector<int> p = random_labels(rng, n, 3);
            CHECK(ari(t, p) == doctest::Approx(oracle::ari_pairs(t, p)).epsilon(1e-12));
        }
    }
}

TEST_CASE("pairwise_f1") {
    SUBCASE("identical labelings score 1") {
        CHECK(pairwise_f1({0, 0, 1, 1}, {1, 1, 0, 0}) == doctest::Approx(1.0));
    }
    SUBCASE("all-singleton prediction has no joined pairs: 0") {
        CHECK(pairwise_f1({0, 0, 1, 1}, {0, 1, 2, 3}) == doctest::Approx(0.0));
    }
    SUBCASE("matches the pair-enumeration oracle within 1e-12") {
        Rng rng = Rng(321).derive("f1_cases");
        for (int c = 0; c < 200; ++c) {
            const int n = 8 + static_cast<int>(rng.uniform_int(40));
            std::vector<int> t = random_labels(rng, n, 3);
            std::vector<int> p = random_labels(rng, n, 4);
            CHECK(pairwise_f1(t, p) == doctest::Approx(oracle::f1_pairs(t, p)).epsilon(1e-12));
        }
    }
}

TEST_CASE("metric permutation invariance") {
    Rng rng = Rng(777).derive("perm");
    const std::vector<int> t = random_labels(rng, 60, 4);
    const std::vector<int> p = random_labels(rng, 60, 4);
    // relabel by the permutation 0->2, 1->3, 2->1, 3->0
    const int perm[] = {2, 3, 1, 0};
    std::vector<int> p2(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) p2[i] = perm[p[i]];
    CHECK(accuracy(t, p) == doctest::Approx(accuracy(t, p2)).epsilon(1e-14));
    CHECK(nmi(t, p) == doctest::Approx(nmi(t, p2)).epsilon(1e-14));
    CHECK(ari(t, p) == doctest::Approx(ari(t, p2)).epsilon(1e-14));
    CHECK(pairwise_f1(t, p) == doctest::Approx(pairwise_f1(t, p2)).epsilon(1e-14));
}

TEST_CASE("accuracy majority bound for balanced classes") {
    Rng rng = Rng(555).derive("bound");
    for (int c = 0; c < 20; ++c) {
        const int k = 2 + static_cast<int>(rng.uniform_int(4));
        const int per = 10;
        std::vector<int> t;
        for (int cls = 0; cls < k; ++cls) t.insert(t.end(), per, cls);
        std::vector<int> p = random_labels(rng, k * per, k);
        CHECK(accuracy(t, p) >= 1.0 / k - 1e-12);
    }
}

TEST_CASE("calinski_harabasz") {
    SUBCASE("tighter blobs score strictly higher") {
        Rng rng = Rng(42).derive("ch");
        auto blob_pair = [&](double spread) {
            Eigen::MatrixXd X(40, 2);
            std::vector<int> labels(40);
            for (int i = 0; i < 40; ++i) {
                const int c = i < 20 ? 0 : 1;
                labels[i] = c;
                X(i, 0) = (c == 0 ? -3.0 : 3.0) + spread * rng.gaussian();
                X(i, 1) = spread * rng.gaussian();
            }
            return std::pair{X, labels};
        };
        auto [tight, lt] = blob_pair(0.2);
        auto [loose, ll] = blob_pair(1.0);
        CHECK(calinski_harabasz(tight, lt) > calinski_harabasz(loose, ll));
    }
    SUBCASE("point-mass clusters raise the infinite-separation sentinel") {
        Eigen::MatrixXd X(4, 1);
        X << 0, 0, 5, 5;
        try {
            calinski_harabasz(X, {0, 0, 1, 1});
            FAIL("expected DegenerateMetricError");
        } catch (const DegenerateMetricError& e) {
            CHECK(std::string(e.what()).find("infinite separation") != std::string::npos);
        }
    }
    SUBCASE("all-identical points are degenerate") {
        Eigen::MatrixXd X = Eigen::MatrixXd::Zero(4, 2);
        CHECK_THROWS_AS(calinski_harabasz(X, {0, 0, 1, 1}), DegenerateMetricError);
    }
    SUBCASE("k >= N and single-cluster input are parameter errors") {
        Eigen::MatrixXd X = Eigen::MatrixXd::Random(3, 2);
        CHECK_THROWS_AS(calinski_harabasz(X, {0, 1, 2}), ParameterError);
        CHECK_THROWS_AS(calinski_harabasz(X, {0, 0, 0}), ParameterError);
    }
}
