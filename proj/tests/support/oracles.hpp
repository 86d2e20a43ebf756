#pragma once

// Test-only reference implementations, kept independent of the library code
// paths they are used to check.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include <Eigen/Dense>

namespace oracle {

/// Exhaustive Kruskal over every pair; returns the longest MST edge.
inline double mst_longest_edge_bruteforce(const Eigen::MatrixXd& points) {
    const int n = static_cast<int>(points.rows());
    struct Edge {
        double d;
        int a, b;
    };
    std::vector<Edge> edges;
    edges.reserve(static_cast<std::size_t>(n) * (n - 1) / 2);
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
            edges.push_back({(points.row(i) - points.row(j)).norm(), i, j});
    std::sort(edges.begin(), edges.end(), [](const Edge& x, const Edge& y) { return x.d < y.d; });

    std::vector<int> parent(n);
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](int x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    };
    double longest = 0.0;
    int joined = 0;
    for (const Edge& e : edges) {
        const int ra = find(e.a), rb = find(e.b);
        if (ra == rb) continue;
        parent[ra] = rb;
        longest = std::max(longest, e.d);
        if (++joined == n - 1) break;
    }
    return longest;
}

/// Component count by union-find over an explicit symmetric weight accessor.
template <typename WeightFn>
int component_count_bruteforce(int n, WeightFn&& weight) {
    std::vector<int> parent(n);
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](int x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    };
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
            if (weight(i, j) > 0.0) parent[find(i)] = find(j);
    int count = 0;
    for (int i = 0; i < n; ++i)
        if (find(i) == i) ++count;
    return count;
}

/// Clustering accuracy by brute force over all k! cluster-to-class bijections
/// (k <= 8).
inline double accuracy_bruteforce(const std::vector<int>& truth, const std::vector<int>& pred) {
    std::vector<int> tvals(truth), pvals(pred);
    std::sort(tvals.begin(), tvals.end());
    tvals.erase(std::unique(tvals.begin(), tvals.end()), tvals.end());
    std::sort(pvals.begin(), pvals.end());
    pvals.erase(std::unique(pvals.begin(), pvals.end()), pvals.end());

    const int k = static_cast<int>(std::max(tvals.size(), pvals.size()));
    Eigen::MatrixXi table = Eigen::MatrixXi::Zero(k, k);
    for (std::size_t i = 0; i < truth.size(); ++i) {
        const int t = static_cast<int>(std::lower_bound(tvals.begin(), tvals.end(), truth[i]) - tvals.begin());
        const int p = static_cast<int>(std::lower_bound(pvals.begin(), pvals.end(), pred[i]) - pvals.begin());
        table(t, p) += 1;
    }
    std::vector<int> perm(k);
    std::iota(perm.begin(), perm.end(), 0);
    long best = 0;
    do {
        long matched = 0;
        for (int t = 0; t < k; ++t) matched += table(t, perm[t]);
        best = std::max(best, matched);
    } while (std::next_permutation(perm.begin(), perm.end()));
    return static_cast<double>(best) / static_cast<double>(truth.size());
}

/// NMI by direct summation over the contingency table.
inline double nmi_direct(const std::vector<int>& truth, const std::vector<int>& pred) {
    const int kt = *std::max_element(truth.begin(), truth.end()) + 1;
    const int kp = *std::max_element(pred.begin(), pred.end()) + 1;
    const double n = static_cast<double>(truth.size());
    Eigen::MatrixXd c = Eigen::MatrixXd::Zero(kt, kp);
    for (std::size_t i = 0; i < truth.size(); ++i) c(truth[i], pred[i]) += 1.0;

    double ht = 0.0, hp = 0.0, mi = 0.0;
    for (int i = 0; i < kt; ++i) {
        const double a = c.row(i).sum();
        if (a > 0) ht -= a / n * std::log(a / n);
    }
    for (int j = 0; j < kp; ++j) {
        const double b = c.col(j).sum();
        if (b > 0) hp -= b / n * std::log(b / n);
    }
    for (int i = 0; i < kt; ++i) {
        for (int j = 0; j < kp; ++j) {
            if (c(i, j) > 0) mi += c(i, j) / n * std::log(n * c(i, j) / (c.row(i).sum() * c.col(j).sum()));
        }
    }
    const double denom = std::sqrt(ht * hp);
    if (denom <= 0.0) return (ht == 0.0 && hp == 0.0) ? 1.0 : 0.0;
    return mi / denom;
}

/// ARI and pairwise F1 by O(N^2) enumeration of agreeing/disagreeing pairs.
struct PairCounts {
    long long both = 0, true_only = 0, pred_only = 0, neither = 0;
};

inline PairCounts enumerate_pairs(const std::vector<int>& truth, const std::vector<int>& pred) {
    PairCounts c;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        for (std::size_t j = i + 1; j < truth.size(); ++j) {
            const bool same_t = truth[i] == truth[j];
            const bool same_p = pred[i] == pred[j];
            if (same_t && same_p) {
                ++c.both;
            } else if (same_t) {
                ++c.true_only;
            } else if (same_p) {
                ++c.pred_only;
            } else {
                ++c.neither;
            }
        }
    }
    return c;
}

inline double ari_pairs(const std::vector<int>& truth, const std::vector<int>& pred) {
    const PairCounts c = enumerate_pairs(truth, pred);
    const double a = static_cast<double>(c.both);
    const double b = static_cast<double>(c.true_only);
    const double cc = static_cast<double>(c.pred_only);
    const double d = static_cast<double>(c.neither);
    const double total = a + b + cc + d;
    const double expected = (a + b) * (a + cc) / total;
    const double maximum = 0.5 * ((a + b) + (a + cc));
    if (maximum - expected == 0.0) return 1.0;
    return (a - expected) / (maximum - expected);
}

inline double f1_pairs(const std::vector<int>& truth, const std::vector<int>& pred) {
    const PairCounts c = enumerate_pairs(truth, pred);
    if (c.both == 0) return 0.0;
    const double precision = static_cast<double>(c.both) / static_cast<double>(c.both + c.pred_only);
    const double recall = static_cast<double>(c.both) / static_cast<double>(c.both + c.true_only);
    return 2.0 * precision * recall / (precision + recall);
}

/// Largest principal angle (radians) between the column spans of two
/// orthonormal-column matrices.
inline double principal_angle(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B) {
    Eigen::HouseholderQR<Eigen::MatrixXd> qa(A), qb(B);
    const Eigen::MatrixXd Qa = qa.householderQ() * Eigen::MatrixXd::Identity(A.rows(), A.cols());
    const Eigen::MatrixXd Qb = qb.householderQ() * Eigen::MatrixXd::Identity(B.rows(), B.cols());
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(Qa.transpose() * Qb);
    const double smallest_sv = svd.singularValues().minCoeff();
    return std::acos(std::clamp(smallest_sv, -1.0, 1.0));
}

} // namespace oracle
