#include "sanet/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <string>

#include "sanet/errors.hpp"

namespace sanet {

namespace {

void check_lengths(const std::vector<int>& a, const std::vector<int>& b) {
    if (a.empty() || b.empty()) throw ParameterError("label vectors must be nonempty");
    if (a.size() != b.size()) {
        throw ConsistencyError("label vectors differ in length: " + std::to_string(a.size()) +
                               " vs " + std::to_string(b.size()));
    }
}

std::vector<int> compact_ids(const std::vector<int>& labels) {
    std::map<int, int> remap;
    for (int v : labels) remap.emplace(v, 0);
    int next = 0;
    for (auto& [k, v] : remap) v = next++;
    std::vector<int> out(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) out[i] = remap[labels[i]];
    return out;
}

std::int64_t choose2(std::int64_t x) { return x * (x - 1) / 2; }

/// O(n^3) Hungarian algorithm (min-cost assignment, potentials form) on a
/// square cost matrix.
std::int64_t hungarian_min_cost(const Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic>& cost) {
    const int n = static_cast<int>(cost.rows());
    const std::int64_t INF = std::numeric_limits<std::int64_t>::max() / 4;
    std::vector<std::int64_t> u(n + 1, 0), v(n + 1, 0);
    std::vector<int> match(n + 1, 0); // match[col] = row
    std::vector<int> way(n + 1, 0);

    for (int i = 1; i <= n; ++i) {
        match[0] = i;
        int j0 = 0;
        std::vector<std::int64_t> minv(n + 1, INF);
        std::vector<char> used(n + 1, false);
        do {
            used[j0] = true;
            const int i0 = match[j0];
            std::int64_t delta = INF;
            int j1 = 0;
            for (int j = 1; j <= n; ++j) {
                if (used[j]) continue;
                const std::int64_t cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (int j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[match[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (match[j0] != 0);
        do {
            const int j1 = way[j0];
            match[j0] = match[j1];
            j0 = j1;
        } while (j0 != 0);
    }

    std::int64_t total = 0;
    for (int j = 1; j <= n; ++j) {
        if (match[j] > 0) total += cost(match[j] - 1, j - 1);
    }
    return total;
}

} // namespace

ContingencyTable contingency_table(const std::vector<int>& true_labels,
                                   const std::vector<int>& pred_labels) {
    check_lengths(true_labels, pred_labels);
    const std::vector<int> t = compact_ids(true_labels);
    const std::vector<int> p = compact_ids(pred_labels);
    const int kt = *std::max_element(t.begin(), t.end()) + 1;
    const int kp = *std::max_element(p.begin(), p.end()) + 1;

    ContingencyTable table;
    table.counts = Eigen::MatrixXi::Zero(kt, kp);
    table.n = static_cast<std::int64_t>(t.size());
    for (std::size_t i = 0; i < t.size(); ++i) table.counts(t[i], p[i]) += 1;
    return table;
}

double accuracy(const std::vector<int>& true_labels, const std::vector<int>& pred_labels) {
    const ContingencyTable table = contingency_table(true_labels, pred_labels);
    const int n = static_cast<int>(std::max(table.counts.rows(), table.counts.cols()));

    // pad rectangular tables with zeros, negate to minimize
    Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic> cost =
        Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic>::Zero(n, n);
    for (int i = 0; i < table.counts.rows(); ++i)
        for (int j = 0; j < table.counts.cols(); ++j) cost(i, j) = -table.counts(i, j);

    const std::int64_t matched = -hungarian_min_cost(cost);
    return static_cast<double>(matched) / static_cast<double>(table.n);
}

double nmi(const std::vector<int>& true_labels, const std::vector<int>& pred_labels) {
    const ContingencyTable table = contingency_table(true_labels, pred_labels);
    const double n = static_cast<double>(table.n);

    double h_t = 0.0, h_p = 0.0, mi = 0.0;
    for (int i = 0; i < table.counts.rows(); ++i) {
        const double a = static_cast<double>(table.row_sum(i));
        if (a > 0) h_t -= (a / n) * std::log(a / n);
    }
    for (int j = 0; j < table.counts.cols(); ++j) {
        const double b = static_cast<double>(table.col_sum(j));
        if (b > 0) h_p -= (b / n) * std::log(b / n);
    }
    for (int i = 0; i < table.counts.rows(); ++i) {
        for (int j = 0; j < table.counts.cols(); ++j) {
            const double nij = table.counts(i, j);
            if (nij <= 0) continue;
            const double a = static_cast<double>(table.row_sum(i));
            const double b = static_cast<double>(table.col_sum(j));
            mi += (nij / n) * std::log(n * nij / (a * b));
        }
    }
    const double denom = std::sqrt(h_t * h_p);
    if (denom <= 0.0) {
        // both partitions trivial: identical single-cluster partitions agree
        return (h_t == 0.0 && h_p == 0.0) ? 1.0 : 0.0;
    }
    return std::clamp(mi / denom, 0.0, 1.0);
}

double ari(const std::vector<int>& true_labels, const std::vector<int>& pred_labels) {
    const ContingencyTable table = contingency_table(true_labels, pred_labels);

    std::int64_t sum_ij = 0, sum_a = 0, sum_b = 0;
    for (int i = 0; i < table.counts.rows(); ++i)
        for (int j = 0; j < table.counts.cols(); ++j) sum_ij += choose2(table.counts(i, j));
    for (int i = 0; i < table.counts.rows(); ++i) sum_a += choose2(table.row_sum(i));
    for (int j = 0; j < table.counts.cols(); ++j) sum_b += choose2(table.col_sum(j));
    const std::int64_t pairs = choose2(table.n);

    const double expected = pairs > 0 ? static_cast<double>(sum_a) * static_cast<double>(sum_b) /
                                            static_cast<double>(pairs)
                                      : 0.0;
    const double maximum = 0.5 * (static_cast<double>(sum_a) + static_cast<double>(sum_b));
    const double denom = maximum - expected;
    if (denom == 0.0) {
        // both partitions all-singletons or both one cluster: identical, and
        // the index is 1 by convention
        return 1.0;
    }
    return (static_cast<double>(sum_ij) - expected) / denom;
}

double pairwise_f1(const std::vector<int>& true_labels, const std::vector<int>& pred_labels) {
    const ContingencyTable table = contingency_table(true_labels, pred_labels);

    std::int64_t tp = 0, same_true = 0, same_pred = 0;
    for (int i = 0; i < table.counts.rows(); ++i)
        for (int j = 0; j < table.counts.cols(); ++j) tp += choose2(table.counts(i, j));
    for (int i = 0; i < table.counts.rows(); ++i) same_true += choose2(table.row_sum(i));
    for (int j = 0; j < table.counts.cols(); ++j) same_pred += choose2(table.col_sum(j));

    if (tp == 0) return 0.0;
    const double precision = static_cast<double>(tp) / static_cast<double>(same_pred);
    const double recall = static_cast<double>(tp) / static_cast<double>(same_true);
    return 2.0 * precision * recall / (precision + recall);
}

double calinski_harabasz(const Eigen::MatrixXd& points, const std::vector<int>& labels) {
    const Eigen::Index n = points.rows();
    if (static_cast<std::size_t>(n) != labels.size())
        throw ConsistencyError("points and labels differ in length");

    const std::vector<int> ids = compact_ids(labels);
    const int k = *std::max_element(ids.begin(), ids.end()) + 1;
    if (k < 2) throw ParameterError("calinski_harabasz needs at least 2 clusters");
    if (n <= k) throw ParameterError("calinski_harabasz needs N > k");

    Eigen::MatrixXd centers = Eigen::MatrixXd::Zero(k, points.cols());
    Eigen::VectorXd counts = Eigen::VectorXd::Zero(k);
    for (Eigen::Index i = 0; i < n; ++i) {
        centers.row(ids[i]) += points.row(i);
        counts[ids[i]] += 1.0;
    }
    for (int c = 0; c < k; ++c) {
        if (counts[c] == 0.0) throw ParameterError("cluster " + std::to_string(c) + " is empty");
        centers.row(c) /= counts[c];
    }
    const Eigen::RowVectorXd grand = points.colwise().mean();

    double within = 0.0, between = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        within += (points.row(i) - centers.row(ids[i])).squaredNorm();
    }
    for (int c = 0; c < k; ++c) {
        between += counts[c] * (centers.row(c) - grand).squaredNorm();
    }

    if (within <= 0.0 && between <= 0.0)
        throw DegenerateMetricError("all points identical: within and between scatter are both zero");
    if (within <= 0.0)
        throw DegenerateMetricError("infinite separation: zero within-cluster scatter");

    return (between / (k - 1)) / (within / (static_cast<double>(n) - k));
}

} // namespace sanet
