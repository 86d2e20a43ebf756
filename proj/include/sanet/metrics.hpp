#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "sanet/errors.hpp"

namespace sanet {

/// k_true x k_pred co-occurrence counts; the shared substrate of the
/// agreement metrics.
struct ContingencyTable {
    Eigen::MatrixXi counts;
    std::int64_t n = 0;

    std::int64_t row_sum(int i) const { return counts.row(i).sum(); }
    std::int64_t col_sum(int j) const { return counts.col(j).sum(); }
};

ContingencyTable contingency_table(const std::vector<int>& true_labels,
                                   const std::vector<int>& pred_labels);

/// Best one-to-one cluster-to-class matched fraction (Hungarian assignment
/// on the negated contingency table).
double accuracy(const std::vector<int>& true_labels, const std::vector<int>& pred_labels);

/// I(T;P) / sqrt(H(T) H(P)), natural logs; 0/0 resolves to 0, except two
/// identical trivial partitions, which agree perfectly and give 1.
double nmi(const std::vector<int>& true_labels, const std::vector<int>& pred_labels);

/// Hubert-Arabie adjusted Rand index; pair counts in exact integers.
double ari(const std::vector<int>& true_labels, const std::vector<int>& pred_labels);

/// Harmonic mean of same-cluster pair precision and recall; 0 when no pair
/// is jointly grouped.
double pairwise_f1(const std::vector<int>& true_labels, const std::vector<int>& pred_labels);

/// [tr(B)/(k-1)] / [tr(W)/(N-k)] with between/within scatter B and W.
/// Zero within-scatter raises DegenerateMetricError ("infinite separation")
/// instead of returning an infinity.
double calinski_harabasz(const Eigen::MatrixXd& points, const std::vector<int>& labels);

} // namespace sanet
