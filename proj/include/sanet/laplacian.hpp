#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "sanet/affinity.hpp"

namespace sanet {

enum class LaplacianKind { unnormalized, sym, rw };

/// Graph Laplacian in the storage of its source affinity, together with the
/// degree vector. The rw kind is materialized for inspection; eigensolves
/// go through the sym system plus the D^{1/2} transform.
struct LaplacianMatrix {
    int n = 0;
    LaplacianKind kind = LaplacianKind::sym;
    bool sparse_storage = true;
    Eigen::SparseMatrix<double> sparse;
    Eigen::MatrixXd dense;
    Eigen::VectorXd degrees;
};

/// Row sums of W; throws IsolatedNodeError naming the first zero-degree node.
Eigen::VectorXd degree_vector(const AffinityGraph& g);

/// D - W, E - D^{-1/2} W D^{-1/2}, or E - D^{-1} W, preserving sparsity.
LaplacianMatrix laplacian(const AffinityGraph& g, LaplacianKind kind);

} // namespace sanet
