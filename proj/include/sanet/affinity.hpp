#pragma once

#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "sanet/errors.hpp"

namespace sanet {

/// How a graph was built; the parameter is part of the record.
struct KnnKind {
    int k = 0;
};
struct EpsKind {
    double eps = 0.0;
};
struct FullKind {
    double sigma = 0.0;
};
struct SelfTuneKind {
    int K = 7;
};
using GraphKind = std::variant<KnnKind, EpsKind, FullKind, SelfTuneKind>;

std::string describe(const GraphKind& kind);

/// Symmetric nonnegative similarity matrix with zero diagonal, stored
/// sparse (neighborhood graphs) or dense (Gaussian kernels).
struct AffinityGraph {
    int n = 0;
    GraphKind kind;
    bool sparse_storage = true;
    Eigen::SparseMatrix<double> sparse; // compressed, no explicit zeros
    Eigen::MatrixXd dense;

    double weight(int i, int j) const {
        return sparse_storage ? sparse.coeff(i, j) : dense(i, j);
    }
};

/// Binary k-nearest-neighbor graph under union symmetrization: (i,j) is an
/// edge iff either point ranks the other among its k nearest. Distance ties
/// break toward the lower index.
AffinityGraph knn_graph(const Eigen::MatrixXd& points, int k);

/// Length of the longest edge of a Euclidean minimum spanning tree over the
/// complete graph (Prim over implicit distances).
double mst_longest_edge(const Eigen::MatrixXd& points);

/// Binary graph connecting every pair within distance eps (inclusive).
AffinityGraph eps_graph(const Eigen::MatrixXd& points, double eps);

/// Dense Gaussian kernel w_ij = exp(-||x_i-x_j||^2 / (2 sigma^2)), zero
/// diagonal.
AffinityGraph full_gaussian_graph(const Eigen::MatrixXd& points, double sigma);

/// Dense locally scaled kernel w_ij = exp(-||x_i-x_j||^2 / (sigma_i sigma_j))
/// where sigma_i is the distance from i to its K-th nearest neighbor,
/// floored at 1e-12 times the largest pairwise distance.
AffinityGraph self_tuning_graph(const Eigen::MatrixXd& points, int K = 7);

/// Number of connected components, treating any positive weight as an edge.
int component_count(const AffinityGraph& g);

// --- shared distance machinery (also used by the spectral layer) ---------

/// For every row of `points`, the indices and distances of its k nearest
/// other rows, ascending with index tie-break. Runs in column blocks so the
/// full distance matrix is never materialized.
struct NeighborLists {
    Eigen::MatrixXi indices;   // N x k
    Eigen::MatrixXd distances; // N x k
};
NeighborLists k_nearest_neighbors(const Eigen::MatrixXd& points, int k);

/// All unordered pairs within `radius` (inclusive), as (i, j, distance) with
/// i < j. Order is deterministic: by i, then j.
struct RadiusPairs {
    std::vector<int> first;
    std::vector<int> second;
    std::vector<double> distance;
};
RadiusPairs pairs_within_radius(const Eigen::MatrixXd& points, double radius);

} // namespace sanet
