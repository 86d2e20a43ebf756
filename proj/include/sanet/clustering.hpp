#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "sanet/eigensolver.hpp"

namespace sanet {

/// One (affinity, Laplacian, solver, n_eig) combination — a single spectral
/// analysis procedure.
struct ProcedureSpec {
    GraphKind affinity = KnnKind{9};
    LaplacianKind laplacian = LaplacianKind::sym;
    SolverKind solver = SolverKind::lanczos;
    int n_eig = 16;

    /// knn/eps graphs pair with lanczos or dense; dense kernels with
    /// nystrom, minibatch, or dense. Throws ParameterError otherwise.
    void validate() const;

    /// Stable text form; also the RNG stream key for the procedure.
    std::string canonical() const;
};

struct ClusteringResult {
    std::vector<int> labels;     // cluster ids in [0, k)
    Eigen::MatrixXd centers;     // k x d
    double inertia = 0.0;        // min over restarts
    int restarts_used = 0;
};

/// Lloyd iterations from k-means++ seeding until the assignment fixpoint or
/// 300 rounds; best of `restarts` runs by inertia (ties toward the earlier
/// restart). Empty clusters are repaired by re-seeding the farthest point.
ClusteringResult kmeans(const Eigen::MatrixXd& points, int k, int restarts, std::uint64_t seed);

/// Algorithm-1 baseline: affinity -> Laplacian -> k smallest eigenvectors ->
/// k-means on the embedding rows.
ClusteringResult spectral_cluster(const Eigen::MatrixXd& points, int k, const ProcedureSpec& proc,
                                  std::uint64_t seed, int kmeans_restarts = 10);

/// Parameter-resolving helper: multiplier-of-eta eps specs need the point
/// set. Returns the materialized affinity graph for `proc` on `points`.
AffinityGraph build_affinity(const Eigen::MatrixXd& points, const GraphKind& kind);

} // namespace sanet
