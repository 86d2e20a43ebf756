#include "sanet/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "sanet/errors.hpp"
#include "sanet/parallel.hpp"
#include "sanet/rng.hpp"

namespace sanet {

void ProcedureSpec::validate() const {
    const bool sparse_affinity =
        std::holds_alternative<KnnKind>(affinity) || std::holds_alternative<EpsKind>(affinity);
    const bool ok = sparse_affinity
                        ? (solver == SolverKind::lanczos || solver == SolverKind::dense)
                        : (solver == SolverKind::nystrom || solver == SolverKind::minibatch ||
                           solver == SolverKind::dense);
    if (!ok) {
        throw ParameterError("procedure " + canonical() + ": solver " + to_string(solver) +
                             " does not pair with this affinity");
    }
    if (n_eig < 1) throw ParameterError("procedure n_eig must be positive");
    if (laplacian == LaplacianKind::unnormalized)
        throw ParameterError("unnormalized Laplacian is not a production embedding choice");
}

std::string ProcedureSpec::canonical() const {
    std::ostringstream os;
    if (const auto* k = std::get_if<KnnKind>(&affinity)) {
        os << "knn:" << k->k;
    } else if (const auto* e = std::get_if<EpsKind>(&affinity)) {
        os << "eps:" << e->eps; // multiplier of eta inside procedure specs
    } else if (const auto* f = std::get_if<FullKind>(&affinity)) {
        os << "full:" << f->sigma;
    } else {
        os << "selftune:" << std::get<SelfTuneKind>(affinity).K;
    }
    os << "/" << (laplacian == LaplacianKind::sym ? "sym" : "rw");
    os << "/" << to_string(solver) << "/" << n_eig;
    return os.str();
}

AffinityGraph build_affinity(const Eigen::MatrixXd& points, const GraphKind& kind) {
    if (const auto* k = std::get_if<KnnKind>(&kind)) {
        return knn_graph(points, k->k);
    }
    if (const auto* e = std::get_if<EpsKind>(&kind)) {
        const double eta = mst_longest_edge(points);
        return eps_graph(points, e->eps * eta);
    }
    if (const auto* f = std::get_if<FullKind>(&kind)) {
        return full_gaussian_graph(points, f->sigma);
    }
    return self_tuning_graph(points, std::get<SelfTuneKind>(kind).K);
}

namespace {

struct KmeansRun {
    std::vector<int> labels;
    Eigen::MatrixXd centers;
    double inertia = std::numeric_limits<double>::infinity();
};

void assign_points(const Eigen::MatrixXd& points, const Eigen::MatrixXd& centers,
                   std::vector<int>& labels, Eigen::VectorXd& dist2) {
    const Eigen::Index n = points.rows();
    const int k = static_cast<int>(centers.rows());
    for (Eigen::Index i = 0; i < n; ++i) {
        int best = 0;
        double best_d = (points.row(i) - centers.row(0)).squaredNorm();
        for (int c = 1; c < k; ++c) {
            const double d = (points.row(i) - centers.row(c)).squaredNorm();
            if (d < best_d) {
                best_d = d;
                best = c;
            }
        }
        labels[i] = best;
        dist2[i] = best_d;
    }
}

KmeansRun kmeans_single(const Eigen::MatrixXd& points, int k, Rng rng) {
    const Eigen::Index n = points.rows();
    const Eigen::Index d = points.cols();

    // k-means++ seeding
    Eigen::MatrixXd centers(k, d);
    std::vector<char> is_center(n, 0);
    {
        const Eigen::Index first = static_cast<Eigen::Index>(rng.uniform_int(n));
        centers.row(0) = points.row(first);
        is_center[first] = 1;
        Eigen::VectorXd dist2(n);
        for (Eigen::Index i = 0; i < n; ++i)
            dist2[i] = (points.row(i) - centers.row(0)).squaredNorm();
        for (int c = 1; c < k; ++c) {
            const double total = dist2.sum();
            Eigen::Index pick = -1;
            if (total > 0.0) {
                const double target = rng.uniform() * total;
                double cum = 0.0;
                for (Eigen::Index i = 0; i < n; ++i) {
                    cum += dist2[i];
                    if (cum >= target) {
                        pick = i;
                        break;
                    }
                }
                if (pick < 0) pick = n - 1;
            } else {
                // every remaining point coincides with a center
                for (Eigen::Index i = 0; i < n; ++i) {
                    if (!is_center[i]) {
                        pick = i;
                        break;
                    }
                }
                if (pick < 0) pick = static_cast<Eigen::Index>(rng.uniform_int(n));
            }
            centers.row(c) = points.row(pick);
            is_center[pick] = 1;
            for (Eigen::Index i = 0; i < n; ++i)
                dist2[i] = std::min(dist2[i], (points.row(i) - centers.row(c)).squaredNorm());
        }
    }

    std::vector<int> labels(n, -1), prev(n, -2);
    Eigen::VectorXd dist2(n);
    for (int iter = 0; iter < 300; ++iter) {
        assign_points(points, centers, labels, dist2);

        // repair empty clusters with the farthest point (lowest index wins ties)
        Eigen::VectorXi counts = Eigen::VectorXi::Zero(k);
        for (Eigen::Index i = 0; i < n; ++i) counts[labels[i]] += 1;
        bool repaired = false;
        for (int c = 0; c < k; ++c) {
            if (counts[c] != 0) continue;
            Eigen::Index far = 0;
            double far_d = -1.0;
            for (Eigen::Index i = 0; i < n; ++i) {
                if (counts[labels[i]] > 1 && dist2[i] > far_d) {
                    far_d = dist2[i];
                    far = i;
                }
            }
            counts[labels[far]] -= 1;
            labels[far] = c;
            counts[c] = 1;
            centers.row(c) = points.row(far);
            dist2[far] = 0.0;
            repaired = true;
        }

        if (!repaired && labels == prev) break;
        prev = labels;

        centers.setZero();
        Eigen::VectorXd sizes = Eigen::VectorXd::Zero(k);
        for (Eigen::Index i = 0; i < n; ++i) {
            centers.row(labels[i]) += points.row(i);
            sizes[labels[i]] += 1.0;
        }
        for (int c = 0; c < k; ++c) {
            if (sizes[c] > 0) centers.row(c) /= sizes[c];
        }
    }

    assign_points(points, centers, labels, dist2);
    KmeansRun run;
    run.labels = std::move(labels);
    run.centers = std::move(centers);
    run.inertia = dist2.sum();
    return run;
}

} // namespace

ClusteringResult kmeans(const Eigen::MatrixXd& points, int k, int restarts, std::uint64_t seed) {
    const Eigen::Index n = points.rows();
    if (k < 1) throw ParameterError("k must be positive");
    if (k > n)
        throw ParameterError("k = " + std::to_string(k) + " exceeds point count " + std::to_string(n));
    if (restarts < 1) throw ParameterError("restarts must be positive");

    Rng root(seed);
    std::vector<KmeansRun> runs(restarts);
    parallel::for_each_index(restarts, [&](int r) {
        runs[r] = kmeans_single(points, k, root.derive("kmeans/restart", static_cast<std::uint64_t>(r)));
    });

    int best = 0;
    for (int r = 1; r < restarts; ++r) {
        if (runs[r].inertia < runs[best].inertia) best = r;
    }
    ClusteringResult result;
    result.labels = std::move(runs[best].labels);
    result.centers = std::move(runs[best].centers);
    result.inertia = runs[best].inertia;
    result.restarts_used = restarts;
    return result;
}

ClusteringResult spectral_cluster(const Eigen::MatrixXd& points, int k, const ProcedureSpec& proc,
                                  std::uint64_t seed, int kmeans_restarts) {
    ProcedureSpec p = proc;
    p.n_eig = k; // Algorithm 1: k eigenvectors for k clusters
    p.validate();

    AffinityGraph g = build_affinity(points, p.affinity);
    SolverBudget budget;
    budget.n_eig = k;
    budget.n_iter = 1000;
    budget.seed = Rng(seed).derive("spectral_cluster/" + p.canonical()).key();
    SpectralEmbedding e = solve_laplacian(g, p.laplacian, p.solver, budget);

    return kmeans(e.rows, k, kmeans_restarts, Rng(seed).derive("spectral_cluster/kmeans").key());
}

} // namespace sanet
