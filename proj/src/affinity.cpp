#include "sanet/affinity.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "sanet/errors.hpp"
#include "sanet/parallel.hpp"

namespace sanet {

namespace {

constexpr Eigen::Index kRowBlock = 512;
// vectorized exp() clamps instead of flushing to zero; anything this small
// is an underflowed kernel value
constexpr double kKernelUnderflow = 1e-300;
constexpr Eigen::Index kColBlock = 8192;

/// Squared distances of a row block against a column block:
/// ||x_i||^2 + ||x_j||^2 - 2 x_i.x_j, clamped at zero.
void block_sq_dist(const Eigen::MatrixXd& X, const Eigen::VectorXd& sq_norms, Eigen::Index r0,
                   Eigen::Index rn, Eigen::Index c0, Eigen::Index cn, Eigen::MatrixXd& out) {
    out.noalias() = X.middleRows(r0, rn) * X.middleRows(c0, cn).transpose();
    out = (-2.0 * out).colwise() + sq_norms.segment(r0, rn);
    out.rowwise() += sq_norms.segment(c0, cn).transpose();
    out = out.cwiseMax(0.0);
}

struct Candidate {
    double d2;
    int idx;
    bool operator<(const Candidate& o) const { // better = smaller (d2, idx)
        return d2 < o.d2 || (d2 == o.d2 && idx < o.idx);
    }
};

/// Disjoint-set forest for component counting.
class UnionFind {
public:
    explicit UnionFind(int n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), 0); }
    int find(int x) {
        while (parent_[x] != x) x = parent_[x] = parent_[parent_[x]];
        return x;
    }
    void unite(int a, int b) {
        a = find(a);
        b = find(b);
        if (a != b) parent_[a] = b;
    }
    int components() {
        int c = 0;
        for (int i = 0; i < static_cast<int>(parent_.size()); ++i)
            if (find(i) == i) ++c;
        return c;
    }

private:
    std::vector<int> parent_;
};

AffinityGraph make_sparse_graph(int n, GraphKind kind,
                                const std::vector<Eigen::Triplet<double>>& triplets) {
    AffinityGraph g;
    g.n = n;
    g.kind = kind;
    g.sparse_storage = true;
    g.sparse.resize(n, n);
    g.sparse.setFromTriplets(triplets.begin(), triplets.end(),
                             [](const double&, const double&) { return 1.0; });
    g.sparse.prune(0.0);
    g.sparse.makeCompressed();
    return g;
}

} // namespace

std::string describe(const GraphKind& kind) {
    std::ostringstream os;
    if (const auto* k = std::get_if<KnnKind>(&kind)) {
        os << "knn(k=" << k->k << ")";
    } else if (const auto* e = std::get_if<EpsKind>(&kind)) {
        os << "eps(" << e->eps << ")";
    } else if (const auto* f = std::get_if<FullKind>(&kind)) {
        os << "full(sigma=" << f->sigma << ")";
    } else {
        os << "selftune(K=" << std::get<SelfTuneKind>(kind).K << ")";
    }
    return os.str();
}

NeighborLists k_nearest_neighbors(const Eigen::MatrixXd& points, int k) {
    const Eigen::Index n = points.rows();
    if (k < 1) throw ParameterError("k must be positive");
    if (k >= n) throw ParameterError("k = " + std::to_string(k) + " must be below N = " + std::to_string(n));

    const Eigen::VectorXd sq_norms = points.rowwise().squaredNorm();
    NeighborLists out;
    out.indices.resize(n, k);
    out.distances.resize(n, k);

    const int n_row_blocks = static_cast<int>((n + kRowBlock - 1) / kRowBlock);
    parallel::for_each_index(n_row_blocks, [&](int rb) {
        const Eigen::Index r0 = static_cast<Eigen::Index>(rb) * kRowBlock;
        const Eigen::Index rn = std::min(kRowBlock, n - r0);
        // bounded worst-of-k heaps, one per row of the block
        std::vector<std::vector<Candidate>> heaps(rn);
        for (auto& h : heaps) h.reserve(k + 1);
        Eigen::MatrixXd d2;
        for (Eigen::Index c0 = 0; c0 < n; c0 += kColBlock) {
            const Eigen::Index cn = std::min(kColBlock, n - c0);
            block_sq_dist(points, sq_norms, r0, rn, c0, cn, d2);
            for (Eigen::Index r = 0; r < rn; ++r) {
                auto& heap = heaps[r];
                for (Eigen::Index c = 0; c < cn; ++c) {
                    const int j = static_cast<int>(c0 + c);
                    if (j == static_cast<int>(r0 + r)) continue;
                    Candidate cand{d2(r, c), j};
                    if (static_cast<int>(heap.size()) < k) {
                        heap.push_back(cand);
                        std::push_heap(heap.begin(), heap.end());
                    } else if (cand < heap.front()) {
                        std::pop_heap(heap.begin(), heap.end());
                        heap.back() = cand;
                        std::push_heap(heap.begin(), heap.end());
                    }
                }
            }
        }
        for (Eigen::Index r = 0; r < rn; ++r) {
            auto& heap = heaps[r];
            std::sort(heap.begin(), heap.end());
            for (int j = 0; j < k; ++j) {
                out.indices(r0 + r, j) = heap[j].idx;
                out.distances(r0 + r, j) = std::sqrt(heap[j].d2);
            }
        }
    });
    return out;
}

RadiusPairs pairs_within_radius(const Eigen::MatrixXd& points, double radius) {
    const Eigen::Index n = points.rows();
    // tiny relative slack: block and single-row distance kernels round
    // differently, and the eta-radius graph must keep its MST edges
    const double r2 = radius * radius * (1.0 + 1e-12);
    const Eigen::VectorXd sq_norms = points.rowwise().squaredNorm();

    const int n_row_blocks = static_cast<int>((n + kRowBlock - 1) / kRowBlock);
    std::vector<RadiusPairs> partial(n_row_blocks);
    parallel::for_each_index(n_row_blocks, [&](int rb) {
        const Eigen::Index r0 = static_cast<Eigen::Index>(rb) * kRowBlock;
        const Eigen::Index rn = std::min(kRowBlock, n - r0);
        RadiusPairs& mine = partial[rb];
        Eigen::MatrixXd d2;
        for (Eigen::Index c0 = r0; c0 < n; c0 += kColBlock) {
            const Eigen::Index cn = std::min(kColBlock, n - c0);
            block_sq_dist(points, sq_norms, r0, rn, c0, cn, d2);
            for (Eigen::Index r = 0; r < rn; ++r) {
                const int i = static_cast<int>(r0 + r);
                for (Eigen::Index c = 0; c < cn; ++c) {
                    const int j = static_cast<int>(c0 + c);
                    if (j <= i) continue; // upper triangle only
                    if (d2(r, c) <= r2) {
                        mine.first.push_back(i);
                        mine.second.push_back(j);
                        mine.distance.push_back(std::sqrt(d2(r, c)));
                    }
                }
            }
        }
    });

    RadiusPairs all;
    for (const RadiusPairs& p : partial) {
        all.first.insert(all.first.end(), p.first.begin(), p.first.end());
        all.second.insert(all.second.end(), p.second.begin(), p.second.end());
        all.distance.insert(all.distance.end(), p.distance.begin(), p.distance.end());
    }
    return all;
}

AffinityGraph knn_graph(const Eigen::MatrixXd& points, int k) {
    const Eigen::Index n = points.rows();
    if (n < 2) throw ParameterError("knn_graph needs at least 2 points");
    NeighborLists nn = k_nearest_neighbors(points, k);

    std::vector<Eigen::Triplet<double>> triplets;
    triplets.reserve(static_cast<std::size_t>(n) * k * 2);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (int j = 0; j < k; ++j) {
            const int other = nn.indices(i, j);
            triplets.emplace_back(static_cast<int>(i), other, 1.0);
            triplets.emplace_back(other, static_cast<int>(i), 1.0);
        }
    }
    return make_sparse_graph(static_cast<int>(n), KnnKind{k}, triplets);
}

double mst_longest_edge(const Eigen::MatrixXd& points) {
    const Eigen::Index n = points.rows();
    if (n < 2) throw ParameterError("mst_longest_edge needs at least 2 points");

    const Eigen::VectorXd sq_norms = points.rowwise().squaredNorm();
    Eigen::VectorXd best(n);
    std::vector<bool> in_tree(n, false);

    // Prim over the implicit complete graph; one vectorized distance row
    // per added node.
    auto dist_row_from = [&](Eigen::Index j, Eigen::VectorXd& out) {
        out.noalias() = points * points.row(j).transpose();
        out = (-2.0 * out).array() + sq_norms.array() + sq_norms[j];
        out = out.cwiseMax(0.0);
    };

    Eigen::VectorXd row(n);
    dist_row_from(0, best);
    in_tree[0] = true;
    double longest_sq = 0.0;
    for (Eigen::Index step = 1; step < n; ++step) {
        Eigen::Index pick = -1;
        double pick_d2 = std::numeric_limits<double>::infinity();
        for (Eigen::Index j = 0; j < n; ++j) {
            if (!in_tree[j] && best[j] < pick_d2) {
                pick_d2 = best[j];
                pick = j;
            }
        }
        in_tree[pick] = true;
        longest_sq = std::max(longest_sq, pick_d2);
        if (step + 1 < n) {
            dist_row_from(pick, row);
            best = best.cwiseMin(row);
        }
    }
    return std::sqrt(longest_sq);
}

AffinityGraph eps_graph(const Eigen::MatrixXd& points, double eps) {
    if (eps <= 0.0) throw ParameterError("eps must be positive");
    const Eigen::Index n = points.rows();
    RadiusPairs pairs = pairs_within_radius(points, eps);

    std::vector<Eigen::Triplet<double>> triplets;
    triplets.reserve(pairs.first.size() * 2);
    for (std::size_t p = 0; p < pairs.first.size(); ++p) {
        triplets.emplace_back(pairs.first[p], pairs.second[p], 1.0);
        triplets.emplace_back(pairs.second[p], pairs.first[p], 1.0);
    }
    return make_sparse_graph(static_cast<int>(n), EpsKind{eps}, triplets);
}

AffinityGraph full_gaussian_graph(const Eigen::MatrixXd& points, double sigma) {
    if (sigma <= 0.0) throw ParameterError("sigma must be positive");
    const Eigen::Index n = points.rows();
    const double inv = 1.0 / (2.0 * sigma * sigma);

    AffinityGraph g;
    g.n = static_cast<int>(n);
    g.kind = FullKind{sigma};
    g.sparse_storage = false;
    g.dense.resize(n, n);

    const Eigen::VectorXd sq_norms = points.rowwise().squaredNorm();
    const int n_row_blocks = static_cast<int>((n + kRowBlock - 1) / kRowBlock);
    parallel::for_each_index(n_row_blocks, [&](int rb) {
        const Eigen::Index r0 = static_cast<Eigen::Index>(rb) * kRowBlock;
        const Eigen::Index rn = std::min(kRowBlock, n - r0);
        Eigen::MatrixXd d2;
        block_sq_dist(points, sq_norms, r0, rn, 0, n, d2);
        d2 = (-inv * d2.array()).exp();
        g.dense.middleRows(r0, rn) = (d2.array() < kKernelUnderflow).select(0.0, d2);
    });
    // exact symmetry: mirror the upper triangle
    for (Eigen::Index i = 0; i < n; ++i) {
        g.dense(i, i) = 0.0;
        for (Eigen::Index j = i + 1; j < n; ++j) g.dense(j, i) = g.dense(i, j);
    }
    return g;
}

AffinityGraph self_tuning_graph(const Eigen::MatrixXd& points, int K) {
    const Eigen::Index n = points.rows();
    if (K < 1 || K >= n)
        throw ParameterError("self-tuning K = " + std::to_string(K) + " must lie in [1, N)");

    NeighborLists nn = k_nearest_neighbors(points, K);
    Eigen::VectorXd sigma = nn.distances.col(K - 1);

    // floor local scales so duplicate points cannot divide by zero; the
    // centroid radius bounds the max pairwise distance within a factor of 2
    const Eigen::RowVectorXd centroid = points.colwise().mean();
    const double radius = (points.rowwise() - centroid).rowwise().norm().maxCoeff();
    const double floor = 1e-12 * std::max(2.0 * radius, 1e-300);
    for (Eigen::Index i = 0; i < n; ++i) sigma[i] = std::max(sigma[i], floor);

    AffinityGraph g;
    g.n = static_cast<int>(n);
    g.kind = SelfTuneKind{K};
    g.sparse_storage = false;
    g.dense.resize(n, n);

    const Eigen::VectorXd sq_norms = points.rowwise().squaredNorm();
    const int n_row_blocks = static_cast<int>((n + kRowBlock - 1) / kRowBlock);
    parallel::for_each_index(n_row_blocks, [&](int rb) {
        const Eigen::Index r0 = static_cast<Eigen::Index>(rb) * kRowBlock;
        const Eigen::Index rn = std::min(kRowBlock, n - r0);
        Eigen::MatrixXd d2;
        block_sq_dist(points, sq_norms, r0, rn, 0, n, d2);
        for (Eigen::Index r = 0; r < rn; ++r) {
            for (Eigen::Index j = 0; j < n; ++j) {
                const double w = std::exp(-d2(r, j) / (sigma[r0 + r] * sigma[j]));
                d2(r, j) = w < kKernelUnderflow ? 0.0 : w;
            }
        }
        g.dense.middleRows(r0, rn) = d2;
    });
    for (Eigen::Index i = 0; i < n; ++i) {
        g.dense(i, i) = 0.0;
        for (Eigen::Index j = i + 1; j < n; ++j) g.dense(j, i) = g.dense(i, j);
    }
    return g;
}

int component_count(const AffinityGraph& g) {
    UnionFind uf(g.n);
    if (g.sparse_storage) {
        for (int outer = 0; outer < g.sparse.outerSize(); ++outer) {
            for (Eigen::SparseMatrix<double>::InnerIterator it(g.sparse, outer); it; ++it) {
                if (it.value() > 0.0) uf.unite(static_cast<int>(it.row()), static_cast<int>(it.col()));
            }
        }
    } else {
        for (Eigen::Index i = 0; i < g.dense.rows(); ++i) {
            for (Eigen::Index j = i + 1; j < g.dense.cols(); ++j) {
                if (g.dense(i, j) > 0.0) uf.unite(static_cast<int>(i), static_cast<int>(j));
            }
        }
    }
    return uf.components();
}

} // namespace sanet
