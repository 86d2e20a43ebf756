#include "sanet/layers.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <optional>

#include "sanet/errors.hpp"
#include "sanet/parallel.hpp"
#include "sanet/rng.hpp"

namespace sanet {

namespace {

using Clock = std::chrono::steady_clock;

// see affinity.cpp: vectorized exp() clamps instead of flushing to zero
constexpr double kKernelUnderflow = 1e-300;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

/// Shared geometry/graph state for one spectral layer's point set. When the
/// point count fits the dense limit, one squared-distance matrix backs every
/// procedure; beyond it each path streams its own blocked passes.
struct LayerContext {
    Eigen::MatrixXd X; // (images * patches) x dim, ordered (image, row, col)
    int images = 0;
    int grid_rows = 0;
    int grid_cols = 0;

    Eigen::MatrixXd d2; // cached pairwise squared distances (may be empty)
    std::optional<NeighborLists> neighbors; // to the largest k any procedure needs
    std::optional<double> eta;
    std::optional<RadiusPairs> eps_pairs;   // pairs within max multiplier * eta
    double max_eps = 0.0;

    bool cached() const { return d2.size() > 0; }
};

int knn_k(const ProcedureSpec& p) {
    if (const auto* k = std::get_if<KnnKind>(&p.affinity)) return k->k;
    return 0;
}

Eigen::MatrixXd pairwise_sq_dist(const Eigen::MatrixXd& X) {
    const Eigen::Index n = X.rows();
    const Eigen::VectorXd sq = X.rowwise().squaredNorm();
    Eigen::MatrixXd d2(n, n);
    constexpr Eigen::Index block = 1024;
    const int n_blocks = static_cast<int>((n + block - 1) / block);
    parallel::for_each_index(n_blocks, [&](int bi) {
        const Eigen::Index r0 = static_cast<Eigen::Index>(bi) * block;
        const Eigen::Index rn = std::min(block, n - r0);
        Eigen::MatrixXd part;
        part.noalias() = X.middleRows(r0, rn) * X.transpose();
        part = (-2.0 * part).colwise() + sq.segment(r0, rn);
        part.rowwise() += sq.transpose();
        d2.middleRows(r0, rn) = part.cwiseMax(0.0);
    });
    return d2;
}

NeighborLists neighbors_from_cache(const Eigen::MatrixXd& d2, int k) {
    const Eigen::Index n = d2.rows();
    NeighborLists out;
    out.indices.resize(n, k);
    out.distances.resize(n, k);
    std::vector<std::pair<double, int>> row;
    row.reserve(n - 1);
    for (Eigen::Index i = 0; i < n; ++i) {
        row.clear();
        for (Eigen::Index j = 0; j < n; ++j) {
            if (j != i) row.emplace_back(d2(i, j), static_cast<int>(j));
        }
        std::partial_sort(row.begin(), row.begin() + k, row.end());
        for (int j = 0; j < k; ++j) {
            out.indices(i, j) = row[j].second;
            out.distances(i, j) = std::sqrt(row[j].first);
        }
    }
    return out;
}

double mst_longest_edge_from_cache(const Eigen::MatrixXd& d2) {
    const Eigen::Index n = d2.rows();
    Eigen::VectorXd best = d2.row(0);
    std::vector<bool> in_tree(n, false);
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
        best = best.cwiseMin(d2.row(pick).transpose());
    }
    return std::sqrt(longest_sq);
}

RadiusPairs pairs_from_cache(const Eigen::MatrixXd& d2, double radius) {
    const double r2 = radius * radius * (1.0 + 1e-12); // see pairs_within_radius

    RadiusPairs pairs;
    for (Eigen::Index i = 0; i < d2.rows(); ++i) {
        for (Eigen::Index j = i + 1; j < d2.cols(); ++j) {
            if (d2(i, j) <= r2) {
                pairs.first.push_back(static_cast<int>(i));
                pairs.second.push_back(static_cast<int>(j));
                pairs.distance.push_back(std::sqrt(d2(i, j)));
            }
        }
    }
    return pairs;
}

LayerContext build_context(const std::vector<PatchGrid>& inputs,
                           const std::vector<ProcedureSpec>& procs,
                           const SpectralLayerOptions& opts) {
    if (inputs.empty()) throw ParameterError("spectral_layer: no input grids");
    if (procs.empty()) throw ParameterError("spectral_layer: at least one procedure required");
    for (const ProcedureSpec& p : procs) p.validate();

    const PatchGrid& first = inputs.front();
    for (const PatchGrid& g : inputs) {
        if (g.rows != first.rows || g.cols != first.cols || g.dim() != first.dim()) {
            throw ConsistencyError("spectral_layer: images disagree on patch grid shape");
        }
    }

    LayerContext ctx;
    ctx.images = static_cast<int>(inputs.size());
    ctx.grid_rows = first.rows;
    ctx.grid_cols = first.cols;
    const int per_image = first.count();
    ctx.X.resize(static_cast<Eigen::Index>(ctx.images) * per_image, first.dim());
    for (int i = 0; i < ctx.images; ++i) {
        ctx.X.middleRows(static_cast<Eigen::Index>(i) * per_image, per_image) = inputs[i].patches;
    }

    int k_max = 0;
    double max_mult = 0.0;
    bool any_dense = false;
    for (const ProcedureSpec& p : procs) {
        k_max = std::max(k_max, knn_k(p));
        if (const auto* e = std::get_if<EpsKind>(&p.affinity)) max_mult = std::max(max_mult, e->eps);
        if (const auto* s = std::get_if<SelfTuneKind>(&p.affinity)) {
            k_max = std::max(k_max, s->K);
            any_dense = true;
        }
        if (std::holds_alternative<FullKind>(p.affinity)) any_dense = true;
    }

    const Eigen::Index n = ctx.X.rows();
    const bool want_cache =
        n <= opts.dense_limit && (k_max > 0 || max_mult > 0.0 || any_dense);
    if (want_cache) ctx.d2 = pairwise_sq_dist(ctx.X);

    if (k_max > 0) {
        ctx.neighbors = ctx.cached() ? neighbors_from_cache(ctx.d2, k_max)
                                     : k_nearest_neighbors(ctx.X, k_max);
    }
    if (max_mult > 0.0) {
        ctx.eta = ctx.cached() ? mst_longest_edge_from_cache(ctx.d2) : mst_longest_edge(ctx.X);
        ctx.max_eps = max_mult * *ctx.eta;
        ctx.eps_pairs = ctx.cached() ? pairs_from_cache(ctx.d2, ctx.max_eps)
                                     : pairs_within_radius(ctx.X, ctx.max_eps);
    }
    return ctx;
}

AffinityGraph dense_kernel_from_cache(const Eigen::MatrixXd& d2, const GraphKind& kind,
                                      const Eigen::VectorXd& scales) {
    const Eigen::Index n = d2.rows();
    AffinityGraph g;
    g.n = static_cast<int>(n);
    g.kind = kind;
    g.sparse_storage = false;
    if (const auto* f = std::get_if<FullKind>(&kind)) {
        const double inv = 1.0 / (2.0 * f->sigma * f->sigma);
        g.dense = (-inv * d2.array()).exp();
    } else {
        g.dense.resize(n, n);
        for (Eigen::Index i = 0; i < n; ++i) {
            for (Eigen::Index j = 0; j < n; ++j) {
                g.dense(i, j) = std::exp(-d2(i, j) / (scales[i] * scales[j]));
            }
        }
    }
    g.dense = (g.dense.array() < kKernelUnderflow).select(0.0, g.dense);
    for (Eigen::Index i = 0; i < n; ++i) {
        g.dense(i, i) = 0.0;
        for (Eigen::Index j = i + 1; j < n; ++j) g.dense(j, i) = g.dense(i, j);
    }
    return g;
}

AffinityGraph knn_graph_from_lists(const NeighborLists& nn, int n, int k) {
    std::vector<Eigen::Triplet<double>> triplets;
    triplets.reserve(static_cast<std::size_t>(n) * k * 2);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < k; ++j) {
            triplets.emplace_back(i, nn.indices(i, j), 1.0);
            triplets.emplace_back(nn.indices(i, j), i, 1.0);
        }
    }
    AffinityGraph g;
    g.n = n;
    g.kind = KnnKind{k};
    g.sparse_storage = true;
    g.sparse.resize(n, n);
    g.sparse.setFromTriplets(triplets.begin(), triplets.end(),
                             [](const double&, const double&) { return 1.0; });
    g.sparse.prune(0.0);
    g.sparse.makeCompressed();
    return g;
}

AffinityGraph eps_graph_from_pairs(const RadiusPairs& pairs, int n, double eps) {
    std::vector<Eigen::Triplet<double>> triplets;
    for (std::size_t p = 0; p < pairs.first.size(); ++p) {
        if (pairs.distance[p] <= eps) {
            triplets.emplace_back(pairs.first[p], pairs.second[p], 1.0);
            triplets.emplace_back(pairs.second[p], pairs.first[p], 1.0);
        }
    }
    AffinityGraph g;
    g.n = n;
    g.kind = EpsKind{eps};
    g.sparse_storage = true;
    g.sparse.resize(n, n);
    g.sparse.setFromTriplets(triplets.begin(), triplets.end(),
                             [](const double&, const double&) { return 1.0; });
    g.sparse.prune(0.0);
    g.sparse.makeCompressed();
    return g;
}

/// L_sym columns over an unmaterialized Gaussian or locally scaled kernel.
class ImplicitKernelLsym final : public SymOperator {
public:
    ImplicitKernelLsym(const Eigen::MatrixXd& X, double sigma, Eigen::VectorXd local_scales,
                       Eigen::VectorXd degrees)
        : X_(X), sq_norms_(X.rowwise().squaredNorm()), sigma_(sigma),
          scales_(std::move(local_scales)), inv_sqrt_deg_(degrees.cwiseSqrt().cwiseInverse()) {}

    Eigen::Index size() const override { return X_.rows(); }

    Eigen::MatrixXd columns(const std::vector<int>& cols) const override {
        const Eigen::Index n = X_.rows();
        const Eigen::Index b = static_cast<Eigen::Index>(cols.size());
        Eigen::MatrixXd Xb(b, X_.cols());
        for (Eigen::Index j = 0; j < b; ++j) Xb.row(j) = X_.row(cols[j]);

        Eigen::MatrixXd W(n, b);
        W.noalias() = X_ * Xb.transpose();
        W = (-2.0 * W).colwise() + sq_norms_;
        for (Eigen::Index j = 0; j < b; ++j) {
            W.col(j).array() += sq_norms_[cols[j]];
        }
        W = W.cwiseMax(0.0);
        if (sigma_ > 0.0) {
            W = (-W / (2.0 * sigma_ * sigma_)).array().exp();
        } else {
            for (Eigen::Index j = 0; j < b; ++j) {
                W.col(j) = (-W.col(j).array() / (scales_.array() * scales_[cols[j]])).exp();
            }
        }
        W = (W.array() < kKernelUnderflow).select(0.0, W);
        // L_sym[:, c] = e_c - D^{-1/2} W[:, c] / sqrt(d_c), with zero kernel diagonal
        for (Eigen::Index j = 0; j < b; ++j) {
            W(cols[j], j) = 0.0;
            W.col(j) = -(inv_sqrt_deg_.array() * W.col(j).array()) * inv_sqrt_deg_[cols[j]];
            W(cols[j], j) += 1.0;
        }
        return W;
    }

    Eigen::VectorXd diagonal() const override { return Eigen::VectorXd::Ones(X_.rows()); }
    double norm_bound() const override { return 2.0; } // normalized Laplacian spectrum bound

private:
    const Eigen::MatrixXd& X_;
    Eigen::VectorXd sq_norms_;
    double sigma_; // fixed bandwidth; <= 0 means use local scales
    Eigen::VectorXd scales_;
    Eigen::VectorXd inv_sqrt_deg_;
};

/// One blocked pass computing kernel degree vectors for the implicit path.
Eigen::VectorXd implicit_kernel_degrees(const Eigen::MatrixXd& X, double sigma,
                                        const Eigen::VectorXd& local_scales) {
    const Eigen::Index n = X.rows();
    const Eigen::VectorXd sq_norms = X.rowwise().squaredNorm();
    constexpr Eigen::Index block = 1024;
    const int n_blocks = static_cast<int>((n + block - 1) / block);
    Eigen::VectorXd degrees = Eigen::VectorXd::Zero(n);

    std::vector<Eigen::VectorXd> partial(n_blocks);
    parallel::for_each_index(n_blocks, [&](int bi) {
        const Eigen::Index r0 = static_cast<Eigen::Index>(bi) * block;
        const Eigen::Index rn = std::min(block, n - r0);
        Eigen::MatrixXd d2;
        d2.noalias() = X.middleRows(r0, rn) * X.transpose();
        d2 = (-2.0 * d2).colwise() + sq_norms.segment(r0, rn);
        d2.rowwise() += sq_norms.transpose();
        d2 = d2.cwiseMax(0.0);
        Eigen::VectorXd mine(rn);
        for (Eigen::Index r = 0; r < rn; ++r) {
            Eigen::ArrayXd w;
            if (sigma > 0.0) {
                w = (-d2.row(r).array() / (2.0 * sigma * sigma)).exp();
            } else {
                w = (-d2.row(r).transpose().array() / (local_scales.array() * local_scales[r0 + r])).exp();
            }
            w = (w < kKernelUnderflow).select(0.0, w);
            w[r0 + r] = 0.0;
            mine[r] = w.sum();
        }
        partial[bi] = mine;
    });
    for (int bi = 0; bi < n_blocks; ++bi) {
        const Eigen::Index r0 = static_cast<Eigen::Index>(bi) * block;
        degrees.segment(r0, partial[bi].size()) = partial[bi];
    }
    return degrees;
}

SpectralEmbedding run_procedure(const LayerContext& ctx, const ProcedureSpec& proc,
                                std::uint64_t seed, const SpectralLayerOptions& opts,
                                ProcedureReport& report) {
    const int n = static_cast<int>(ctx.X.rows());
    SolverBudget budget;
    budget.n_eig = proc.n_eig;
    budget.seed = seed;
    budget.tol = opts.tol;
    budget.l_col = opts.nystrom_l_col;
    budget.n_iter = proc.solver == SolverKind::minibatch ? opts.minibatch_steps : opts.lanczos_iters;

    const bool sparse_affinity =
        std::holds_alternative<KnnKind>(proc.affinity) || std::holds_alternative<EpsKind>(proc.affinity);

    if (sparse_affinity) {
        AffinityGraph g;
        if (const auto* k = std::get_if<KnnKind>(&proc.affinity)) {
            g = knn_graph_from_lists(*ctx.neighbors, n, k->k);
        } else {
            const double eps = std::get<EpsKind>(proc.affinity).eps * *ctx.eta;
            g = eps_graph_from_pairs(*ctx.eps_pairs, n, eps);
        }
        const int comps = component_count(g);
        if (comps != 1) {
            throw ConnectivityError("procedure " + proc.canonical() + ": affinity graph has " +
                                    std::to_string(comps) + " components");
        }
        return solve_laplacian(g, proc.laplacian, proc.solver, budget, opts.dense_cap);
    }

    // dense kernels: local scales for the self-tuning variant
    auto selftune_scales = [&](int K) {
        Eigen::VectorXd scales = ctx.neighbors->distances.col(K - 1);
        const Eigen::RowVectorXd centroid = ctx.X.colwise().mean();
        const double radius = (ctx.X.rowwise() - centroid).rowwise().norm().maxCoeff();
        const double floor = 1e-12 * std::max(2.0 * radius, 1e-300);
        return Eigen::VectorXd(scales.cwiseMax(floor));
    };

    if (ctx.cached()) {
        Eigen::VectorXd scales;
        if (const auto* s = std::get_if<SelfTuneKind>(&proc.affinity)) scales = selftune_scales(s->K);
        AffinityGraph g = dense_kernel_from_cache(ctx.d2, proc.affinity, scales);
        return solve_laplacian(g, proc.laplacian, proc.solver, budget, opts.dense_cap);
    }

    // beyond the materialization limit the kernel stays implicit
    if (proc.solver != SolverKind::minibatch) {
        throw ParameterError("procedure " + proc.canonical() + ": N = " + std::to_string(n) +
                             " exceeds the dense materialization limit " +
                             std::to_string(opts.dense_limit) + "; only minibatch can run implicitly");
    }
    double sigma = -1.0;
    Eigen::VectorXd scales;
    if (const auto* f = std::get_if<FullKind>(&proc.affinity)) {
        sigma = f->sigma;
    } else {
        scales = selftune_scales(std::get<SelfTuneKind>(proc.affinity).K);
    }
    Eigen::VectorXd degrees = implicit_kernel_degrees(ctx.X, sigma, scales);
    for (int i = 0; i < n; ++i) {
        if (degrees[i] <= 0.0) {
            throw IsolatedNodeError("procedure " + proc.canonical() + ": node " + std::to_string(i) +
                                    " has zero kernel degree (bandwidth underflow)");
        }
    }
    ImplicitKernelLsym op(ctx.X, sigma, scales, degrees);
    SpectralEmbedding e = minibatch_stiefel(op, budget);
    if (proc.laplacian == LaplacianKind::rw) {
        const Eigen::VectorXd inv_sqrt = degrees.cwiseSqrt().cwiseInverse();
        e.rows = inv_sqrt.asDiagonal() * e.rows;
        for (Eigen::Index j = 0; j < e.rows.cols(); ++j) {
            const double norm = e.rows.col(j).norm();
            if (norm > 0) e.rows.col(j) /= norm;
        }
    }
    canonicalize_signs(e.rows);
    report.warnings.push_back("kernel held implicit at N = " + std::to_string(n));
    return e;
}

} // namespace

SpectralLayerResult spectral_layer(const std::vector<PatchGrid>& inputs,
                                   const std::vector<ProcedureSpec>& procs, std::uint64_t seed,
                                   const SpectralLayerOptions& opts) {
    LayerContext ctx = build_context(inputs, procs, opts);
    const Rng layer_rng(seed);

    SpectralLayerResult result;
    result.maps.resize(ctx.images);

    for (std::size_t t = 0; t < procs.size(); ++t) {
        const ProcedureSpec& proc = procs[t];
        const auto t0 = Clock::now();
        ProcedureReport report;
        report.procedure = proc.canonical();

        // streams are keyed by procedure content: identical procedures
        // produce identical blocks
        const std::uint64_t proc_seed = layer_rng.derive("proc/" + proc.canonical()).key();
        SpectralEmbedding e = run_procedure(ctx, proc, proc_seed, opts, report);
        report.residual = e.residual;
        report.warnings.insert(report.warnings.end(), e.warnings.begin(), e.warnings.end());

        std::vector<FeatureMaps> stacked =
            stack_embeddings(e, ctx.grid_rows, ctx.grid_cols, ctx.images, static_cast<int>(t));

        // concatenate channel-wise in procedure order
        for (int i = 0; i < ctx.images; ++i) {
            FeatureMaps& dst = result.maps[i];
            if (dst.channels == 0) {
                dst = std::move(stacked[i]);
                continue;
            }
            FeatureMaps merged(dst.rows, dst.cols, dst.channels + stacked[i].channels);
            for (int r = 0; r < dst.rows; ++r) {
                for (int c = 0; c < dst.cols; ++c) {
                    for (int ch = 0; ch < dst.channels; ++ch) merged.at(r, c, ch) = dst.at(r, c, ch);
                    for (int ch = 0; ch < stacked[i].channels; ++ch)
                        merged.at(r, c, dst.channels + ch) = stacked[i].at(r, c, ch);
                }
            }
            std::copy(dst.channel_lineage.begin(), dst.channel_lineage.end(),
                      merged.channel_lineage.begin());
            std::copy(stacked[i].channel_lineage.begin(), stacked[i].channel_lineage.end(),
                      merged.channel_lineage.begin() + dst.channels);
            dst = std::move(merged);
        }

        report.seconds = seconds_since(t0);
        result.procedures.push_back(std::move(report));
    }
    return result;
}

FeatureMaps pool(const FeatureMaps& maps, int s_p, int stride) {
    if (s_p < 1) throw ParameterError("pooling grid must be positive");
    if (stride < 1) throw ParameterError("pooling stride must be positive");

    const int out_rows = (maps.rows + stride - 1) / stride;
    const int out_cols = (maps.cols + stride - 1) / stride;
    FeatureMaps out(out_rows, out_cols, maps.channels);
    out.channel_lineage = maps.channel_lineage;

    for (int u = 0; u < out_rows; ++u) {
        for (int v = 0; v < out_cols; ++v) {
            for (int ch = 0; ch < maps.channels; ++ch) {
                double best = 0.0; // out-of-bounds reads are zeros
                double best_mag = -1.0;
                for (int dr = 0; dr < s_p; ++dr) {
                    for (int dc = 0; dc < s_p; ++dc) {
                        const int r = u * stride + dr;
                        const int c = v * stride + dc;
                        const double val =
                            (r < maps.rows && c < maps.cols) ? maps.at(r, c, ch) : 0.0;
                        if (std::abs(val) > best_mag) {
                            best_mag = std::abs(val);
                            best = val;
                        }
                    }
                }
                out.at(u, v, ch) = best;
            }
        }
    }
    return out;
}

BinaryMaps binarize(const FeatureMaps& maps) {
    BinaryMaps out;
    out.rows = maps.rows;
    out.cols = maps.cols;
    out.channels = maps.channels;
    out.channel_lineage = maps.channel_lineage;
    out.bits.resize(maps.values.size());
    for (std::size_t i = 0; i < maps.values.size(); ++i) out.bits[i] = maps.values[i] > 0.0 ? 1 : 0;
    return out;
}

FeatureMaps code(const BinaryMaps& maps, int group_bits) {
    if (group_bits < 1) throw ParameterError("coding group size must be positive");
    const int n_b = maps.channels;
    if (n_b < 1) throw ParameterError("coding layer needs at least one binary map");

    // eigenvalue-ordered channels, small eigenvalues first (largest weights)
    std::vector<int> order(n_b);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        const ChannelLineage& la = maps.channel_lineage[a];
        const ChannelLineage& lb = maps.channel_lineage[b];
        if (la.eigenvalue != lb.eigenvalue) return la.eigenvalue < lb.eigenvalue;
        if (la.procedure != lb.procedure) return la.procedure < lb.procedure;
        return la.eigen_rank < lb.eigen_rank;
    });

    const int groups = (n_b + group_bits - 1) / group_bits;
    FeatureMaps out(maps.rows, maps.cols, groups);
    for (int g = 0; g < groups; ++g) {
        const ChannelLineage& head = maps.channel_lineage[order[g * group_bits]];
        out.channel_lineage[g] = {g, g, head.eigenvalue};
    }

    for (int r = 0; r < maps.rows; ++r) {
        for (int c = 0; c < maps.cols; ++c) {
            for (int g = 0; g < groups; ++g) {
                double value = 0.0;
                for (int j = 0; j < group_bits; ++j) {
                    const int src = g * group_bits + j;
                    if (src >= n_b) break; // incomplete group: low weights stay zero
                    if (maps.at(r, c, order[src]))
                        value += std::ldexp(1.0, group_bits - 1 - j); // 2^{L-j}, j 1-based
                }
                out.at(r, c, g) = value;
            }
        }
    }
    return out;
}

} // namespace sanet
