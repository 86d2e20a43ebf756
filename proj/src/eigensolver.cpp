#include "sanet/eigensolver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "sanet/errors.hpp"
#include "sanet/rng.hpp"

namespace sanet {

namespace {

double max_pair_residual(const Eigen::MatrixXd& AQ, const Eigen::MatrixXd& Q,
                         const Eigen::VectorXd& values) {
    double worst = 0.0;
    for (Eigen::Index j = 0; j < Q.cols(); ++j) {
        worst = std::max(worst, (AQ.col(j) - values[j] * Q.col(j)).norm());
    }
    return worst;
}

/// Gershgorin-style magnitude scale of a sparse symmetric matrix.
double infinity_norm(const Eigen::SparseMatrix<double>& A) {
    Eigen::VectorXd row_abs = Eigen::VectorXd::Zero(A.rows());
    for (int outer = 0; outer < A.outerSize(); ++outer) {
        for (Eigen::SparseMatrix<double>::InnerIterator it(A, outer); it; ++it) {
            row_abs[it.row()] += std::abs(it.value());
        }
    }
    return row_abs.size() == 0 ? 0.0 : row_abs.maxCoeff();
}

Eigen::VectorXd random_unit_vector(Rng& rng, Eigen::Index n) {
    Eigen::VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = rng.gaussian();
    const double norm = v.norm();
    return norm > 0 ? Eigen::VectorXd(v / norm) : Eigen::VectorXd::Unit(n, 0);
}

/// Thin QR with the R-diagonal sign fixed nonnegative, so the factor is
/// unique and platform-stable.
Eigen::MatrixXd orthonormalize(const Eigen::MatrixXd& Y) {
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(Y);
    Eigen::MatrixXd Q = qr.householderQ() * Eigen::MatrixXd::Identity(Y.rows(), Y.cols());
    const Eigen::MatrixXd R = qr.matrixQR().topRows(Y.cols()).triangularView<Eigen::Upper>();
    for (Eigen::Index j = 0; j < Y.cols(); ++j) {
        if (R(j, j) < 0.0) Q.col(j) = -Q.col(j);
    }
    return Q;
}

} // namespace

std::string to_string(SolverKind s) {
    switch (s) {
        case SolverKind::dense: return "dense";
        case SolverKind::lanczos: return "lanczos";
        case SolverKind::nystrom: return "nystrom";
        case SolverKind::minibatch: return "minibatch";
    }
    return "?";
}

void canonicalize_signs(Eigen::MatrixXd& vectors) {
    for (Eigen::Index j = 0; j < vectors.cols(); ++j) {
        Eigen::Index at = 0;
        vectors.col(j).cwiseAbs().maxCoeff(&at);
        if (vectors(at, j) < 0.0) vectors.col(j) = -vectors.col(j);
    }
}

// --- dense oracle ---------------------------------------------------------

SpectralEmbedding dense_eigh(const Eigen::MatrixXd& A, int n_eig, int size_cap) {
    const Eigen::Index n = A.rows();
    if (A.cols() != n) throw ParameterError("dense_eigh requires a square matrix");
    if (n_eig < 1 || n_eig > n)
        throw ParameterError("n_eig = " + std::to_string(n_eig) + " outside [1, " + std::to_string(n) + "]");
    if (n > size_cap) {
        throw SizeError("matrix side " + std::to_string(n) + " exceeds the dense-oracle cap " +
                        std::to_string(size_cap) + "; use an iterative solver");
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A);
    if (es.info() != Eigen::Success) throw ConvergenceError("dense eigendecomposition failed");

    SpectralEmbedding e;
    e.solver = SolverKind::dense;
    e.rows = es.eigenvectors().leftCols(n_eig);
    e.eigenvalues = es.eigenvalues().head(n_eig);
    e.residual = max_pair_residual(A * e.rows, e.rows, e.eigenvalues);
    return e;
}

// --- Lanczos ---------------------------------------------------------------

namespace {

struct RitzPair {
    double value;
    Eigen::VectorXd vector;
};

/// Eigen-decomposition of the running tridiagonal matrix.
void tridiag_eigen(const std::vector<double>& alpha, const std::vector<double>& beta, int m,
                   Eigen::VectorXd& values, Eigen::MatrixXd& vectors) {
    Eigen::MatrixXd T = Eigen::MatrixXd::Zero(m, m);
    for (int i = 0; i < m; ++i) {
        T(i, i) = alpha[i];
        if (i + 1 < m) T(i, i + 1) = T(i + 1, i) = beta[i];
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(T);
    values = es.eigenvalues();
    vectors = es.eigenvectors();
}

} // namespace

namespace {

/// One restartable deflated Lanczos process. Converged Ritz pairs are locked
/// and every later run works on the deflated complement, which is what
/// recovers eigenvalue multiplicities (a single Krylov space sees each
/// eigenspace exactly once).
class LanczosEngine {
public:
    LanczosEngine(const Eigen::SparseMatrix<double>& A, const SolverBudget& budget)
        : A_(A), n_(A.rows()), budget_(budget),
          scale_(std::max(1e-300, infinity_norm(A))),
          conv_tol_(std::max(budget.tol, 1e-14) * scale_),
          breakdown_tol_(1e-13 * scale_),
          rng_(Rng(budget.seed).derive("lanczos")),
          locked_mat_(A.rows(), 0) {}

    struct RunOutcome {
        int newly_locked = 0;
        double smallest_converged = std::numeric_limits<double>::infinity();
        bool converged_goal = false; // bottom `wanted` pairs of the deflated op locked
    };

    /// Lanczos run on the deflated operator targeting the bottom `wanted`
    /// pairs; locks whatever converges.
    RunOutcome run(int wanted, int basis_cap) {
        RunOutcome out;
        if (room() == 0 || iters_left() <= 0) return out;

        Eigen::VectorXd v = next_start_vector();
        if (v.size() == 0) return out;

        const int m_cap = std::min({basis_cap, room(), iters_left()});
        Eigen::MatrixXd V(n_, m_cap);
        V.col(0) = v;
        std::vector<double> alpha, beta;

        int m = 0;
        for (;;) {
            Eigen::VectorXd w = A_ * V.col(m);
            deflate(w);
            const double a = V.col(m).dot(w);
            alpha.push_back(a);
            w.noalias() -= a * V.col(m);
            if (m > 0) w.noalias() -= beta[m - 1] * V.col(m - 1);
            w.noalias() -= V.leftCols(m + 1) * (V.leftCols(m + 1).transpose() * w);
            w.noalias() -= V.leftCols(m + 1) * (V.leftCols(m + 1).transpose() * w);
            const double b = w.norm();
            ++total_iters_;
            ++m;

            const bool breakdown = b <= breakdown_tol_;
            const bool basis_full = m >= m_cap;
            const bool budget_out = iters_left() <= 0;
            if (!(breakdown || basis_full || budget_out || m % 16 == 0)) {
                V.col(m) = w / b;
                beta.push_back(b);
                continue;
            }

            Eigen::VectorXd theta;
            Eigen::MatrixXd S;
            tridiag_eigen(alpha, beta, m, theta, S);

            int converged_bottom = 0;
            while (converged_bottom < m) {
                const double bound = breakdown ? 0.0 : std::abs(b * S(m - 1, converged_bottom));
                if (bound > conv_tol_) break;
                ++converged_bottom;
            }

            const bool goal = converged_bottom >= std::min(wanted, m);
            if (!(goal || breakdown || basis_full || budget_out)) {
                V.col(m) = w / b;
                beta.push_back(b);
                continue;
            }

            // lock: everything at exact breakdown (the Krylov space is
            // invariant), otherwise the converged bottom run of pairs
            const int take = breakdown ? m : std::min(converged_bottom, std::min(wanted, m));
            for (int i = 0; i < take; ++i) {
                lock_pair(theta[i], V.leftCols(m) * S.col(i));
                out.smallest_converged = std::min(out.smallest_converged, theta[i]);
                ++out.newly_locked;
            }
            out.converged_goal = breakdown ? (take >= std::min(wanted, m)) : goal;
            if (!breakdown && take < m) {
                warm_start_ = V.leftCols(m) * S.col(take); // best unconverged Ritz vector
            }
            // remember the run's bottom unconverged pairs in case the budget
            // runs dry before they converge
            last_theta_ = theta;
            last_Q_ = V.leftCols(m) * S;
            return out;
        }
    }

    SpectralEmbedding finish() {
        const int n_eig = budget_.n_eig;
        std::vector<std::string> warnings;
        if (static_cast<int>(locked_.size()) < n_eig) {
            // budget exhausted: fill from the last run's unconverged pairs
            for (Eigen::Index i = 0; i < last_theta_.size() &&
                                     static_cast<int>(locked_.size()) < n_eig; ++i) {
                lock_pair(last_theta_[i], last_Q_.col(i)); // deflates + renormalizes
            }
            warnings.push_back("lanczos: iteration budget reached before full convergence");
        }
        if (static_cast<int>(locked_.size()) < n_eig) {
            throw ConvergenceError("lanczos: only " + std::to_string(locked_.size()) + " of " +
                                   std::to_string(n_eig) + " eigenpairs available within " +
                                   std::to_string(budget_.n_iter) + " iterations");
        }
        SpectralEmbedding e;
        e.solver = SolverKind::lanczos;
        e.warnings = std::move(warnings);
        e.rows.resize(n_, n_eig);
        e.eigenvalues.resize(n_eig);
        for (int i = 0; i < n_eig; ++i) {
            e.rows.col(i) = locked_[i].vector;
            e.eigenvalues[i] = locked_[i].value;
        }
        e.residual = max_pair_residual(A_ * e.rows, e.rows, e.eigenvalues);
        return e;
    }

    int locked_count() const { return static_cast<int>(locked_.size()); }
    double locked_value(int i) const { return locked_[i].value; }
    int room() const { return static_cast<int>(n_ - locked_mat_.cols()); }
    int iters_left() const { return budget_.n_iter - total_iters_; }
    double conv_tol() const { return conv_tol_; }
    void add_warning_flag() { verification_open_ = true; }
    bool verification_open() const { return verification_open_; }

private:
    void deflate(Eigen::VectorXd& v) const {
        if (locked_mat_.cols() > 0) {
            v.noalias() -= locked_mat_ * (locked_mat_.transpose() * v);
            v.noalias() -= locked_mat_ * (locked_mat_.transpose() * v);
        }
    }

    void lock_pair(double value, Eigen::VectorXd q) {
        deflate(q);
        const double qn = q.norm();
        if (qn < 1e-8) return;
        q /= qn;
        locked_.push_back({value, q});
        std::sort(locked_.begin(), locked_.end(),
                  [](const RitzPair& x, const RitzPair& y) { return x.value < y.value; });
        locked_mat_.conservativeResize(Eigen::NoChange, locked_mat_.cols() + 1);
        locked_mat_.col(locked_mat_.cols() - 1) = q;
    }

    Eigen::VectorXd next_start_vector() {
        Eigen::VectorXd v;
        if (warm_start_.size() == n_) {
            v = warm_start_;
            warm_start_.resize(0);
        } else {
            v = random_unit_vector(rng_, n_);
        }
        deflate(v);
        int attempts = 0;
        while (v.norm() < 1e-8 && attempts++ < 8) {
            v = random_unit_vector(rng_, n_);
            deflate(v);
        }
        if (v.norm() < 1e-8) return Eigen::VectorXd();
        return v / v.norm();
    }

    const Eigen::SparseMatrix<double>& A_;
    Eigen::Index n_;
    SolverBudget budget_;
    double scale_, conv_tol_, breakdown_tol_;
    Rng rng_;
    std::vector<RitzPair> locked_;
    Eigen::MatrixXd locked_mat_;
    Eigen::VectorXd warm_start_;
    Eigen::VectorXd last_theta_;
    Eigen::MatrixXd last_Q_;
    int total_iters_ = 0;
    bool verification_open_ = false;
};

} // namespace

SpectralEmbedding lanczos_smallest(const Eigen::SparseMatrix<double>& A, const SolverBudget& budget) {
    const Eigen::Index n = A.rows();
    const int n_eig = budget.n_eig;
    if (A.cols() != n) throw ParameterError("lanczos_smallest requires a square matrix");
    if (n_eig < 1 || n_eig > n)
        throw ParameterError("n_eig = " + std::to_string(n_eig) + " outside [1, " + std::to_string(n) + "]");

    LanczosEngine engine(A, budget);
    const int max_basis = static_cast<int>(std::min<Eigen::Index>(n, 400));
    const int max_restarts = 80;
    int restarts = 0;
    bool verified = false;

    while (restarts++ < max_restarts && engine.iters_left() > 0 && !verified) {
        if (engine.locked_count() < n_eig) {
            if (engine.room() == 0) break;
            engine.run(n_eig - engine.locked_count(), max_basis);
            continue;
        }
        if (engine.room() == 0) break; // locked set is the full spectrum

        // Verification probe: converge the bottom pair of the deflated
        // complement. If it sits at or above our n_eig-th candidate, no
        // smaller eigenvalue was missed (multiplicities appear here).
        const double gate = engine.locked_value(n_eig - 1);
        auto probe = engine.run(1, std::min(max_basis, 140));
        if (probe.converged_goal) {
            if (probe.smallest_converged >= gate - 10.0 * engine.conv_tol()) {
                verified = true; // candidate set confirmed; probe lock is harmless surplus
            }
            // else: the probe found a smaller pair and locked it; loop again
        } else if (probe.newly_locked == 0 && engine.iters_left() > 0) {
            // probe could not converge within its capped basis; accept with a note
            engine.add_warning_flag();
            verified = true;
        }
    }

    SpectralEmbedding e = engine.finish();
    if (engine.verification_open()) {
        e.warnings.push_back("lanczos: deflation probe did not converge; candidate set unverified");
    }
    return e;
}

// --- Nystrom ----------------------------------------------------------------

namespace {

struct NystromFactor {
    std::vector<int> columns;     // greedy picks, in pick order
    Eigen::MatrixXd C;            // A[:, columns]
    Eigen::MatrixXd M_pinv;       // pseudo-inverse of A[columns, columns]
    std::vector<std::string> warnings;
};

int auto_l_col(const SolverBudget& budget, Eigen::Index n) {
    int l = budget.l_col;
    if (l <= 0) {
        const int log2n = static_cast<int>(std::ceil(std::log2(std::max<Eigen::Index>(2, n))));
        l = std::max({log2n, budget.n_eig, 16});
    }
    return static_cast<int>(std::min<Eigen::Index>(l, n));
}

NystromFactor smga_factor(const Eigen::MatrixXd& A, int l) {
    const Eigen::Index n = A.rows();
    NystromFactor f;

    // residual norms of all columns against the span of the picks
    Eigen::VectorXd resid = A.colwise().squaredNorm();
    const double initial_max = resid.maxCoeff();
    Eigen::MatrixXd Q(n, l);
    Eigen::MatrixXd proj(l, n); // row t = q_t^T A

    int picked = 0;
    for (int t = 0; t < l; ++t) {
        Eigen::Index j = 0;
        const double best = resid.maxCoeff(&j);
        if (best <= 1e-24 * std::max(initial_max, 1e-300)) break; // span exhausted
        Eigen::VectorXd q = A.col(j);
        if (picked > 0) {
            q.noalias() -= Q.leftCols(picked) * (Q.leftCols(picked).transpose() * q);
            q.noalias() -= Q.leftCols(picked) * (Q.leftCols(picked).transpose() * q);
        }
        const double qn = q.norm();
        if (qn <= 1e-12 * std::sqrt(std::max(initial_max, 1e-300))) {
            resid[j] = 0.0;
            --t;
            continue;
        }
        q /= qn;
        Q.col(picked) = q;
        proj.row(picked) = (A * q).transpose(); // A symmetric: q^T A
        resid -= proj.row(picked).transpose().cwiseAbs2();
        resid = resid.cwiseMax(0.0);
        f.columns.push_back(static_cast<int>(j));
        ++picked;
    }
    if (picked == 0) {
        // zero matrix: fall back to the first column
        f.columns.push_back(0);
        picked = 1;
    }

    const int le = static_cast<int>(f.columns.size());
    f.C.resize(n, le);
    Eigen::MatrixXd M(le, le);
    for (int a = 0; a < le; ++a) {
        f.C.col(a) = A.col(f.columns[a]);
        for (int b = 0; b < le; ++b) M(a, b) = A(f.columns[a], f.columns[b]);
    }

    // the pseudo-inverse cutoff is anchored to the input's column scale: a
    // sampled block that is tiny relative to A must not be inverted into an
    // unbounded extension
    const double a_scale = std::sqrt(initial_max);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> mes(M);
    Eigen::VectorXd mv = mes.eigenvalues();
    const double mmax = mv.cwiseAbs().maxCoeff();
    const bool singular = mmax <= 0.0 || mv.cwiseAbs().minCoeff() <= 1e-12 * std::max(mmax, a_scale);
    if (singular) {
        const double base = std::max({std::abs(A.trace()) / static_cast<double>(n), mmax, a_scale});
        const double ridge = 1e-10 * std::max(base, 1e-300);
        M.diagonal().array() += ridge;
        f.warnings.push_back("nystrom: sampled block numerically singular; ridge " +
                             std::to_string(ridge) + " added");
        mes.compute(M);
        mv = mes.eigenvalues();
    }
    Eigen::VectorXd inv = mv;
    const double cutoff = 1e-14 * std::max(mv.cwiseAbs().maxCoeff(), a_scale);
    for (int i = 0; i < le; ++i) inv[i] = std::abs(mv[i]) > cutoff ? 1.0 / mv[i] : 0.0;
    f.M_pinv = mes.eigenvectors() * inv.asDiagonal() * mes.eigenvectors().transpose();
    return f;
}

} // namespace

SpectralEmbedding nystrom_embed(const Eigen::MatrixXd& A, const SolverBudget& budget, SpectrumEnd end) {
    const Eigen::Index n = A.rows();
    if (A.cols() != n) throw ParameterError("nystrom_embed requires a square matrix");
    const int n_eig = budget.n_eig;
    if (n_eig < 1 || n_eig > n)
        throw ParameterError("n_eig = " + std::to_string(n_eig) + " outside [1, " + std::to_string(n) + "]");
    const int l = auto_l_col(budget, n);
    if (l < n_eig) throw ParameterError("l_col = " + std::to_string(l) + " below n_eig = " + std::to_string(n_eig));

    NystromFactor f = smga_factor(A, l);
    const int le = static_cast<int>(f.columns.size());

    // Eigenpairs of C M^+ C^T through a QR of C: the l x l core R M^+ R^T is
    // symmetric, so indefinite sampled blocks are handled exactly.
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(f.C);
    Eigen::MatrixXd Qc = qr.householderQ() * Eigen::MatrixXd::Identity(n, le);
    Eigen::MatrixXd R = qr.matrixQR().topRows(le).triangularView<Eigen::Upper>();
    Eigen::MatrixXd core = R * f.M_pinv * R.transpose();
    core = 0.5 * (core + core.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ces(core);

    Eigen::VectorXd theta = ces.eigenvalues(); // ascending
    Eigen::MatrixXd U = Qc * ces.eigenvectors();

    SpectralEmbedding e;
    e.solver = SolverKind::nystrom;
    e.warnings = f.warnings;
    e.rows.resize(n, n_eig);
    e.eigenvalues.resize(n_eig);

    if (le < n_eig) {
        // input rank below the request: fill with exact-zero eigenpairs from
        // the orthogonal complement
        Rng rng = Rng(budget.seed).derive("nystrom/complement");
        Eigen::MatrixXd basis(n, n_eig);
        basis.leftCols(le) = U;
        for (int j = le; j < n_eig; ++j) {
            Eigen::VectorXd v = random_unit_vector(rng, n);
            for (int pass = 0; pass < 2; ++pass)
                v.noalias() -= basis.leftCols(j) * (basis.leftCols(j).transpose() * v);
            basis.col(j) = v / v.norm();
        }
        e.warnings.push_back("nystrom: captured rank " + std::to_string(le) + " below n_eig");
        Eigen::VectorXd full_theta = Eigen::VectorXd::Zero(n_eig);
        full_theta.head(le) = theta;
        // order ascending with the zero pairs in place
        std::vector<int> order(n_eig);
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(),
                  [&](int a, int b) { return full_theta[a] < full_theta[b]; });
        for (int j = 0; j < n_eig; ++j) {
            const int src = end == SpectrumEnd::smallest ? order[j] : order[n_eig - n_eig + j];
            e.rows.col(j) = basis.col(src);
            e.eigenvalues[j] = full_theta[src];
        }
    } else {
        if (end == SpectrumEnd::smallest) {
            e.rows = U.leftCols(n_eig);
            e.eigenvalues = theta.head(n_eig);
        } else {
            e.rows = U.rightCols(n_eig);
            e.eigenvalues = theta.tail(n_eig);
        }
    }
    e.residual = max_pair_residual(A * e.rows, e.rows, e.eigenvalues);
    return e;
}

Eigen::MatrixXd nystrom_reconstruction(const Eigen::MatrixXd& A, const SolverBudget& budget) {
    const int l = auto_l_col(budget, A.rows());
    NystromFactor f = smga_factor(A, l);
    return f.C * f.M_pinv * f.C.transpose();
}

// --- mini-batch Stiefel descent ---------------------------------------------

namespace {

std::vector<int> sample_batch(Rng& rng, Eigen::Index n, int batch) {
    // partial Fisher-Yates over [0, n)
    std::vector<int> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::vector<int> out(batch);
    for (int i = 0; i < batch; ++i) {
        const std::uint64_t j = i + rng.uniform_int(static_cast<std::uint64_t>(n - i));
        std::swap(idx[i], idx[j]);
        out[i] = idx[i];
    }
    return out;
}

} // namespace

Eigen::MatrixXd SymOperator::apply(const Eigen::MatrixXd& Y) const {
    const Eigen::Index n = size();
    constexpr Eigen::Index block = 1024;
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n, Y.cols());
    std::vector<int> cols;
    for (Eigen::Index c0 = 0; c0 < n; c0 += block) {
        const Eigen::Index cn = std::min(block, n - c0);
        cols.resize(cn);
        std::iota(cols.begin(), cols.end(), static_cast<int>(c0));
        out.noalias() += columns(cols) * Y.middleRows(c0, cn);
    }
    return out;
}

SpectralEmbedding minibatch_stiefel(const SymOperator& L, const SolverBudget& budget) {
    const Eigen::Index n = L.size();
    const int k = budget.n_eig;
    if (k < 1 || k > n)
        throw ParameterError("n_eig = " + std::to_string(k) + " outside [1, " + std::to_string(n) + "]");
    int batch = budget.batch > 0 ? budget.batch
                                 : static_cast<int>(std::lround(std::sqrt(static_cast<double>(n))));
    batch = std::clamp(batch, 1, static_cast<int>(n));

    Rng rng = Rng(budget.seed).derive("minibatch");
    Eigen::MatrixXd Y(n, k);
    for (Eigen::Index i = 0; i < n; ++i)
        for (int j = 0; j < k; ++j) Y(i, j) = rng.gaussian();
    Y = orthonormalize(Y);

    const bool track_trace = n <= 2048;
    const int window = 50;

    SpectralEmbedding e;
    e.solver = SolverKind::minibatch;

    auto full_trace = [&](const Eigen::MatrixXd& frame) {
        return (frame.transpose() * L.apply(frame)).trace();
    };

    if (track_trace) e.trace_history.push_back(full_trace(Y));

    // Stochastic gradient with two variance controls: the operator diagonal
    // enters exactly, and a periodically refreshed full-gradient snapshot
    // anchors the sampled term, so the estimator noise vanishes as the
    // frame settles.
    const Eigen::VectorXd diag = L.diagonal();
    const double norm_scale = std::max(L.norm_bound(), 1e-12);
    const int snapshot_every = L.cheap_full_apply() ? 20
                               : n <= 2048 ? 50
                                           : std::max(50, budget.n_iter / 2);

    Eigen::MatrixXd Y_snap = Y;
    Eigen::MatrixXd LY_snap = L.apply(Y);

    const double scale_n_over_b = static_cast<double>(n) / batch;
    for (int t = 0; t < budget.n_iter; ++t) {
        if (t > 0 && t % snapshot_every == 0) {
            Y_snap = Y;
            LY_snap = L.apply(Y);
        }
        const std::vector<int> idx = sample_batch(rng, n, batch);
        const Eigen::MatrixXd C = L.columns(idx); // n x b
        Eigen::MatrixXd Db(batch, k);
        for (int b = 0; b < batch; ++b) Db.row(b) = Y.row(idx[b]) - Y_snap.row(idx[b]);

        // unbiased estimate of L Y around the snapshot
        Eigen::MatrixXd G = diag.asDiagonal() * (Y - Y_snap);
        G.noalias() += scale_n_over_b * (C * Db);
        for (int b = 0; b < batch; ++b) {
            G.row(idx[b]).noalias() -= scale_n_over_b * diag[idx[b]] * Db.row(b);
        }
        G += LY_snap;

        // Riemannian gradient: project 2G to the tangent space at Y
        Eigen::MatrixXd YtG = Y.transpose() * G;
        Eigen::MatrixXd sym = 0.5 * (YtG + YtG.transpose());
        Eigen::MatrixXd grad = 2.0 * (G - Y * sym);

        const double step = 0.5 / norm_scale;
        Y = orthonormalize(Y - step * grad);

        if (track_trace) {
            e.trace_history.push_back(full_trace(Y));
            const int sz = static_cast<int>(e.trace_history.size());
            if (sz > window) {
                const double recent = e.trace_history[sz - 1];
                const double past = e.trace_history[sz - 1 - window];
                if (std::abs(past - recent) < budget.tol * std::max(1.0, std::abs(recent))) break;
            }
        }
    }

    // Rayleigh-Ritz on the final frame
    const Eigen::MatrixXd LY = L.apply(Y);
    Eigen::MatrixXd B = Y.transpose() * LY;
    B = 0.5 * (B + B.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(B);
    if (es.eigenvalues()[0] < -1e-6) {
        throw DomainError("minibatch_stiefel: input is not PSD (Rayleigh quotient " +
                          std::to_string(es.eigenvalues()[0]) + ")");
    }
    e.rows = Y * es.eigenvectors();
    e.eigenvalues = es.eigenvalues();
    e.residual = max_pair_residual(LY * es.eigenvectors(), e.rows, e.eigenvalues);
    return e;
}

SpectralEmbedding minibatch_stiefel(const Eigen::MatrixXd& L, const SolverBudget& budget) {
    return minibatch_stiefel(DenseSymOperator(L), budget);
}

// --- Laplacian routing -------------------------------------------------------

SpectralEmbedding solve_laplacian(const AffinityGraph& g, LaplacianKind kind, SolverKind solver,
                                  SolverBudget budget, int dense_cap) {
    if (kind == LaplacianKind::unnormalized) {
        throw ParameterError("unnormalized Laplacian embeddings are not a production path");
    }
    const Eigen::VectorXd degrees = degree_vector(g);
    const Eigen::VectorXd inv_sqrt = degrees.cwiseSqrt().cwiseInverse();

    SpectralEmbedding e;
    switch (solver) {
        case SolverKind::lanczos: {
            if (!g.sparse_storage)
                throw ParameterError("lanczos pairs with sparse affinities");
            e = lanczos_smallest(laplacian(g, LaplacianKind::sym).sparse, budget);
            break;
        }
        case SolverKind::dense: {
            LaplacianMatrix L = laplacian(g, LaplacianKind::sym);
            Eigen::MatrixXd dense = L.sparse_storage ? Eigen::MatrixXd(L.sparse) : L.dense;
            e = dense_eigh(dense, budget.n_eig, dense_cap);
            break;
        }
        case SolverKind::nystrom: {
            if (g.sparse_storage)
                throw ParameterError("nystrom pairs with dense affinities");
            // dominant eigenpairs of D^{-1/2} W D^{-1/2} are the bottom of L_sym
            Eigen::MatrixXd S = inv_sqrt.asDiagonal() * g.dense * inv_sqrt.asDiagonal();
            S = 0.5 * (S + S.transpose());
            SpectralEmbedding top = nystrom_embed(S, budget, SpectrumEnd::largest);
            e = top;
            for (int j = 0; j < budget.n_eig; ++j) {
                e.eigenvalues[j] = 1.0 - top.eigenvalues[budget.n_eig - 1 - j];
                e.rows.col(j) = top.rows.col(budget.n_eig - 1 - j);
            }
            break;
        }
        case SolverKind::minibatch: {
            if (g.sparse_storage)
                throw ParameterError("minibatch pairs with dense affinities");
            LaplacianMatrix L = laplacian(g, LaplacianKind::sym);
            e = minibatch_stiefel(L.dense, budget);
            break;
        }
    }

    if (kind == LaplacianKind::rw) {
        // Eq.-style transform: v_rw = D^{-1/2} v_sym, renormalized per column
        e.rows = inv_sqrt.asDiagonal() * e.rows;
        for (Eigen::Index j = 0; j < e.rows.cols(); ++j) {
            const double norm = e.rows.col(j).norm();
            if (norm > 0) e.rows.col(j) /= norm;
        }
    }
    canonicalize_signs(e.rows);
    return e;
}

} // namespace sanet
