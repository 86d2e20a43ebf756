#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "sanet/laplacian.hpp"

namespace sanet {

enum class SolverKind { dense, lanczos, nystrom, minibatch };

std::string to_string(SolverKind s);

/// N×n_eig spectral features: row i is the embedding of point i; column j
/// pairs with eigenvalues[j] (non-descending).
struct SpectralEmbedding {
    Eigen::MatrixXd rows;
    Eigen::VectorXd eigenvalues;
    SolverKind solver = SolverKind::dense;
    double residual = 0.0; // max ||A q - lambda q||_2 over returned pairs
    std::vector<std::string> warnings;
    std::vector<double> trace_history; // mini-batch objective trajectory
};

/// Iteration/size budget shared by the iterative solvers.
struct SolverBudget {
    int n_eig = 1;
    int n_iter = 1000;         // Lanczos matvecs / mini-batch steps
    int l_col = 0;             // Nystrom columns; 0 = max(ceil(log2 N), n_eig, 16)
    int batch = 0;             // mini-batch rows; 0 = round(sqrt(N))
    std::uint64_t seed = 0;
    double tol = 1e-10;
};

/// Full symmetric eigendecomposition; the test oracle and the small-problem
/// path. Throws SizeError above `size_cap`.
SpectralEmbedding dense_eigh(const Eigen::MatrixXd& A, int n_eig, int size_cap = 2000);

/// Lanczos with full reorthogonalization and seeded restarts; returns the
/// n_eig smallest Ritz pairs. Breakdown on reducible matrices restarts with
/// a fresh vector deflated against everything already converged.
SpectralEmbedding lanczos_smallest(const Eigen::SparseMatrix<double>& A, const SolverBudget& budget);

enum class SpectrumEnd { smallest, largest };

/// Nystrom extension from l_col greedily chosen columns (each pick maximizes
/// the residual norm against the span of the picks so far). Returns n_eig
/// eigenpairs of the rank-l_col approximation, taken from the requested end
/// of its captured spectrum. Exact whenever rank(A) <= l_col.
SpectralEmbedding nystrom_embed(const Eigen::MatrixXd& A, const SolverBudget& budget,
                                SpectrumEnd end = SpectrumEnd::smallest);

/// Frobenius reconstruction of the rank-l_col Nystrom approximation built
/// from the same greedy columns (test/diagnostic use).
Eigen::MatrixXd nystrom_reconstruction(const Eigen::MatrixXd& A, const SolverBudget& budget);

/// Column access to a symmetric PSD operator; lets the mini-batch solver run
/// without materializing N x N storage.
class SymOperator {
public:
    virtual ~SymOperator() = default;
    virtual Eigen::Index size() const = 0;
    /// A[:, cols] as a dense block.
    virtual Eigen::MatrixXd columns(const std::vector<int>& cols) const = 0;
    /// A * Y, default composed from column blocks.
    virtual Eigen::MatrixXd apply(const Eigen::MatrixXd& Y) const;
    /// diag(A); the sampled-gradient estimator handles it exactly.
    virtual Eigen::VectorXd diagonal() const = 0;
    /// Upper estimate of ||A||_2 for step-size scaling.
    virtual double norm_bound() const = 0;
    /// Whether full applications (for trace tracking) are cheap.
    virtual bool cheap_full_apply() const { return false; }
};

class DenseSymOperator final : public SymOperator {
public:
    explicit DenseSymOperator(Eigen::MatrixXd A) : A_(std::move(A)) {}
    Eigen::Index size() const override { return A_.rows(); }
    Eigen::MatrixXd columns(const std::vector<int>& cols) const override {
        Eigen::MatrixXd C(A_.rows(), static_cast<Eigen::Index>(cols.size()));
        for (std::size_t j = 0; j < cols.size(); ++j) C.col(static_cast<Eigen::Index>(j)) = A_.col(cols[j]);
        return C;
    }
    Eigen::MatrixXd apply(const Eigen::MatrixXd& Y) const override { return A_ * Y; }
    Eigen::VectorXd diagonal() const override { return A_.diagonal(); }
    double norm_bound() const override { return A_.cwiseAbs().rowwise().sum().maxCoeff(); }
    bool cheap_full_apply() const override { return true; }
    const Eigen::MatrixXd& matrix() const { return A_; }

private:
    Eigen::MatrixXd A_;
};

/// Stochastic Riemannian descent of tr(Y^T L Y) over Y^T Y = E_k: per step a
/// sampled column batch forms the gradient estimate, projected to the
/// tangent space and retracted by thin QR; Rayleigh-Ritz on the final frame
/// yields the eigenpair estimates.
SpectralEmbedding minibatch_stiefel(const SymOperator& L, const SolverBudget& budget);
SpectralEmbedding minibatch_stiefel(const Eigen::MatrixXd& L, const SolverBudget& budget);

/// Fix each column's sign so its largest-magnitude entry is positive.
void canonicalize_signs(Eigen::MatrixXd& vectors);

/// Affinity -> Laplacian -> embedding with the solver routing used across
/// the project: rw systems are solved through the sym form and mapped back
/// by D^{-1/2}; dense-affinity Nystrom runs on the normalized affinity and
/// maps eigenvalues lambda = 1 - sigma. Column signs are canonicalized.
SpectralEmbedding solve_laplacian(const AffinityGraph& g, LaplacianKind kind, SolverKind solver,
                                  SolverBudget budget, int dense_cap = 2000);

} // namespace sanet
