#include "sanet/laplacian.hpp"

#include <string>

#include "sanet/errors.hpp"

namespace sanet {

Eigen::VectorXd degree_vector(const AffinityGraph& g) {
    Eigen::VectorXd d(g.n);
    if (g.sparse_storage) {
        d.setZero();
        for (int outer = 0; outer < g.sparse.outerSize(); ++outer) {
            for (Eigen::SparseMatrix<double>::InnerIterator it(g.sparse, outer); it; ++it) {
                d[it.row()] += it.value();
            }
        }
    } else {
        d = g.dense.rowwise().sum();
    }
    for (int i = 0; i < g.n; ++i) {
        if (d[i] <= 0.0) {
            throw IsolatedNodeError("node " + std::to_string(i) + " is isolated (zero degree) in " +
                                    describe(g.kind) + " graph");
        }
    }
    return d;
}

LaplacianMatrix laplacian(const AffinityGraph& g, LaplacianKind kind) {
    LaplacianMatrix L;
    L.n = g.n;
    L.kind = kind;
    L.sparse_storage = g.sparse_storage;
    L.degrees = degree_vector(g);

    const Eigen::VectorXd inv_sqrt = L.degrees.cwiseSqrt().cwiseInverse();
    const Eigen::VectorXd inv = L.degrees.cwiseInverse();

    if (g.sparse_storage) {
        Eigen::SparseMatrix<double> scaled;
        switch (kind) {
            case LaplacianKind::unnormalized:
                scaled = g.sparse;
                break;
            case LaplacianKind::sym:
                scaled = inv_sqrt.asDiagonal() * g.sparse * inv_sqrt.asDiagonal();
                break;
            case LaplacianKind::rw:
                scaled = inv.asDiagonal() * g.sparse;
                break;
        }
        Eigen::SparseMatrix<double> diag(g.n, g.n);
        diag.setIdentity();
        if (kind == LaplacianKind::unnormalized) {
            diag = L.degrees.asDiagonal();
        }
        L.sparse = diag - scaled;
        L.sparse.makeCompressed();
    } else {
        switch (kind) {
            case LaplacianKind::unnormalized:
                L.dense = Eigen::MatrixXd(L.degrees.asDiagonal());
                L.dense -= g.dense;
                break;
            case LaplacianKind::sym:
                L.dense = -(inv_sqrt.asDiagonal() * g.dense * inv_sqrt.asDiagonal());
                L.dense.diagonal().array() += 1.0;
                break;
            case LaplacianKind::rw:
                L.dense = -(inv.asDiagonal() * g.dense);
                L.dense.diagonal().array() += 1.0;
                break;
        }
    }
    return L;
}

} // namespace sanet
