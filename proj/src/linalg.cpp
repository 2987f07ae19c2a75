#include "battrom/linalg.hpp"

#include <cmath>

#include <Eigen/Eigenvalues>
#include <Eigen/SparseLU>

namespace battrom {

struct SparseFactorization::Impl {
    Eigen::SparseMatrix<double> a_colmajor;
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
};

SparseFactorization::SparseFactorization(const SparseMatrix& a) : impl_(new Impl) {
    if (a.rows() != a.cols())
        throw ContractError("SparseFactorization: matrix must be square");
    impl_->a_colmajor = a.eigen();
    impl_->lu.isSymmetric(false);
    impl_->lu.analyzePattern(impl_->a_colmajor);
    impl_->lu.factorize(impl_->a_colmajor);
    if (impl_->lu.info() != Eigen::Success)
        throw FactorizationError("sparse LU factorization failed: " + impl_->lu.lastErrorMessage());
}

SparseFactorization::~SparseFactorization() = default;
SparseFactorization::SparseFactorization(SparseFactorization&&) noexcept = default;
SparseFactorization& SparseFactorization::operator=(SparseFactorization&&) noexcept = default;

void SparseFactorization::refactorize(const SparseMatrix& a) {
    impl_->a_colmajor = a.eigen();
    impl_->lu.factorize(impl_->a_colmajor);
    if (impl_->lu.info() != Eigen::Success)
        throw FactorizationError("sparse LU refactorization failed: " +
                                 impl_->lu.lastErrorMessage());
}

Vector SparseFactorization::solve(const Vector& b) const {
    if (b.size() != impl_->a_colmajor.rows())
        throw ContractError("SparseFactorization::solve: length mismatch");
    Vector x = impl_->lu.solve(b);
    if (impl_->lu.info() != Eigen::Success)
        throw FactorizationError("sparse LU solve failed");
    return x;
}

Vector sparse_solve(const SparseMatrix& a, const Vector& b) {
    SparseFactorization f(a);
    return f.solve(b);
}

EigenPairs sym_eig(const Matrix& g) {
    if (g.rows() != g.cols())
        throw ContractError("sym_eig: matrix must be square");
    const double scale = g.cwiseAbs().maxCoeff();
    const double asym = (g - g.transpose()).cwiseAbs().maxCoeff();
    if (scale > 0.0 && asym > 1e-12 * scale)
        throw ContractError("sym_eig: matrix is not symmetric to 1e-12");

    Eigen::SelfAdjointEigenSolver<Matrix> es(g);
    if (es.info() != Eigen::Success)
        throw FactorizationError("sym_eig: eigendecomposition failed");

    // Eigen returns ascending order; flip to descending.
    const Eigen::Index n = g.rows();
    EigenPairs out;
    out.values.resize(n);
    out.vectors.resize(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        out.values(i) = es.eigenvalues()(n - 1 - i);
        out.vectors.col(i) = es.eigenvectors().col(n - 1 - i);
    }
    return out;
}

double weighted_dot(const Vector& w, const Vector& a, const Vector& b) {
    if (a.size() != b.size())
        throw ContractError("weighted_dot: length mismatch");
    if (w.size() == 0) return a.dot(b);
    if (w.size() != a.size())
        throw ContractError("weighted_dot: weight length mismatch");
    return a.cwiseProduct(w).dot(b);
}

double weighted_norm(const Vector& w, const Vector& a) {
    return std::sqrt(weighted_dot(w, a, a));
}

} // namespace battrom
