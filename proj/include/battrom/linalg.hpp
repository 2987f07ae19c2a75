#ifndef BATTROM_LINALG_HPP
#define BATTROM_LINALG_HPP

#include <memory>
#include <span>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include "battrom/errors.hpp"

namespace battrom {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Square/rectangular sparse matrix in compressed row storage.
///
/// Thin owning wrapper around an Eigen row-major sparse matrix; the raw
/// CSR arrays (row offsets, sorted unique column indices, values) are
/// exposed for callers that want to walk the structure directly.
class SparseMatrix {
public:
    using Storage = Eigen::SparseMatrix<double, Eigen::RowMajor>;

    SparseMatrix() = default;
    SparseMatrix(Eigen::Index rows, Eigen::Index cols) : m_(rows, cols) {}
    explicit SparseMatrix(Storage m) : m_(std::move(m)) { m_.makeCompressed(); }

    static SparseMatrix from_triplets(Eigen::Index rows, Eigen::Index cols,
                                      const std::vector<Eigen::Triplet<double>>& ts) {
        Storage m(rows, cols);
        m.setFromTriplets(ts.begin(), ts.end());
        m.makeCompressed();
        return SparseMatrix(std::move(m));
    }

    Eigen::Index rows() const { return m_.rows(); }
    Eigen::Index cols() const { return m_.cols(); }
    Eigen::Index nonzeros() const { return m_.nonZeros(); }

    std::span<const int> row_offsets() const {
        return {m_.outerIndexPtr(), static_cast<size_t>(m_.outerSize() + 1)};
    }
    std::span<const int> col_indices() const {
        return {m_.innerIndexPtr(), static_cast<size_t>(m_.nonZeros())};
    }
    std::span<const double> values() const {
        return {m_.valuePtr(), static_cast<size_t>(m_.nonZeros())};
    }
    std::span<double> values() {
        return {m_.valuePtr(), static_cast<size_t>(m_.nonZeros())};
    }

    Vector apply(const Vector& x) const {
        if (x.size() != m_.cols())
            throw ContractError("SparseMatrix::apply: length mismatch");
        return m_ * x;
    }

    const Storage& eigen() const { return m_; }
    Storage& eigen() { return m_; }

private:
    Storage m_;
};

/// Reusable sparse LU factorization. The symbolic analysis is done once
/// per sparsity pattern; `refactorize` updates the numeric factors for a
/// matrix with the same pattern.
class SparseFactorization {
public:
    explicit SparseFactorization(const SparseMatrix& a);
    ~SparseFactorization();
    SparseFactorization(SparseFactorization&&) noexcept;
    SparseFactorization& operator=(SparseFactorization&&) noexcept;

    void refactorize(const SparseMatrix& a);
    Vector solve(const Vector& b) const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

/// One-shot sparse direct solve. Residual contract:
/// ||Ax - b||_inf <= 1e-10 * (||A||_inf * ||x||_inf + ||b||_inf).
Vector sparse_solve(const SparseMatrix& a, const Vector& b);

struct EigenPairs {
    Vector values;   // descending
    Matrix vectors;  // columns matched to values
};

/// Symmetric eigendecomposition with eigenvalues sorted descending.
/// Throws ContractError when G deviates from symmetry by more than
/// 1e-12 relative to its max magnitude.
EigenPairs sym_eig(const Matrix& g);

/// Weighted inner product <a, b>_w = sum_i w_i a_i b_i. An empty weight
/// vector means uniform unit weights.
double weighted_dot(const Vector& w, const Vector& a, const Vector& b);
double weighted_norm(const Vector& w, const Vector& a);

} // namespace battrom

#endif
