#ifndef BATTROM_POD_HPP
#define BATTROM_POD_HPP

#include "battrom/linalg.hpp"

namespace battrom {

/// Snapshot collection with the diagonal weights of the discrete L^2
/// product (relative cell volumes; empty = uniform).
struct SnapshotSet {
    Matrix vectors;  // one snapshot per column
    Vector weights;  // length = rows, strictly positive; empty = 1

    Eigen::Index count() const { return vectors.cols(); }
    Eigen::Index length() const { return vectors.rows(); }
};

struct PodBasis {
    Matrix modes;            // orthonormal w.r.t. the weighted product
    Vector singular_values;  // nonincreasing, one per retained mode
    Vector weights;          // the product used (empty = uniform)
    double tolerance_used = 0.0;

    Eigen::Index size() const { return modes.cols(); }

    PodBasis truncated(Eigen::Index m) const;
};

/// Method-of-snapshots POD with the l2-energy truncation rule: the
/// retained size is the smallest m with
///   sqrt(sum_{k>m} sigma_k^2) <= rel_tol * sqrt(sum_k sigma_k^2).
/// When the snapshot count exceeds the vector length the equivalent
/// spatial-correlation eigenproblem is solved instead (same spectrum).
/// Empty or all-zero input yields an empty basis; non-finite entries
/// raise DataError.
PodBasis pod(const SnapshotSet& snapshots, double rel_tol);

struct Projection {
    Vector coefficients;
    Vector reconstruction;
};

/// Weighted-orthogonal projection onto the basis.
Projection project(const PodBasis& basis, const Vector& v);

} // namespace battrom

#endif
