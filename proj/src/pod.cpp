#include "battrom/pod.hpp"

#include <cmath>

namespace battrom {

PodBasis PodBasis::truncated(Eigen::Index m) const {
    if (m >= size()) return *this;
    PodBasis b;
    b.modes = modes.leftCols(m);
    b.singular_values = singular_values.head(m);
    b.weights = weights;
    b.tolerance_used = tolerance_used;
    return b;
}

PodBasis pod(const SnapshotSet& snapshots, double rel_tol) {
    const Eigen::Index n = snapshots.length();
    const Eigen::Index q = snapshots.count();
    if (!snapshots.vectors.allFinite()) throw DataError("pod: snapshot data contains non-finite values");
    if (snapshots.weights.size() != 0) {
        if (snapshots.weights.size() != n) throw ContractError("pod: weight length mismatch");
        if (!(snapshots.weights.minCoeff() > 0.0))
            throw DataError("pod: weights must be strictly positive");
    }

    PodBasis basis;
    basis.weights = snapshots.weights;
    basis.tolerance_used = rel_tol;
    basis.modes.resize(n, 0);
    basis.singular_values.resize(0);
    if (n == 0 || q == 0) return basis;

    const bool weighted = snapshots.weights.size() != 0;
    Vector evals;    // descending eigenvalues = sigma^2
    Matrix evecs;    // of the chosen (Gram or correlation) problem
    bool gram_route;

    if (q <= n) {
        // Gram matrix G_pq = <v_p, v_q>_w
        gram_route = true;
        Matrix g(q, q);
        if (weighted) {
            const Matrix wx = snapshots.weights.asDiagonal() * snapshots.vectors;
            g = snapshots.vectors.transpose() * wx;
        } else {
            g = snapshots.vectors.transpose() * snapshots.vectors;
        }
        g = 0.5 * (g + g.transpose());  // symmetrize roundoff
        const EigenPairs ep = sym_eig(g);
        evals = ep.values;
        evecs = ep.vectors;
    } else {
        // spatial correlation C = W^{1/2} X X^T W^{1/2}
        gram_route = false;
        Matrix y = snapshots.vectors;
        Vector sqrt_w;
        if (weighted) {
            sqrt_w = snapshots.weights.cwiseSqrt();
            y = sqrt_w.asDiagonal() * y;
        }
        Matrix c = y * y.transpose();
        c = 0.5 * (c + c.transpose());
        const EigenPairs ep = sym_eig(c);
        evals = ep.values;
        evecs = ep.vectors;
        if (weighted) {
            // modes of the weighted problem are W^{-1/2} * eigenvectors
            for (Eigen::Index i = 0; i < evecs.cols(); ++i)
                evecs.col(i) = evecs.col(i).cwiseQuotient(sqrt_w);
        }
    }

    const Eigen::Index rank_bound = std::min(n, q);
    const double total = std::max(evals.head(rank_bound).cwiseMax(0.0).sum(), 0.0);
    if (total <= 0.0) return basis;  // all-zero snapshots

    // numerical rank floor, applied even at rel_tol = 0
    const double lambda_floor = evals(0) * 1e-28;

    Eigen::Index keep = 0;
    double tail = total;
    for (Eigen::Index k = 0; k < rank_bound; ++k) {
        if (std::sqrt(std::max(tail, 0.0)) <= rel_tol * std::sqrt(total)) break;
        if (!(evals(k) > lambda_floor)) break;
        tail -= std::max(evals(k), 0.0);
        ++keep;
    }

    basis.singular_values.resize(keep);
    basis.modes.resize(n, keep);
    for (Eigen::Index k = 0; k < keep; ++k) {
        const double sigma = std::sqrt(evals(k));
        basis.singular_values(k) = sigma;
        if (gram_route) basis.modes.col(k) = snapshots.vectors * (evecs.col(k) / sigma);
        else basis.modes.col(k) = evecs.col(k);
    }
    return basis;
}

Projection project(const PodBasis& basis, const Vector& v) {
    if (v.size() != basis.modes.rows()) throw ContractError("project: length mismatch");
    Projection p;
    if (basis.weights.size() != 0)
        p.coefficients = basis.modes.transpose() * basis.weights.cwiseProduct(v).matrix();
    else
        p.coefficients = basis.modes.transpose() * v;
    p.reconstruction = basis.modes * p.coefficients;
    return p;
}

} // namespace battrom
