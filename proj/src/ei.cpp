#include "battrom/ei.hpp"

#include <algorithm>
#include <cmath>

namespace battrom {

EIGreedyResult ei_greedy_core(const Matrix& training, double rel_tol, int max_M) {
    if (!training.allFinite()) throw DataError("ei_greedy: training data contains non-finite values");
    EIGreedyResult out;
    const Eigen::Index rows = training.rows();
    const Eigen::Index q = training.cols();
    out.collateral.resize(rows, 0);
    out.tri.resize(0, 0);
    if (rows == 0 || q == 0) return out;

    const double ref = training.cwiseAbs().maxCoeff();
    if (ref <= 0.0) return out;  // all-zero training set: the zero map
    const double floor = 1e-14 * ref;

    Matrix resid = training;  // interpolation errors, updated in place
    std::vector<Vector> basis;
    std::vector<int> rows_sel;

    const int cap = max_M > 0 ? std::min<int>(max_M, static_cast<int>(std::min(rows, q)))
                              : static_cast<int>(std::min(rows, q));
    for (int m = 0; m < cap; ++m) {
        // max |residual|, ties to lowest row (DOF) then lowest column
        int best_r = -1, best_q = -1;
        double best = 0.0;
        for (Eigen::Index r = 0; r < rows; ++r)
            for (Eigen::Index c = 0; c < q; ++c) {
                const double v = std::abs(resid(r, c));
                if (v > best) {
                    best = v;
                    best_r = static_cast<int>(r);
                    best_q = static_cast<int>(c);
                }
            }
        out.greedy_errors.push_back(best / ref);
        if (best <= rel_tol * ref || best <= floor) break;

        Vector xi = resid.col(best_q) / resid(best_r, best_q);
        // matching the new basis vector at its own DOF zeroes that row
        // of every residual; previously selected rows stay exactly zero
        for (Eigen::Index c = 0; c < q; ++c) resid.col(c) -= resid(best_r, c) * xi;
        rows_sel.push_back(best_r);
        basis.push_back(std::move(xi));
    }

    const int m = static_cast<int>(basis.size());
    out.interp_rows = std::move(rows_sel);
    out.collateral.resize(rows, m);
    for (int k = 0; k < m; ++k) out.collateral.col(k) = basis[k];
    out.tri = Matrix::Zero(m, m);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j <= i; ++j) out.tri(i, j) = out.collateral(out.interp_rows[i], j);
    return out;
}

std::vector<int> part_support_rows(const OperatorSplit& split, NonlinearPart part,
                                   const FaceSubset* subset) {
    std::vector<int> rows;
    const auto add_bv = [&](const BvFaceTerm& f) {
        rows.insert(rows.end(), {f.dof_cs, f.dof_ce, f.dof_phis, f.dof_phie});
    };
    const auto add_invc = [&](const InvCFaceTerm& f) {
        rows.insert(rows.end(), {f.dof_phia, f.dof_phib});
    };
    if (subset) {
        for (int t : subset->term_ids) {
            if (part == NonlinearPart::ButlerVolmer) add_bv(split.bv_faces[t]);
            else add_invc(split.invc_faces[t]);
        }
    } else if (part == NonlinearPart::ButlerVolmer) {
        for (const auto& f : split.bv_faces) add_bv(f);
    } else {
        for (const auto& f : split.invc_faces) add_invc(f);
    }
    std::sort(rows.begin(), rows.end());
    rows.erase(std::unique(rows.begin(), rows.end()), rows.end());
    return rows;
}

Matrix part_training_matrix(const OperatorSplit& split, NonlinearPart part, const Matrix& states,
                            const std::vector<int>& support_rows, const FaceSubset* subset) {
    Matrix out(static_cast<Eigen::Index>(support_rows.size()), states.cols());
    for (Eigen::Index s = 0; s < states.cols(); ++s) {
        const Vector full = apply_part(split, part, states.col(s), EvalMode::Clamped, nullptr,
                                       subset);
        for (size_t r = 0; r < support_rows.size(); ++r)
            out(static_cast<Eigen::Index>(r), s) = full(support_rows[r]);
    }
    return out;
}

EIData ei_greedy(const OperatorSplit& split, NonlinearPart part, const Matrix& training,
                 const std::vector<int>& support_rows, double rel_tol, int max_M,
                 std::optional<FaceSubset> faces) {
    if (training.rows() != static_cast<Eigen::Index>(support_rows.size()))
        throw ContractError("ei_greedy: training rows do not match the support row list");

    EIData ei;
    ei.part = part;
    ei.support_rows = support_rows;
    ei.faces = std::move(faces);

    EIGreedyResult core = ei_greedy_core(training, rel_tol, max_M);
    ei.collateral = std::move(core.collateral);
    ei.tri = std::move(core.tri);
    ei.greedy_errors = std::move(core.greedy_errors);
    ei.interp_dofs.reserve(core.interp_rows.size());
    for (int r : core.interp_rows) ei.interp_dofs.push_back(support_rows[r]);

    const FaceSubset* sub = ei.faces ? &*ei.faces : nullptr;
    ei.evaluator = RestrictedPartEvaluator(split, part, ei.interp_dofs, sub);
    ei.source_dofs = ei.evaluator.source_dofs();
    if (static_cast<int>(ei.source_dofs.size()) > 14 * ei.size())
        throw ContractError("EI restriction bound violated: |source| > 14 M");
    return ei;
}

EIData EIData::truncated(const OperatorSplit& split, int m) const {
    if (m >= size()) return *this;
    EIData out;
    out.part = part;
    out.support_rows = support_rows;
    out.faces = faces;
    out.interp_dofs.assign(interp_dofs.begin(), interp_dofs.begin() + m);
    out.collateral = collateral.leftCols(m);
    out.tri = tri.topLeftCorner(m, m);
    out.greedy_errors.assign(greedy_errors.begin(),
                             greedy_errors.begin() + std::min<size_t>(m, greedy_errors.size()));
    const FaceSubset* sub = out.faces ? &*out.faces : nullptr;
    out.evaluator = RestrictedPartEvaluator(split, part, out.interp_dofs, sub);
    out.source_dofs = out.evaluator.source_dofs();
    return out;
}

Vector interpolation_coefficients(const EIData& ei, const OperatorSplit& split,
                                  const Vector& u_source, EvalMode mode, EvalFlags* flags) {
    const Vector at_dofs = ei.evaluator.evaluate(split, u_source, mode, flags);
    return ei.tri.triangularView<Eigen::Lower>().solve(at_dofs);
}

Vector interpolated_apply(const EIData& ei, const OperatorSplit& split, const Vector& u,
                          EvalMode mode) {
    Vector out = Vector::Zero(split.dof.n_dof);
    if (ei.empty()) return out;
    Vector u_src(static_cast<Eigen::Index>(ei.source_dofs.size()));
    for (size_t i = 0; i < ei.source_dofs.size(); ++i) u_src(i) = u(ei.source_dofs[i]);
    const Vector alpha = interpolation_coefficients(ei, split, u_src, mode);
    const Vector on_support = ei.collateral * alpha;
    for (size_t r = 0; r < ei.support_rows.size(); ++r) out(ei.support_rows[r]) += on_support(r);
    return out;
}

} // namespace battrom
