#ifndef BATTROM_EI_HPP
#define BATTROM_EI_HPP

#include <optional>
#include <vector>

#include "battrom/linalg.hpp"
#include "battrom/model.hpp"

namespace battrom {

/// Interpolation structure for one nonlinear operator (or one
/// subdomain-split block of it).
///
/// The interpolation matrix (collateral basis evaluated at the
/// interpolation DOFs) is unit lower triangular in greedy order, so the
/// online solve is a forward substitution. The restriction bound
/// |source_dofs| <= 14 * M of the seven-point FV stencil is asserted at
/// construction.
struct EIData {
    NonlinearPart part = NonlinearPart::ButlerVolmer;
    std::vector<int> interp_dofs;   // the M magic points, greedy order
    std::vector<int> support_rows;  // rows on which the collateral basis lives
    Matrix collateral;              // |support_rows| x M
    Matrix tri;                     // M x M unit lower triangular
    std::vector<int> source_dofs;   // ascending
    std::vector<double> greedy_errors;  // max relative training error per iteration

    /// Weighted face subset when this block interpolates a split
    /// operator; empty = the full part.
    std::optional<FaceSubset> faces;

    RestrictedPartEvaluator evaluator;

    int size() const { return static_cast<int>(interp_dofs.size()); }
    bool empty() const { return interp_dofs.empty(); }

    /// First-m structure (nested by construction of the greedy).
    EIData truncated(const OperatorSplit& split, int m) const;
};

/// Core EI-Greedy on a training matrix whose rows are the given DOF
/// support. At each step the evaluation with the largest max-norm
/// interpolation error is selected, the DOF of its largest error
/// magnitude becomes the next interpolation point, and the normalized
/// error vector joins the collateral basis. Stops at
/// max-relative-error <= rel_tol (relative to the training set max),
/// at max_M, or when the training set is exhausted. Ties break to the
/// lowest DOF index, then the lowest evaluation index.
struct EIGreedyResult {
    std::vector<int> interp_rows;  // positions in the support rows
    Matrix collateral;             // support x M
    Matrix tri;
    std::vector<double> greedy_errors;
};
EIGreedyResult ei_greedy_core(const Matrix& training, double rel_tol, int max_M);

/// EI-Greedy on evaluations of one part (optionally a weighted face
/// subset), wired to the operator: computes source DOFs and the online
/// restricted evaluator. `training` rows follow `support_rows`.
EIData ei_greedy(const OperatorSplit& split, NonlinearPart part, const Matrix& training,
                 const std::vector<int>& support_rows, double rel_tol, int max_M,
                 std::optional<FaceSubset> faces = std::nullopt);

/// Image-row support of a part (rows that any face of the subset can
/// write to), ascending.
std::vector<int> part_support_rows(const OperatorSplit& split, NonlinearPart part,
                                   const FaceSubset* subset = nullptr);

/// Training matrix for ei_greedy: evaluations of the part at the given
/// states, restricted to support_rows.
Matrix part_training_matrix(const OperatorSplit& split, NonlinearPart part, const Matrix& states,
                            const std::vector<int>& support_rows,
                            const FaceSubset* subset = nullptr);

/// Full interpolated operator I ( A~ ( R u ) ) expanded on the global
/// DOF layout; the offline/online split in the reduced model uses the
/// projected form instead.
Vector interpolated_apply(const EIData& ei, const OperatorSplit& split, const Vector& u,
                          EvalMode mode = EvalMode::Clamped);

/// Interpolation coefficients alpha = tri^{-1} (evaluations at the
/// interpolation DOFs), from source values only.
Vector interpolation_coefficients(const EIData& ei, const OperatorSplit& split,
                                  const Vector& u_source, EvalMode mode = EvalMode::Clamped,
                                  EvalFlags* flags = nullptr);

} // namespace battrom

#endif
