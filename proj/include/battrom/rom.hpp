#ifndef BATTROM_ROM_HPP
#define BATTROM_ROM_HPP

#include <utility>
#include <vector>

#include "battrom/ei.hpp"
#include "battrom/pod.hpp"
#include "battrom/timestepper.hpp"

namespace battrom {

enum class Var { C = 0, Phi = 1 };

/// One direct-sum component of the reduced space: modes supported on a
/// fixed DOF set (a whole variable block, or one variable on one
/// subdomain), stored on their local rows only.
struct ReducedBlock {
    Var var = Var::C;
    int subdomain = 0;
    std::vector<int> dofs;  // ascending global packed DOF indices
    Matrix modes;           // |dofs| x dim, orthonormal

    int dim() const { return static_cast<int>(modes.cols()); }
};

/// Reduced space V~ = (+) blocks, with cross-variable blocks zero by
/// construction. The global two-block layout and the localized
/// 2K-block layout share this type; a K = 1 partition reproduces the
/// global layout exactly.
struct ReducedSpace {
    std::vector<ReducedBlock> blocks;
    std::vector<int> offsets;  // size blocks+1
    int n_dof = 0;

    std::vector<int> dof_block;      // per full DOF: owning block
    std::vector<int> dof_local_row;  // per full DOF: row inside the block

    int total_dim() const { return offsets.empty() ? 0 : offsets.back(); }

    void finalize();  // fills offsets and the dof maps

    Vector project(const Vector& full) const;
    Vector reconstruct(const Vector& coords) const;
    Matrix reconstruct_all(const Matrix& coords) const;

    /// Per-block dimension cap (applied to every block).
    ReducedSpace truncated(int dim_cap) const;

    /// max_i dim of the per-subdomain space (c and phi summed), the
    /// localized sweep axis; equals the total for one subdomain.
    int max_subdomain_dim() const;
};

/// Global reduced space from separate-variable PODs.
ReducedSpace make_global_space(const DofMap& dof, const PodBasis& c_basis,
                               const PodBasis& phi_basis);

/// Separate-variable PODs of packed snapshot states.
struct GlobalBases {
    PodBasis c;
    PodBasis phi;
};
GlobalBases pod_separate_variables(const DofMap& dof, const Matrix& states, double rel_tol);

/// Offline-projected reduced system
///   B~ + r_const + mu r_bnd + lin + sum_blocks P L^{-1} (restricted eval)(S q).
/// Immutable and shareable across parameters; all mu-independent
/// projections are precomputed.
struct ReducedOperator {
    ReducedSpace space;

    Vector r_const;
    Vector r_bnd;

    struct LinBlock {
        int bi = 0, bj = 0;
        Matrix m;
    };
    std::vector<LinBlock> lin_blocks;

    struct EIBlock {
        EIData ei;
        std::vector<int> row_blocks;
        Matrix pl;  // (sum of row-block dims) x M, = projected collateral * tri^{-1}
        std::vector<int> col_blocks;
        Matrix s;   // M' x (sum of col-block dims), source restriction of the modes
    };
    std::vector<EIBlock> ei_blocks;

    /// Structural block pattern of the reduced Jacobian (sorted pairs).
    std::vector<std::pair<int, int>> block_pattern;

    int total_dim() const { return space.total_dim(); }
};

/// Projects the affine parts onto the space and precomputes the EI
/// chains. `ei_list` holds one (possibly block-local) interpolation
/// structure per nonlinear contribution.
ReducedOperator build_reduced_operator(const OperatorSplit& split, const ReducedSpace& space,
                                       const std::vector<const EIData*>& ei_list);

/// Reduced residual at fixed previous state, and its dense Jacobian
/// (test/diagnostic path; the trajectory solver uses the same kernels).
Vector reduced_residual(const ReducedOperator& rop, const OperatorSplit& split, const Vector& q,
                        const Vector& q_prev, double mu, double dt,
                        EvalMode mode = EvalMode::Clamped, EvalFlags* flags = nullptr);
Matrix reduced_jacobian_dense(const ReducedOperator& rop, const OperatorSplit& split,
                              const Vector& q, double dt, EvalMode mode = EvalMode::Clamped);

struct ReducedTrajectory {
    Matrix coords;  // total_dim x (n_steps + 1)
    double mu = 0.0;
    TimeGrid tg;
    std::vector<StepDiagnostics> diagnostics;
};

/// Implicit Euler + Newton in reduced coordinates. The linear solver
/// switches to a block-sparse LU when the reduced dimension is large
/// and the space has more than two blocks. Nonconvergence raises
/// NonconvergenceError carrying the step index.
ReducedTrajectory solve_reduced_trajectory(const ReducedOperator& rop, const OperatorSplit& split,
                                           const TimeGrid& tg, double mu,
                                           const TrajectoryOptions& opts);

/// Relative model-reduction errors per variable: max over time of the
/// weighted-L2 spatial error, normalized by the max over time of the
/// full solution norm.
struct ReductionError {
    double c = 0.0;
    double phi = 0.0;
};
ReductionError reduction_error(const Matrix& full_states, const Matrix& reduced_states, int n_c);

} // namespace battrom

#endif
