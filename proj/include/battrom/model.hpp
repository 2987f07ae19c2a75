#ifndef BATTROM_MODEL_HPP
#define BATTROM_MODEL_HPP

#include <array>
#include <span>
#include <string>
#include <vector>

#include "battrom/grid.hpp"
#include "battrom/linalg.hpp"
#include "battrom/materials.hpp"

namespace battrom {

/// Unknown layout. Concentration DOFs exist only where ions live (the
/// collectors carry c = 0 identically and are excluded); potential DOFs
/// exist in every cell. Packed vectors are [c-block | phi-block].
struct DofMap {
    std::vector<int> c_dof;     // per cell; -1 in collectors
    std::vector<int> phi_dof;   // per cell; equals n_c + cell
    std::vector<int> dof_cell;  // per dof
    std::vector<bool> dof_is_c; // per dof
    int n_c = 0;
    int n_phi = 0;
    int n_dof = 0;

    static DofMap build(const VoxelGrid& grid);
};

/// Concentration/potential pair in unpacked per-field form.
struct State {
    Vector c;    // mol/cm^3, one entry per concentration DOF
    Vector phi;  // V, one entry per cell
};

Vector pack(const DofMap& dof, const State& s);
State unpack(const DofMap& dof, const Vector& u);

enum class NonlinearPart { ButlerVolmer = 0, InverseC = 1 };

/// Out-of-range handling during nonlinear evaluation. Newton iterates
/// may stray outside the physical range; Clamped keeps them evaluable
/// (c_s pinned to [eps, c_max - eps], sinh argument capped at +-500)
/// and records what happened, Strict throws EvaluationError.
enum class EvalMode { Strict, Clamped };

struct EvalFlags {
    bool clamped = false;
    bool sinh_capped = false;
};

/// Butler-Volmer current density j [A/cm^2] from the active particle
/// into the electrolyte. The ion flux over the face is j / F.
/// Preconditions: c_e > 0 and 0 < c_s < c_max for the given side.
double butler_volmer_flux(double c_e, double c_s, double phi_e, double phi_s, bool pos_side,
                          const MaterialData& mat);

/// One electrode|electrolyte face in the assembled operator.
struct BvFaceTerm {
    int face = -1;  // index into FaceSet::interior
    int cell_s = -1, cell_e = -1;
    int dof_cs = -1, dof_ce = -1, dof_phis = -1, dof_phie = -1;
    bool pos_side = false;
    double inv_h = 0.0;  // face area / cell volume
};

/// One electrolyte|electrolyte face carrying the kappa (1-t+) RT/(F c)
/// concentration-gradient contribution to the current.
struct InvCFaceTerm {
    int face = -1;
    int cell_a = -1, cell_b = -1;
    int dof_ca = -1, dof_cb = -1, dof_phia = -1, dof_phib = -1;
    double coef = 0.0;  // inv_c_coefficient / h^2
};

/// Optional face selection with per-face weights, used by the
/// subdomain-split operators (interface faces weighted 1/2).
struct FaceSubset {
    std::vector<int> term_ids;
    std::vector<double> weights;
};

/// The four-way decomposition of the FV operator:
///   A_mu(u) = a_const + mu * a_bnd + a_lin * u + A_bv(u) + A_invc(u),
/// exact by construction. Immutable after assembly; evaluations and
/// Jacobian fills are pure and safe to run concurrently.
struct OperatorSplit {
    VoxelGrid grid;
    FaceSet faces;
    MaterialData mat;
    DofMap dof;

    Vector a_const;
    Vector a_bnd;
    SparseMatrix a_lin;

    std::vector<BvFaceTerm> bv_faces;
    std::vector<InvCFaceTerm> invc_faces;

    /// Per cell: indices of incident face terms, one list per part.
    std::array<std::vector<std::vector<int>>, 2> cell_part_terms;

    /// Jacobian skeleton: CSR pattern (structurally symmetric), base
    /// values holding the a_lin entries, and scatter slots per face term.
    struct JacobianSkeleton {
        std::vector<int> row_offsets;
        std::vector<int> col_indices;
        std::vector<double> base_values;
        std::vector<int> diag_slots;                    // per dof
        std::vector<std::array<int, 16>> bv_slots;      // per bv term
        std::vector<std::array<int, 4>> invc_slots;     // per invc term
    } jac;

    const std::vector<std::vector<int>>& cell_terms(NonlinearPart p) const {
        return cell_part_terms[static_cast<int>(p)];
    }
    int term_count(NonlinearPart p) const {
        return p == NonlinearPart::ButlerVolmer ? static_cast<int>(bv_faces.size())
                                                : static_cast<int>(invc_faces.size());
    }
};

/// Assembles the two-point-flux cell-centered operator and its split.
OperatorSplit assemble_operator(const VoxelGrid& grid, const FaceSet& faces,
                                const MaterialData& mat);

/// Full operator A_mu(u).
Vector apply_full(const OperatorSplit& split, const Vector& u, double mu,
                  EvalMode mode = EvalMode::Clamped, EvalFlags* flags = nullptr);

/// One nonlinear part A_bv(u) or A_invc(u); `subset` restricts to a
/// weighted face subset (nullptr = all faces, weight 1).
Vector apply_part(const OperatorSplit& split, NonlinearPart part, const Vector& u,
                  EvalMode mode = EvalMode::Clamped, EvalFlags* flags = nullptr,
                  const FaceSubset* subset = nullptr);

/// Exact analytic Jacobian of A_mu at u (mu does not enter: only the
/// boundary vector carries the parameter).
SparseMatrix assemble_jacobian(const OperatorSplit& split, const Vector& u,
                               EvalMode mode = EvalMode::Clamped, EvalFlags* flags = nullptr);

/// Same, writing into a matrix previously created by jacobian_skeleton().
SparseMatrix jacobian_skeleton(const OperatorSplit& split);
void assemble_jacobian_into(const OperatorSplit& split, const Vector& u, SparseMatrix& out,
                            EvalMode mode = EvalMode::Clamped, EvalFlags* flags = nullptr);

/// Minimal source-DOF set needed to evaluate the given part at the given
/// image DOFs; deterministic ascending order.
std::vector<int> source_dofs_for(const OperatorSplit& split, NonlinearPart part,
                                 std::span<const int> image_dofs);

/// Evaluates selected entries of a nonlinear part from source values
/// only. u_restricted must hold the values of source_dofs_for(...) in
/// ascending DOF order; cost is proportional to |image_dofs|.
Vector restricted_evaluate(const OperatorSplit& split, NonlinearPart part,
                           std::span<const int> image_dofs, const Vector& u_restricted,
                           EvalMode mode = EvalMode::Clamped);

/// Prebuilt restricted evaluator for repeated online use. Holds the
/// face terms incident to the image rows (optionally limited to a
/// weighted subset), the source-DOF list and scatter tables.
class RestrictedPartEvaluator {
public:
    RestrictedPartEvaluator() = default;
    RestrictedPartEvaluator(const OperatorSplit& split, NonlinearPart part,
                            std::span<const int> image_dofs, const FaceSubset* subset = nullptr);

    const std::vector<int>& image_dofs() const { return image_dofs_; }
    const std::vector<int>& source_dofs() const { return source_dofs_; }

    Vector evaluate(const OperatorSplit& split, const Vector& u_source,
                    EvalMode mode = EvalMode::Clamped, EvalFlags* flags = nullptr) const;

    /// Jacobian of the restricted evaluation w.r.t. the source values,
    /// in compressed rows (row r covers image_dofs()[r]).
    struct LocalJacobian {
        std::vector<int> row_offsets;
        std::vector<int> source_pos;
        std::vector<double> values;
    };
    const LocalJacobian& jacobian_structure() const { return jac_; }
    void jacobian(const OperatorSplit& split, const Vector& u_source, LocalJacobian& out,
                  EvalMode mode = EvalMode::Clamped, EvalFlags* flags = nullptr) const;

private:
    NonlinearPart part_ = NonlinearPart::ButlerVolmer;
    std::vector<int> image_dofs_;
    std::vector<int> source_dofs_;

    struct FaceEntry {
        int term = -1;
        double weight = 1.0;
        std::array<int, 4> src{-1, -1, -1, -1};  // positions in source_dofs_
        int n_targets = 0;
        std::array<int, 4> target_row{};
        std::array<double, 4> target_mult{};
        std::array<int, 16> jac_slot{};  // per (target, input) pair
    };
    std::vector<FaceEntry> entries_;
    LocalJacobian jac_;  // structure template (values zeroed)
};

/// Initial condition: concentrations per region, potentials at the
/// per-side open-circuit levels (0 in the electrolyte) so the t = 0
/// residual vanishes at mu = 0.
Vector initial_state(const VoxelGrid& grid, const DofMap& dof, const MaterialData& mat);

/// Physical-range predicate: c > 0 in the electrolyte, 0 < c < c_max in
/// the electrodes. Not enforced by constructors; solvers validate final
/// states with it.
bool state_admissible(const OperatorSplit& split, const Vector& u, std::string* why = nullptr);

/// Total ion content over electrolyte + electrodes (mol).
double total_lithium(const OperatorSplit& split, const Vector& u);

} // namespace battrom

#endif
