#ifndef BATTROM_LOCALIZED_HPP
#define BATTROM_LOCALIZED_HPP

#include <array>

#include "battrom/rom.hpp"

namespace battrom {

/// Guards the degenerate limit where subdomains shrink toward single
/// voxels (the reduced space then approaches the full space while the
/// interpolated operator images stay low-dimensional). Default: at
/// least 2 voxels per axis, overridable.
void check_partition_granularity(const VoxelGrid& grid, const MacroPartition& partition,
                                 int min_voxels_per_axis = 2);

/// Localized reduced space: for every subdomain and variable, a POD of
/// the L2-orthogonal projections of the snapshots onto the local FV
/// space (restriction to the subdomain's DOFs; local modes vanish
/// outside their subdomain by construction). Blocks are ordered all-c
/// first, then all-phi, subdomains ascending, so K = 1 reproduces the
/// global two-block layout exactly.
ReducedSpace build_localized_space(const OperatorSplit& split, const MacroPartition& partition,
                                   const Matrix& states, double rel_tol);

/// Per-subdomain flux accumulators A'_i: every face contributes to the
/// subdomains whose closure contains it; faces on a subdomain interface
/// contribute to both sides at half weight, so sum_i A'_i = A exactly.
struct FluxSplitOperator {
    int subdomain_count = 0;
    std::array<std::vector<FaceSubset>, 2> blocks;  // [part][subdomain]

    const FaceSubset& subset(NonlinearPart p, int i) const {
        return blocks[static_cast<int>(p)][i];
    }
};

FluxSplitOperator build_flux_split(const OperatorSplit& split, const MacroPartition& partition);

/// A'_i(u) on the full DOF layout (test/oracle path).
Vector apply_flux_split_block(const OperatorSplit& split, const FluxSplitOperator& fs,
                              NonlinearPart part, int subdomain, const Vector& u,
                              EvalMode mode = EvalMode::Clamped);

/// Per-subdomain interpolation structures for both nonlinear parts.
struct LocalEIData {
    enum class Variant { Projected, FluxSplit };
    Variant variant = Variant::Projected;
    int subdomain_count = 0;
    std::array<std::vector<EIData>, 2> blocks;  // [part][subdomain]

    std::vector<const EIData*> all_blocks() const;

    /// max_i max(M_i over parts), the localized interpolation sweep axis.
    int max_local_m() const;
    /// max_i max(|source DOFs| over parts), the flux-split variant axis.
    int max_local_m_prime() const;

    LocalEIData truncated(const OperatorSplit& split, int m_cap_per_block) const;
};

/// EI-Greedy per subdomain on the subdomain-projected evaluations
/// P_{V_h,i}(A(u)): image DOFs stay inside the subdomain, sources may
/// reach one cell beyond.
LocalEIData build_local_ei_projected(const OperatorSplit& split, const MacroPartition& partition,
                                     const Matrix& states, double rel_tol, int max_M_per_block);

/// EI-Greedy per subdomain on evaluations of the flux-split operators
/// A'_i; image support extends one cell into face-neighbor subdomains,
/// which keeps the interface fluxes consistent between blocks.
LocalEIData build_local_ei_fluxsplit(const OperatorSplit& split, const FluxSplitOperator& fs,
                                     const Matrix& states, double rel_tol, int max_M_per_block);

/// Reduced operator on the localized space with block-local EI; shares
/// the assembly (and hence the reduced Newton) with the global scheme.
ReducedOperator build_localized_rom(const OperatorSplit& split, const ReducedSpace& space,
                                    const LocalEIData& lei);

/// Expected structural coupling: block pairs (i, j) of face-adjacent
/// subdomains that share at least one assembled coupling, plus the
/// diagonal. Used by the block-sparsity structure test.
std::vector<std::pair<int, int>> subdomain_adjacency(const OperatorSplit& split,
                                                     const MacroPartition& partition);

} // namespace battrom

#endif
