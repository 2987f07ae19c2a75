#include "battrom/localized.hpp"

#include <algorithm>

namespace battrom {

void check_partition_granularity(const VoxelGrid& grid, const MacroPartition& partition,
                                 int min_voxels_per_axis) {
    const auto bs = partition.block_size(grid);
    for (int a = 0; a < 3; ++a) {
        // a grid that is thin along an axis cannot violate the guard there
        if (grid.dims[a] >= min_voxels_per_axis && bs[a] < min_voxels_per_axis)
            throw PartitionError("subdomains thinner than " +
                                 std::to_string(min_voxels_per_axis) +
                                 " voxels along axis " + std::to_string(a) +
                                 " destabilize the localized scheme");
    }
}

namespace {

std::vector<std::vector<int>> subdomain_dofs(const OperatorSplit& split,
                                             const MacroPartition& partition, Var var) {
    std::vector<std::vector<int>> out(partition.subdomain_count);
    for (int cell = 0; cell < split.grid.cell_count(); ++cell) {
        const int sub = partition.cell_to_subdomain[cell];
        if (var == Var::C) {
            if (split.dof.c_dof[cell] >= 0) out[sub].push_back(split.dof.c_dof[cell]);
        } else {
            out[sub].push_back(split.dof.phi_dof[cell]);
        }
    }
    for (auto& v : out) std::sort(v.begin(), v.end());
    return out;
}

} // namespace

ReducedSpace build_localized_space(const OperatorSplit& split, const MacroPartition& partition,
                                   const Matrix& states, double rel_tol) {
    if (states.rows() != split.dof.n_dof)
        throw ContractError("build_localized_space: snapshot length mismatch");
    ReducedSpace space;
    space.n_dof = split.dof.n_dof;

    for (Var var : {Var::C, Var::Phi}) {
        const auto dofs_per_sub = subdomain_dofs(split, partition, var);
        for (int i = 0; i < partition.subdomain_count; ++i) {
            ReducedBlock blk;
            blk.var = var;
            blk.subdomain = i;
            blk.dofs = dofs_per_sub[i];
            const Eigen::Index rows = static_cast<Eigen::Index>(blk.dofs.size());
            if (rows == 0) {
                blk.modes.resize(0, 0);
            } else {
                // L2 projection onto the local FV space is restriction
                // for piecewise constants
                SnapshotSet snaps;
                snaps.vectors.resize(rows, states.cols());
                for (Eigen::Index r = 0; r < rows; ++r)
                    snaps.vectors.row(r) = states.row(blk.dofs[r]);
                blk.modes = pod(snaps, rel_tol).modes;
            }
            space.blocks.push_back(std::move(blk));
        }
    }
    space.finalize();
    return space;
}

FluxSplitOperator build_flux_split(const OperatorSplit& split, const MacroPartition& partition) {
    if (static_cast<int>(partition.cell_to_subdomain.size()) != split.grid.cell_count())
        throw ContractError("build_flux_split: partition does not match the grid");
    FluxSplitOperator fs;
    fs.subdomain_count = partition.subdomain_count;
    for (int p = 0; p < 2; ++p) fs.blocks[p].resize(partition.subdomain_count);

    const auto add = [&](NonlinearPart part, int term, int cell_a, int cell_b) {
        const int sa = partition.cell_to_subdomain[cell_a];
        const int sb = partition.cell_to_subdomain[cell_b];
        auto& vec = fs.blocks[static_cast<int>(part)];
        if (sa == sb) {
            vec[sa].term_ids.push_back(term);
            vec[sa].weights.push_back(1.0);
        } else {
            // the face lies in both closures: half weight on each side
            vec[sa].term_ids.push_back(term);
            vec[sa].weights.push_back(0.5);
            vec[sb].term_ids.push_back(term);
            vec[sb].weights.push_back(0.5);
        }
    };
    for (size_t t = 0; t < split.bv_faces.size(); ++t)
        add(NonlinearPart::ButlerVolmer, static_cast<int>(t), split.bv_faces[t].cell_s,
            split.bv_faces[t].cell_e);
    for (size_t t = 0; t < split.invc_faces.size(); ++t)
        add(NonlinearPart::InverseC, static_cast<int>(t), split.invc_faces[t].cell_a,
            split.invc_faces[t].cell_b);
    return fs;
}

Vector apply_flux_split_block(const OperatorSplit& split, const FluxSplitOperator& fs,
                              NonlinearPart part, int subdomain, const Vector& u, EvalMode mode) {
    return apply_part(split, part, u, mode, nullptr, &fs.subset(part, subdomain));
}

std::vector<const EIData*> LocalEIData::all_blocks() const {
    std::vector<const EIData*> out;
    for (const auto& per_part : blocks)
        for (const auto& ei : per_part) out.push_back(&ei);
    return out;
}

int LocalEIData::max_local_m() const {
    int m = 0;
    for (const auto& per_part : blocks)
        for (const auto& ei : per_part) m = std::max(m, ei.size());
    return m;
}

int LocalEIData::max_local_m_prime() const {
    int m = 0;
    for (const auto& per_part : blocks)
        for (const auto& ei : per_part) m = std::max(m, static_cast<int>(ei.source_dofs.size()));
    return m;
}

LocalEIData LocalEIData::truncated(const OperatorSplit& split, int m_cap_per_block) const {
    LocalEIData out;
    out.variant = variant;
    out.subdomain_count = subdomain_count;
    for (int p = 0; p < 2; ++p) {
        out.blocks[p].reserve(blocks[p].size());
        for (const auto& ei : blocks[p]) out.blocks[p].push_back(ei.truncated(split, m_cap_per_block));
    }
    return out;
}

namespace {

Matrix training_from_evaluator(const OperatorSplit& split, const RestrictedPartEvaluator& ev,
                               const Matrix& states) {
    const auto& src = ev.source_dofs();
    Matrix out(static_cast<Eigen::Index>(ev.image_dofs().size()), states.cols());
    Vector u_src(static_cast<Eigen::Index>(src.size()));
    for (Eigen::Index s = 0; s < states.cols(); ++s) {
        for (size_t i = 0; i < src.size(); ++i) u_src(i) = states(src[i], s);
        out.col(s) = ev.evaluate(split, u_src, EvalMode::Clamped);
    }
    return out;
}

} // namespace

LocalEIData build_local_ei_projected(const OperatorSplit& split, const MacroPartition& partition,
                                     const Matrix& states, double rel_tol, int max_M_per_block) {
    if (states.rows() != split.dof.n_dof)
        throw ContractError("build_local_ei_projected: snapshot length mismatch");
    LocalEIData lei;
    lei.variant = LocalEIData::Variant::Projected;
    lei.subdomain_count = partition.subdomain_count;

    for (NonlinearPart part : {NonlinearPart::ButlerVolmer, NonlinearPart::InverseC}) {
        const std::vector<int> global_support = part_support_rows(split, part);
        // split the image support by owning subdomain: the projected
        // evaluations P_{V_h,i}(A(u)) live on the subdomain's own DOFs
        std::vector<std::vector<int>> rows_per_sub(partition.subdomain_count);
        for (int r : global_support)
            rows_per_sub[partition.cell_to_subdomain[split.dof.dof_cell[r]]].push_back(r);

        auto& out = lei.blocks[static_cast<int>(part)];
        out.reserve(partition.subdomain_count);
        for (int i = 0; i < partition.subdomain_count; ++i) {
            const auto& rows = rows_per_sub[i];
            if (rows.empty()) {
                EIData empty;
                empty.part = part;
                out.push_back(std::move(empty));
                continue;
            }
            RestrictedPartEvaluator ev(split, part, rows);
            const Matrix training = training_from_evaluator(split, ev, states);
            out.push_back(ei_greedy(split, part, training, rows, rel_tol, max_M_per_block));
        }
    }
    return lei;
}

LocalEIData build_local_ei_fluxsplit(const OperatorSplit& split, const FluxSplitOperator& fs,
                                     const Matrix& states, double rel_tol, int max_M_per_block) {
    if (states.rows() != split.dof.n_dof)
        throw ContractError("build_local_ei_fluxsplit: snapshot length mismatch");
    LocalEIData lei;
    lei.variant = LocalEIData::Variant::FluxSplit;
    lei.subdomain_count = fs.subdomain_count;

    for (NonlinearPart part : {NonlinearPart::ButlerVolmer, NonlinearPart::InverseC}) {
        auto& out = lei.blocks[static_cast<int>(part)];
        out.reserve(fs.subdomain_count);
        for (int i = 0; i < fs.subdomain_count; ++i) {
            const FaceSubset& sub = fs.subset(part, i);
            const std::vector<int> rows = part_support_rows(split, part, &sub);
            if (rows.empty()) {
                EIData empty;
                empty.part = part;
                empty.faces = sub;
                out.push_back(std::move(empty));
                continue;
            }
            RestrictedPartEvaluator ev(split, part, rows, &sub);
            const Matrix training = training_from_evaluator(split, ev, states);
            out.push_back(ei_greedy(split, part, training, rows, rel_tol, max_M_per_block, sub));
        }
    }
    return lei;
}

ReducedOperator build_localized_rom(const OperatorSplit& split, const ReducedSpace& space,
                                    const LocalEIData& lei) {
    return build_reduced_operator(split, space, lei.all_blocks());
}

std::vector<std::pair<int, int>> subdomain_adjacency(const OperatorSplit& split,
                                                     const MacroPartition& partition) {
    std::vector<std::pair<int, int>> pairs;
    for (int i = 0; i < partition.subdomain_count; ++i) pairs.emplace_back(i, i);
    for (const auto& f : split.faces.interior) {
        if (f.cls == FaceClass::NoCoupling) continue;
        const int sa = partition.cell_to_subdomain[f.cell_a];
        const int sb = partition.cell_to_subdomain[f.cell_b];
        if (sa != sb) {
            pairs.emplace_back(sa, sb);
            pairs.emplace_back(sb, sa);
        }
    }
    std::sort(pairs.begin(), pairs.end());
    pairs.erase(std::unique(pairs.begin(), pairs.end()), pairs.end());
    return pairs;
}

} // namespace battrom
