#include "battrom/rom.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>

namespace battrom {

void ReducedSpace::finalize() {
    offsets.assign(blocks.size() + 1, 0);
    for (size_t b = 0; b < blocks.size(); ++b)
        offsets[b + 1] = offsets[b] + blocks[b].dim();
    dof_block.assign(n_dof, -1);
    dof_local_row.assign(n_dof, -1);
    for (size_t b = 0; b < blocks.size(); ++b) {
        const auto& dofs = blocks[b].dofs;
        if (static_cast<Eigen::Index>(dofs.size()) != blocks[b].modes.rows())
            throw ContractError("ReducedSpace: mode rows do not match the DOF list");
        for (size_t r = 0; r < dofs.size(); ++r) {
            if (dof_block[dofs[r]] != -1)
                throw ContractError("ReducedSpace: DOF covered by two blocks");
            dof_block[dofs[r]] = static_cast<int>(b);
            dof_local_row[dofs[r]] = static_cast<int>(r);
        }
    }
}

Vector ReducedSpace::project(const Vector& full) const {
    if (full.size() != n_dof) throw ContractError("ReducedSpace::project: length mismatch");
    Vector q(total_dim());
    for (size_t b = 0; b < blocks.size(); ++b) {
        const auto& blk = blocks[b];
        Vector local(blk.dofs.size());
        for (size_t r = 0; r < blk.dofs.size(); ++r) local(r) = full(blk.dofs[r]);
        q.segment(offsets[b], blk.dim()) = blk.modes.transpose() * local;
    }
    return q;
}

Vector ReducedSpace::reconstruct(const Vector& coords) const {
    if (coords.size() != total_dim())
        throw ContractError("ReducedSpace::reconstruct: length mismatch");
    Vector full = Vector::Zero(n_dof);
    for (size_t b = 0; b < blocks.size(); ++b) {
        const auto& blk = blocks[b];
        const Vector local = blk.modes * coords.segment(offsets[b], blk.dim());
        for (size_t r = 0; r < blk.dofs.size(); ++r) full(blk.dofs[r]) += local(r);
    }
    return full;
}

Matrix ReducedSpace::reconstruct_all(const Matrix& coords) const {
    Matrix out(n_dof, coords.cols());
    for (Eigen::Index c = 0; c < coords.cols(); ++c) out.col(c) = reconstruct(coords.col(c));
    return out;
}

ReducedSpace ReducedSpace::truncated(int dim_cap) const {
    ReducedSpace s;
    s.n_dof = n_dof;
    s.blocks = blocks;
    for (auto& b : s.blocks)
        if (b.dim() > dim_cap) b.modes = b.modes.leftCols(dim_cap).eval();
    s.finalize();
    return s;
}

int ReducedSpace::max_subdomain_dim() const {
    std::map<int, int> per_sub;
    for (const auto& b : blocks) per_sub[b.subdomain] += b.dim();
    int m = 0;
    for (const auto& [sub, d] : per_sub) m = std::max(m, d);
    return m;
}

ReducedSpace make_global_space(const DofMap& dof, const PodBasis& c_basis,
                               const PodBasis& phi_basis) {
    if (c_basis.modes.rows() != dof.n_c || phi_basis.modes.rows() != dof.n_phi)
        throw ContractError("make_global_space: basis lengths do not match the DOF layout");
    ReducedSpace s;
    s.n_dof = dof.n_dof;
    ReducedBlock bc;
    bc.var = Var::C;
    bc.dofs.resize(dof.n_c);
    for (int i = 0; i < dof.n_c; ++i) bc.dofs[i] = i;
    bc.modes = c_basis.modes;
    ReducedBlock bp;
    bp.var = Var::Phi;
    bp.dofs.resize(dof.n_phi);
    for (int i = 0; i < dof.n_phi; ++i) bp.dofs[i] = dof.n_c + i;
    bp.modes = phi_basis.modes;
    s.blocks = {std::move(bc), std::move(bp)};
    s.finalize();
    return s;
}

GlobalBases pod_separate_variables(const DofMap& dof, const Matrix& states, double rel_tol) {
    // c and phi are never mixed into one POD: the variables live on
    // different scales.
    SnapshotSet sc{states.topRows(dof.n_c), Vector()};
    SnapshotSet sp{states.bottomRows(dof.n_phi), Vector()};
    return {pod(sc, rel_tol), pod(sp, rel_tol)};
}

namespace {

std::vector<int> blocks_of_dofs(const ReducedSpace& space, const std::vector<int>& dofs) {
    std::vector<int> out;
    for (int d : dofs) {
        const int b = space.dof_block[d];
        if (b >= 0) out.push_back(b);
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

} // namespace

ReducedOperator build_reduced_operator(const OperatorSplit& split, const ReducedSpace& space,
                                       const std::vector<const EIData*>& ei_list) {
    if (space.n_dof != split.dof.n_dof)
        throw ContractError("build_reduced_operator: space/operator DOF mismatch");
    ReducedOperator rop;
    rop.space = space;
    const ReducedSpace& sp = rop.space;
    const int nb = static_cast<int>(sp.blocks.size());

    rop.r_const = sp.project(split.a_const);
    rop.r_bnd = sp.project(split.a_bnd);

    // linear part, bucketed into block pairs
    std::map<std::pair<int, int>, std::vector<Eigen::Triplet<double>>> buckets;
    {
        const auto offs = split.a_lin.row_offsets();
        const auto cols = split.a_lin.col_indices();
        const auto vals = split.a_lin.values();
        for (int r = 0; r < split.dof.n_dof; ++r) {
            const int bi = sp.dof_block[r];
            if (bi < 0) continue;
            for (int s = offs[r]; s < offs[r + 1]; ++s) {
                const int bj = sp.dof_block[cols[s]];
                if (bj < 0) continue;
                buckets[{bi, bj}].emplace_back(sp.dof_local_row[r], sp.dof_local_row[cols[s]],
                                               vals[s]);
            }
        }
    }
    for (auto& [key, ts] : buckets) {
        const auto& bi = sp.blocks[key.first];
        const auto& bj = sp.blocks[key.second];
        if (bi.dim() == 0 || bj.dim() == 0) continue;
        Eigen::SparseMatrix<double> sub(static_cast<int>(bi.dofs.size()),
                                        static_cast<int>(bj.dofs.size()));
        sub.setFromTriplets(ts.begin(), ts.end());
        ReducedOperator::LinBlock lb;
        lb.bi = key.first;
        lb.bj = key.second;
        lb.m = bi.modes.transpose() * (sub * bj.modes);
        rop.lin_blocks.push_back(std::move(lb));
    }

    // EI chains
    for (const EIData* ei_ptr : ei_list) {
        if (!ei_ptr || ei_ptr->empty()) continue;
        const EIData& ei = *ei_ptr;
        ReducedOperator::EIBlock eb;
        eb.ei = ei;

        eb.row_blocks = blocks_of_dofs(sp, ei.support_rows);
        int row_dim = 0;
        for (int b : eb.row_blocks) row_dim += sp.blocks[b].dim();
        const int m = ei.size();
        Matrix p = Matrix::Zero(row_dim, m);
        {
            int off = 0;
            for (int b : eb.row_blocks) {
                const auto& blk = sp.blocks[b];
                // gather the collateral rows living in this block
                std::vector<int> local_rows, support_pos;
                for (size_t r = 0; r < ei.support_rows.size(); ++r) {
                    if (sp.dof_block[ei.support_rows[r]] == b) {
                        local_rows.push_back(sp.dof_local_row[ei.support_rows[r]]);
                        support_pos.push_back(static_cast<int>(r));
                    }
                }
                Matrix gathered(static_cast<Eigen::Index>(local_rows.size()), m);
                Matrix mode_rows(static_cast<Eigen::Index>(local_rows.size()), blk.dim());
                for (size_t r = 0; r < local_rows.size(); ++r) {
                    gathered.row(r) = ei.collateral.row(support_pos[r]);
                    mode_rows.row(r) = blk.modes.row(local_rows[r]);
                }
                p.middleRows(off, blk.dim()) = mode_rows.transpose() * gathered;
                off += blk.dim();
            }
        }
        // pl = p * tri^{-1}: solve tri^T x^T = p^T
        eb.pl = eb.ei.tri.transpose()
                    .triangularView<Eigen::Upper>()
                    .solve(p.transpose())
                    .transpose();

        eb.col_blocks = blocks_of_dofs(sp, ei.source_dofs);
        int col_dim = 0;
        std::vector<int> col_off(nb, -1);
        for (int b : eb.col_blocks) {
            col_off[b] = col_dim;
            col_dim += sp.blocks[b].dim();
        }
        eb.s = Matrix::Zero(static_cast<Eigen::Index>(ei.source_dofs.size()), col_dim);
        for (size_t r = 0; r < ei.source_dofs.size(); ++r) {
            const int d = ei.source_dofs[r];
            const int b = sp.dof_block[d];
            if (b < 0) continue;
            eb.s.row(r).segment(col_off[b], sp.blocks[b].dim()) =
                sp.blocks[b].modes.row(sp.dof_local_row[d]);
        }
        rop.ei_blocks.push_back(std::move(eb));
    }

    // structural block pattern
    std::vector<std::pair<int, int>> pat;
    for (int b = 0; b < nb; ++b) pat.emplace_back(b, b);
    for (const auto& lb : rop.lin_blocks) pat.emplace_back(lb.bi, lb.bj);
    for (const auto& eb : rop.ei_blocks)
        for (int bi : eb.row_blocks)
            for (int bj : eb.col_blocks) pat.emplace_back(bi, bj);
    std::sort(pat.begin(), pat.end());
    pat.erase(std::unique(pat.begin(), pat.end()), pat.end());
    rop.block_pattern = std::move(pat);
    return rop;
}

namespace {

// Gathers the coordinate segments of the given blocks into one vector.
Vector gather_blocks(const ReducedSpace& sp, const std::vector<int>& blocks, const Vector& q) {
    int dim = 0;
    for (int b : blocks) dim += sp.blocks[b].dim();
    Vector out(dim);
    int off = 0;
    for (int b : blocks) {
        out.segment(off, sp.blocks[b].dim()) = q.segment(sp.offsets[b], sp.blocks[b].dim());
        off += sp.blocks[b].dim();
    }
    return out;
}

void scatter_blocks(const ReducedSpace& sp, const std::vector<int>& blocks, const Vector& v,
                    Vector& q) {
    int off = 0;
    for (int b : blocks) {
        q.segment(sp.offsets[b], sp.blocks[b].dim()) += v.segment(off, sp.blocks[b].dim());
        off += sp.blocks[b].dim();
    }
}

} // namespace

Vector reduced_residual(const ReducedOperator& rop, const OperatorSplit& split, const Vector& q,
                        const Vector& q_prev, double mu, double dt, EvalMode mode,
                        EvalFlags* flags) {
    const ReducedSpace& sp = rop.space;
    if (q.size() != sp.total_dim() || q_prev.size() != sp.total_dim())
        throw ContractError("reduced_residual: coordinate length mismatch");
    Vector r = rop.r_const + mu * rop.r_bnd;
    for (const auto& lb : rop.lin_blocks)
        r.segment(sp.offsets[lb.bi], lb.m.rows()) +=
            lb.m * q.segment(sp.offsets[lb.bj], lb.m.cols());
    const double inv_dt = 1.0 / dt;
    for (size_t b = 0; b < sp.blocks.size(); ++b)
        if (sp.blocks[b].var == Var::C)
            r.segment(sp.offsets[b], sp.blocks[b].dim()) +=
                inv_dt * (q.segment(sp.offsets[b], sp.blocks[b].dim()) -
                          q_prev.segment(sp.offsets[b], sp.blocks[b].dim()));
    for (const auto& eb : rop.ei_blocks) {
        const Vector u_src = eb.s * gather_blocks(sp, eb.col_blocks, q);
        const Vector vals = eb.ei.evaluator.evaluate(split, u_src, mode, flags);
        scatter_blocks(sp, eb.row_blocks, eb.pl * vals, r);
    }
    return r;
}

namespace {

// Shared Jacobian accumulation: calls sink(bi, bj, row_off_in_block_list,
// dense contribution) for every EI chain piece, after the lin/mass base.
template <typename Sink>
void accumulate_ei_jacobian(const ReducedOperator& rop, const OperatorSplit& split,
                            const Vector& q, EvalMode mode, Sink&& sink) {
    const ReducedSpace& sp = rop.space;
    RestrictedPartEvaluator::LocalJacobian jloc;
    for (const auto& eb : rop.ei_blocks) {
        const Vector u_src = eb.s * gather_blocks(sp, eb.col_blocks, q);
        eb.ei.evaluator.jacobian(split, u_src, jloc, mode);
        const int m = eb.ei.size();
        Matrix t = Matrix::Zero(m, eb.s.cols());
        for (int row = 0; row < m; ++row)
            for (int s = jloc.row_offsets[row]; s < jloc.row_offsets[row + 1]; ++s)
                t.row(row) += jloc.values[s] * eb.s.row(jloc.source_pos[s]);
        const Matrix g = eb.pl * t;  // (sum row dims) x (sum col dims)
        int roff = 0;
        for (int bi : eb.row_blocks) {
            int coff = 0;
            for (int bj : eb.col_blocks) {
                sink(bi, bj,
                     g.block(roff, coff, sp.blocks[bi].dim(), sp.blocks[bj].dim()));
                coff += sp.blocks[bj].dim();
            }
            roff += sp.blocks[bi].dim();
        }
    }
}

} // namespace

Matrix reduced_jacobian_dense(const ReducedOperator& rop, const OperatorSplit& split,
                              const Vector& q, double dt, EvalMode mode) {
    const ReducedSpace& sp = rop.space;
    Matrix j = Matrix::Zero(sp.total_dim(), sp.total_dim());
    for (const auto& lb : rop.lin_blocks)
        j.block(sp.offsets[lb.bi], sp.offsets[lb.bj], lb.m.rows(), lb.m.cols()) += lb.m;
    const double inv_dt = 1.0 / dt;
    for (size_t b = 0; b < sp.blocks.size(); ++b)
        if (sp.blocks[b].var == Var::C)
            j.block(sp.offsets[b], sp.offsets[b], sp.blocks[b].dim(), sp.blocks[b].dim())
                .diagonal()
                .array() += inv_dt;
    accumulate_ei_jacobian(rop, split, q, mode,
                           [&](int bi, int bj, const auto& contrib) {
                               j.block(sp.offsets[bi], sp.offsets[bj], contrib.rows(),
                                       contrib.cols()) += contrib;
                           });
    return j;
}

ReducedTrajectory solve_reduced_trajectory(const ReducedOperator& rop, const OperatorSplit& split,
                                           const TimeGrid& tg, double mu,
                                           const TrajectoryOptions& opts) {
    const ReducedSpace& sp = rop.space;
    const int n = sp.total_dim();

    ReducedTrajectory traj;
    traj.mu = mu;
    traj.tg = tg;
    traj.coords.resize(n, tg.n_steps + 1);
    if (n == 0) {
        traj.coords.setZero();
        return traj;
    }
    traj.coords.col(0) = sp.project(initial_state(split.grid, split.dof, split.mat));

    NewtonOptions nopts = opts.newton;
    nopts.capture_stages = false;
    if (nopts.scale.size() == 0) {
        // mirror the full-order per-variable residual scaling
        nopts.scale.resize(n);
        const double c_ref = std::max(split.mat.c_max_neg, split.mat.c_max_pos) / tg.dt;
        const double phi_ref = opts.mu_max / split.grid.voxel_size[0];
        for (size_t b = 0; b < sp.blocks.size(); ++b)
            nopts.scale.segment(sp.offsets[b], sp.blocks[b].dim())
                .setConstant(sp.blocks[b].var == Var::C ? c_ref : phi_ref);
    }

    // The dense path is cheaper up to a few hundred unknowns; beyond
    // that the block-sparse structure of the localized scheme pays off.
    const bool sparse_path = n > 500 && sp.blocks.size() > 2;
    std::unique_ptr<SparseFactorization> lu;
    SparseMatrix skel;
    std::vector<std::vector<int>> pair_slots;  // per pattern pair: value slots
    if (sparse_path) {
        std::vector<Eigen::Triplet<double>> ts;
        for (const auto& [bi, bj] : rop.block_pattern)
            for (int a = 0; a < sp.blocks[bi].dim(); ++a)
                for (int b = 0; b < sp.blocks[bj].dim(); ++b)
                    ts.emplace_back(sp.offsets[bi] + a, sp.offsets[bj] + b, 0.0);
        skel = SparseMatrix::from_triplets(n, n, ts);
        // slot lookup per pattern pair (values are row-major compressed)
        pair_slots.resize(rop.block_pattern.size());
        const auto offs = skel.row_offsets();
        const auto cols = skel.col_indices();
        for (size_t p = 0; p < rop.block_pattern.size(); ++p) {
            const auto [bi, bj] = rop.block_pattern[p];
            auto& slots = pair_slots[p];
            slots.reserve(static_cast<size_t>(sp.blocks[bi].dim()) * sp.blocks[bj].dim());
            for (int a = 0; a < sp.blocks[bi].dim(); ++a) {
                const int row = sp.offsets[bi] + a;
                for (int b = 0; b < sp.blocks[bj].dim(); ++b) {
                    const int col = sp.offsets[bj] + b;
                    const int* first = cols.data() + offs[row];
                    const int* last = cols.data() + offs[row + 1];
                    const int* it = std::lower_bound(first, last, col);
                    slots.push_back(static_cast<int>(it - cols.data()));
                }
            }
        }
    }

    std::map<std::pair<int, int>, int> pattern_index;
    for (size_t p = 0; p < rop.block_pattern.size(); ++p)
        pattern_index[rop.block_pattern[p]] = static_cast<int>(p);

    Eigen::PartialPivLU<Matrix> dense_lu;
    const double inv_dt = 1.0 / tg.dt;

    for (int step = 0; step < tg.n_steps; ++step) {
        const Vector q_prev = traj.coords.col(step);

        const auto residual = [&](const Vector& q) {
            return reduced_residual(rop, split, q, q_prev, mu, tg.dt, EvalMode::Clamped);
        };
        const auto solve_lin = [&](const Vector& q, const Vector& r) -> Vector {
            if (!sparse_path) {
                dense_lu.compute(reduced_jacobian_dense(rop, split, q, tg.dt));
                return dense_lu.solve(r);
            }
            auto vals = skel.values();
            std::fill(vals.begin(), vals.end(), 0.0);
            for (const auto& lb : rop.lin_blocks) {
                const auto& slots = pair_slots[pattern_index.at({lb.bi, lb.bj})];
                for (int a = 0; a < lb.m.rows(); ++a)
                    for (int b = 0; b < lb.m.cols(); ++b)
                        vals[slots[a * lb.m.cols() + b]] += lb.m(a, b);
            }
            for (size_t b = 0; b < sp.blocks.size(); ++b) {
                if (sp.blocks[b].var != Var::C) continue;
                const auto& slots = pair_slots[pattern_index.at({(int)b, (int)b})];
                const int d = sp.blocks[b].dim();
                for (int a = 0; a < d; ++a) vals[slots[a * d + a]] += inv_dt;
            }
            accumulate_ei_jacobian(
                rop, split, q, EvalMode::Clamped,
                [&](int bi, int bj, const auto& contrib) {
                    const auto& slots = pair_slots[pattern_index.at({bi, bj})];
                    for (int a = 0; a < contrib.rows(); ++a)
                        for (int c = 0; c < contrib.cols(); ++c)
                            vals[slots[a * contrib.cols() + c]] += contrib(a, c);
                });
            if (!lu) lu = std::make_unique<SparseFactorization>(skel);
            else lu->refactorize(skel);
            return lu->solve(r);
        };

        try {
            NewtonResult nr = newton_solve(residual, solve_lin, q_prev, nopts);
            traj.coords.col(step + 1) = nr.solution;
            traj.diagnostics.push_back(
                {nr.iterations, nr.residual_history.back(), nr.total_halvings});
        } catch (const NonconvergenceError& e) {
            throw NonconvergenceError("reduced solve, time step " + std::to_string(step + 1) +
                                          " at mu = " + std::to_string(mu) + ": " + e.what(),
                                      e.residual_history(), step + 1);
        }
    }
    return traj;
}

ReductionError reduction_error(const Matrix& full_states, const Matrix& reduced_states, int n_c) {
    if (full_states.rows() != reduced_states.rows() ||
        full_states.cols() != reduced_states.cols())
        throw ContractError("reduction_error: trajectory shapes differ");
    ReductionError e;
    double err_c = 0.0, ref_c = 0.0, err_p = 0.0, ref_p = 0.0;
    for (Eigen::Index t = 0; t < full_states.cols(); ++t) {
        err_c = std::max(err_c,
                         (full_states.col(t).head(n_c) - reduced_states.col(t).head(n_c)).norm());
        ref_c = std::max(ref_c, full_states.col(t).head(n_c).norm());
        const Eigen::Index np = full_states.rows() - n_c;
        err_p = std::max(err_p,
                         (full_states.col(t).tail(np) - reduced_states.col(t).tail(np)).norm());
        ref_p = std::max(ref_p, full_states.col(t).tail(np).norm());
    }
    e.c = ref_c > 0.0 ? err_c / ref_c : 0.0;
    e.phi = ref_p > 0.0 ? err_p / ref_p : 0.0;
    return e;
}

} // namespace battrom
