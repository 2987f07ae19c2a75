#include "battrom/model.hpp"

#include <algorithm>
#include <cmath>

namespace battrom {

DofMap DofMap::build(const VoxelGrid& grid) {
    DofMap m;
    const int n = grid.cell_count();
    m.c_dof.assign(n, -1);
    m.phi_dof.assign(n, -1);
    int next = 0;
    for (int c = 0; c < n; ++c)
        if (!is_collector(grid.labels[c])) m.c_dof[c] = next++;
    m.n_c = next;
    m.n_phi = n;
    m.n_dof = m.n_c + m.n_phi;
    for (int c = 0; c < n; ++c) m.phi_dof[c] = m.n_c + c;
    m.dof_cell.assign(m.n_dof, -1);
    m.dof_is_c.assign(m.n_dof, false);
    for (int c = 0; c < n; ++c) {
        if (m.c_dof[c] >= 0) {
            m.dof_cell[m.c_dof[c]] = c;
            m.dof_is_c[m.c_dof[c]] = true;
        }
        m.dof_cell[m.phi_dof[c]] = c;
    }
    return m;
}

Vector pack(const DofMap& dof, const State& s) {
    if (s.c.size() != dof.n_c || s.phi.size() != dof.n_phi)
        throw ContractError("pack: state block lengths do not match the DOF layout");
    Vector u(dof.n_dof);
    u.head(dof.n_c) = s.c;
    u.tail(dof.n_phi) = s.phi;
    return u;
}

State unpack(const DofMap& dof, const Vector& u) {
    if (u.size() != dof.n_dof) throw ContractError("unpack: vector length mismatch");
    return {u.head(dof.n_c), u.tail(dof.n_phi)};
}

namespace {

constexpr double kSinhCap = 500.0;

struct BvEval {
    double j = 0.0;
    double d_ce = 0.0, d_cs = 0.0, d_phie = 0.0, d_phis = 0.0;
};

BvEval bv_eval(const MaterialData& mat, bool pos_side, double ce, double cs, double phie,
               double phis, EvalMode mode, EvalFlags* flags, int face, bool want_deriv) {
    const double cmax = mat.c_max(pos_side);
    const double k = mat.reaction_rate(pos_side);
    const double eps = 1e-12 * cmax;

    if (mode == EvalMode::Strict) {
        if (!(ce > 0.0))
            throw EvaluationError("Butler-Volmer flux: electrolyte concentration <= 0", face);
        if (!(cs > 0.0 && cs < cmax))
            throw EvaluationError("Butler-Volmer flux: solid concentration outside (0, c_max)",
                                  face);
    } else {
        if (cs < eps || cs > cmax - eps) {
            cs = std::clamp(cs, eps, cmax - eps);
            if (flags) flags->clamped = true;
        }
        if (ce < eps) {
            ce = eps;
            if (flags) flags->clamped = true;
        }
    }

    const double g = std::sqrt(ce * cs * (cmax - cs));
    const double kappa_T = mat.thermal_voltage_inv();  // F / (2RT)
    double arg = (phis - phie - u0(pos_side, cs / cmax)) * kappa_T;
    if (arg > kSinhCap || arg < -kSinhCap) {
        arg = std::clamp(arg, -kSinhCap, kSinhCap);
        if (flags) flags->sinh_capped = true;
        if (mode == EvalMode::Strict)
            throw EvaluationError("Butler-Volmer flux: overpotential argument overflow", face);
    }
    const double sh = std::sinh(arg);

    BvEval out;
    out.j = 2.0 * k * g * sh;
    if (want_deriv) {
        const double ch = std::cosh(arg);
        const double dphis = 2.0 * k * g * ch * kappa_T;
        out.d_phis = dphis;
        out.d_phie = -dphis;
        out.d_ce = (ce > 0.0) ? out.j / (2.0 * ce) : 0.0;
        const double dg_dcs = ce * (cmax - 2.0 * cs) / (2.0 * g);
        out.d_cs = 2.0 * k * (sh * dg_dcs - g * ch * kappa_T * u0_deriv(pos_side, cs / cmax) / cmax);
    }
    return out;
}

struct InvCEval {
    double r = 0.0;          // coef * mean(1/c) * (cb - ca)
    double d_ca = 0.0, d_cb = 0.0;
};

InvCEval invc_eval(const MaterialData& mat, double coef, double ca, double cb, EvalMode mode,
                   EvalFlags* flags, int face, bool want_deriv) {
    const double eps = 1e-12 * mat.c0_elyte;
    if (mode == EvalMode::Strict) {
        if (!(ca > 0.0 && cb > 0.0))
            throw EvaluationError("1/c flux: electrolyte concentration <= 0", face);
    } else {
        if (ca < eps) {
            ca = eps;
            if (flags) flags->clamped = true;
        }
        if (cb < eps) {
            cb = eps;
            if (flags) flags->clamped = true;
        }
    }
    const double harm_inv = 0.5 * (1.0 / ca + 1.0 / cb);
    InvCEval out;
    out.r = coef * harm_inv * (cb - ca);
    if (want_deriv) {
        out.d_ca = coef * (-harm_inv - 0.5 * (cb - ca) / (ca * ca));
        out.d_cb = coef * (harm_inv - 0.5 * (cb - ca) / (cb * cb));
    }
    return out;
}

} // namespace

double butler_volmer_flux(double c_e, double c_s, double phi_e, double phi_s, bool pos_side,
                          const MaterialData& mat) {
    return bv_eval(mat, pos_side, c_e, c_s, phi_e, phi_s, EvalMode::Strict, nullptr, -1, false).j;
}

namespace {

// Pattern rows collected as (row, col) pairs, then compressed.
struct PatternBuilder {
    int n;
    std::vector<std::vector<int>> cols;
    explicit PatternBuilder(int n_) : n(n_), cols(n_) {}
    void add(int r, int c) { cols[r].push_back(c); }
    void add_sym(int r, int c) {
        cols[r].push_back(c);
        cols[c].push_back(r);
    }
    void compress(std::vector<int>& offsets, std::vector<int>& indices) {
        offsets.assign(n + 1, 0);
        size_t total = 0;
        for (int r = 0; r < n; ++r) {
            auto& v = cols[r];
            std::sort(v.begin(), v.end());
            v.erase(std::unique(v.begin(), v.end()), v.end());
            total += v.size();
            offsets[r + 1] = static_cast<int>(total);
        }
        indices.clear();
        indices.reserve(total);
        for (int r = 0; r < n; ++r)
            indices.insert(indices.end(), cols[r].begin(), cols[r].end());
    }
};

int pattern_slot(const std::vector<int>& offsets, const std::vector<int>& indices, int r, int c) {
    const auto first = indices.begin() + offsets[r];
    const auto last = indices.begin() + offsets[r + 1];
    const auto it = std::lower_bound(first, last, c);
    if (it == last || *it != c) throw ContractError("jacobian pattern: missing slot");
    return static_cast<int>(it - indices.begin());
}

} // namespace

OperatorSplit assemble_operator(const VoxelGrid& grid, const FaceSet& faces,
                                const MaterialData& mat) {
    mat.validate();
    grid.validate_layout();

    OperatorSplit sp;
    sp.grid = grid;
    sp.faces = faces;
    sp.mat = mat;
    sp.dof = DofMap::build(grid);
    const DofMap& dof = sp.dof;
    const int n = dof.n_dof;

    sp.a_const = Vector::Zero(n);
    sp.a_bnd = Vector::Zero(n);

    const auto& h = grid.voxel_size;
    const double phi_dirichlet = u0_neg(mat.c0_neg / mat.c_max_neg);

    std::vector<Eigen::Triplet<double>> lin;
    lin.reserve(faces.interior.size() * 8 + faces.boundary.size());

    for (size_t fi = 0; fi < faces.interior.size(); ++fi) {
        const InteriorFace& f = faces.interior[fi];
        if (f.cell_a < 0 || f.cell_b < 0 || f.cell_a >= grid.cell_count() ||
            f.cell_b >= grid.cell_count() || f.axis < 0 || f.axis > 2)
            throw AssemblyError("face set references an invalid cell or axis");
        const CellLabel la = grid.labels[f.cell_a];
        const CellLabel lb = grid.labels[f.cell_b];
        const double trans = 1.0 / (h[f.axis] * h[f.axis]);  // area / (h * volume)

        switch (f.cls) {
            case FaceClass::Bulk: {
                if (la != lb)
                    throw AssemblyError("face set: bulk face between unlike materials");
                // phi conduction
                const double sg = mat.conductivity(la);
                const int pa = dof.phi_dof[f.cell_a], pb = dof.phi_dof[f.cell_b];
                lin.emplace_back(pa, pa, sg * trans);
                lin.emplace_back(pa, pb, -sg * trans);
                lin.emplace_back(pb, pb, sg * trans);
                lin.emplace_back(pb, pa, -sg * trans);
                // c diffusion (not in collectors)
                if (!is_collector(la)) {
                    const double d = mat.diffusion(la);
                    const int ca = dof.c_dof[f.cell_a], cb = dof.c_dof[f.cell_b];
                    lin.emplace_back(ca, ca, d * trans);
                    lin.emplace_back(ca, cb, -d * trans);
                    lin.emplace_back(cb, cb, d * trans);
                    lin.emplace_back(cb, ca, -d * trans);
                }
                // electrolyte faces also carry the 1/c current term
                if (la == CellLabel::Electrolyte) {
                    InvCFaceTerm t;
                    t.face = static_cast<int>(fi);
                    t.cell_a = f.cell_a;
                    t.cell_b = f.cell_b;
                    t.dof_ca = dof.c_dof[f.cell_a];
                    t.dof_cb = dof.c_dof[f.cell_b];
                    t.dof_phia = dof.phi_dof[f.cell_a];
                    t.dof_phib = dof.phi_dof[f.cell_b];
                    t.coef = mat.inv_c_coefficient() * trans;
                    sp.invc_faces.push_back(t);
                }
                break;
            }
            case FaceClass::PhiContinuity: {
                const double sa = mat.conductivity(la), sb = mat.conductivity(lb);
                const double sg = 2.0 * sa * sb / (sa + sb);  // harmonic mean
                const int pa = dof.phi_dof[f.cell_a], pb = dof.phi_dof[f.cell_b];
                lin.emplace_back(pa, pa, sg * trans);
                lin.emplace_back(pa, pb, -sg * trans);
                lin.emplace_back(pb, pb, sg * trans);
                lin.emplace_back(pb, pa, -sg * trans);
                break;
            }
            case FaceClass::ButlerVolmer: {
                const bool a_solid = is_electrode(la);
                if (!(a_solid ? lb == CellLabel::Electrolyte : la == CellLabel::Electrolyte) ||
                    !(a_solid ? is_electrode(la) : is_electrode(lb)))
                    throw AssemblyError("face set: Butler-Volmer face with wrong labels");
                BvFaceTerm t;
                t.face = static_cast<int>(fi);
                t.cell_s = a_solid ? f.cell_a : f.cell_b;
                t.cell_e = a_solid ? f.cell_b : f.cell_a;
                t.dof_cs = dof.c_dof[t.cell_s];
                t.dof_ce = dof.c_dof[t.cell_e];
                t.dof_phis = dof.phi_dof[t.cell_s];
                t.dof_phie = dof.phi_dof[t.cell_e];
                t.pos_side = (grid.labels[t.cell_s] == CellLabel::PosElectrode);
                t.inv_h = 1.0 / h[f.axis];
                sp.bv_faces.push_back(t);
                break;
            }
            case FaceClass::NoCoupling:
                break;
        }
    }

    // Outer boundary: Dirichlet ghost elimination at the negative
    // collector (phi = U0 at the initial state of charge), applied
    // current density scaled by mu at the positive collector. The c
    // variable has no outer boundary flux anywhere.
    for (const BoundaryFace& b : faces.boundary) {
        const CellLabel l = grid.labels[b.cell];
        if (b.side == 0 && l == CellLabel::NegCollector) {
            const double trans = 1.0 / (h[0] * h[0]);
            const double sg = mat.conductivity(l);
            const int p = dof.phi_dof[b.cell];
            lin.emplace_back(p, p, 2.0 * sg * trans);
            sp.a_const(p) += -2.0 * sg * trans * phi_dirichlet;
        } else if (b.side == 1 && l == CellLabel::PosCollector) {
            // Outward current -mu * area: the applied charge current
            // enters the cell here and leaves through the grounded
            // negative collector.
            sp.a_bnd(dof.phi_dof[b.cell]) += -1.0 / h[0];
        }
    }

    sp.a_lin = SparseMatrix::from_triplets(n, n, lin);

    // cell -> incident face terms
    auto& bv_by_cell = sp.cell_part_terms[static_cast<int>(NonlinearPart::ButlerVolmer)];
    auto& invc_by_cell = sp.cell_part_terms[static_cast<int>(NonlinearPart::InverseC)];
    bv_by_cell.assign(grid.cell_count(), {});
    invc_by_cell.assign(grid.cell_count(), {});
    for (size_t t = 0; t < sp.bv_faces.size(); ++t) {
        bv_by_cell[sp.bv_faces[t].cell_s].push_back(static_cast<int>(t));
        bv_by_cell[sp.bv_faces[t].cell_e].push_back(static_cast<int>(t));
    }
    for (size_t t = 0; t < sp.invc_faces.size(); ++t) {
        invc_by_cell[sp.invc_faces[t].cell_a].push_back(static_cast<int>(t));
        invc_by_cell[sp.invc_faces[t].cell_b].push_back(static_cast<int>(t));
    }

    // Jacobian pattern: a_lin entries, full 4x4 blocks on Butler-Volmer
    // faces, 1/c blocks plus their transposes (structural symmetry),
    // and the diagonal for the time-derivative mass term.
    {
        PatternBuilder pb(n);
        for (int d = 0; d < n; ++d) pb.add(d, d);
        const auto offs = sp.a_lin.row_offsets();
        const auto cols = sp.a_lin.col_indices();
        for (int r = 0; r < n; ++r)
            for (int s = offs[r]; s < offs[r + 1]; ++s) pb.add_sym(r, cols[s]);
        for (const BvFaceTerm& t : sp.bv_faces) {
            const int ds[4] = {t.dof_cs, t.dof_ce, t.dof_phis, t.dof_phie};
            for (int a = 0; a < 4; ++a)
                for (int b = 0; b < 4; ++b) pb.add(ds[a], ds[b]);
        }
        for (const InvCFaceTerm& t : sp.invc_faces) {
            const int rows[2] = {t.dof_phia, t.dof_phib};
            const int cls[2] = {t.dof_ca, t.dof_cb};
            for (int a = 0; a < 2; ++a)
                for (int b = 0; b < 2; ++b) pb.add_sym(rows[a], cls[b]);
        }
        pb.compress(sp.jac.row_offsets, sp.jac.col_indices);
    }

    sp.jac.base_values.assign(sp.jac.col_indices.size(), 0.0);
    {
        const auto offs = sp.a_lin.row_offsets();
        const auto cols = sp.a_lin.col_indices();
        const auto vals = sp.a_lin.values();
        for (int r = 0; r < n; ++r)
            for (int s = offs[r]; s < offs[r + 1]; ++s)
                sp.jac.base_values[pattern_slot(sp.jac.row_offsets, sp.jac.col_indices, r,
                                                cols[s])] += vals[s];
    }
    sp.jac.diag_slots.resize(n);
    for (int d = 0; d < n; ++d)
        sp.jac.diag_slots[d] = pattern_slot(sp.jac.row_offsets, sp.jac.col_indices, d, d);
    sp.jac.bv_slots.resize(sp.bv_faces.size());
    for (size_t t = 0; t < sp.bv_faces.size(); ++t) {
        const BvFaceTerm& f = sp.bv_faces[t];
        const int ds[4] = {f.dof_cs, f.dof_ce, f.dof_phis, f.dof_phie};
        for (int a = 0; a < 4; ++a)
            for (int b = 0; b < 4; ++b)
                sp.jac.bv_slots[t][a * 4 + b] =
                    pattern_slot(sp.jac.row_offsets, sp.jac.col_indices, ds[a], ds[b]);
    }
    sp.jac.invc_slots.resize(sp.invc_faces.size());
    for (size_t t = 0; t < sp.invc_faces.size(); ++t) {
        const InvCFaceTerm& f = sp.invc_faces[t];
        const int rows[2] = {f.dof_phia, f.dof_phib};
        const int cls[2] = {f.dof_ca, f.dof_cb};
        for (int a = 0; a < 2; ++a)
            for (int b = 0; b < 2; ++b)
                sp.jac.invc_slots[t][a * 2 + b] =
                    pattern_slot(sp.jac.row_offsets, sp.jac.col_indices, rows[a], cls[b]);
    }
    return sp;
}

Vector apply_part(const OperatorSplit& sp, NonlinearPart part, const Vector& u, EvalMode mode,
                  EvalFlags* flags, const FaceSubset* subset) {
    if (u.size() != sp.dof.n_dof) throw ContractError("apply_part: state length mismatch");
    Vector res = Vector::Zero(sp.dof.n_dof);
    const double inv_F = 1.0 / sp.mat.F;

    const auto eval_bv = [&](int t, double w) {
        const BvFaceTerm& f = sp.bv_faces[t];
        const BvEval e = bv_eval(sp.mat, f.pos_side, u(f.dof_ce), u(f.dof_cs), u(f.dof_phie),
                                 u(f.dof_phis), mode, flags, f.face, false);
        const double q = w * f.inv_h * e.j;
        res(f.dof_cs) += q * inv_F;
        res(f.dof_ce) -= q * inv_F;
        res(f.dof_phis) += q;
        res(f.dof_phie) -= q;
    };
    const auto eval_invc = [&](int t, double w) {
        const InvCFaceTerm& f = sp.invc_faces[t];
        const InvCEval e =
            invc_eval(sp.mat, f.coef, u(f.dof_ca), u(f.dof_cb), mode, flags, f.face, false);
        res(f.dof_phia) += w * e.r;
        res(f.dof_phib) -= w * e.r;
    };

    if (subset) {
        if (subset->term_ids.size() != subset->weights.size())
            throw ContractError("apply_part: subset ids/weights length mismatch");
        for (size_t i = 0; i < subset->term_ids.size(); ++i) {
            if (part == NonlinearPart::ButlerVolmer) eval_bv(subset->term_ids[i], subset->weights[i]);
            else eval_invc(subset->term_ids[i], subset->weights[i]);
        }
    } else if (part == NonlinearPart::ButlerVolmer) {
        for (int t = 0; t < sp.term_count(part); ++t) eval_bv(t, 1.0);
    } else {
        for (int t = 0; t < sp.term_count(part); ++t) eval_invc(t, 1.0);
    }
    return res;
}

Vector apply_full(const OperatorSplit& sp, const Vector& u, double mu, EvalMode mode,
                  EvalFlags* flags) {
    if (u.size() != sp.dof.n_dof) throw ContractError("apply_full: state length mismatch");
    Vector res = sp.a_const + mu * sp.a_bnd + sp.a_lin.apply(u);
    res += apply_part(sp, NonlinearPart::ButlerVolmer, u, mode, flags);
    res += apply_part(sp, NonlinearPart::InverseC, u, mode, flags);
    return res;
}

SparseMatrix jacobian_skeleton(const OperatorSplit& sp) {
    const int n = sp.dof.n_dof;
    std::vector<Eigen::Triplet<double>> ts;
    ts.reserve(sp.jac.col_indices.size());
    for (int r = 0; r < n; ++r)
        for (int s = sp.jac.row_offsets[r]; s < sp.jac.row_offsets[r + 1]; ++s)
            ts.emplace_back(r, sp.jac.col_indices[s], 0.0);
    // Triplets are unique and row-sorted, so the compressed layout of the
    // result matches the pattern arrays slot for slot.
    return SparseMatrix::from_triplets(n, n, ts);
}

void assemble_jacobian_into(const OperatorSplit& sp, const Vector& u, SparseMatrix& out,
                            EvalMode mode, EvalFlags* flags) {
    if (u.size() != sp.dof.n_dof) throw ContractError("assemble_jacobian: state length mismatch");
    if (static_cast<size_t>(out.nonzeros()) != sp.jac.col_indices.size())
        throw ContractError("assemble_jacobian: output matrix has a foreign pattern");
    auto vals = out.values();
    std::copy(sp.jac.base_values.begin(), sp.jac.base_values.end(), vals.begin());

    const double inv_F = 1.0 / sp.mat.F;
    for (size_t t = 0; t < sp.bv_faces.size(); ++t) {
        const BvFaceTerm& f = sp.bv_faces[t];
        const BvEval e = bv_eval(sp.mat, f.pos_side, u(f.dof_ce), u(f.dof_cs), u(f.dof_phie),
                                 u(f.dof_phis), mode, flags, f.face, true);
        // input order: cs, ce, phis, phie; row order the same
        const double d[4] = {e.d_cs, e.d_ce, e.d_phis, e.d_phie};
        const double row_mult[4] = {f.inv_h * inv_F, -f.inv_h * inv_F, f.inv_h, -f.inv_h};
        const auto& slots = sp.jac.bv_slots[t];
        for (int a = 0; a < 4; ++a)
            for (int b = 0; b < 4; ++b) vals[slots[a * 4 + b]] += row_mult[a] * d[b];
    }
    for (size_t t = 0; t < sp.invc_faces.size(); ++t) {
        const InvCFaceTerm& f = sp.invc_faces[t];
        const InvCEval e =
            invc_eval(sp.mat, f.coef, u(f.dof_ca), u(f.dof_cb), mode, flags, f.face, true);
        const double d[2] = {e.d_ca, e.d_cb};
        const double row_mult[2] = {1.0, -1.0};
        const auto& slots = sp.jac.invc_slots[t];
        for (int a = 0; a < 2; ++a)
            for (int b = 0; b < 2; ++b) vals[slots[a * 2 + b]] += row_mult[a] * d[b];
    }
}

SparseMatrix assemble_jacobian(const OperatorSplit& sp, const Vector& u, EvalMode mode,
                               EvalFlags* flags) {
    SparseMatrix out = jacobian_skeleton(sp);
    assemble_jacobian_into(sp, u, out, mode, flags);
    return out;
}

std::vector<int> source_dofs_for(const OperatorSplit& sp, NonlinearPart part,
                                 std::span<const int> image_dofs) {
    std::vector<int> src;
    for (int d : image_dofs) {
        if (d < 0 || d >= sp.dof.n_dof) throw ContractError("source_dofs_for: DOF out of range");
        const int cell = sp.dof.dof_cell[d];
        for (int t : sp.cell_terms(part)[cell]) {
            if (part == NonlinearPart::ButlerVolmer) {
                const BvFaceTerm& f = sp.bv_faces[t];
                src.insert(src.end(), {f.dof_cs, f.dof_ce, f.dof_phis, f.dof_phie});
            } else {
                const InvCFaceTerm& f = sp.invc_faces[t];
                src.insert(src.end(), {f.dof_ca, f.dof_cb});
            }
        }
    }
    std::sort(src.begin(), src.end());
    src.erase(std::unique(src.begin(), src.end()), src.end());
    return src;
}

RestrictedPartEvaluator::RestrictedPartEvaluator(const OperatorSplit& sp, NonlinearPart part,
                                                 std::span<const int> image_dofs,
                                                 const FaceSubset* subset)
    : part_(part), image_dofs_(image_dofs.begin(), image_dofs.end()) {
    // weight lookup; 0 excludes a face term
    std::vector<double> weight;
    if (subset) {
        if (subset->term_ids.size() != subset->weights.size())
            throw ContractError("RestrictedPartEvaluator: subset ids/weights mismatch");
        weight.assign(sp.term_count(part), 0.0);
        for (size_t i = 0; i < subset->term_ids.size(); ++i)
            weight[subset->term_ids[i]] = subset->weights[i];
    }

    std::vector<int> image_slot(sp.dof.n_dof, -1);
    for (size_t i = 0; i < image_dofs_.size(); ++i) {
        if (image_dofs_[i] < 0 || image_dofs_[i] >= sp.dof.n_dof)
            throw ContractError("RestrictedPartEvaluator: image DOF out of range");
        image_slot[image_dofs_[i]] = static_cast<int>(i);
    }

    // collect involved face terms (unique)
    std::vector<int> terms;
    for (int d : image_dofs_) {
        const int cell = sp.dof.dof_cell[d];
        for (int t : sp.cell_terms(part)[cell]) {
            if (!weight.empty() && weight[t] == 0.0) continue;
            terms.push_back(t);
        }
    }
    std::sort(terms.begin(), terms.end());
    terms.erase(std::unique(terms.begin(), terms.end()), terms.end());

    // source DOFs: ascending union of all inputs of the involved terms
    std::vector<int> src;
    for (int t : terms) {
        if (part == NonlinearPart::ButlerVolmer) {
            const BvFaceTerm& f = sp.bv_faces[t];
            src.insert(src.end(), {f.dof_cs, f.dof_ce, f.dof_phis, f.dof_phie});
        } else {
            const InvCFaceTerm& f = sp.invc_faces[t];
            src.insert(src.end(), {f.dof_ca, f.dof_cb});
        }
    }
    std::sort(src.begin(), src.end());
    src.erase(std::unique(src.begin(), src.end()), src.end());
    source_dofs_ = std::move(src);

    const auto src_pos = [&](int d) {
        const auto it = std::lower_bound(source_dofs_.begin(), source_dofs_.end(), d);
        return static_cast<int>(it - source_dofs_.begin());
    };

    const double inv_F = 1.0 / sp.mat.F;
    for (int t : terms) {
        FaceEntry e;
        e.term = t;
        e.weight = weight.empty() ? 1.0 : weight[t];
        int n_inputs = 0;
        std::array<std::pair<int, double>, 4> rows{};  // (dof, multiplier per unit flux)
        if (part == NonlinearPart::ButlerVolmer) {
            const BvFaceTerm& f = sp.bv_faces[t];
            e.src = {src_pos(f.dof_cs), src_pos(f.dof_ce), src_pos(f.dof_phis),
                     src_pos(f.dof_phie)};
            n_inputs = 4;
            rows = {{{f.dof_cs, f.inv_h * inv_F},
                     {f.dof_ce, -f.inv_h * inv_F},
                     {f.dof_phis, f.inv_h},
                     {f.dof_phie, -f.inv_h}}};
        } else {
            const InvCFaceTerm& f = sp.invc_faces[t];
            e.src = {src_pos(f.dof_ca), src_pos(f.dof_cb), -1, -1};
            n_inputs = 2;
            rows = {{{f.dof_phia, 1.0}, {f.dof_phib, -1.0}, {-1, 0.0}, {-1, 0.0}}};
        }
        for (const auto& [dofi, mult] : rows) {
            if (dofi < 0 || image_slot[dofi] < 0) continue;
            e.target_row[e.n_targets] = image_slot[dofi];
            e.target_mult[e.n_targets] = mult * e.weight;
            ++e.n_targets;
        }
        (void)n_inputs;
        if (e.n_targets > 0) entries_.push_back(e);
    }

    // local-Jacobian structure: per image row, the sorted unique source
    // positions it depends on; per face-target-input an accumulation slot
    std::vector<std::vector<int>> row_src(image_dofs_.size());
    for (const FaceEntry& e : entries_) {
        const int n_inputs = (part_ == NonlinearPart::ButlerVolmer) ? 4 : 2;
        for (int a = 0; a < e.n_targets; ++a)
            for (int b = 0; b < n_inputs; ++b) row_src[e.target_row[a]].push_back(e.src[b]);
    }
    jac_.row_offsets.assign(image_dofs_.size() + 1, 0);
    for (size_t r = 0; r < row_src.size(); ++r) {
        auto& v = row_src[r];
        std::sort(v.begin(), v.end());
        v.erase(std::unique(v.begin(), v.end()), v.end());
        jac_.row_offsets[r + 1] = jac_.row_offsets[r] + static_cast<int>(v.size());
    }
    jac_.source_pos.clear();
    for (const auto& v : row_src) jac_.source_pos.insert(jac_.source_pos.end(), v.begin(), v.end());
    jac_.values.assign(jac_.source_pos.size(), 0.0);

    const auto jac_slot = [&](int row, int pos) {
        const auto first = jac_.source_pos.begin() + jac_.row_offsets[row];
        const auto last = jac_.source_pos.begin() + jac_.row_offsets[row + 1];
        return static_cast<int>(std::lower_bound(first, last, pos) - jac_.source_pos.begin());
    };
    for (FaceEntry& e : entries_) {
        const int n_inputs = (part_ == NonlinearPart::ButlerVolmer) ? 4 : 2;
        for (int a = 0; a < e.n_targets; ++a)
            for (int b = 0; b < n_inputs; ++b)
                e.jac_slot[a * n_inputs + b] = jac_slot(e.target_row[a], e.src[b]);
    }
}

Vector RestrictedPartEvaluator::evaluate(const OperatorSplit& sp, const Vector& u_source,
                                         EvalMode mode, EvalFlags* flags) const {
    if (u_source.size() != static_cast<Eigen::Index>(source_dofs_.size()))
        throw ContractError("restricted evaluation: wrong source value count");
    Vector out = Vector::Zero(static_cast<Eigen::Index>(image_dofs_.size()));
    for (const FaceEntry& e : entries_) {
        double flux;
        if (part_ == NonlinearPart::ButlerVolmer) {
            const BvFaceTerm& f = sp.bv_faces[e.term];
            flux = bv_eval(sp.mat, f.pos_side, u_source(e.src[1]), u_source(e.src[0]),
                           u_source(e.src[3]), u_source(e.src[2]), mode, flags, f.face, false)
                       .j;
        } else {
            const InvCFaceTerm& f = sp.invc_faces[e.term];
            flux = invc_eval(sp.mat, f.coef, u_source(e.src[0]), u_source(e.src[1]), mode, flags,
                             f.face, false)
                       .r;
        }
        for (int a = 0; a < e.n_targets; ++a) out(e.target_row[a]) += e.target_mult[a] * flux;
    }
    return out;
}

void RestrictedPartEvaluator::jacobian(const OperatorSplit& sp, const Vector& u_source,
                                       LocalJacobian& out, EvalMode mode,
                                       EvalFlags* flags) const {
    if (u_source.size() != static_cast<Eigen::Index>(source_dofs_.size()))
        throw ContractError("restricted jacobian: wrong source value count");
    if (out.values.size() != jac_.values.size()) out = jac_;
    std::fill(out.values.begin(), out.values.end(), 0.0);
    for (const FaceEntry& e : entries_) {
        double d[4];
        int n_inputs;
        if (part_ == NonlinearPart::ButlerVolmer) {
            const BvFaceTerm& f = sp.bv_faces[e.term];
            const BvEval ev = bv_eval(sp.mat, f.pos_side, u_source(e.src[1]), u_source(e.src[0]),
                                      u_source(e.src[3]), u_source(e.src[2]), mode, flags, f.face,
                                      true);
            d[0] = ev.d_cs;
            d[1] = ev.d_ce;
            d[2] = ev.d_phis;
            d[3] = ev.d_phie;
            n_inputs = 4;
        } else {
            const InvCFaceTerm& f = sp.invc_faces[e.term];
            const InvCEval ev = invc_eval(sp.mat, f.coef, u_source(e.src[0]), u_source(e.src[1]),
                                          mode, flags, f.face, true);
            d[0] = ev.d_ca;
            d[1] = ev.d_cb;
            n_inputs = 2;
        }
        for (int a = 0; a < e.n_targets; ++a)
            for (int b = 0; b < n_inputs; ++b)
                out.values[e.jac_slot[a * n_inputs + b]] += e.target_mult[a] * d[b];
    }
}

Vector restricted_evaluate(const OperatorSplit& sp, NonlinearPart part,
                           std::span<const int> image_dofs, const Vector& u_restricted,
                           EvalMode mode) {
    RestrictedPartEvaluator ev(sp, part, image_dofs);
    return ev.evaluate(sp, u_restricted, mode);
}

Vector initial_state(const VoxelGrid& grid, const DofMap& dof, const MaterialData& mat) {
    Vector u = Vector::Zero(dof.n_dof);
    const double phi_neg = u0_neg(mat.c0_neg / mat.c_max_neg);
    const double phi_pos = u0_pos(mat.c0_pos / mat.c_max_pos);
    for (int cell = 0; cell < grid.cell_count(); ++cell) {
        const CellLabel l = grid.labels[cell];
        if (dof.c_dof[cell] >= 0) u(dof.c_dof[cell]) = mat.initial_concentration(l);
        double phi = 0.0;
        if (l == CellLabel::NegElectrode || l == CellLabel::NegCollector) phi = phi_neg;
        if (l == CellLabel::PosElectrode || l == CellLabel::PosCollector) phi = phi_pos;
        u(dof.phi_dof[cell]) = phi;
    }
    return u;
}

bool state_admissible(const OperatorSplit& sp, const Vector& u, std::string* why) {
    if (u.size() != sp.dof.n_dof) throw ContractError("state_admissible: length mismatch");
    for (int cell = 0; cell < sp.grid.cell_count(); ++cell) {
        const int cd = sp.dof.c_dof[cell];
        if (cd < 0) continue;
        const CellLabel l = sp.grid.labels[cell];
        const double c = u(cd);
        if (!(c > 0.0)) {
            if (why) *why = "non-positive concentration in cell " + std::to_string(cell);
            return false;
        }
        if (is_electrode(l) && !(c < sp.mat.c_max(l == CellLabel::PosElectrode))) {
            if (why) *why = "concentration at or above c_max in cell " + std::to_string(cell);
            return false;
        }
    }
    return true;
}

double total_lithium(const OperatorSplit& sp, const Vector& u) {
    if (u.size() != sp.dof.n_dof) throw ContractError("total_lithium: length mismatch");
    return u.head(sp.dof.n_c).sum() * sp.grid.voxel_volume();
}

} // namespace battrom
