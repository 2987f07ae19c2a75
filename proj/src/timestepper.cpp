#include "battrom/timestepper.hpp"

#include <cmath>
#include <memory>

namespace battrom {

TimeGrid TimeGrid::from_t_end(double dt, double t_end) {
    if (!(dt > 0.0)) throw ConfigError("time step must be positive");
    const double ratio = t_end / dt;
    const int n = static_cast<int>(std::lround(ratio));
    if (n < 1 || std::abs(ratio - n) > 1e-9 * std::max(1.0, ratio))
        throw ConfigError("time step does not divide the final time");
    return TimeGrid{dt, n};
}

namespace {

double scaled_norm(const Vector& r, const Vector& scale) {
    if (r.size() == 0) return 0.0;
    if (scale.size() == 0) return r.cwiseAbs().maxCoeff();
    if (scale.size() != r.size()) throw ContractError("newton: scale length mismatch");
    return (r.cwiseQuotient(scale)).cwiseAbs().maxCoeff();
}

} // namespace

NewtonResult newton_solve(const std::function<Vector(const Vector&)>& residual,
                          const std::function<Vector(const Vector&, const Vector&)>& solve_linearized,
                          const Vector& u0, const NewtonOptions& opts) {
    NewtonResult res;
    Vector u = u0;
    Vector r = residual(u);
    double norm = scaled_norm(r, opts.scale);
    res.residual_history.push_back(norm);
    const double target = std::max(opts.atol, opts.rtol * norm);

    if (norm <= target) {
        res.solution = std::move(u);
        res.converged = true;
        return res;
    }

    for (int it = 0; it < opts.max_iter; ++it) {
        const Vector du = solve_linearized(u, r);
        double step = 1.0;
        Vector u_next, r_next;
        double norm_next = 0.0;
        int halved = 0;
        for (;; ++halved) {
            u_next = u - step * du;
            r_next = residual(u_next);
            norm_next = scaled_norm(r_next, opts.scale);
            if (std::isfinite(norm_next) && norm_next < norm) break;
            if (halved >= opts.max_halvings) break;
            step *= 0.5;
        }
        res.total_halvings += halved;
        u = std::move(u_next);
        r = std::move(r_next);
        norm = norm_next;
        res.iterations = it + 1;
        res.residual_history.push_back(norm);
        if (opts.capture_stages) res.stages.push_back(u);
        if (std::isfinite(norm) && norm <= target) {
            res.solution = std::move(u);
            res.converged = true;
            return res;
        }
    }
    throw NonconvergenceError("Newton did not converge within " + std::to_string(opts.max_iter) +
                                  " iterations (scaled residual " + std::to_string(norm) + ")",
                              res.residual_history);
}

Vector residual_scale(const OperatorSplit& split, double dt, double mu_max) {
    Vector s(split.dof.n_dof);
    const double c_ref = std::max(split.mat.c_max_neg, split.mat.c_max_pos) / dt;
    const double phi_ref = mu_max / split.grid.voxel_size[0];
    s.head(split.dof.n_c).setConstant(c_ref);
    s.tail(split.dof.n_phi).setConstant(phi_ref);
    return s;
}

Trajectory solve_trajectory(const OperatorSplit& split, const TimeGrid& tg, double mu,
                            const TrajectoryOptions& opts) {
    if (!(tg.dt > 0.0) || tg.n_steps < 1) throw ConfigError("invalid time grid");

    Trajectory traj;
    traj.mu = mu;
    traj.tg = tg;
    if (mu < opts.mu_min || mu > opts.mu_max)
        traj.warnings.push_back("parameter mu outside the configured domain");

    const int n = split.dof.n_dof;
    traj.states.resize(n, tg.n_steps + 1);
    traj.states.col(0) = initial_state(split.grid, split.dof, split.mat);

    NewtonOptions nopts = opts.newton;
    nopts.capture_stages = opts.capture_stages;
    if (nopts.scale.size() == 0) nopts.scale = residual_scale(split, tg.dt, opts.mu_max);

    SparseMatrix jac = jacobian_skeleton(split);
    const double inv_dt = 1.0 / tg.dt;

    // The Jacobian pattern is fixed for the whole trajectory: analyze once.
    std::unique_ptr<SparseFactorization> lu;

    EvalFlags flags;
    for (int step = 0; step < tg.n_steps; ++step) {
        const Vector u_prev = traj.states.col(step);

        const auto residual = [&](const Vector& u) {
            Vector r = apply_full(split, u, mu, EvalMode::Clamped, &flags);
            r.head(split.dof.n_c) += inv_dt * (u.head(split.dof.n_c) - u_prev.head(split.dof.n_c));
            return r;
        };
        const auto solve_lin = [&](const Vector& u, const Vector& r) {
            assemble_jacobian_into(split, u, jac, EvalMode::Clamped, &flags);
            auto vals = jac.values();
            for (int d = 0; d < split.dof.n_c; ++d) vals[split.jac.diag_slots[d]] += inv_dt;
            if (!lu) lu = std::make_unique<SparseFactorization>(jac);
            else lu->refactorize(jac);
            return lu->solve(r);
        };

        try {
            NewtonResult nr = newton_solve(residual, solve_lin, u_prev, nopts);
            traj.states.col(step + 1) = nr.solution;
            traj.diagnostics.push_back(
                {nr.iterations, nr.residual_history.back(), nr.total_halvings});
            if (opts.capture_stages) {
                // keep intermediate iterates; the converged state is
                // already a trajectory snapshot
                for (size_t s = 0; s + 1 < nr.stages.size(); ++s) {
                    traj.newton_stages.push_back(std::move(nr.stages[s]));
                    traj.stage_step.push_back(step);
                }
            }
        } catch (const NonconvergenceError& e) {
            throw NonconvergenceError("time step " + std::to_string(step + 1) + " at mu = " +
                                          std::to_string(mu) + ": " + e.what(),
                                      e.residual_history(), step + 1);
        }

        std::string why;
        if (!state_admissible(split, traj.states.col(step + 1), &why))
            throw EvaluationError("converged state left the physical range at step " +
                                      std::to_string(step + 1) + ": " + why,
                                  -1);
    }

    if (flags.clamped) traj.warnings.push_back("Butler-Volmer arguments were clamped during Newton");
    if (flags.sinh_capped) traj.warnings.push_back("overpotential argument hit the sinh cap");
    return traj;
}

} // namespace battrom
