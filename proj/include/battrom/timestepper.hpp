#ifndef BATTROM_TIMESTEPPER_HPP
#define BATTROM_TIMESTEPPER_HPP

#include <functional>
#include <string>
#include <vector>

#include "battrom/linalg.hpp"
#include "battrom/model.hpp"

namespace battrom {

/// Uniform time grid; n_steps * dt = t_end.
struct TimeGrid {
    double dt = 10.0;
    int n_steps = 200;

    double t_end() const { return dt * n_steps; }

    static TimeGrid from_t_end(double dt, double t_end);
};

struct NewtonOptions {
    double atol = 1e-10;  // on the scaled residual max-norm
    double rtol = 1e-9;   // relative to the initial scaled norm
    int max_iter = 20;
    int max_halvings = 10;  // step-halving line search on residual increase
    bool capture_stages = false;

    /// Per-DOF residual scaling applied before norm evaluation; empty
    /// means unscaled. The c- and phi-equations live on different
    /// magnitudes, so trajectory solvers pass per-block references.
    Vector scale;
};

struct NewtonResult {
    Vector solution;
    bool converged = false;
    int iterations = 0;
    std::vector<double> residual_history;  // scaled norms, including the start
    std::vector<Vector> stages;            // all iterates when capture_stages
    int total_halvings = 0;
};

/// Damped Newton iteration on callbacks:
///   residual(u)        -> residual vector
///   solve_linearized(u, r) -> J(u)^{-1} r
/// Throws NonconvergenceError when max_iter is exhausted (carrying the
/// residual-norm history) and propagates solver errors.
NewtonResult newton_solve(const std::function<Vector(const Vector&)>& residual,
                          const std::function<Vector(const Vector&, const Vector&)>& solve_linearized,
                          const Vector& u0, const NewtonOptions& opts);

struct StepDiagnostics {
    int newton_iterations = 0;
    double final_residual = 0.0;
    int halvings = 0;
};

/// Full-order solution trajectory at one parameter value.
struct Trajectory {
    Matrix states;  // n_dof x (n_steps + 1), time-ordered, column 0 = initial state
    double mu = 0.0;
    TimeGrid tg;

    std::vector<Vector> newton_stages;  // intermediate Newton iterates (optional)
    std::vector<int> stage_step;        // owning step per stage entry
    std::vector<StepDiagnostics> diagnostics;
    std::vector<std::string> warnings;

    int n_states() const { return static_cast<int>(states.cols()); }
};

struct TrajectoryOptions {
    NewtonOptions newton;
    bool capture_stages = false;

    /// Parameter domain used only for the out-of-range warning.
    double mu_min = 0.00012;
    double mu_max = 0.0012;
};

/// Residual scaling for the battery system: c-rows by c_max/dt, phi-rows
/// by mu_max/h (the applied-current scale).
Vector residual_scale(const OperatorSplit& split, double dt, double mu_max);

/// Solves the implicit Euler systems
///   [ (c^{n+1} - c^n)/dt ; 0 ] + A_mu(u^{n+1}) = 0
/// with Newton warm-started from the previous state. Each converged
/// state is validated against the physical range (unclamped).
Trajectory solve_trajectory(const OperatorSplit& split, const TimeGrid& tg, double mu,
                            const TrajectoryOptions& opts);

} // namespace battrom

#endif
