// SPDX-License-Identifier: MIT

/// @file
/// Nonlinear solvers: Newton smoothing with saturation chopping on the fine
/// level and constant mobility extension on coarse levels, the V-cycle full
/// approximation scheme with backtracked coarse corrections, and the outer
/// time loop with geometric step growth.

#pragma once

#include "fasflow/linsolve.hpp"

#include <chrono>
#include <cmath>
#include <vector>

namespace fasflow
{

struct FASConfig
{
    int num_levels = 1;
    std::vector<int> smoothing_steps; ///< per level; empty means 1 everywhere
    int coarsest_max_iters = 10;
    double backtracking_theta = 0.5;
    int backtracking_budget = 8;
    double nonlinear_tol = 1e-6;
    int max_outer_cycles = 500;
    double residual_floor = 1.0; ///< absolute floor for the block scales
    /// Fine-level chop: per-Newton-update saturation change limit (modified
    /// Appleyard), applied before the [0,1] clamp.
    double max_saturation_change = 0.2;

    int steps_at(int level) const
    {
        if (level < static_cast<int>(smoothing_steps.size())) { return smoothing_steps[level]; }
        return 1;
    }
};

/// Per-block normalization scales, frozen at the first residual of a solve.
/// Each block is scaled by the larger of its entry residual norm, the norm
/// of its right-hand side (the flux and pressure blocks keep the same RHS
/// across time steps, so their entry residuals degenerate once converged),
/// and an absolute floor.
struct ResidualScale
{
    double sig = 1.0, p = 1.0, s = 1.0;

    static ResidualScale from(const ResidualVector& r0, const LevelData& lvl, double floor)
    {
        ResidualScale sc;
        sc.sig = std::max({r0.r_sigma.norm(), lvl.g.norm(), floor});
        sc.p = std::max({r0.r_p.norm(), lvl.f.norm(), floor});
        sc.s = std::max({r0.r_s.norm(), lvl.h.norm(), floor});
        return sc;
    }
};

/// Largest block-relative residual norm.
inline double normalized_residual(const ResidualVector& r, const ResidualScale& scale)
{
    return std::max({r.r_sigma.norm() / scale.sig, r.r_p.norm() / scale.p, r.r_s.norm() / scale.s});
}

struct SolveStats
{
    std::vector<int> linear_iterations; ///< per level
    std::vector<int> newton_steps;      ///< per level
    int backtracking_cuts = 0;
    bool linear_fallbacks = false;

    void ensure(int levels)
    {
        linear_iterations.resize(std::max<std::size_t>(linear_iterations.size(), levels), 0);
        newton_steps.resize(std::max<std::size_t>(newton_steps.size(), levels), 0);
    }
};

inline ResidualVector zero_rhs(const Hierarchy& hier, int level)
{
    const LevelData& lvl = hier.levels[level];
    return {Vector::Zero(lvl.num_fluxes()), Vector::Zero(lvl.num_cells),
            Vector::Zero(lvl.num_cells)};
}

inline void chop_saturations(Vector& s)
{
    for (Eigen::Index c = 0; c < s.size(); ++c) { s[c] = clamp01(s[c]); }
}

/// Local saturation chopping for fine-level Newton updates: limit the change
/// per cell, then clamp into [0,1].
inline void apply_chopped_update(Vector& s, const Vector& ds_newton, double max_change)
{
    for (Eigen::Index c = 0; c < s.size(); ++c)
    {
        const double ds = std::clamp(-ds_newton[c], -max_change, max_change);
        s[c] = clamp01(s[c] + ds);
    }
}

/// Newton iterations on r(x) = b at one level.  Fine-level saturation
/// updates are chopped (change-limited, then clamped to [0,1]); coarse
/// levels rely on the constant mobility extension instead.  Stops early when
/// the block-normalized residual (scaled by the entry residual) drops below
/// the tolerance.
inline void nonlinear_smoothing(const Hierarchy& hier, int level, State& x, const ResidualVector& b,
                                int n_steps, double dt, const FluidProps& fluids,
                                const FASConfig& config, const LinearConfig& linear,
                                SolveStats& stats)
{
    if (n_steps <= 0) { return; }
    const LevelData& lvl = hier.levels[level];
    stats.ensure(hier.num_levels());

    ResidualVector r = coarse_residual(lvl, x, dt, fluids) - b;
    const ResidualScale scale = ResidualScale::from(r, lvl, config.residual_floor);
    for (int k = 0; k < n_steps; ++k)
    {
        if (normalized_residual(r, scale) <= config.nonlinear_tol) { return; }
        const JacobianBlocks jac = assemble_jacobian(lvl, x, dt, fluids);
        const ReducedSystem red =
            (level == 0) ? reduce_fine(lvl, jac, r) : hybridize_coarse(lvl, jac, r);
        Vector d1, d2;
        const LinearSolveStats lin = solve_reduced(red, linear, d1, d2);
        stats.linear_iterations[level] += lin.iterations;
        stats.linear_fallbacks |= (lin.used_direct && linear.backend != LinearConfig::Backend::Direct);
        const NewtonUpdate update = red.recover(d1, d2);
        x.sigma -= update.dsigma;
        x.p -= update.dp;
        if (level == 0) { apply_chopped_update(x.s, update.ds, config.max_saturation_change); }
        else { x.s -= update.ds; }
        ++stats.newton_steps[level];
        r = coarse_residual(lvl, x, dt, fluids) - b;
    }
}

/// Largest step length in {1, theta, theta^2, ...} that does not increase
/// ||r(x + a d) - b||; returns x unchanged when the budget is exhausted.
/// Fine-level trial states are chopped before evaluation, so the accepted
/// state always satisfies the saturation bounds.
inline State backtracking(const Hierarchy& hier, int level, const State& x, const State& direction,
                          double theta, const ResidualVector& b, double dt,
                          const FluidProps& fluids, const FASConfig& config, SolveStats& stats)
{
    const LevelData& lvl = hier.levels[level];
    const double base = (coarse_residual(lvl, x, dt, fluids) - b).norm2();
    double alpha = 1.0;
    for (int trial = 0; trial < config.backtracking_budget; ++trial)
    {
        State candidate = x + direction.scaled(alpha);
        if (level == 0) { chop_saturations(candidate.s); }
        if ((coarse_residual(lvl, candidate, dt, fluids) - b).norm2() <= base) { return candidate; }
        alpha *= theta;
        ++stats.backtracking_cuts;
    }
    return x;
}

/// One V-cycle step of the full approximation scheme at the given level.
inline void fas_cycle(const Hierarchy& hier, int level, State& x, const ResidualVector& b, double dt,
                      const FluidProps& fluids, const FASConfig& config, const LinearConfig& linear,
                      SolveStats& stats)
{
    if (level == hier.num_levels() - 1)
    {
        nonlinear_smoothing(hier, level, x, b, config.coarsest_max_iters, dt, fluids, config, linear,
                            stats);
        return;
    }
    nonlinear_smoothing(hier, level, x, b, config.steps_at(level), dt, fluids, config, linear, stats);

    State xc = hier.project(level, x);
    const ResidualVector fine_defect = coarse_residual(hier.levels[level], x, dt, fluids) - b;
    const ResidualVector bc =
        coarse_residual(hier.levels[level + 1], xc, dt, fluids) - hier.restrict_residual(level, fine_defect);

    State yc = xc;
    fas_cycle(hier, level + 1, yc, bc, dt, fluids, config, linear, stats);

    const State direction = hier.interpolate(level, yc - xc);
    x = backtracking(hier, level, x, direction, config.backtracking_theta, b, dt, fluids, config,
                     stats);
    nonlinear_smoothing(hier, level, x, b, config.steps_at(level), dt, fluids, config, linear, stats);
}

// ---------------------------------------------------------------------------
// outer time loop
// ---------------------------------------------------------------------------

enum class SolverKind
{
    Newton,
    Fas
};

struct Schedule
{
    double dt0 = 0.0;
    double nu = 1.0;      ///< step growth factor
    double t_final = 0.0; ///< seconds
};

struct StepRecord
{
    int step = 0;
    double t = 0.0;   ///< seconds at the end of the step
    double dt = 0.0;  ///< seconds
    double cfl = 0.0;
    int nonlinear_iterations = 0;
    std::vector<int> linear_iterations; ///< per level
    double wall_seconds = 0.0;
    bool converged = false;
};

struct TimeLoopResult
{
    std::vector<StepRecord> records;
    State final_state;
    bool all_converged = true;
};

/// Fully implicit time stepping with geometric step growth; the last step is
/// truncated to land on the final time.  Each step starts from the previous
/// converged state and iterates Newton steps or V-cycles until the
/// block-normalized residual drops below the tolerance.  A non-converged
/// step aborts the run (no time-step cutting, to keep solver comparisons
/// clean).
inline TimeLoopResult time_loop(Hierarchy& hier, const Mesh& mesh, const std::vector<Well>& wells,
                                const FluidProps& fluids, const State& initial,
                                const Schedule& schedule, SolverKind solver, const FASConfig& config,
                                const LinearConfig& linear)
{
    require(schedule.dt0 > 0.0 && schedule.t_final > 0.0, "time_loop: dt0 and t_final must be positive");
    require(schedule.nu >= 1.0, "time_loop: step growth factor must be >= 1");

    TimeLoopResult result;
    result.final_state = initial;
    double t = 0.0;
    double dt = schedule.dt0;
    int step = 0;
    const double t_eps = 1e-12 * schedule.t_final;

    while (t < schedule.t_final - t_eps)
    {
        const double dt_step = std::min(dt, schedule.t_final - t);
        const Vector prev_s = result.final_state.s;
        hier.set_time_step(prev_s, dt_step);

        State x = result.final_state;
        SolveStats stats;
        stats.ensure(hier.num_levels());
        const auto start = std::chrono::steady_clock::now();

        const ResidualVector b = zero_rhs(hier, 0);
        ResidualVector r = coarse_residual(hier.levels[0], x, dt_step, fluids);
        const ResidualScale scale = ResidualScale::from(r, hier.levels[0], config.residual_floor);

        StepRecord record;
        record.step = step;
        record.dt = dt_step;
        bool converged = normalized_residual(r, scale) <= config.nonlinear_tol;
        while (!converged && record.nonlinear_iterations < config.max_outer_cycles)
        {
            if (solver == SolverKind::Newton)
            {
                nonlinear_smoothing(hier, 0, x, b, 1, dt_step, fluids, config, linear, stats);
            }
            else
            {
                fas_cycle(hier, 0, x, b, dt_step, fluids, config, linear, stats);
            }
            ++record.nonlinear_iterations;
            r = coarse_residual(hier.levels[0], x, dt_step, fluids);
            converged = normalized_residual(r, scale) <= config.nonlinear_tol;
        }

        record.wall_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        record.converged = converged;
        record.t = t + dt_step;
        record.cfl = cfl_number(x.sigma, mesh, wells, dt_step, fluids);
        record.linear_iterations = stats.linear_iterations;
        result.records.push_back(record);

        if (!converged)
        {
            result.all_converged = false;
            break;
        }
        result.final_state = x;
        t += dt_step;
        dt *= schedule.nu;
        ++step;
    }
    return result;
}

} // namespace fasflow
