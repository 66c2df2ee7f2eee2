#ifndef QPURIFY_DP_SOLVER_HPP
#define QPURIFY_DP_SOLVER_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "bellman.hpp"
#include "errors.hpp"
#include "strategies.hpp"
#include "value_grid.hpp"

namespace qpurify {

// Explicit upwind/central finite differences for the two Bellman equations
//
//   dV/dt = 4 s V_s - min{0, D V}                     V(T, s) = F(s)
//   0     = 1 - 4 s V_s + min{0, D V}                 V(h) = 0
//
// with D V = 4 s (1 - s) V_s + 8 s^2 (1 - s) V_ss. Transport -4 s V_s uses
// backward (upwind) differences, D uses central ones. At s = 1 the factor
// (1 - s) kills D and no boundary condition is imposed.

struct FiniteHorizonOptions
{
    std::size_t n_s = 400;
    std::size_t n_t = 0;        // sweep steps; 0 picks the smallest stable count
    std::size_t n_slices = 101; // stored time slices
    double margin = kInteriorMargin;
};

struct HittingTimeOptions
{
    std::size_t n_s = 800;
    double update_tolerance = 1e-10;
    std::size_t max_iterations = 200'000'000;
};

namespace detail {

// Largest stable step: keeps every coefficient of the explicit update
// non-negative, 1 - dt (4 s / ds + 2 * 8 s^2 (1 - s) / ds^2) >= 0.
inline double stable_step(const std::vector<double>& s, double ds)
{
    double worst = 0.0;
    for (double x : s)
        worst = std::max(worst, 4.0 * x / ds + 2.0 * curvature_weight(x) / (ds * ds));
    return 1.0 / worst;
}

// Discrete D V at node j.
inline double discrete_d(const std::vector<double>& V, const std::vector<double>& s, std::size_t j, double ds)
{
    const std::size_t n = V.size();
    const double x = s[j];
    if (j + 1 == n)
        return 4.0 * x * (1.0 - x) * (V[j] - V[j - 1]) / ds;
    double v_s;
    double v_ss;
    if (j == 0) {
        v_s = (V[1] - V[0]) / ds;
        v_ss = (V[2] - 2.0 * V[1] + V[0]) / (ds * ds);
    } else {
        v_s = (V[j + 1] - V[j - 1]) / (2.0 * ds);
        v_ss = (V[j + 1] - 2.0 * V[j] + V[j - 1]) / (ds * ds);
    }
    return 4.0 * x * (1.0 - x) * v_s + curvature_weight(x) * v_ss;
}

inline double upwind_slope(const std::vector<double>& V, std::size_t j, double ds)
{
    return j == 0 ? (V[1] - V[0]) / ds : (V[j] - V[j - 1]) / ds;
}

inline NodePolicy classify(double d, double tie)
{
    if (d < -tie)
        return NodePolicy::One;
    if (d > tie)
        return NodePolicy::Zero;
    return NodePolicy::Tie;
}

inline double tie_tolerance(double ds) { return 10.0 * ds * ds; }

}  // namespace detail

inline ValueGrid solve_finite_horizon(TerminalCost F, double T, const FiniteHorizonOptions& opt = {})
{
    detail::require(std::isfinite(T) && T >= 0.0, "terminal time must be >= 0");
    detail::require(opt.n_s >= 3, "need at least 3 entropy nodes");
    detail::require(opt.n_slices >= 2, "need at least 2 stored time slices");

    ValueGrid g;
    g.problem = ProblemKind::FiniteHorizon;
    g.cost = F;
    g.horizon = T;
    g.entropies = detail::linspace(opt.margin, 1.0, opt.n_s);
    const double ds = g.ds();
    const std::size_t n = opt.n_s;

    std::vector<double> V(n);
    for (std::size_t j = 0; j < n; ++j)
        V[j] = F(g.entropies[j]);

    const double tie = detail::tie_tolerance(ds);
    auto annotate = [&](const std::vector<double>& slice, std::vector<NodePolicy>& out) {
        for (std::size_t j = 0; j < n; ++j)
            out.push_back(detail::classify(detail::discrete_d(slice, g.entropies, j, ds), tie));
    };

    if (T == 0.0) {
        g.times = {0.0};
        g.values = V;
        annotate(V, g.policy);
        return g;
    }

    const double dt_max = detail::stable_step(g.entropies, ds);
    const auto required = static_cast<std::size_t>(std::ceil(T / dt_max * (1.0 - 1e-12)));
    std::size_t steps = opt.n_t == 0 ? required : opt.n_t;
    if (steps < required)
        throw StabilityError("explicit sweep unstable: n_t = " + std::to_string(steps) +
                                 " but the stability bound needs n_t >= " + std::to_string(required),
                             required);
    const double dt = T / static_cast<double>(steps);
    g.time_steps = steps;
    g.step_size = dt;

    // Slice k (in backward time) is stored after step round(k * steps / (n_slices - 1)).
    const std::size_t m = std::min(opt.n_slices, steps + 1);
    std::vector<std::size_t> store_at(m);
    for (std::size_t k = 0; k < m; ++k)
        store_at[k] = static_cast<std::size_t>(std::llround(static_cast<double>(k) * steps / (m - 1)));

    std::vector<std::vector<double>> slices;
    std::vector<double> slice_times;
    slices.reserve(m);
    slices.push_back(V);
    slice_times.push_back(T);
    std::size_t next_store = 1;

    std::vector<double> next(n);
    for (std::size_t step = 1; step <= steps; ++step) {
        for (std::size_t j = 0; j < n; ++j) {
            const double x = g.entropies[j];
            const double rhs = -4.0 * x * detail::upwind_slope(V, j, ds) +
                               std::min(0.0, detail::discrete_d(V, g.entropies, j, ds));
            next[j] = V[j] + dt * rhs;
        }
        V.swap(next);
        if (next_store < m && step == store_at[next_store]) {
            slices.push_back(V);
            slice_times.push_back(T - static_cast<double>(step) * dt);
            ++next_store;
        }
    }

    // Stored backward; flip to increasing time.
    for (std::size_t k = slices.size(); k-- > 0;) {
        g.times.push_back(std::max(0.0, slice_times[k]));
        g.values.insert(g.values.end(), slices[k].begin(), slices[k].end());
        annotate(slices[k], g.policy);
    }
    g.times.front() = 0.0;
    return g;
}

inline ValueGrid solve_finite_horizon(TerminalCost F, double T, std::size_t n_s, std::size_t n_t = 0)
{
    FiniteHorizonOptions opt;
    opt.n_s = n_s;
    opt.n_t = n_t;
    return solve_finite_horizon(F, T, opt);
}

// Pseudo-time iteration of the hitting-time equation until the largest
// per-step update drops below the tolerance.
inline ValueGrid solve_hitting_time(double h, const HittingTimeOptions& opt = {})
{
    detail::check_threshold(h);
    detail::require(opt.n_s >= 3, "need at least 3 entropy nodes");

    ValueGrid g;
    g.problem = ProblemKind::HittingTime;
    g.threshold = h;
    g.entropies = detail::linspace(h, 1.0, opt.n_s);
    const double ds = g.ds();
    const std::size_t n = opt.n_s;
    const double dt = detail::stable_step(g.entropies, ds);
    g.step_size = dt;

    // Per-node stencil weights: transport on (V_j - V_{j-1}), D on the
    // central first and second differences.
    std::vector<double> w_tr(n), w_d1(n), w_d2(n);
    for (std::size_t j = 0; j < n; ++j) {
        const double x = g.entropies[j];
        w_tr[j] = -4.0 * x / ds;
        w_d1[j] = 4.0 * x * (1.0 - x) / (2.0 * ds);
        w_d2[j] = detail::curvature_weight(x) / (ds * ds);
    }

    std::vector<double> V(n, 0.0);
    std::vector<double> rhs(n, 0.0);
    std::size_t iter = 0;
    double update = 0.0;
    for (;;) {
        update = 0.0;
        for (std::size_t j = 1; j + 1 < n; ++j) {
            const double d = w_d1[j] * (V[j + 1] - V[j - 1]) + w_d2[j] * (V[j + 1] - 2.0 * V[j] + V[j - 1]);
            rhs[j] = 1.0 + w_tr[j] * (V[j] - V[j - 1]) + std::min(0.0, d);
        }
        rhs[n - 1] = 1.0 + w_tr[n - 1] * (V[n - 1] - V[n - 2]);
        for (std::size_t j = 1; j < n; ++j) {
            const double du = dt * rhs[j];
            V[j] += du;
            update = std::max(update, std::abs(du));
        }
        ++iter;
        if (update < opt.update_tolerance)
            break;
        if (iter >= opt.max_iterations)
            throw ConvergenceError("hitting-time iteration did not converge within " +
                                   std::to_string(opt.max_iterations) + " iterations (last update " +
                                   std::to_string(update) + ")");
    }
    g.time_steps = iter;
    g.final_update = update;
    g.final_residual = 0.0;
    for (std::size_t j = 1; j < n; ++j)
        g.final_residual = std::max(g.final_residual, std::abs(rhs[j]));

    g.values = V;
    const double tie = detail::tie_tolerance(ds);
    for (std::size_t j = 0; j < n; ++j)
        g.policy.push_back(j == 0 ? NodePolicy::Tie
                                  : detail::classify(detail::discrete_d(V, g.entropies, j, ds), tie));
    return g;
}

inline ValueGrid solve_hitting_time(double h, std::size_t n_s)
{
    HittingTimeOptions opt;
    opt.n_s = n_s;
    return solve_hitting_time(h, opt);
}

// ---------------------------------------------------------------------------
// Grid refinement against the closed forms

struct RefinementProblem
{
    ProblemKind kind = ProblemKind::FiniteHorizon;
    TerminalCost cost{};
    double horizon = 0.5;
    double threshold = 0.5;
};

struct RefinementRow
{
    std::size_t n_s = 0;
    double error = 0.0;
    double ratio = 0.0;  // previous error / this error
    double order = 0.0;  // log(ratio) / log(refinement factor)
};

struct ConvergenceTable
{
    std::vector<RefinementRow> rows;

    nlohmann::json to_json() const
    {
        auto out = nlohmann::json::array();
        for (const auto& r : rows)
            out.push_back({{"n_s", r.n_s}, {"error", r.error}, {"ratio", r.ratio}, {"order", r.order}});
        return out;
    }
};

// Sup-norm distance between a solved grid and the matching closed form.
inline double analytic_error(const ValueGrid& g)
{
    double err = 0.0;
    for (std::size_t k = 0; k < g.n_slices(); ++k)
        for (std::size_t j = 0; j < g.n_s(); ++j) {
            const double s = g.entropies[j];
            double exact;
            if (g.problem == ProblemKind::FiniteHorizon)
                exact = jacobs_expected_cost(s, g.horizon - g.times[k], g.cost);
            else
                exact = aligned_mean_hitting_time(s, g.threshold);
            err = std::max(err, std::abs(g.at(k, j) - exact));
        }
    return err;
}

inline ConvergenceTable refine_and_extrapolate(const RefinementProblem& problem, const std::vector<std::size_t>& grids)
{
    detail::require(grids.size() >= 2, "refinement needs at least two grid resolutions");
    ConvergenceTable table;
    for (std::size_t i = 0; i < grids.size(); ++i) {
        ValueGrid g = problem.kind == ProblemKind::FiniteHorizon
                          ? solve_finite_horizon(problem.cost, problem.horizon, grids[i])
                          : solve_hitting_time(problem.threshold, grids[i]);
        RefinementRow row{grids[i], analytic_error(g), 0.0, 0.0};
        if (i > 0) {
            const auto& prev = table.rows.back();
            row.ratio = prev.error / row.error;
            row.order = std::log(row.ratio) /
                        std::log(static_cast<double>(grids[i] - 1) / static_cast<double>(grids[i - 1] - 1));
        }
        table.rows.push_back(row);
    }
    return table;
}

inline nlohmann::json grid_metadata(const ValueGrid& g)
{
    std::size_t ties = 0;
    for (auto p : g.policy)
        ties += p == NodePolicy::Tie;
    nlohmann::json meta{{"problem", to_string(g.problem)},
                        {"n_s", g.n_s()},
                        {"s_min", g.entropies.front()},
                        {"s_max", g.entropies.back()},
                        {"n_slices", g.n_slices()},
                        {"time_steps", g.time_steps},
                        {"step_size", g.step_size},
                        {"tie_nodes", ties},
                        {"analytic_sup_error", analytic_error(g)}};
    if (g.problem == ProblemKind::FiniteHorizon) {
        meta["T"] = g.horizon;
        meta["F"] = g.cost.name();
    } else {
        meta["h"] = g.threshold;
        meta["final_update"] = g.final_update;
        meta["final_residual"] = g.final_residual;
    }
    return meta;
}

}  // namespace qpurify

#endif
