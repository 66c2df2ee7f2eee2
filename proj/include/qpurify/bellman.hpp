#ifndef QPURIFY_BELLMAN_HPP
#define QPURIFY_BELLMAN_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <memory>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "errors.hpp"
#include "state.hpp"
#include "strategies.hpp"
#include "value_grid.hpp"

namespace qpurify {

// V and the partial derivatives the generator needs.
struct ValueJet
{
    double v = 0.0;
    double v_t = 0.0;
    double v_s = 0.0;
    double v_ss = 0.0;
};

struct AnalyticJacobs
{
    TerminalCost cost;
    double horizon;
};

struct AnalyticAligned
{
    double threshold;
};

struct GridBacked
{
    std::shared_ptr<const ValueGrid> grid;
};

// Any closed-form V given as a jet.
struct CustomValue
{
    std::function<ValueJet(double, double)> jet;
    std::string label;
};

namespace detail {

// atanh(r)/r for r in [0, 1).
inline double atanh_over_r(double r)
{
    if (r < 1e-4)
        return 1.0 + r * r / 3.0;
    return std::atanh(r) / r;
}

// [atanh(r)/r - 1/(1 - r^2)] / (2 r^2), finite as r -> 0.
inline double aligned_curvature_core(double r)
{
    if (r < 0.05) {
        // -sum_{k>=1} r^{2k-2} k / (2k + 1)
        double sum = 0.0;
        double p = 1.0;
        for (int k = 1; k <= 12; ++k) {
            sum -= p * k / (2.0 * k + 1.0);
            p *= r * r;
        }
        return sum;
    }
    const double s = 1.0 - r * r;
    return (std::atanh(r) / r - 1.0 / s) / (2.0 * r * r);
}

inline ValueJet jacobs_jet(const AnalyticJacobs& a, double t, double s)
{
    // V(t, s) = F(s k), k = exp(-4 (T - t))
    const double k = std::exp(-4.0 * (a.horizon - t));
    const double x = s * k;
    const double f1 = a.cost.derivative(x);
    return {a.cost(x), 4.0 * s * k * f1, k * f1, k * k * a.cost.second_derivative(x)};
}

inline ValueJet aligned_jet(const AnalyticAligned& a, double s)
{
    if (s < a.threshold)
        return {};
    // V = [gamma(h) - gamma(s)] / 4,
    // V_s = atanh(r) / (8 r) + 1 / (8 s), r = sqrt(1 - s)
    const double r = std::sqrt(1.0 - s);
    const double v = (gamma(a.threshold) - gamma(s)) / 4.0;
    const double v_s = atanh_over_r(r) / 8.0 + 1.0 / (8.0 * s);
    const double v_ss = (aligned_curvature_core(r) - 1.0 / (s * s)) / 8.0;
    return {v, 0.0, v_s, v_ss};
}

inline std::size_t clamp_index(std::size_t i, std::size_t lo, std::size_t hi) { return std::clamp(i, lo, hi); }

inline std::size_t nearest_node(const std::vector<double>& grid, double x)
{
    const auto it = std::lower_bound(grid.begin(), grid.end(), x);
    if (it == grid.begin())
        return 0;
    if (it == grid.end())
        return grid.size() - 1;
    const auto i = static_cast<std::size_t>(it - grid.begin());
    return (x - grid[i - 1] <= grid[i] - x) ? i - 1 : i;
}

// Central differences at the nearest node; one-sided stencils at the ends.
inline ValueJet grid_jet(const ValueGrid& g, double t, double s)
{
    const std::size_t n = g.n_s();
    require(n >= 3, "grid too coarse to evaluate derivatives (need >= 3 entropy nodes)");
    const double ds = g.ds();
    const std::size_t k = g.stationary() ? 0 : nearest_node(g.times, t);
    const std::size_t j = nearest_node(g.entropies, s);

    auto slice_jet = [&](std::size_t slice) {
        const std::size_t c = clamp_index(j, 1, n - 2);
        const double vm = g.at(slice, c - 1), v0 = g.at(slice, c), vp = g.at(slice, c + 1);
        ValueJet jet;
        jet.v = g.at(slice, j);
        jet.v_ss = (vp - 2.0 * v0 + vm) / (ds * ds);
        if (j == c)
            jet.v_s = (vp - vm) / (2.0 * ds);
        else if (j == 0)
            jet.v_s = (-3.0 * g.at(slice, 0) + 4.0 * g.at(slice, 1) - g.at(slice, 2)) / (2.0 * ds);
        else
            jet.v_s = (3.0 * g.at(slice, n - 1) - 4.0 * g.at(slice, n - 2) + g.at(slice, n - 3)) / (2.0 * ds);
        return jet;
    };

    ValueJet jet = slice_jet(k);
    if (!g.stationary() && g.times.size() >= 2) {
        const std::size_t m = g.times.size();
        const std::size_t lo = k == 0 ? 0 : k - 1;
        const std::size_t hi = k + 1 >= m ? m - 1 : k + 1;
        jet.v_t = (g.at(hi, j) - g.at(lo, j)) / (g.times[hi] - g.times[lo]);
    }
    return jet;
}

}  // namespace detail

// Value function candidate V(t, s): analytic, grid-backed or custom, with an
// optional overall scale factor (used to build perturbed candidates).
class ValueFunction
{
public:
    using Kind = std::variant<AnalyticJacobs, AnalyticAligned, GridBacked, CustomValue>;

    static ValueFunction analytic_jacobs(TerminalCost F, double T)
    {
        detail::require(T >= 0.0, "terminal time must be >= 0");
        return ValueFunction{AnalyticJacobs{F, T}};
    }

    static ValueFunction analytic_aligned(double h)
    {
        detail::check_threshold(h);
        return ValueFunction{AnalyticAligned{h}};
    }

    static ValueFunction from_grid(ValueGrid grid)
    {
        return ValueFunction{GridBacked{std::make_shared<const ValueGrid>(std::move(grid))}};
    }

    static ValueFunction custom(std::function<ValueJet(double, double)> jet, std::string label = "custom")
    {
        return ValueFunction{CustomValue{std::move(jet), std::move(label)}};
    }

    // V(t, s) = s (stationary).
    static ValueFunction identity()
    {
        return custom([](double, double s) { return ValueJet{s, 0.0, 1.0, 0.0}; }, "V=s");
    }

    static ValueFunction constant(double c)
    {
        return custom([c](double, double) { return ValueJet{c, 0.0, 0.0, 0.0}; }, "V=const");
    }

    ValueFunction scaled(double factor) const
    {
        ValueFunction out = *this;
        out.scale_ *= factor;
        return out;
    }

    const Kind& kind() const noexcept { return kind_; }
    double scale() const noexcept { return scale_; }
    bool is_analytic() const noexcept { return !std::holds_alternative<GridBacked>(kind_); }

    std::string name() const
    {
        struct Namer
        {
            std::string operator()(const AnalyticJacobs& a) const { return std::string("jacobs/") + a.cost.name(); }
            std::string operator()(const AnalyticAligned&) const { return "aligned"; }
            std::string operator()(const GridBacked&) const { return "grid"; }
            std::string operator()(const CustomValue& c) const { return c.label; }
        };
        return std::visit(Namer{}, kind_);
    }

    ValueJet jet(double t, double s) const
    {
        struct Eval
        {
            double t, s;
            ValueJet operator()(const AnalyticJacobs& a) const { return detail::jacobs_jet(a, t, s); }
            ValueJet operator()(const AnalyticAligned& a) const { return detail::aligned_jet(a, s); }
            ValueJet operator()(const GridBacked& g) const { return detail::grid_jet(*g.grid, t, s); }
            ValueJet operator()(const CustomValue& c) const { return c.jet(t, s); }
        };
        ValueJet j = std::visit(Eval{t, s}, kind_);
        j.v *= scale_;
        j.v_t *= scale_;
        j.v_s *= scale_;
        j.v_ss *= scale_;
        return j;
    }

    double operator()(double t, double s) const { return jet(t, s).v; }

private:
    explicit ValueFunction(Kind k) : kind_(std::move(k)) {}

    Kind kind_;
    double scale_ = 1.0;
};

namespace detail {

inline void check_interior(double s)
{
    if (!(std::isfinite(s) && s >= 0.0 && s <= 1.0))
        throw DomainError("entropy must lie in [0, 1], got " + std::to_string(s));
}

inline double drift_weight(double s, double v2) { return -4.0 * s * (1.0 - (1.0 - s) * v2); }
inline double curvature_weight(double s) { return 8.0 * s * s * (1.0 - s); }

}  // namespace detail

// L^v V = -4 s [1 - (1 - s) v^2] V_s + 8 s^2 (1 - s) v^2 V_ss
inline double generator_apply(const ValueJet& j, double s, ControlValue v)
{
    detail::check_interior(s);
    const double v2 = v.squared();
    return detail::drift_weight(s, v2) * j.v_s + v2 * detail::curvature_weight(s) * j.v_ss;
}

inline double generator_apply(const ValueFunction& V, double t, double s, ControlValue v)
{
    return generator_apply(V.jet(t, s), s, v);
}

// D V = 4 s (1 - s) V_s + 8 s^2 (1 - s) V_ss, the v^2 coefficient of L^v V.
inline double d_operator(const ValueJet& j, double s)
{
    detail::check_interior(s);
    return 4.0 * s * (1.0 - s) * j.v_s + detail::curvature_weight(s) * j.v_ss;
}

inline double d_operator(const ValueFunction& V, double t, double s) { return d_operator(V.jet(t, s), s); }

inline constexpr double kDefaultTieTolerance = 1e-12;

// argmin over v in [0, 1] of L^v V; linear in v^2, so the answer is a bang.
inline ControlValue candidate_policy(const ValueFunction& V, double t, double s,
                                     double tie_tolerance = kDefaultTieTolerance)
{
    const double d = d_operator(V, t, s);
    return ControlValue{d < -tie_tolerance ? 1.0 : 0.0};
}

inline double bellman_residual(const ValueJet& j, double s, ProblemKind mode)
{
    detail::check_interior(s);
    const double transport = -4.0 * s * j.v_s;
    const double bang = std::min(0.0, d_operator(j, s));
    if (mode == ProblemKind::FiniteHorizon)
        return j.v_t + transport + bang;
    return 1.0 + transport + bang;
}

// Signed residual of the Bellman equation at one node.
inline double bellman_residual(const ValueFunction& V, double t, double s, ProblemKind mode)
{
    return bellman_residual(V.jet(t, s), s, mode);
}

// ---------------------------------------------------------------------------
// Verification

struct CriterionResult
{
    std::string name;
    bool pass = true;
    double worst_residual = 0.0;
    double t = 0.0;
    double s = 0.0;
    std::size_t flagged = 0;  // irregular nodes noted but not failed
};

struct VerificationReport
{
    std::vector<CriterionResult> criteria;
    double tolerance = 0.0;

    bool passed() const
    {
        return std::all_of(criteria.begin(), criteria.end(), [](const auto& c) { return c.pass; });
    }

    const CriterionResult& criterion(const std::string& name) const
    {
        for (const auto& c : criteria)
            if (c.name == name)
                return c;
        throw DomainError("no criterion named " + name);
    }

    nlohmann::json to_json() const
    {
        nlohmann::json out;
        out["tolerance"] = tolerance;
        out["pass"] = passed();
        out["criteria"] = nlohmann::json::array();
        for (const auto& c : criteria) {
            out["criteria"].push_back({{"name", c.name},
                                       {"pass", c.pass},
                                       {"worst_residual", c.worst_residual},
                                       {"location", {{"t", c.t}, {"s", c.s}}},
                                       {"flagged", c.flagged}});
        }
        return out;
    }
};

inline constexpr double kInteriorMargin = 1e-6;

struct VerificationGrid
{
    std::size_t n_t = 200;
    std::size_t n_s = 200;
    double margin = kInteriorMargin;
};

namespace detail {

inline std::vector<double> linspace(double lo, double hi, std::size_t n)
{
    require(n >= 2, "grid needs at least two nodes");
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i)
        out[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
    out.back() = hi;
    return out;
}

// Records |r| (equality) or the shortfall below zero (inequality).
struct Tracker
{
    CriterionResult result;
    double tol;

    void equality(double r, double t, double s)
    {
        if (std::abs(r) > std::abs(result.worst_residual) || !std::isfinite(r)) {
            result.worst_residual = r;
            result.t = t;
            result.s = s;
        }
        if (!(std::abs(r) <= tol))
            result.pass = false;
    }

    void inequality(double r, double t, double s)
    {
        if (r < result.worst_residual || !std::isfinite(r)) {
            result.worst_residual = r;
            result.t = t;
            result.s = s;
        }
        if (!(r >= -tol))
            result.pass = false;
    }
};

// Smoothness: closed forms are smooth by construction; grids are checked for
// bounded second divided differences and irregular nodes are only flagged.
inline CriterionResult smoothness(const ValueFunction& V)
{
    CriterionResult c{"smoothness", true, 0.0, 0.0, 0.0, 0};
    const auto* g = std::get_if<GridBacked>(&V.kind());
    if (!g)
        return c;
    const ValueGrid& grid = *g->grid;
    require(grid.n_s() >= 3, "grid too coarse to evaluate derivatives");
    const double ds = grid.ds();
    std::vector<double> second;
    for (std::size_t k = 0; k < grid.n_slices(); ++k)
        for (std::size_t j = 1; j + 1 < grid.n_s(); ++j) {
            const double d2 = (grid.at(k, j + 1) - 2.0 * grid.at(k, j) + grid.at(k, j - 1)) / (ds * ds);
            second.push_back(std::abs(d2));
        }
    if (second.empty())
        return c;
    std::vector<double> sorted = second;
    std::nth_element(sorted.begin(), sorted.begin() + sorted.size() / 2, sorted.end());
    const double bound = 100.0 * std::max(sorted[sorted.size() / 2], 1.0);
    std::size_t idx = 0;
    for (std::size_t k = 0; k < grid.n_slices(); ++k)
        for (std::size_t j = 1; j + 1 < grid.n_s(); ++j, ++idx) {
            if (second[idx] > std::abs(c.worst_residual)) {
                c.worst_residual = second[idx];
                c.t = grid.stationary() ? 0.0 : grid.times[k];
                c.s = grid.entropies[j];
            }
            if (second[idx] > bound)
                ++c.flagged;
        }
    return c;
}

}  // namespace detail

// Checks, on a (t, s) grid over [0, T] x [margin, 1 - margin]:
//   equality   dV/dt + L^{u(t,s)} V = 0
//   inequality dV/dt + L^v V >= 0 for v in {0, 1} (enough: affine in v^2)
//   terminal   V(T, s) = F(s)
inline VerificationReport verify_finite_horizon(const ValueFunction& V, const Strategy& u, TerminalCost F, double T,
                                                const VerificationGrid& grid, double tol)
{
    detail::require(T > 0.0, "terminal time must be > 0");
    detail::require(grid.n_t >= 2 && grid.n_s >= 3, "verification grid too coarse");
    const auto ts = detail::linspace(0.0, T, grid.n_t);
    const auto ss = detail::linspace(grid.margin, 1.0 - grid.margin, grid.n_s);

    detail::Tracker eq{{"generator-equality"}, tol};
    detail::Tracker ineq{{"generator-inequality"}, tol};
    detail::Tracker term{{"terminal-condition"}, tol};

    for (double t : ts)
        for (double s : ss) {
            const ValueJet j = V.jet(t, s);
            eq.equality(j.v_t + generator_apply(j, s, u.evaluate(t, s)), t, s);
            for (double v : {0.0, 1.0})
                ineq.inequality(j.v_t + generator_apply(j, s, ControlValue{v}), t, s);
        }
    for (double s : ss)
        term.equality(V(T, s) - F(s), T, s);

    VerificationReport report;
    report.tolerance = tol;
    report.criteria = {detail::smoothness(V), eq.result, ineq.result, term.result};
    return report;
}

// Stationary analogue on [h, 1 - margin]:
//   equality   L^{u(s)} V + 1 = 0
//   inequality L^v V + 1 >= 0 for v in {0, 1}
//   boundary   V(h) = 0
inline VerificationReport verify_hitting_time(const ValueFunction& V, const Strategy& u, double h,
                                              const VerificationGrid& grid, double tol)
{
    detail::check_threshold(h);
    detail::require(grid.n_s >= 3, "verification grid too coarse");
    const auto ss = detail::linspace(h, 1.0 - grid.margin, grid.n_s);

    detail::Tracker eq{{"generator-equality"}, tol};
    detail::Tracker ineq{{"generator-inequality"}, tol};
    detail::Tracker bnd{{"boundary-condition"}, tol};

    for (double s : ss) {
        const ValueJet j = V.jet(0.0, s);
        eq.equality(generator_apply(j, s, u.evaluate(0.0, s)) + 1.0, 0.0, s);
        for (double v : {0.0, 1.0})
            ineq.inequality(generator_apply(j, s, ControlValue{v}) + 1.0, 0.0, s);
    }
    bnd.equality(V(0.0, h), 0.0, h);

    VerificationReport report;
    report.tolerance = tol;
    report.criteria = {detail::smoothness(V), eq.result, ineq.result, bnd.result};
    return report;
}

}  // namespace qpurify

#endif
