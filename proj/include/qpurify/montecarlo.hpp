#ifndef QPURIFY_MONTECARLO_HPP
#define QPURIFY_MONTECARLO_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <numbers>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "bellman.hpp"
#include "errors.hpp"
#include "noise.hpp"
#include "sde.hpp"
#include "state.hpp"
#include "strategies.hpp"

namespace qpurify {

// How a threshold crossing is located on a discrete path.
//  Interpolate    - only steps that end below h count; time by linear interpolation.
//  BrownianBridge - additionally, a step whose endpoints both lie above h
//                   counts with the bridge probability exp(-2 (s0-h)(s1-h) / (b^2 dt)).
enum class CrossingRule { Interpolate, BrownianBridge };

inline const char* to_string(CrossingRule r) { return r == CrossingRule::Interpolate ? "interpolate" : "bridge"; }

inline CrossingRule crossing_from_string(const std::string& name)
{
    if (name == "interpolate")
        return CrossingRule::Interpolate;
    if (name == "bridge")
        return CrossingRule::BrownianBridge;
    throw DomainError("unknown crossing rule '" + name + "' (expected interpolate or bridge)");
}

inline constexpr double kMaxCensoredFraction = 1e-3;
inline constexpr double kDefaultCutoffFactor = 20.0;

struct EnsembleConfig
{
    std::size_t n_traj = 100'000;
    double s0 = 0.9;
    double dt = 1e-4;
    Scheme scheme = Scheme::Milstein;
    std::uint64_t seed = 0;
    Horizon horizon = Horizon::terminal_time(0.5);
    double cutoff = 0.0;  // hitting runs; 0 -> kDefaultCutoffFactor x aligned mean
    CrossingRule crossing = CrossingRule::BrownianBridge;
    double theta0 = 0.0;  // initial Bloch angle for finite-omega strategies
    unsigned workers = 1;

    StepConfig step() const { return {dt, scheme, BoundaryPolicy::Clip}; }

    double resolved_cutoff() const
    {
        if (!horizon.is_threshold())
            return 0.0;
        if (cutoff > 0.0)
            return cutoff;
        const double mean = aligned_mean_hitting_time(s0, horizon.value);
        return std::max(kDefaultCutoffFactor * mean, 100.0 * dt);
    }

    void validate() const
    {
        detail::require(n_traj >= 1, "n_traj must be >= 1");
        detail::require(s0 >= 0.0 && s0 <= 1.0, "s0 must lie in [0, 1]");
        detail::require(std::isfinite(dt) && dt > 0.0, "dt must be > 0");
        detail::require(workers >= 1, "workers must be >= 1");
        if (horizon.is_threshold()) {
            detail::check_threshold(horizon.value);
            const double mean = aligned_mean_hitting_time(s0, horizon.value);
            detail::require(resolved_cutoff() > 10.0 * mean,
                            "hitting cutoff must exceed 10x the analytic mean hitting time");
        } else {
            detail::require(horizon.value >= 0.0, "terminal time must be >= 0");
        }
    }
};

struct EnsembleSummary
{
    double estimate = 0.0;
    double stderr_ = 0.0;
    double ci95 = 0.0;  // half-width, 1.96 x standard error
    std::size_t n = 0;
    std::size_t n_effective = 0;  // samples not cut off
    std::size_t censored = 0;

    bool covers(double x) const { return std::abs(estimate - x) <= ci95; }

    nlohmann::json to_json() const
    {
        return {{"estimate", estimate}, {"stderr", stderr_}, {"ci95", ci95},
                {"n", n},               {"n_effective", n_effective}, {"censored", censored}};
    }
};

inline EnsembleSummary summarize(const std::vector<double>& xs, std::size_t censored = 0)
{
    EnsembleSummary out;
    out.n = xs.size();
    out.censored = censored;
    out.n_effective = out.n - censored;
    if (xs.empty())
        return out;
    // Shifted by the first sample: exact for constant samples, less cancellation otherwise.
    const double shift = xs.front();
    double acc = 0.0;
    for (double x : xs)
        acc += x - shift;
    const double mean = shift + acc / static_cast<double>(xs.size());
    double ss = 0.0;
    for (double x : xs)
        ss += (x - mean) * (x - mean);
    const double var = xs.size() > 1 ? ss / static_cast<double>(xs.size() - 1) : 0.0;
    out.estimate = mean;
    out.stderr_ = std::sqrt(var / static_cast<double>(xs.size()));
    out.ci95 = 1.96 * out.stderr_;
    return out;
}

namespace detail {

// Runs fn(i) for i in [0, n) on contiguous blocks; results land by index so the
// output does not depend on the worker count.
template <typename T, typename Fn>
std::vector<T> parallel_map(std::size_t n, unsigned workers, Fn fn)
{
    std::vector<T> out(n);
    const std::size_t w = std::max<std::size_t>(1, std::min<std::size_t>(workers, n));
    if (w == 1) {
        for (std::size_t i = 0; i < n; ++i)
            out[i] = fn(i);
        return out;
    }
    std::vector<std::thread> pool;
    pool.reserve(w);
    for (std::size_t k = 0; k < w; ++k) {
        const std::size_t lo = n * k / w;
        const std::size_t hi = n * (k + 1) / w;
        pool.emplace_back([&out, &fn, lo, hi] {
            for (std::size_t i = lo; i < hi; ++i)
                out[i] = fn(i);
        });
    }
    for (auto& t : pool)
        t.join();
    return out;
}

// Exact rotation of the Bloch vector by omega * dt about y.
inline BlochState rotate_by(const BlochState& b, double angle)
{
    return rotate_to_angle(b, b.theta() + angle);
}

// Local diffusion coefficient of S for a Bloch state.
inline double entropy_diffusion(const BlochState& b)
{
    const double r2 = b.x * b.x + b.z * b.z;
    const double s = std::clamp(1.0 - r2, 0.0, 1.0);
    return -4.0 * s * b.z;  // -4 S sqrt(1 - S) cos(theta)
}

}  // namespace detail

// One controlled path of the purity diffusion, advanced step by step.
// Finite-omega strategies run on the Bloch vector (exact rotation by
// omega * dt, then a measurement step); the rest use the S equation directly.
class PurityPath
{
public:
    PurityPath(const Strategy& u, double s0, double theta0, const StepConfig& cfg)
        : u_(u), cfg_(cfg), s_(s0), bloch_(to_bloch(PurityState{s0, 0.0}, theta0))
    {
        cfg.validate();
        detail::check_s(s0);
    }

    double t() const noexcept { return t_; }
    double s() const noexcept { return s_; }
    double control() const noexcept { return v_; }
    double diffusion() const noexcept { return b_; }

    // Control and diffusion that the next step will use.
    void prepare()
    {
        if (u_.is_finite_omega()) {
            bloch_ = detail::rotate_by(bloch_, u_.omega(bloch_.theta()) * cfg_.dt);
            const double r = std::hypot(bloch_.x, bloch_.z);
            v_ = r > 0.0 ? std::clamp(bloch_.z / r, -1.0, 1.0) : 1.0;
            b_ = detail::entropy_diffusion(bloch_);
        } else {
            const ControlValue v = u_.evaluate(t_, s_);
            v_ = v.value();
            b_ = diffusion_s(s_, v);
        }
    }

    void advance(double dW, double h)
    {
        StepConfig c = cfg_;
        c.dt = h;
        if (u_.is_finite_omega()) {
            bloch_ = step_bloch(bloch_, 0.0, dW, c);
            s_ = to_purity(bloch_).s;
        } else {
            s_ = step_s(PurityState{s_, t_}, ControlValue{v_}, dW, c).s;
        }
        t_ += h;
    }

private:
    const Strategy& u_;
    StepConfig cfg_;
    double t_ = 0.0;
    double s_;
    double v_ = 0.0;
    double b_ = 0.0;
    BlochState bloch_;
};

namespace detail {

// Number of steps to reach T with the last step shortened if needed.
inline std::size_t step_count(double T, double dt)
{
    const double q = T / dt;
    const double r = std::round(q);
    if (std::abs(q - r) <= 1e-9 * std::max(1.0, q))
        return static_cast<std::size_t>(r);
    return static_cast<std::size_t>(std::ceil(q));
}

}  // namespace detail

inline double simulate_terminal(const Strategy& u, double s0, double T, const StepConfig& cfg, NoiseStream& noise,
                                double theta0 = 0.0)
{
    PurityPath path(u, s0, theta0, cfg);
    const std::size_t n = detail::step_count(T, cfg.dt);
    for (std::size_t k = 0; k < n; ++k) {
        const double h = (k + 1 == n) ? T - static_cast<double>(k) * cfg.dt : cfg.dt;
        if (h <= 0.0)
            break;
        path.prepare();
        path.advance(noise.increment(h), h);
    }
    return path.s();
}

struct HittingOutcome
{
    double time = 0.0;
    bool censored = false;
};

inline HittingOutcome simulate_hitting(const Strategy& u, double s0, double h, double cutoff, const StepConfig& cfg,
                                       NoiseStream& noise, CrossingRule rule = CrossingRule::BrownianBridge,
                                       double theta0 = 0.0)
{
    detail::check_threshold(h);
    if (s0 <= h)
        return {0.0, false};
    PurityPath path(u, s0, theta0, cfg);
    const double dt = cfg.dt;
    while (path.t() < cutoff) {
        path.prepare();
        const double s = path.s();
        const double b = path.diffusion();
        const double t = path.t();
        path.advance(noise.increment(dt), dt);
        const double next = path.s();
        if (next <= h)
            return {t + dt * (s - h) / (s - next), false};
        if (rule == CrossingRule::BrownianBridge && b != 0.0) {
            const double p = std::exp(-2.0 * (s - h) * (next - h) / (b * b * dt));
            if (noise.uniform() < p)
                return {t + 0.5 * dt, false};
        }
    }
    return {cutoff, true};
}

// Full path for CSV dumps. For a threshold horizon, recording stops at the crossing.
inline TrajectoryRecord record_trajectory(const Strategy& u, const EnsembleConfig& cfg, std::size_t index)
{
    cfg.validate();
    NoiseStream noise(cfg.seed, index);
    const StepConfig step = cfg.step();
    PurityPath path(u, cfg.s0, cfg.theta0, step);
    TrajectoryRecord rec;
    const bool threshold = cfg.horizon.is_threshold();
    const double h = cfg.horizon.value;
    const double end = threshold ? cfg.resolved_cutoff() : cfg.horizon.value;
    const std::size_t n = detail::step_count(end, step.dt);
    if (threshold && cfg.s0 <= h)
        rec.hitting_time = 0.0;
    for (std::size_t k = 0; k < n && !rec.hitting_time; ++k) {
        const double dt = (k + 1 == n) ? end - static_cast<double>(k) * step.dt : step.dt;
        if (dt <= 0.0)
            break;
        path.prepare();
        const double s = path.s();
        const double v = path.control();
        const double dW = noise.increment(dt);
        const double z = std::sqrt(1.0 - s) * v;
        rec.samples.push_back({path.t(), s, v, dW, measurement_increment(z, dW, dt)});
        const double t = path.t();
        path.advance(dW, dt);
        if (threshold && path.s() <= h)
            rec.hitting_time = t + dt * (s - h) / (s - path.s());
    }
    rec.terminal = {path.s(), path.t()};
    return rec;
}

// ---------------------------------------------------------------------------
// Ensembles

inline std::vector<double> terminal_costs(const Strategy& u, TerminalCost F, const EnsembleConfig& cfg)
{
    cfg.validate();
    detail::require(!cfg.horizon.is_threshold(), "run_ensemble needs a terminal-time horizon");
    const double T = cfg.horizon.value;
    const StepConfig step = cfg.step();
    return detail::parallel_map<double>(cfg.n_traj, cfg.workers, [&](std::size_t i) {
        if (T == 0.0)
            return F(cfg.s0);
        NoiseStream noise(cfg.seed, i);
        return F(simulate_terminal(u, cfg.s0, T, step, noise, cfg.theta0));
    });
}

// Sample mean of F(S_T) over independent trajectories.
inline EnsembleSummary run_ensemble(const Strategy& u, TerminalCost F, const EnsembleConfig& cfg)
{
    return summarize(terminal_costs(u, F, cfg));
}

struct HittingSamples
{
    std::vector<double> times;
    std::size_t censored = 0;
};

inline HittingSamples hitting_samples(const Strategy& u, double s0, double h, const EnsembleConfig& cfg)
{
    EnsembleConfig c = cfg;
    c.s0 = s0;
    c.horizon = Horizon::threshold(h);
    c.validate();
    const double cutoff = c.resolved_cutoff();
    const StepConfig step = c.step();
    const auto outcomes = detail::parallel_map<HittingOutcome>(c.n_traj, c.workers, [&](std::size_t i) {
        NoiseStream noise(c.seed, i);
        return simulate_hitting(u, s0, h, cutoff, step, noise, c.crossing, c.theta0);
    });
    HittingSamples out;
    out.times.reserve(outcomes.size());
    for (const auto& o : outcomes) {
        out.times.push_back(o.time);
        out.censored += o.censored;
    }
    return out;
}

inline EnsembleSummary summarize_hitting(const HittingSamples& hs)
{
    const double frac = static_cast<double>(hs.censored) / static_cast<double>(std::max<std::size_t>(1, hs.times.size()));
    if (frac > kMaxCensoredFraction)
        throw CensoringError("censored fraction " + std::to_string(frac) + " exceeds " +
                             std::to_string(kMaxCensoredFraction) + "; raise the cutoff");
    return summarize(hs.times, hs.censored);
}

// Mean first time S drops to h. Censored paths enter the mean at the cutoff.
inline EnsembleSummary estimate_hitting_time(const Strategy& u, double s0, double h, const EnsembleConfig& cfg)
{
    return summarize_hitting(hitting_samples(u, s0, h, cfg));
}

struct Histogram
{
    std::vector<double> edges;
    std::vector<std::size_t> counts;

    void write_csv(std::ostream& os) const
    {
        os << "bin_lo,bin_hi,count\n";
        char line[96];
        for (std::size_t i = 0; i < counts.size(); ++i) {
            std::snprintf(line, sizeof line, "%.17g,%.17g,%zu\n", edges[i], edges[i + 1], counts[i]);
            os << line;
        }
    }
};

inline Histogram histogram(const std::vector<double>& xs, std::size_t bins)
{
    detail::require(bins >= 1, "histogram needs at least one bin");
    Histogram h;
    double lo = 0.0;
    double hi = 1.0;
    if (!xs.empty()) {
        lo = *std::min_element(xs.begin(), xs.end());
        hi = *std::max_element(xs.begin(), xs.end());
    }
    if (hi <= lo)
        hi = lo + 1.0;
    h.edges.resize(bins + 1);
    for (std::size_t i = 0; i <= bins; ++i)
        h.edges[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(bins);
    h.counts.assign(bins, 0);
    for (double x : xs) {
        auto i = static_cast<std::size_t>((x - lo) / (hi - lo) * static_cast<double>(bins));
        ++h.counts[std::min(i, bins - 1)];
    }
    return h;
}

// ---------------------------------------------------------------------------
// Dynkin's formula

// Test function f(t, s) with the derivatives the generator needs.
struct TestFunction
{
    std::function<ValueJet(double, double)> jet;
    std::string label;

    static TestFunction linear()
    {
        return {[](double, double s) { return ValueJet{s, 0.0, 1.0, 0.0}; }, "s"};
    }
    static TestFunction square()
    {
        return {[](double, double s) { return ValueJet{s * s, 0.0, 2.0 * s, 2.0}; }, "s^2"};
    }
    static TestFunction constant(double c)
    {
        return {[c](double, double) { return ValueJet{c, 0.0, 0.0, 0.0}; }, "const"};
    }
};

struct DynkinResult
{
    EnsembleSummary residual;  // E f(T, S_T) - f(0, s) - E int (f_t + L^u f) dt
    double lhs = 0.0;          // E f(T, S_T) - f(0, s)
    double rhs = 0.0;          // E int (f_t + L^u f) dt
    double bias_bound = 0.0;
    double sigmas = 3.0;

    bool consistent() const
    {
        return std::abs(residual.estimate) <= sigmas * residual.stderr_ + bias_bound;
    }

    nlohmann::json to_json() const
    {
        return {{"residual", residual.to_json()}, {"lhs", lhs}, {"rhs", rhs},
                {"bias_bound", bias_bound},       {"consistent", consistent()}};
    }
};

// Default allowance for the O(dt) discretisation bias of the residual.
inline constexpr double kDynkinBiasConstant = 4.0;

// Both sides from the same trajectories; the integral is a left-point sum.
inline DynkinResult dynkin_check(const TestFunction& f, const Strategy& u, const EnsembleConfig& cfg,
                                 double bias_constant = kDynkinBiasConstant)
{
    cfg.validate();
    detail::require(!cfg.horizon.is_threshold(), "dynkin_check needs a terminal-time horizon");
    const double T = cfg.horizon.value;
    const StepConfig step = cfg.step();
    const std::size_t n_steps = detail::step_count(T, step.dt);
    const double f0 = f.jet(0.0, cfg.s0).v;

    struct Sides
    {
        double lhs = 0.0;
        double rhs = 0.0;
    };
    const auto sides = detail::parallel_map<Sides>(cfg.n_traj, cfg.workers, [&](std::size_t i) {
        NoiseStream noise(cfg.seed, i);
        PurityPath path(u, cfg.s0, cfg.theta0, step);
        double integral = 0.0;
        for (std::size_t k = 0; k < n_steps; ++k) {
            const double h = (k + 1 == n_steps) ? T - static_cast<double>(k) * step.dt : step.dt;
            if (h <= 0.0)
                break;
            path.prepare();
            const double s = path.s();
            const ValueJet j = f.jet(path.t(), s);
            integral += (j.v_t + generator_apply(j, s, ControlValue{path.control()})) * h;
            path.advance(noise.increment(h), h);
        }
        return Sides{f.jet(T, path.s()).v - f0, integral};
    });

    std::vector<double> resid(sides.size());
    DynkinResult out;
    for (std::size_t i = 0; i < sides.size(); ++i) {
        resid[i] = sides[i].lhs - sides[i].rhs;
        out.lhs += sides[i].lhs;
        out.rhs += sides[i].rhs;
    }
    out.lhs /= static_cast<double>(sides.size());
    out.rhs /= static_cast<double>(sides.size());
    out.residual = summarize(resid);
    out.bias_bound = bias_constant * step.dt;
    return out;
}

// ---------------------------------------------------------------------------
// Strategy comparison

struct Goal
{
    enum class Kind { ExpectedCost, MeanHittingTime };

    Kind kind = Kind::ExpectedCost;
    TerminalCost cost{};
    double horizon = 0.5;
    double threshold = 0.5;

    static Goal expected_cost(TerminalCost F, double T) { return {Kind::ExpectedCost, F, T, 0.5}; }
    static Goal mean_hitting_time(double h) { return {Kind::MeanHittingTime, TerminalCost{}, 0.5, h}; }
};

struct PairwiseComparison
{
    std::string first;
    std::string second;
    double difference = 0.0;  // mean(first) - mean(second), paired on trajectory index
    double stderr_ = 0.0;
    double z = 0.0;
    bool significant = false;  // 95% interval on the difference excludes 0
};

struct RankedEntry
{
    std::string name;
    EnsembleSummary summary;
};

struct ComparisonReport
{
    std::vector<RankedEntry> ranking;  // best (lowest cost) first
    std::vector<PairwiseComparison> pairs;

    const PairwiseComparison& pair(const std::string& a, const std::string& b) const
    {
        for (const auto& p : pairs)
            if ((p.first == a && p.second == b) || (p.first == b && p.second == a))
                return p;
        throw DomainError("no comparison between " + a + " and " + b);
    }

    nlohmann::json to_json() const
    {
        nlohmann::json out;
        for (const auto& r : ranking)
            out["ranking"].push_back({{"name", r.name}, {"summary", r.summary.to_json()}});
        out["pairs"] = nlohmann::json::array();
        for (const auto& p : pairs)
            out["pairs"].push_back({{"first", p.first},
                                    {"second", p.second},
                                    {"difference", p.difference},
                                    {"stderr", p.stderr_},
                                    {"z", p.z},
                                    {"significant", p.significant}});
        return out;
    }
};

// Every strategy sees the same noise per trajectory index; pairwise
// differences are taken per index.
inline ComparisonReport compare_strategies(const std::vector<Strategy>& strategies, const Goal& goal,
                                           const EnsembleConfig& cfg)
{
    detail::require(strategies.size() >= 2, "comparison needs at least two strategies");
    std::vector<std::vector<double>> samples;
    std::vector<EnsembleSummary> summaries;
    for (const auto& u : strategies) {
        if (goal.kind == Goal::Kind::ExpectedCost) {
            EnsembleConfig c = cfg;
            c.horizon = Horizon::terminal_time(goal.horizon);
            samples.push_back(terminal_costs(u, goal.cost, c));
            summaries.push_back(summarize(samples.back()));
        } else {
            HittingSamples hs = hitting_samples(u, cfg.s0, goal.threshold, cfg);
            summaries.push_back(summarize_hitting(hs));
            samples.push_back(std::move(hs.times));
        }
    }

    ComparisonReport report;
    std::vector<std::size_t> order(strategies.size());
    for (std::size_t i = 0; i < order.size(); ++i)
        order[i] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return summaries[a].estimate < summaries[b].estimate; });
    for (std::size_t i : order)
        report.ranking.push_back({strategies[i].name(), summaries[i]});

    for (std::size_t a = 0; a < strategies.size(); ++a)
        for (std::size_t b = a + 1; b < strategies.size(); ++b) {
            std::vector<double> diff(samples[a].size());
            for (std::size_t k = 0; k < diff.size(); ++k)
                diff[k] = samples[a][k] - samples[b][k];
            const EnsembleSummary d = summarize(diff);
            PairwiseComparison p{strategies[a].name(), strategies[b].name(), d.estimate, d.stderr_, 0.0, false};
            if (d.stderr_ > 0.0) {
                p.z = d.estimate / d.stderr_;
                p.significant = std::abs(d.estimate) > d.ci95;
            } else {
                p.significant = d.estimate != 0.0;
                p.z = d.estimate == 0.0 ? 0.0 : std::copysign(INFINITY, d.estimate);
            }
            report.pairs.push_back(p);
        }
    return report;
}

// ---------------------------------------------------------------------------
// Coordinate cross-validation

struct CrossValidationReport
{
    double dt = 0.0;
    std::size_t steps = 0;
    std::size_t paths = 0;
    double rho_vs_bloch = 0.0;
    double bloch_vs_s = 0.0;
    double rho_vs_s = 0.0;
    std::size_t positivity_repairs = 0;

    double max_discrepancy() const { return std::max({rho_vs_bloch, bloch_vs_s, rho_vs_s}); }

    nlohmann::json to_json() const
    {
        return {{"dt", dt},
                {"steps", steps},
                {"paths", paths},
                {"rho_vs_bloch", rho_vs_bloch},
                {"bloch_vs_s", bloch_vs_s},
                {"rho_vs_s", rho_vs_s},
                {"max_discrepancy", max_discrepancy()},
                {"positivity_repairs", positivity_repairs}};
    }
};

// Integrates the density-matrix, Bloch and S forms on one shared noise stream.
// Before every step the rho and Bloch states are rotated to the strategy's
// target angle; the S form uses u = cos(target).
inline CrossValidationReport cross_validate(const Strategy& u, const EnsembleConfig& cfg)
{
    cfg.validate();
    detail::require(!cfg.horizon.is_threshold(), "cross_validate needs a terminal-time horizon");
    const double T = cfg.horizon.value;
    const StepConfig step = cfg.step();
    const std::size_t n = detail::step_count(T, step.dt);

    CrossValidationReport rep;
    rep.dt = step.dt;
    rep.steps = n;
    rep.paths = cfg.n_traj;
    RepairStats stats;
    for (std::size_t i = 0; i < cfg.n_traj; ++i) {
        NoiseStream noise(cfg.seed, i);
        const double theta = u.target_angle(0.0, cfg.s0);
        BlochState bloch = to_bloch(PurityState{cfg.s0, 0.0}, theta);
        DensityMatrix rho = to_density(bloch);
        PurityState ps{cfg.s0, 0.0};
        for (std::size_t k = 0; k < n; ++k) {
            const double h = (k + 1 == n) ? T - static_cast<double>(k) * step.dt : step.dt;
            if (h <= 0.0)
                break;
            StepConfig c = step;
            c.dt = h;
            const double target = u.target_angle(ps.t, ps.s);
            bloch = rotate_to_angle(bloch, target);
            rho = to_density(rotate_to_angle(rho.to_bloch(), target));
            const double dW = noise.increment(h);
            bloch = step_bloch(bloch, 0.0, dW, c);
            rho = step_rho(rho, 0.0, dW, c, &stats);
            ps = step_s(ps, ControlValue{std::clamp(std::cos(target), -1.0, 1.0)}, dW, c);

            const double s_b = to_purity(bloch).s;
            const double s_r = to_purity(rho).s;
            rep.rho_vs_bloch = std::max(rep.rho_vs_bloch, std::abs(s_r - s_b));
            rep.bloch_vs_s = std::max(rep.bloch_vs_s, std::abs(s_b - ps.s));
            rep.rho_vs_s = std::max(rep.rho_vs_s, std::abs(s_r - ps.s));
        }
    }
    rep.positivity_repairs = stats.positivity_repairs;
    return rep;
}

// ---------------------------------------------------------------------------
// Singular-limit probe

struct ProbeRow
{
    double gain = 0.0;
    EnsembleSummary summary;
    double distance = 0.0;  // |estimate - singular-limit value|
};

struct ProbeTable
{
    double limit = 0.0;
    std::vector<ProbeRow> rows;

    // Each distance no larger than the previous one plus two combined standard errors.
    bool monotone() const
    {
        for (std::size_t i = 1; i < rows.size(); ++i) {
            const double se = std::hypot(rows[i].summary.stderr_, rows[i - 1].summary.stderr_);
            if (rows[i].distance > rows[i - 1].distance + 2.0 * se)
                return false;
        }
        return true;
    }

    nlohmann::json to_json() const
    {
        nlohmann::json out;
        out["limit"] = limit;
        out["monotone"] = monotone();
        out["rows"] = nlohmann::json::array();
        for (const auto& r : rows)
            out["rows"].push_back({{"gain", r.gain}, {"summary", r.summary.to_json()}, {"distance", r.distance}});
        return out;
    }
};

// Finite-omega strategies Omega = gain (theta_target - theta) approaching the
// direct control of `target` (Jacobs or aligned). A terminal-time
// horizon compares E S_T with s0 e^{-4T}; a threshold compares E tau with the
// gamma formula.
inline ProbeTable singular_limit_probe(const std::vector<double>& gains, const Strategy& target,
                                       const EnsembleConfig& cfg)
{
    detail::require(!gains.empty(), "probe needs at least one gain");
    for (std::size_t i = 1; i < gains.size(); ++i)
        detail::require(gains[i] > gains[i - 1], "probe gains must be increasing");
    const double theta_target = target.target_angle(0.0, cfg.s0);

    ProbeTable table;
    const bool hitting = cfg.horizon.is_threshold();
    if (hitting)
        table.limit = theta_target < std::numbers::pi / 4 ? aligned_mean_hitting_time(cfg.s0, cfg.horizon.value)
                                                          : jacobs_hitting_time(cfg.s0, cfg.horizon.value);
    else
        table.limit = jacobs_entropy(cfg.s0, cfg.horizon.value);
    if (!hitting && theta_target < std::numbers::pi / 4) {
        // The aligned terminal-time statistic has no closed form; use the direct-u ensemble.
        table.limit = run_ensemble(Strategy::aligned(), TerminalCost::linear_entropy(), cfg).estimate;
    }

    for (double g : gains) {
        const Strategy u = Strategy::finite_omega(g, theta_target);
        EnsembleSummary sum = hitting ? estimate_hitting_time(u, cfg.s0, cfg.horizon.value, cfg)
                                      : run_ensemble(u, TerminalCost::linear_entropy(), cfg);
        table.rows.push_back({g, sum, std::abs(sum.estimate - table.limit)});
    }
    return table;
}

}  // namespace qpurify

#endif
