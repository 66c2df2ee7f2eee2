// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <thread>
#include <vector>

#include "qpurify/qpurify.hpp"

using namespace qpurify;

namespace {

struct Line
{
    int id;
    bool pass;
    std::string detail;
};

std::string fmt(const char* f, auto... args)
{
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

unsigned workers() { return std::max(1u, std::thread::hardware_concurrency()); }

const double kAlignedMean = aligned_mean_hitting_time(0.9, 0.5);  // 0.1299191027

Line criterion1()
{
    EnsembleConfig c;
    c.n_traj = 1000;
    c.s0 = 0.9;
    c.dt = 1e-4;
    c.scheme = Scheme::EulerMaruyama;
    c.horizon = Horizon::terminal_time(0.5);
    c.workers = workers();
    const auto xs = terminal_costs(Strategy::jacobs(), TerminalCost::linear_entropy(), c);
    double worst = 0.0;
    for (double x : xs)
        worst = std::max(worst, std::abs(x - 0.1218018));
    return {1, worst <= 1e-3, fmt("Jacobs determinism: max |S_T - 0.1218018| = %.3e over %zu paths (bound 1e-3)", worst, xs.size())};
}

Line criterion2()
{
    EnsembleConfig c;
    c.n_traj = 100'000;
    c.dt = 1e-4;
    c.seed = 0;
    c.workers = workers();
    const auto sum = estimate_hitting_time(Strategy::aligned(), 0.9, 0.5, c);
    const bool covers = sum.covers(kAlignedMean);
    const bool narrow = sum.ci95 < 0.01 * sum.estimate;
    return {2, covers && narrow,
            fmt("aligned mean hitting time: %.7f +- %.2e (analytic %.7f, covered %s; half-width %.3f%% of mean, bound 1%%)",
                sum.estimate, sum.ci95, kAlignedMean, covers ? "yes" : "no", 100.0 * sum.ci95 / sum.estimate)};
}

Line criterion3()
{
    EnsembleConfig c;
    c.n_traj = 100'000;
    c.workers = workers();
    const std::vector<Strategy> us{Strategy::aligned(), Strategy::jacobs()};
    const auto hit = compare_strategies(us, Goal::mean_hitting_time(0.5), c);
    const auto& ph = hit.pair("aligned", "jacobs");
    const double z_hit = ph.first == "aligned" ? -ph.z : ph.z;  // jacobs - aligned in standard errors

    EnsembleConfig d = c;
    d.n_traj = 20'000;
    const auto cost = compare_strategies(us, Goal::expected_cost(TerminalCost::linear_entropy(), 0.5), d);
    const auto& pc = cost.pair("aligned", "jacobs");
    const double z_cost = pc.first == "aligned" ? pc.z : -pc.z;  // aligned - jacobs in standard errors

    const bool pass = hit.ranking.front().name == "aligned" && z_hit > 5.0 && cost.ranking.front().name == "jacobs" &&
                      z_cost > 3.0;
    return {3, pass,
            fmt("ordering: tau aligned %.5f < Jacobs %.5f by %.1f SE (need > 5); E S_T Jacobs %.5f < aligned %.5f by %.1f SE (need > 3)",
                hit.ranking.front().summary.estimate, hit.ranking.back().summary.estimate, z_hit,
                cost.ranking.front().summary.estimate, cost.ranking.back().summary.estimate, z_cost)};
}

Line criterion4()
{
    std::vector<double> ratios;
    for (double h : {1e-2, 1e-4, 1e-6})
        ratios.push_back(jacobs_hitting_time(1.0, h) / aligned_mean_hitting_time(1.0, h));
    const bool increasing = ratios[0] < ratios[1] && ratios[1] < ratios[2];
    const bool reaches = ratios[2] >= 1.85;
    return {4, increasing && reaches,
            fmt("asymptotic ratio at h = 1e-2, 1e-4, 1e-6: %.4f, %.4f, %.4f (increasing %s; need >= 1.85 at 1e-6)",
                ratios[0], ratios[1], ratios[2], increasing ? "yes" : "no")};
}

Line criterion5()
{
    const VerificationGrid g{200, 200, kInteriorMargin};
    const double tol = 1e-9;
    const auto lin = ValueFunction::analytic_jacobs(TerminalCost::linear_entropy(), 0.5);
    const auto sq = ValueFunction::analytic_jacobs(TerminalCost::neg_sqrt_purity(), 0.5);
    const auto aligned = ValueFunction::analytic_aligned(0.5);
    const auto a = verify_finite_horizon(lin, Strategy::jacobs(), TerminalCost::linear_entropy(), 0.5, g, tol);
    const auto b = verify_finite_horizon(sq, Strategy::jacobs(), TerminalCost::neg_sqrt_purity(), 0.5, g, tol);
    const auto c = verify_hitting_time(aligned, Strategy::aligned(), 0.5, g, tol);
    const auto pa = verify_finite_horizon(lin.scaled(1.01), Strategy::jacobs(), TerminalCost::linear_entropy(), 0.5, g, tol);
    const auto pb = verify_finite_horizon(sq.scaled(1.01), Strategy::jacobs(), TerminalCost::neg_sqrt_purity(), 0.5, g, tol);
    const auto pc = verify_hitting_time(aligned.scaled(1.01), Strategy::aligned(), 0.5, g, tol);
    auto worst = [](const VerificationReport& r) {
        double w = 0.0;
        for (const auto& c : r.criteria)
            if (c.name != "smoothness")
                w = std::max(w, std::abs(c.worst_residual));
        return w;
    };
    const bool pass = a.passed() && b.passed() && c.passed() && !pa.passed() && !pb.passed() && !pc.passed();
    return {5, pass,
            fmt("verification: Jacobs/x %s (%.1e), Jacobs/-sqrt %s (%.1e), aligned %s (%.1e); x1.01 perturbations rejected %d/3",
                a.passed() ? "pass" : "fail", worst(a), b.passed() ? "pass" : "fail", worst(b),
                c.passed() ? "pass" : "fail", worst(c), int(!pa.passed()) + int(!pb.passed()) + int(!pc.passed()))};
}

Line criterion6()
{
    const ValueGrid fin = solve_finite_horizon(TerminalCost::linear_entropy(), 0.5, 400);
    const double fin_err = analytic_error(fin);
    std::size_t fin_bad = 0;
    for (std::size_t k = 0; k < fin.n_slices(); ++k)
        for (std::size_t j = 1; j + 1 < fin.n_s(); ++j)
            fin_bad += fin.policy_at(k, j) == NodePolicy::One;

    const ValueGrid hit = solve_hitting_time(0.5, 800);
    const double v1 = hit.at(0, hit.n_s() - 1);
    const double hit_err = std::abs(v1 - 0.1558063);
    std::size_t hit_bad = 0;
    for (std::size_t j = 1; j + 1 < hit.n_s(); ++j)
        hit_bad += hit.policy_at(0, j) == NodePolicy::Zero;

    const bool pass = fin_err <= 5e-3 && hit_err <= 2e-3 && fin_bad == 0 && hit_bad == 0;
    return {6, pass,
            fmt("DP: finite-horizon sup error %.2e (<= 5e-3), hitting V(1) = %.7f error %.2e (<= 2e-3); policy mismatches %zu, %zu",
                fin_err, v1, hit_err, fin_bad, hit_bad)};
}

Line criterion7()
{
    EnsembleConfig c;
    c.n_traj = 20;
    c.horizon = Horizon::terminal_time(0.5);
    c.scheme = Scheme::Milstein;
    std::string detail = "coordinate equivalence:";
    bool pass = true;
    for (const auto& u : {Strategy::jacobs(), Strategy::aligned()}) {
        c.dt = 1e-4;
        const double d1 = cross_validate(u, c).max_discrepancy();
        c.dt = 5e-5;
        const double d2 = cross_validate(u, c).max_discrepancy();
        const bool ok = d1 <= 10.0 * 1e-4 && d2 <= 0.5 * d1;
        pass = pass && ok;
        detail += fmt(" %s max %.2e = %.1f dt, ratio on halving %.2f;", u.name().c_str(), d1, d1 / 1e-4, d1 / d2);
    }
    detail += " (need <= 10 dt and ratio >= 2)";
    return {7, pass, detail};
}

Line criterion8()
{
    EnsembleConfig c;
    c.n_traj = 100'000;
    c.horizon = Horizon::terminal_time(0.5);
    c.workers = workers();
    bool pass = true;
    std::string detail = "Dynkin residuals:";
    for (const auto& u : {Strategy::jacobs(), Strategy::aligned()})
        for (const auto& f : {TestFunction::linear(), TestFunction::square()}) {
            const auto r = dynkin_check(f, u, c);
            pass = pass && r.consistent();
            detail += fmt(" %s/%s %.2e (se %.1e)%s;", u.name().c_str(), f.label.c_str(), r.residual.estimate,
                          r.residual.stderr_, r.consistent() ? "" : " X");
        }
    detail += fmt(" allowance 3 se + %.0e", kDynkinBiasConstant * c.dt);
    return {8, pass, detail};
}

Line criterion9()
{
    int covered = 0;
    const int reps = 100;
    for (int r = 0; r < reps; ++r) {
        EnsembleConfig c;
        c.n_traj = 1000;
        c.seed = 1000 + static_cast<std::uint64_t>(r);
        c.workers = workers();
        covered += estimate_hitting_time(Strategy::aligned(), 0.9, 0.5, c).covers(kAlignedMean);
    }
    return {9, covered >= 90, fmt("CI calibration: %d/%d replications cover %.7f (need >= 90)", covered, reps, kAlignedMean)};
}

}  // namespace

int main()
{
    const std::vector<std::function<Line()>> criteria{criterion1, criterion2, criterion3, criterion4, criterion5,
                                                      criterion6, criterion7, criterion8, criterion9};
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const auto t0 = std::chrono::steady_clock::now();
        Line line;
        try {
            line = criteria[i]();
        } catch (const std::exception& e) {
            line = {static_cast<int>(i + 1), false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::printf("criterion %d: %s  %s  [%.1fs]\n", line.id, line.pass ? "PASS" : "FAIL", line.detail.c_str(), secs);
        std::fflush(stdout);
        failed += !line.pass;
    }
    std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
    return failed == 0 ? 0 : 1;
}
