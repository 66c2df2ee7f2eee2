#ifndef QPURIFY_CLI_HPP
#define QPURIFY_CLI_HPP

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <system_error>
#include <vector>

#include <nlohmann/json.hpp>

#include "bellman.hpp"
#include "config.hpp"
#include "dp_solver.hpp"
#include "montecarlo.hpp"
#include "strategies.hpp"

namespace qpurify {

inline constexpr const char* kVersion = "0.1.0";

enum ExitCode : int { kExitOk = 0, kExitDomain = 1, kExitCheckFailed = 2, kExitFilesystem = 3 };

class FilesystemError : public std::runtime_error
{
public:
    explicit FilesystemError(const std::string& what) : std::runtime_error(what) {}
};

namespace detail {

class OutputDir
{
public:
    explicit OutputDir(const std::string& path) : root_(path)
    {
        std::error_code ec;
        std::filesystem::create_directories(root_, ec);
        if (ec || !std::filesystem::is_directory(root_))
            throw FilesystemError("cannot create output directory " + path + (ec ? ": " + ec.message() : ""));
    }

    std::ofstream open(const std::string& name) const
    {
        std::ofstream os(root_ / name);
        if (!os)
            throw FilesystemError("cannot write " + (root_ / name).string());
        return os;
    }

    void write_json(const std::string& name, const nlohmann::json& j) const
    {
        auto os = open(name);
        os << j.dump(2) << '\n';
        if (!os)
            throw FilesystemError("write failed for " + name);
    }

private:
    std::filesystem::path root_;
};

inline EnsembleConfig ensemble_config(const RunConfig& c)
{
    EnsembleConfig e;
    e.n_traj = c.n;
    e.s0 = c.s0;
    e.dt = c.dt;
    e.scheme = scheme_from_string(c.scheme);
    e.seed = c.seed;
    e.horizon = Horizon::terminal_time(c.T);
    e.cutoff = c.cutoff;
    e.crossing = crossing_from_string(c.crossing);
    e.theta0 = c.theta0;
    e.workers = c.workers;
    return e;
}

struct Outcome
{
    nlohmann::json result;
    int code = kExitOk;
};

inline Outcome run_simulate(const RunConfig& c, const OutputDir& out)
{
    const Strategy u = Strategy::from_string(c.strategy);
    const TerminalCost F = TerminalCost::from_string(c.cost);
    const EnsembleConfig e = ensemble_config(c);
    const auto costs = terminal_costs(u, F, e);
    nlohmann::json r{{"strategy", u.name()}, {"cost", F.name()}, {"T", c.T}, {"summary", summarize(costs).to_json()}};
    if (std::holds_alternative<JacobsControl>(u.kind()))
        r["analytic"] = jacobs_expected_cost(c.s0, c.T, F);
    for (std::size_t i = 0; i < c.dump; ++i) {
        auto os = out.open("trajectory_" + std::to_string(i) + ".csv");
        write_trajectory_csv(os, record_trajectory(u, e, i));
    }
    return {r, kExitOk};
}

inline Outcome run_hit(const RunConfig& c, const OutputDir& out)
{
    const Strategy u = Strategy::from_string(c.strategy);
    const HittingSamples hs = hitting_samples(u, c.s0, c.h, ensemble_config(c));
    const EnsembleSummary sum = summarize_hitting(hs);
    nlohmann::json r{{"strategy", u.name()},
                     {"h", c.h},
                     {"summary", sum.to_json()},
                     {"aligned_analytic", aligned_mean_hitting_time(c.s0, c.h)},
                     {"jacobs_analytic", jacobs_hitting_time(c.s0, c.h)}};
    auto os = out.open("hitting_histogram.csv");
    histogram(hs.times, c.bins).write_csv(os);
    return {r, kExitOk};
}

inline Outcome run_verify(const RunConfig& c, const OutputDir&)
{
    const Strategy u = Strategy::from_string(c.strategy);
    const TerminalCost F = TerminalCost::from_string(c.cost);
    const bool finite = c.problem == "finite";
    ValueFunction V = ValueFunction::constant(0.0);
    double tol = c.tol;
    if (c.value == "analytic") {
        V = finite ? ValueFunction::analytic_jacobs(F, c.T) : ValueFunction::analytic_aligned(c.h);
    } else if (c.value == "grid") {
        ValueGrid g = finite ? solve_finite_horizon(F, c.T, c.n_s) : solve_hitting_time(c.h, c.n_s);
        tol = std::max(tol, 10.0 * g.ds() * g.ds());
        V = ValueFunction::from_grid(std::move(g));
    }
    V = V.scaled(c.scale);
    const VerificationGrid grid{std::max<std::size_t>(2, c.n_t), c.n_s, kInteriorMargin};
    const VerificationReport rep =
        finite ? verify_finite_horizon(V, u, F, c.T, grid, tol) : verify_hitting_time(V, u, c.h, grid, tol);
    nlohmann::json r = rep.to_json();
    r["value"] = V.name();
    r["strategy"] = u.name();
    return {r, rep.passed() ? kExitOk : kExitCheckFailed};
}

inline Outcome run_solve(const RunConfig& c, const OutputDir& out)
{
    const bool finite = c.problem == "finite";
    const TerminalCost F = TerminalCost::from_string(c.cost);
    ValueGrid g;
    if (finite) {
        FiniteHorizonOptions opt;
        opt.n_s = c.n_s;
        opt.n_t = c.n_t;
        g = solve_finite_horizon(F, c.T, opt);
    } else {
        g = solve_hitting_time(c.h, c.n_s);
    }
    nlohmann::json meta = grid_metadata(g);
    {
        auto os = out.open("value_grid.csv");
        g.write_csv(os);
    }
    {
        auto os = out.open("policy.csv");
        g.to_policy().write_csv(os);
    }
    const auto sizes = detail::parse_list("refine", c.refine);
    if (sizes.size() >= 2) {
        std::vector<std::size_t> grids;
        for (double x : sizes)
            grids.push_back(static_cast<std::size_t>(x));
        RefinementProblem p{finite ? ProblemKind::FiniteHorizon : ProblemKind::HittingTime, F, c.T, c.h};
        meta["convergence"] = refine_and_extrapolate(p, grids).to_json();
    }
    out.write_json("value_grid.json", meta);
    return {meta, kExitOk};
}

inline Outcome run_compare(const RunConfig& c, const OutputDir&)
{
    std::vector<Strategy> us;
    for (const auto& name : detail::split_names(c.strategies))
        us.push_back(Strategy::from_string(name));
    const Goal goal = c.goal == "cost" ? Goal::expected_cost(TerminalCost::from_string(c.cost), c.T)
                                       : Goal::mean_hitting_time(c.h);
    nlohmann::json r = compare_strategies(us, goal, ensemble_config(c)).to_json();
    r["goal"] = c.goal;
    return {r, kExitOk};
}

inline Outcome run_crossval(const RunConfig& c, const OutputDir&)
{
    const Strategy u = Strategy::from_string(c.strategy);
    nlohmann::json r = cross_validate(u, ensemble_config(c)).to_json();
    r["strategy"] = u.name();
    return {r, kExitOk};
}

inline Outcome run_probe(const RunConfig& c, const OutputDir& out)
{
    const Strategy target = Strategy::from_string(c.strategy);
    EnsembleConfig e = ensemble_config(c);
    if (c.goal == "hitting")
        e.horizon = Horizon::threshold(c.h);
    const ProbeTable table = singular_limit_probe(detail::parse_list("gains", c.gains), target, e);
    auto os = out.open("probe.csv");
    os << "gain,estimate,stderr,distance\n";
    char line[128];
    for (const auto& row : table.rows) {
        std::snprintf(line, sizeof line, "%.17g,%.17g,%.17g,%.17g\n", row.gain, row.summary.estimate,
                      row.summary.stderr_, row.distance);
        os << line;
    }
    nlohmann::json r = table.to_json();
    r["target"] = target.name();
    return {r, kExitOk};
}

}  // namespace detail

// Runs one command and writes config.txt, manifest.json and result.json (plus
// command-specific CSVs) under cfg.out. Returns the process exit code.
inline int execute(const RunConfig& cfg, std::ostream& log = std::cerr)
{
    const auto start = std::chrono::steady_clock::now();
    try {
        const detail::OutputDir out(cfg.out);
        {
            auto os = out.open("config.txt");
            os << serialize_config(cfg);
        }
        detail::Outcome res;
        switch (cfg.command) {
        case Command::Simulate: res = detail::run_simulate(cfg, out); break;
        case Command::Hit: res = detail::run_hit(cfg, out); break;
        case Command::Verify: res = detail::run_verify(cfg, out); break;
        case Command::Solve: res = detail::run_solve(cfg, out); break;
        case Command::Compare: res = detail::run_compare(cfg, out); break;
        case Command::CrossVal: res = detail::run_crossval(cfg, out); break;
        case Command::Probe: res = detail::run_probe(cfg, out); break;
        }
        const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        nlohmann::json config;
        for (const auto& k : detail::key_table())
            config[k.name] = k.get(cfg);
        out.write_json("result.json", res.result);
        out.write_json("manifest.json", {{"version", kVersion},
                                         {"command", to_string(cfg.command)},
                                         {"seed", cfg.seed},
                                         {"workers", cfg.workers},
                                         {"wall_time_seconds", wall},
                                         {"exit_code", res.code},
                                         {"config", config}});
        return res.code;
    } catch (const FilesystemError& e) {
        log << "error: " << e.what() << '\n';
        return kExitFilesystem;
    } catch (const std::filesystem::filesystem_error& e) {
        log << "error: " << e.what() << '\n';
        return kExitFilesystem;
    } catch (const DomainError& e) {
        log << "error: " << e.what() << '\n';
        return kExitDomain;
    } catch (const std::exception& e) {
        log << "error: " << e.what() << '\n';
        return kExitDomain;
    }
}

// Manifest -> config. The "config" block holds every resolved key.
inline RunConfig config_from_manifest(const nlohmann::json& manifest)
{
    detail::require(manifest.contains("config"), "manifest has no config block");
    const auto& block = manifest.at("config");
    const Command cmd = command_from_string(block.at("command").get<std::string>());
    RunConfig cfg = defaults_for(cmd);
    for (const auto& [k, v] : block.items())
        detail::find_key(k).set(cfg, v.get<std::string>());
    validate_config(cfg);
    return cfg;
}

}  // namespace qpurify

#endif
