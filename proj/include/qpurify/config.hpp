#ifndef QPURIFY_CONFIG_HPP
#define QPURIFY_CONFIG_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <functional>
#include <istream>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "errors.hpp"

namespace qpurify {

enum class Command { Simulate, Hit, Verify, Solve, Compare, CrossVal, Probe };

inline const std::vector<std::pair<Command, std::string>>& command_names()
{
    static const std::vector<std::pair<Command, std::string>> names = {
        {Command::Simulate, "simulate"}, {Command::Hit, "hit"},           {Command::Verify, "verify"},
        {Command::Solve, "solve"},       {Command::Compare, "compare"},   {Command::CrossVal, "crossval"},
        {Command::Probe, "probe"}};
    return names;
}

inline std::string to_string(Command c)
{
    for (const auto& [cmd, name] : command_names())
        if (cmd == c)
            return name;
    return "?";
}

inline Command command_from_string(const std::string& name)
{
    for (const auto& [cmd, n] : command_names())
        if (n == name)
            return cmd;
    throw DomainError("unknown command '" + name + "' (expected simulate, hit, verify, solve, compare, crossval or probe)");
}

// Resolved run parameters. Every field has a value after parse_config, so
// the echoed config fully determines the run.
struct RunConfig
{
    Command command = Command::Simulate;

    // problem
    double s0 = 0.9;
    double T = 0.5;
    double h = 0.5;
    std::string cost = "linear";
    std::string strategy = "jacobs";
    std::string strategies = "jacobs,aligned";
    std::string problem = "finite";
    std::string goal = "hitting";
    std::string value = "analytic";
    double scale = 1.0;

    // ensemble
    std::size_t n = 1000;
    double dt = 1e-4;
    std::string scheme = "milstein";
    std::string crossing = "bridge";
    double cutoff = 0.0;
    double theta0 = 0.0;
    std::string gains = "10,100,1000";
    std::size_t dump = 0;
    std::size_t bins = 50;

    // grids
    std::size_t n_s = 400;
    std::size_t n_t = 0;
    double tol = 1e-9;
    std::string refine = "";

    // run
    std::uint64_t seed = 0;
    unsigned workers = 1;
    std::string out = "out";
};

namespace detail {

inline std::size_t edit_distance(const std::string& a, const std::string& b)
{
    std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
    for (std::size_t j = 0; j <= b.size(); ++j)
        prev[j] = j;
    for (std::size_t i = 1; i <= a.size(); ++i) {
        cur[0] = i;
        for (std::size_t j = 1; j <= b.size(); ++j)
            cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1)});
        prev.swap(cur);
    }
    return prev[b.size()];
}

inline double parse_double(const std::string& key, const std::string& text)
{
    try {
        std::size_t used = 0;
        const double v = std::stod(text, &used);
        if (used != text.size())
            throw std::invalid_argument(text);
        return v;
    } catch (const std::exception&) {
        throw DomainError("key '" + key + "' expects a number, got '" + text + "'");
    }
}

inline std::uint64_t parse_uint(const std::string& key, const std::string& text)
{
    try {
        std::size_t used = 0;
        if (!text.empty() && text[0] == '-')
            throw std::invalid_argument(text);
        // Accept 1e5-style counts.
        const double d = std::stod(text, &used);
        if (used != text.size() || d < 0 || d != std::floor(d) || d > 1.8e19)
            throw std::invalid_argument(text);
        return static_cast<std::uint64_t>(d);
    } catch (const std::exception&) {
        throw DomainError("key '" + key + "' expects a non-negative integer, got '" + text + "'");
    }
}

inline std::string format_double(double v)
{
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

inline std::string trim(const std::string& s)
{
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos)
        return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

struct KeyDef
{
    std::string name;
    std::function<void(RunConfig&, const std::string&)> set;
    std::function<std::string(const RunConfig&)> get;
};

#define QPURIFY_DOUBLE_KEY(field)                                                                  \
    KeyDef{#field, [](RunConfig& c, const std::string& v) { c.field = parse_double(#field, v); }, \
           [](const RunConfig& c) { return format_double(c.field); }}
#define QPURIFY_UINT_KEY(field, type)                                                                           \
    KeyDef{#field, [](RunConfig& c, const std::string& v) { c.field = static_cast<type>(parse_uint(#field, v)); }, \
           [](const RunConfig& c) { return std::to_string(c.field); }}
#define QPURIFY_STRING_KEY(field)                                                  \
    KeyDef{#field, [](RunConfig& c, const std::string& v) { c.field = v; }, \
           [](const RunConfig& c) { return c.field; }}

inline const std::vector<KeyDef>& key_table()
{
    static const std::vector<KeyDef> keys = {
        KeyDef{"command", [](RunConfig& c, const std::string& v) { c.command = command_from_string(v); },
               [](const RunConfig& c) { return to_string(c.command); }},
        QPURIFY_DOUBLE_KEY(s0),
        QPURIFY_DOUBLE_KEY(T),
        QPURIFY_DOUBLE_KEY(h),
        QPURIFY_STRING_KEY(cost),
        QPURIFY_STRING_KEY(strategy),
        QPURIFY_STRING_KEY(strategies),
        QPURIFY_STRING_KEY(problem),
        QPURIFY_STRING_KEY(goal),
        QPURIFY_STRING_KEY(value),
        QPURIFY_DOUBLE_KEY(scale),
        QPURIFY_UINT_KEY(n, std::size_t),
        QPURIFY_DOUBLE_KEY(dt),
        QPURIFY_STRING_KEY(scheme),
        QPURIFY_STRING_KEY(crossing),
        QPURIFY_DOUBLE_KEY(cutoff),
        QPURIFY_DOUBLE_KEY(theta0),
        QPURIFY_STRING_KEY(gains),
        QPURIFY_UINT_KEY(dump, std::size_t),
        QPURIFY_UINT_KEY(bins, std::size_t),
        QPURIFY_UINT_KEY(n_s, std::size_t),
        QPURIFY_UINT_KEY(n_t, std::size_t),
        QPURIFY_DOUBLE_KEY(tol),
        QPURIFY_STRING_KEY(refine),
        QPURIFY_UINT_KEY(seed, std::uint64_t),
        QPURIFY_UINT_KEY(workers, unsigned),
        QPURIFY_STRING_KEY(out),
    };
    return keys;
}

#undef QPURIFY_DOUBLE_KEY
#undef QPURIFY_UINT_KEY
#undef QPURIFY_STRING_KEY

inline const KeyDef& find_key(const std::string& name)
{
    const auto& keys = key_table();
    for (const auto& k : keys)
        if (k.name == name)
            return k;
    const KeyDef* best = &keys.front();
    std::size_t best_d = std::numeric_limits<std::size_t>::max();
    for (const auto& k : keys) {
        const std::size_t d = edit_distance(name, k.name);
        if (d < best_d) {
            best_d = d;
            best = &k;
        }
    }
    throw DomainError("unknown key '" + name + "'; did you mean '" + best->name + "'?");
}

inline std::vector<double> parse_list(const std::string& key, const std::string& text)
{
    std::vector<double> out;
    std::istringstream is(text);
    std::string cell;
    while (std::getline(is, cell, ','))
        if (!trim(cell).empty())
            out.push_back(parse_double(key, trim(cell)));
    return out;
}

inline std::vector<std::string> split_names(const std::string& text)
{
    std::vector<std::string> out;
    std::istringstream is(text);
    std::string cell;
    while (std::getline(is, cell, ','))
        if (!trim(cell).empty())
            out.push_back(trim(cell));
    return out;
}

}  // namespace detail

// Command-specific defaults, applied before the file and flags.
inline RunConfig defaults_for(Command c)
{
    RunConfig cfg;
    cfg.command = c;
    switch (c) {
    case Command::Simulate:
        cfg.strategy = "jacobs";
        cfg.n = 1000;
        break;
    case Command::Hit:
        cfg.strategy = "aligned";
        cfg.n = 100'000;
        break;
    case Command::Verify:
        cfg.problem = "finite";
        cfg.strategy = "auto";
        cfg.n_s = 200;
        cfg.n_t = 200;
        break;
    case Command::Solve:
        cfg.problem = "finite";
        cfg.n_s = 0;  // resolved per problem in validate_config
        break;
    case Command::Compare:
        cfg.goal = "hitting";
        cfg.n = 100'000;
        break;
    case Command::CrossVal:
        cfg.strategy = "jacobs";
        cfg.n = 1;
        break;
    case Command::Probe:
        cfg.strategy = "jacobs";
        cfg.n = 10'000;
        cfg.theta0 = 0.7853981633974483;
        break;
    }
    return cfg;
}

// Bound checks; messages name the violated bound.
inline void validate_config(RunConfig& c)
{
    using detail::require;
    require(c.s0 >= 0.0 && c.s0 <= 1.0, "s0 must lie in [0, 1], got " + detail::format_double(c.s0));
    require(c.T >= 0.0 && std::isfinite(c.T), "T must be >= 0, got " + detail::format_double(c.T));
    require(c.h > 0.0 && c.h < 1.0, "h must lie in (0, 1), got " + detail::format_double(c.h));
    require(c.dt > 0.0 && std::isfinite(c.dt), "dt must be > 0, got " + detail::format_double(c.dt));
    require(c.n >= 1, "n must be >= 1");
    require(c.workers >= 1, "workers must be >= 1");
    require(c.tol > 0.0, "tol must be > 0");
    require(c.cutoff >= 0.0, "cutoff must be >= 0");
    require(c.bins >= 1, "bins must be >= 1");
    require(std::isfinite(c.scale), "scale must be finite");
    require(c.problem == "finite" || c.problem == "hitting", "problem must be finite or hitting");
    require(c.goal == "cost" || c.goal == "hitting", "goal must be cost or hitting");
    require(c.value == "analytic" || c.value == "zero" || c.value == "grid", "value must be analytic, zero or grid");
    require(c.scheme == "euler" || c.scheme == "milstein", "scheme must be euler or milstein");
    require(c.crossing == "bridge" || c.crossing == "interpolate", "crossing must be bridge or interpolate");
    require(c.cost == "linear" || c.cost == "negsqrt", "cost must be linear or negsqrt");
    require(!c.out.empty(), "out must name a directory");
    if (c.command == Command::Solve && c.n_s == 0)
        c.n_s = c.problem == "finite" ? 400 : 800;
    if (c.command == Command::Verify && c.strategy == "auto")
        c.strategy = c.problem == "finite" ? "jacobs" : "aligned";
    require(c.n_s >= 3, "n_s must be >= 3");
    const auto gains = detail::parse_list("gains", c.gains);
    require(!gains.empty(), "gains must list at least one value");
    for (std::size_t i = 0; i < gains.size(); ++i)
        require(gains[i] >= 0.0 && (i == 0 || gains[i] > gains[i - 1]), "gains must be non-negative and increasing");
    for (double r : detail::parse_list("refine", c.refine))
        require(r >= 3 && r == std::floor(r), "refine entries must be grid sizes >= 3");
    if (c.command == Command::Compare)
        require(detail::split_names(c.strategies).size() >= 2, "compare needs at least two strategies");
}

// key = value lines; '#' starts a comment. Unknown keys are errors.
inline std::map<std::string, std::string> read_key_values(std::istream& is)
{
    std::map<std::string, std::string> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos)
            line.erase(hash);
        line = detail::trim(line);
        if (line.empty())
            continue;
        const auto eq = line.find('=');
        detail::require(eq != std::string::npos, "config line " + std::to_string(lineno) + " is not key = value");
        const std::string key = detail::trim(line.substr(0, eq));
        detail::find_key(key);
        out[key] = detail::trim(line.substr(eq + 1));
    }
    return out;
}

// Parses `<command> [--config FILE] [--key value | --key=value ...]`.
// Flags override the file.
inline RunConfig parse_config(const std::vector<std::string>& args)
{
    detail::require(!args.empty(), "missing command (simulate, hit, verify, solve, compare, crossval, probe)");
    const Command cmd = command_from_string(args[0]);

    std::optional<std::string> config_path;
    std::vector<std::pair<std::string, std::string>> flags;
    for (std::size_t i = 1; i < args.size(); ++i) {
        const std::string& a = args[i];
        detail::require(a.size() > 2 && a.rfind("--", 0) == 0, "expected --key value, got '" + a + "'");
        std::string key = a.substr(2);
        std::string val;
        const auto eq = key.find('=');
        if (eq != std::string::npos) {
            val = key.substr(eq + 1);
            key = key.substr(0, eq);
        } else {
            detail::require(i + 1 < args.size(), "flag --" + key + " needs a value");
            val = args[++i];
        }
        if (key == "config")
            config_path = val;
        else {
            detail::find_key(key);
            flags.emplace_back(key, val);
        }
    }

    RunConfig cfg = defaults_for(cmd);
    if (config_path) {
        std::ifstream in(*config_path);
        detail::require(in.good(), "cannot read config file " + *config_path);
        for (const auto& [k, v] : read_key_values(in)) {
            if (k == "command")
                detail::require(command_from_string(v) == cmd, "config file command differs from command line");
            detail::find_key(k).set(cfg, v);
        }
    }
    for (const auto& [k, v] : flags)
        detail::find_key(k).set(cfg, v);
    validate_config(cfg);
    return cfg;
}

inline RunConfig parse_config_text(Command cmd, const std::string& text)
{
    RunConfig cfg = defaults_for(cmd);
    std::istringstream is(text);
    for (const auto& [k, v] : read_key_values(is))
        detail::find_key(k).set(cfg, v);
    validate_config(cfg);
    return cfg;
}

// Full resolved config as key = value text; parse_config_text inverts it.
inline std::string serialize_config(const RunConfig& cfg)
{
    std::ostringstream os;
    for (const auto& k : detail::key_table())
        os << k.name << " = " << k.get(cfg) << '\n';
    return os.str();
}

inline bool operator==(const RunConfig& a, const RunConfig& b) { return serialize_config(a) == serialize_config(b); }

}  // namespace qpurify

#endif
