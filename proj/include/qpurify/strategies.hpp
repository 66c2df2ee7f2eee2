#ifndef QPURIFY_STRATEGIES_HPP
#define QPURIFY_STRATEGIES_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <istream>
#include <memory>
#include <numbers>
#include <ostream>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "errors.hpp"
#include "state.hpp"

namespace qpurify {

// ---------------------------------------------------------------------------
// Terminal costs F(S_T)

enum class TerminalCostKind { LinearEntropy, NegSqrtPurity };

class TerminalCost
{
public:
    constexpr explicit TerminalCost(TerminalCostKind kind = TerminalCostKind::LinearEntropy) : kind_(kind) {}

    static constexpr TerminalCost linear_entropy() { return TerminalCost{TerminalCostKind::LinearEntropy}; }
    static constexpr TerminalCost neg_sqrt_purity() { return TerminalCost{TerminalCostKind::NegSqrtPurity}; }

    static TerminalCost from_string(const std::string& name)
    {
        if (name == "linear" || name == "x" || name == "LinearEntropy")
            return linear_entropy();
        if (name == "negsqrt" || name == "-sqrt(1-x)" || name == "NegSqrtPurity")
            return neg_sqrt_purity();
        throw DomainError("unknown terminal cost '" + name + "' (expected linear or negsqrt)");
    }

    constexpr TerminalCostKind kind() const noexcept { return kind_; }

    const char* name() const noexcept
    {
        return kind_ == TerminalCostKind::LinearEntropy ? "linear" : "negsqrt";
    }

    // F(x) = x  or  F(x) = -sqrt(1 - x)
    double operator()(double x) const
    {
        return kind_ == TerminalCostKind::LinearEntropy ? x : -std::sqrt(std::max(0.0, 1.0 - x));
    }

    double derivative(double x) const
    {
        return kind_ == TerminalCostKind::LinearEntropy ? 1.0 : 0.5 / std::sqrt(1.0 - x);
    }

    double second_derivative(double x) const
    {
        if (kind_ == TerminalCostKind::LinearEntropy)
            return 0.0;
        const double r = std::sqrt(1.0 - x);
        return 0.25 / (r * r * r);
    }

    friend constexpr bool operator==(TerminalCost, TerminalCost) = default;

private:
    TerminalCostKind kind_;
};

// Either a fixed terminal time T > 0 or an entropy threshold h in (0, 1).
struct Horizon
{
    enum class Kind { TerminalTime, Threshold };

    Kind kind = Kind::TerminalTime;
    double value = 1.0;

    static Horizon terminal_time(double T)
    {
        detail::require(std::isfinite(T) && T > 0.0, "terminal time T must be > 0");
        return {Kind::TerminalTime, T};
    }

    static Horizon threshold(double h)
    {
        if (!(h > 0.0 && h < 1.0))
            throw DomainError("threshold h must lie in (0, 1), got " + std::to_string(h));
        return {Kind::Threshold, h};
    }

    bool is_threshold() const noexcept { return kind == Kind::Threshold; }
};

// ---------------------------------------------------------------------------
// Closed-form predictions

// gamma(x) = sqrt(1 - x) atanh(sqrt(1 - x)), written as
// r (log1p(r) - log(x) / 2) with r = sqrt(1 - x) so nothing cancels as x -> 0.
inline double gamma(double x)
{
    detail::require(x != 0.0, "gamma diverges at x = 0");
    if (!(x > 0.0 && x <= 1.0))
        throw DomainError("gamma requires x in (0, 1], got " + std::to_string(x));
    const double r = std::sqrt(1.0 - x);
    return r * (std::log1p(r) - 0.5 * std::log(x));
}

inline double jacobs_entropy(double s0, double t)
{
    detail::require(s0 >= 0.0 && s0 <= 1.0, "s0 must lie in [0, 1]");
    detail::require(t >= 0.0, "t must be >= 0");
    return s0 * std::exp(-4.0 * t);
}

inline double jacobs_expected_cost(double s0, double T, TerminalCost F)
{
    return F(jacobs_entropy(s0, T));
}

namespace detail {

inline void check_threshold(double h)
{
    if (!(h > 0.0 && h < 1.0))
        throw DomainError("threshold h must lie in (0, 1), got " + std::to_string(h));
}

}  // namespace detail

inline double aligned_mean_hitting_time(double s0, double h)
{
    detail::check_threshold(h);
    detail::require(s0 >= 0.0 && s0 <= 1.0, "s0 must lie in [0, 1]");
    if (s0 <= h)
        return 0.0;
    return (gamma(h) - gamma(s0)) / 4.0;
}

// Deterministic crossing time of s0 e^{-4t} through h.
inline double jacobs_hitting_time(double s0, double h)
{
    detail::check_threshold(h);
    detail::require(s0 >= 0.0 && s0 <= 1.0, "s0 must lie in [0, 1]");
    if (s0 <= h)
        return 0.0;
    return 0.25 * std::log(s0 / h);
}

// ---------------------------------------------------------------------------
// Tabulated policies

// Control values on a (time x entropy) grid. Rows are time nodes, columns
// entropy nodes; lookup picks the nearest node. A single row is stationary.
class TabulatedPolicy
{
public:
    TabulatedPolicy(std::vector<double> times, std::vector<double> entropies, std::vector<double> values)
        : times_(std::move(times)), entropies_(std::move(entropies)), values_(std::move(values))
    {
        detail::require(!times_.empty() && !entropies_.empty(), "policy grid must be non-empty");
        detail::require(values_.size() == times_.size() * entropies_.size(),
                        "policy value count does not match grid size");
        detail::require(std::is_sorted(times_.begin(), times_.end()) &&
                            std::is_sorted(entropies_.begin(), entropies_.end()),
                        "policy grids must be increasing");
        for (double v : values_)
            detail::require(std::isfinite(v) && std::abs(v) <= 1.0, "policy values must lie in [-1, 1]");
    }

    const std::vector<double>& times() const noexcept { return times_; }
    const std::vector<double>& entropies() const noexcept { return entropies_; }
    const std::vector<double>& values() const noexcept { return values_; }

    double at(double t, double s) const
    {
        const std::size_t i = nearest(times_, t);
        const std::size_t j = nearest(entropies_, s);
        return values_[i * entropies_.size() + j];
    }

    // CSV: header "t\s,<s_0>,<s_1>,...", then one row "<t_i>,<v_i0>,<v_i1>,..." per time node.
    static TabulatedPolicy read_csv(std::istream& is)
    {
        std::string line;
        detail::require(static_cast<bool>(std::getline(is, line)), "policy CSV is empty");
        std::vector<double> entropies;
        {
            std::istringstream hs(line);
            std::string cell;
            std::getline(hs, cell, ',');
            while (std::getline(hs, cell, ','))
                entropies.push_back(parse(cell));
        }
        std::vector<double> times;
        std::vector<double> values;
        while (std::getline(is, line)) {
            if (line.empty() || line == "\r")
                continue;
            std::istringstream rs(line);
            std::string cell;
            std::getline(rs, cell, ',');
            times.push_back(parse(cell));
            std::size_t count = 0;
            while (std::getline(rs, cell, ',')) {
                values.push_back(parse(cell));
                ++count;
            }
            detail::require(count == entropies.size(), "policy CSV row has wrong number of columns");
        }
        return {std::move(times), std::move(entropies), std::move(values)};
    }

    static TabulatedPolicy read_csv_file(const std::string& path)
    {
        std::ifstream in(path);
        detail::require(in.good(), "cannot open policy file " + path);
        return read_csv(in);
    }

    void write_csv(std::ostream& os) const
    {
        os.precision(17);
        os << "t\\s";
        for (double s : entropies_)
            os << ',' << s;
        os << '\n';
        for (std::size_t i = 0; i < times_.size(); ++i) {
            os << times_[i];
            for (std::size_t j = 0; j < entropies_.size(); ++j)
                os << ',' << values_[i * entropies_.size() + j];
            os << '\n';
        }
    }

private:
    static double parse(const std::string& cell)
    {
        try {
            std::size_t used = 0;
            const double v = std::stod(cell, &used);
            if (cell.find_first_not_of(" \t\r", used) != std::string::npos)
                throw std::invalid_argument(cell);
            return v;
        } catch (const std::exception&) {
            throw DomainError("policy CSV has non-numeric cell '" + cell + "'");
        }
    }

    static std::size_t nearest(const std::vector<double>& grid, double x)
    {
        const auto it = std::lower_bound(grid.begin(), grid.end(), x);
        if (it == grid.begin())
            return 0;
        if (it == grid.end())
            return grid.size() - 1;
        const auto i = static_cast<std::size_t>(it - grid.begin());
        return (x - grid[i - 1] <= grid[i] - x) ? i - 1 : i;
    }

    std::vector<double> times_;
    std::vector<double> entropies_;
    std::vector<double> values_;
};

// ---------------------------------------------------------------------------
// Strategies

struct JacobsControl {};
struct AlignedControl {};
struct ConstantControl { double v; };
struct TabulatedControl { std::shared_ptr<const TabulatedPolicy> policy; };

// Finite-strength rotation Omega = gain (theta_target - theta) in place of
// setting u directly.
struct FiniteOmegaControl
{
    double gain;
    double theta_target;
};

// Markov feedback law (t, S_t) -> u. Immutable once built.
class Strategy
{
public:
    using Kind = std::variant<JacobsControl, AlignedControl, ConstantControl, TabulatedControl,
                              FiniteOmegaControl>;

    static Strategy jacobs() { return Strategy{JacobsControl{}}; }
    static Strategy aligned() { return Strategy{AlignedControl{}}; }

    static Strategy constant(double v)
    {
        return Strategy{ConstantControl{ControlValue{v}.value()}};
    }

    static Strategy tabulated(TabulatedPolicy policy)
    {
        return Strategy{TabulatedControl{std::make_shared<const TabulatedPolicy>(std::move(policy))}};
    }

    static Strategy finite_omega(double gain, double theta_target)
    {
        detail::require(std::isfinite(gain) && gain >= 0.0, "rotation gain must be >= 0");
        detail::require(std::isfinite(theta_target), "target angle must be finite");
        return Strategy{FiniteOmegaControl{gain, theta_target}};
    }

    static Strategy from_string(const std::string& name)
    {
        if (name == "jacobs")
            return jacobs();
        if (name == "aligned")
            return aligned();
        if (name.rfind("constant:", 0) == 0) {
            const std::string arg = name.substr(9);
            std::size_t used = 0;
            double v = 0.0;
            try {
                v = std::stod(arg, &used);
            } catch (const std::exception&) {
                used = 0;
            }
            detail::require(used > 0 && used == arg.size(), "constant strategy needs a number, got '" + arg + "'");
            return constant(v);
        }
        if (name.rfind("table:", 0) == 0)
            return tabulated(TabulatedPolicy::read_csv_file(name.substr(6)));
        throw DomainError("unknown strategy '" + name + "' (expected jacobs, aligned, constant:<v> or table:<path>)");
    }

    const Kind& kind() const noexcept { return kind_; }

    bool is_finite_omega() const noexcept { return std::holds_alternative<FiniteOmegaControl>(kind_); }

    std::string name() const
    {
        struct Namer
        {
            std::string operator()(const JacobsControl&) const { return "jacobs"; }
            std::string operator()(const AlignedControl&) const { return "aligned"; }
            std::string operator()(const ConstantControl& c) const
            {
                std::ostringstream os;
                os << "constant:" << c.v;
                return os.str();
            }
            std::string operator()(const TabulatedControl&) const { return "table"; }
            std::string operator()(const FiniteOmegaControl& c) const
            {
                std::ostringstream os;
                os << "finite-omega:" << c.gain << '@' << c.theta_target;
                return os.str();
            }
        };
        return std::visit(Namer{}, kind_);
    }

    // Control applied at (t, s). A finite-omega strategy reports the control
    // of the singular limit it approaches, cos(theta_target).
    ControlValue evaluate(double t, double s) const
    {
        struct Eval
        {
            double t, s;
            double operator()(const JacobsControl&) const { return 0.0; }
            double operator()(const AlignedControl&) const { return 1.0; }
            double operator()(const ConstantControl& c) const { return c.v; }
            double operator()(const TabulatedControl& c) const { return c.policy->at(t, s); }
            double operator()(const FiniteOmegaControl& c) const
            {
                return std::clamp(std::cos(c.theta_target), -1.0, 1.0);
            }
        };
        return ControlValue{std::visit(Eval{t, s}, kind_)};
    }

    // Angle theta in [0, pi] with cos(theta) = u(t, s).
    double target_angle(double t, double s) const
    {
        if (const auto* f = std::get_if<FiniteOmegaControl>(&kind_))
            return f->theta_target;
        return std::acos(evaluate(t, s).value());
    }

    // Rotation rate for the finite-omega strategy at Bloch angle theta.
    double omega(double theta) const
    {
        const auto* f = std::get_if<FiniteOmegaControl>(&kind_);
        if (!f)
            return 0.0;
        double err = f->theta_target - theta;
        err = std::remainder(err, 2.0 * std::numbers::pi);
        return f->gain * err;
    }

private:
    explicit Strategy(Kind k) : kind_(std::move(k)) {}

    Kind kind_;
};

}  // namespace qpurify

#endif
