#ifndef QPURIFY_VALUE_GRID_HPP
#define QPURIFY_VALUE_GRID_HPP

#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <ostream>
#include <string>
#include <vector>

#include "errors.hpp"
#include "strategies.hpp"

namespace qpurify {

enum class ProblemKind { FiniteHorizon, HittingTime };

inline const char* to_string(ProblemKind k)
{
    return k == ProblemKind::FiniteHorizon ? "finite-horizon" : "hitting-time";
}

// Policy annotation per node: bang value 0 or 1, or a tie where the sign of
// the discrete D V is below the tie tolerance.
enum class NodePolicy : std::int8_t { Zero = 0, One = 1, Tie = -1 };

// Discretised value function. Values are stored time-major: slice k holds
// V(times[k], entropies[j]) at index k * entropies.size() + j. A stationary
// grid has a single slice and an empty time axis.
struct ValueGrid
{
    ProblemKind problem = ProblemKind::FiniteHorizon;
    TerminalCost cost{};
    double horizon = 0.0;    // T for finite horizon
    double threshold = 0.0;  // h for hitting time
    std::vector<double> times;
    std::vector<double> entropies;
    std::vector<double> values;
    std::vector<NodePolicy> policy;

    // Solver diagnostics.
    std::size_t time_steps = 0;
    double step_size = 0.0;
    double final_update = 0.0;
    double final_residual = 0.0;

    bool stationary() const noexcept { return times.empty(); }
    std::size_t n_s() const noexcept { return entropies.size(); }
    std::size_t n_slices() const noexcept { return stationary() ? 1 : times.size(); }

    double ds() const
    {
        detail::require(entropies.size() >= 2, "grid needs at least two entropy nodes");
        return entropies[1] - entropies[0];
    }

    double& at(std::size_t slice, std::size_t j) { return values[slice * n_s() + j]; }
    double at(std::size_t slice, std::size_t j) const { return values[slice * n_s() + j]; }

    NodePolicy policy_at(std::size_t slice, std::size_t j) const { return policy[slice * n_s() + j]; }

    // Long format: t,s,V,policy (policy -1 marks a tie). Stationary grids write t = 0.
    void write_csv(std::ostream& os) const
    {
        os << "t,s,V,policy\n";
        char line[128];
        for (std::size_t k = 0; k < n_slices(); ++k) {
            const double t = stationary() ? 0.0 : times[k];
            for (std::size_t j = 0; j < n_s(); ++j) {
                std::snprintf(line, sizeof line, "%.17g,%.17g,%.17g,%d\n", t, entropies[j], at(k, j),
                              static_cast<int>(policy_at(k, j)));
                os << line;
            }
        }
    }

    // Policy as a Strategy-ready table; ties map to 0.
    TabulatedPolicy to_policy() const
    {
        std::vector<double> v(policy.size());
        for (std::size_t i = 0; i < policy.size(); ++i)
            v[i] = policy[i] == NodePolicy::One ? 1.0 : 0.0;
        std::vector<double> t = stationary() ? std::vector<double>{0.0} : times;
        return {std::move(t), entropies, std::move(v)};
    }
};

}  // namespace qpurify

#endif
