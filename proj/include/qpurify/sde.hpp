#ifndef QPURIFY_SDE_HPP
#define QPURIFY_SDE_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "errors.hpp"
#include "state.hpp"

namespace qpurify {

enum class Scheme { EulerMaruyama, Milstein };
enum class BoundaryPolicy { Clip };

inline const char* to_string(Scheme s) { return s == Scheme::Milstein ? "milstein" : "euler"; }

inline Scheme scheme_from_string(const std::string& name)
{
    if (name == "euler" || name == "EulerMaruyama")
        return Scheme::EulerMaruyama;
    if (name == "milstein" || name == "Milstein")
        return Scheme::Milstein;
    throw DomainError("unknown integration scheme '" + name + "' (expected euler or milstein)");
}

struct StepConfig
{
    double dt = 1e-4;
    Scheme scheme = Scheme::EulerMaruyama;
    BoundaryPolicy boundary = BoundaryPolicy::Clip;

    void validate() const { detail::require(std::isfinite(dt) && dt > 0.0, "dt must be > 0"); }
};

// s below this is held away from 1 when differentiating sqrt(1 - s).
inline constexpr double kMilsteinEdge = 1e-12;

namespace detail {

inline void check_s(double s)
{
    if (!(std::isfinite(s) && s >= 0.0 && s <= 1.0))
        throw DomainError("linear entropy must lie in [0, 1], got " + std::to_string(s));
}

inline void check_dw(double dW)
{
    require(std::isfinite(dW), "noise increment must be finite");
}

}  // namespace detail

// Drift of dS: -4 s [1 - (1 - s) v^2].
inline double drift_s(double s, ControlValue v)
{
    detail::check_s(s);
    return -4.0 * s * (1.0 - (1.0 - s) * v.squared());
}

// Diffusion of dS: -4 s sqrt(1 - s) v.
inline double diffusion_s(double s, ControlValue v)
{
    detail::check_s(s);
    return -4.0 * s * std::sqrt(1.0 - s) * v.value();
}

// d/ds of diffusion_s, one-sided at s = 1.
inline double diffusion_s_derivative(double s, ControlValue v)
{
    detail::check_s(s);
    const double sc = std::min(s, 1.0 - kMilsteinEdge);
    const double r = std::sqrt(1.0 - sc);
    return v.value() * (-4.0 * r + 2.0 * sc / r);
}

inline PurityState step_s(const PurityState& state, ControlValue v, double dW, const StepConfig& cfg)
{
    state.validate();
    cfg.validate();
    detail::check_dw(dW);

    const double s = state.s;
    const double b = diffusion_s(s, v);
    double next = s + drift_s(s, v) * cfg.dt + b * dW;
    if (cfg.scheme == Scheme::Milstein && b != 0.0)
        next += 0.5 * b * diffusion_s_derivative(s, v) * (dW * dW - cfg.dt);
    return {std::clamp(next, 0.0, 1.0), state.t + cfg.dt};
}

namespace detail {

inline BlochState clip_norm(BlochState b)
{
    const double r = b.radius();
    if (r > 1.0) {
        b.x /= r;
        b.y /= r;
        b.z /= r;
    }
    return b;
}

}  // namespace detail

// One step of
//   dz = 2 (1 - z^2) dW - omega x dt
//   dx = -2 x dt - 2 z x dW + omega z dt
inline BlochState step_bloch(const BlochState& state, double omega, double dW, const StepConfig& cfg)
{
    cfg.validate();
    detail::check_dw(dW);
    state.validate();
    detail::require(state.y == 0.0, "step_bloch requires y = 0");

    const double x = state.x;
    const double z = state.z;
    const double dt = cfg.dt;
    double nz = z + 2.0 * (1.0 - z * z) * dW - omega * x * dt;
    double nx = x - 2.0 * x * dt - 2.0 * z * x * dW + omega * z * dt;
    if (cfg.scheme == Scheme::Milstein) {
        const double q = dW * dW - dt;
        nz += -4.0 * z * (1.0 - z * z) * q;
        nx += (4.0 * z * z * x - 2.0 * x) * q;
    }
    return detail::clip_norm({nx, 0.0, nz});
}

// Counts of positivity repairs applied by step_rho.
struct RepairStats
{
    std::size_t steps = 0;
    std::size_t positivity_repairs = 0;
};

namespace detail {

struct Mat2
{
    std::array<Complex, 4> a{};

    Complex& operator()(int r, int c) { return a[2 * r + c]; }
    const Complex& operator()(int r, int c) const { return a[2 * r + c]; }

    friend Mat2 operator+(const Mat2& l, const Mat2& r)
    {
        Mat2 out;
        for (int i = 0; i < 4; ++i)
            out.a[i] = l.a[i] + r.a[i];
        return out;
    }
    friend Mat2 operator-(const Mat2& l, const Mat2& r)
    {
        Mat2 out;
        for (int i = 0; i < 4; ++i)
            out.a[i] = l.a[i] - r.a[i];
        return out;
    }
    friend Mat2 operator*(Complex k, const Mat2& m)
    {
        Mat2 out;
        for (int i = 0; i < 4; ++i)
            out.a[i] = k * m.a[i];
        return out;
    }
    friend Mat2 operator*(const Mat2& l, const Mat2& r)
    {
        Mat2 out;
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j)
                out(i, j) = l(i, 0) * r(0, j) + l(i, 1) * r(1, j);
        return out;
    }

    Complex trace() const { return a[0] + a[3]; }
};

inline Mat2 sigma_y() { return {{Complex{}, Complex{0, -1}, Complex{0, 1}, Complex{}}}; }
inline Mat2 sigma_z() { return {{Complex{1}, Complex{}, Complex{}, Complex{-1}}}; }

inline Mat2 to_mat(const DensityMatrix& rho)
{
    return {{rho(0, 0), rho(0, 1), rho(1, 0), rho(1, 1)}};
}

}  // namespace detail

// One step of the filtering equation
//   d rho = -i omega [sigma_y / 2, rho] dt + (sigma_z rho sigma_z - rho) dt
//           + (sigma_z rho + rho sigma_z - 2 Tr[sigma_z rho] rho) dW
// followed by Hermitian symmetrisation, trace renormalisation and, when an
// eigenvalue falls below -10 eps, clipping it to zero.
inline DensityMatrix step_rho(const DensityMatrix& rho, double omega, double dW, const StepConfig& cfg,
                              RepairStats* stats = nullptr)
{
    using detail::Mat2;
    cfg.validate();
    detail::check_dw(dW);
    rho.validate();

    const Mat2 sz = detail::sigma_z();
    const Mat2 sy = detail::sigma_y();
    const Mat2 p = detail::to_mat(rho);
    const double dt = cfg.dt;

    const Complex mean_z = (sz * p).trace();
    const Mat2 commutator = sy * p - p * sy;
    const Mat2 drift = Complex{0.0, -0.5 * omega} * commutator + (sz * p * sz - p);
    const Mat2 noise = sz * p + p * sz - Complex{2.0} * mean_z * p;

    Mat2 next = p + Complex{dt} * drift + Complex{dW} * noise;
    if (cfg.scheme == Scheme::Milstein) {
        // Directional derivative of the noise map along itself.
        const Complex mean_noise = (sz * noise).trace();
        const Mat2 dnoise = sz * noise + noise * sz - Complex{2.0} * mean_noise * p -
                            Complex{2.0} * mean_z * noise;
        next = next + Complex{0.5 * (dW * dW - dt)} * dnoise;
    }

    // Hermitian part, unit trace.
    const double a = next(0, 0).real();
    const double d = next(1, 1).real();
    const Complex off = 0.5 * (next(1, 0) + std::conj(next(0, 1)));
    const double tr = a + d;
    BlochState b{2.0 * off.real() / tr, 2.0 * off.imag() / tr, (a - d) / tr};

    // Eigenvalues are (1 +- |r|)/2; clipping the negative one to zero and
    // renormalising maps r to r / |r|.
    const double r = b.radius();
    if (stats)
        ++stats->steps;
    if ((1.0 - r) / 2.0 < -10.0 * std::numeric_limits<double>::epsilon()) {
        b.x /= r;
        b.y /= r;
        b.z /= r;
        if (stats)
            ++stats->positivity_repairs;
    } else if (r > 1.0) {
        b.x /= r;
        b.y /= r;
        b.z /= r;
    }
    return DensityMatrix::from_bloch(b);
}

// dY = 2 <sigma_z> dt + dW
inline double measurement_increment(double z, double dW, double dt)
{
    detail::require(std::abs(z) <= 1.0 + kStateTolerance, "|z| must be <= 1");
    return 2.0 * z * dt + dW;
}

struct TrajectorySample
{
    double t = 0.0;
    double s = 0.0;
    double v = 0.0;
    double dW = 0.0;
    double dY = 0.0;
};

// Sampled path of the purity diffusion. Sample k holds the state at t_k, the
// control applied over [t_k, t_k + dt) and the increments over that step.
struct TrajectoryRecord
{
    std::vector<TrajectorySample> samples;
    PurityState terminal;
    std::optional<double> hitting_time;
};

inline void write_trajectory_csv(std::ostream& os, const TrajectoryRecord& rec)
{
    os << "t,s,v,dW,dY\n";
    char line[160];
    for (const auto& p : rec.samples) {
        std::snprintf(line, sizeof line, "%.17g,%.17g,%.17g,%.17g,%.17g\n", p.t, p.s, p.v, p.dW, p.dY);
        os << line;
    }
}

}  // namespace qpurify

#endif
