#ifndef QPURIFY_STATE_HPP
#define QPURIFY_STATE_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <string>

#include "errors.hpp"

namespace qpurify {

// Slack allowed on the Hermitian / trace / norm / positivity invariants.
inline constexpr double kStateTolerance = 1e-9;

using Complex = std::complex<double>;

// Feedback control u = cos(theta), always in [-1, 1].
class ControlValue
{
public:
    constexpr ControlValue() = default;
    explicit ControlValue(double v) : v_(v)
    {
        if (!(std::isfinite(v) && std::abs(v) <= 1.0))
            throw DomainError("control value must lie in [-1, 1], got " + std::to_string(v));
    }

    constexpr double value() const noexcept { return v_; }
    constexpr double squared() const noexcept { return v_ * v_; }

    friend constexpr bool operator==(ControlValue, ControlValue) = default;

private:
    double v_ = 0.0;
};

// Bloch coordinates (x, y, z) = Tr[(sigma_x, sigma_y, sigma_z) rho].
struct BlochState
{
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    double radius() const noexcept { return std::hypot(x, y, z); }

    // Angle from the +z axis in the x-z plane; 0 at the origin by convention.
    double theta() const noexcept
    {
        if (x == 0.0 && z == 0.0)
            return 0.0;
        return std::atan2(x, z);
    }

    void validate() const
    {
        detail::require(std::isfinite(x) && std::isfinite(y) && std::isfinite(z),
                        "Bloch vector has non-finite component");
        detail::require(x * x + y * y + z * z <= 1.0 + kStateTolerance,
                        "Bloch vector norm exceeds 1");
    }
};

// Polar form of a y = 0 Bloch vector: z = R cos(theta), x = R sin(theta).
struct PolarState
{
    double radius = 0.0;
    double theta = 0.0;
};

// Linear entropy S = 1 - R^2 at time t.
struct PurityState
{
    double s = 1.0;
    double t = 0.0;

    void validate() const
    {
        if (!(std::isfinite(s) && s >= 0.0 && s <= 1.0))
            throw DomainError("linear entropy must lie in [0, 1], got " + std::to_string(s));
        detail::require(std::isfinite(t), "time must be finite");
    }
};

// 2x2 conditional state, row-major entries.
class DensityMatrix
{
public:
    DensityMatrix() : m_{Complex{0.5}, Complex{}, Complex{}, Complex{0.5}} {}

    DensityMatrix(Complex a00, Complex a01, Complex a10, Complex a11) : m_{a00, a01, a10, a11}
    {
        validate();
    }

    static DensityMatrix maximally_mixed() { return {}; }

    static DensityMatrix from_bloch(const BlochState& b)
    {
        b.validate();
        DensityMatrix rho;
        rho.m_ = {Complex{0.5 * (1.0 + b.z)}, Complex{0.5 * b.x, -0.5 * b.y},
                  Complex{0.5 * b.x, 0.5 * b.y}, Complex{0.5 * (1.0 - b.z)}};
        return rho;
    }

    const Complex& operator()(int row, int col) const { return m_[2 * row + col]; }

    Complex trace() const { return m_[0] + m_[3]; }

    // Eigenvalues of the Hermitian part, ascending.
    std::array<double, 2> eigenvalues() const
    {
        const double a = m_[0].real();
        const double d = m_[3].real();
        const Complex off = 0.5 * (m_[1] + std::conj(m_[2]));
        const double mean = 0.5 * (a + d);
        const double gap = std::sqrt(0.25 * (a - d) * (a - d) + std::norm(off));
        return {mean - gap, mean + gap};
    }

    BlochState to_bloch() const
    {
        // x = 2 Re rho_10, y = 2 Im rho_10, z = rho_00 - rho_11
        const Complex c = 0.5 * (m_[2] + std::conj(m_[1]));
        return {2.0 * c.real(), 2.0 * c.imag(), (m_[0] - m_[3]).real()};
    }

    void validate() const
    {
        for (const auto& e : m_)
            detail::require(std::isfinite(e.real()) && std::isfinite(e.imag()),
                            "density matrix has non-finite entry");
        detail::require(std::abs(m_[1] - std::conj(m_[2])) <= kStateTolerance &&
                            std::abs(m_[0].imag()) <= kStateTolerance &&
                            std::abs(m_[3].imag()) <= kStateTolerance,
                        "density matrix is not Hermitian");
        detail::require(std::abs(trace() - Complex{1.0}) <= kStateTolerance,
                        "density matrix trace differs from 1");
        detail::require(eigenvalues()[0] >= -kStateTolerance,
                        "density matrix has a negative eigenvalue");
    }

private:
    std::array<Complex, 4> m_;
};

// Conversions. Only the purity direction loses information (theta).

inline PolarState to_polar(const BlochState& b)
{
    b.validate();
    detail::require(std::abs(b.y) <= kStateTolerance, "polar form requires y = 0");
    return {std::hypot(b.x, b.z), b.theta()};
}

inline BlochState to_bloch(const PolarState& p)
{
    detail::require(p.radius >= 0.0 && p.radius <= 1.0 + kStateTolerance,
                    "Bloch radius must lie in [0, 1]");
    return {p.radius * std::sin(p.theta), 0.0, p.radius * std::cos(p.theta)};
}

inline BlochState to_bloch(const DensityMatrix& rho) { return rho.to_bloch(); }

// Purity carries no angle; theta selects where on the circle of radius R to land.
inline BlochState to_bloch(const PurityState& p, double theta = 0.0)
{
    p.validate();
    return to_bloch(PolarState{std::sqrt(1.0 - p.s), theta});
}

inline PurityState to_purity(const BlochState& b, double t = 0.0)
{
    b.validate();
    const double r2 = b.x * b.x + b.y * b.y + b.z * b.z;
    return {std::clamp(1.0 - r2, 0.0, 1.0), t};
}

inline PurityState to_purity(const PolarState& p, double t = 0.0)
{
    return to_purity(to_bloch(p), t);
}

inline PurityState to_purity(const DensityMatrix& rho, double t = 0.0)
{
    return to_purity(rho.to_bloch(), t);
}

inline DensityMatrix to_density(const BlochState& b) { return DensityMatrix::from_bloch(b); }

// Instantaneous rotation about y: keeps R, sets the polar angle.
inline BlochState rotate_to_angle(const BlochState& b, double theta_target)
{
    detail::require(std::abs(b.y) <= kStateTolerance, "rotation requires y = 0");
    const double r = std::hypot(b.x, b.z);
    if (r == 0.0)
        return {};
    return {r * std::sin(theta_target), 0.0, r * std::cos(theta_target)};
}

}  // namespace qpurify

#endif
