#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "qpurify/state.hpp"

using namespace qpurify;

TEST(ControlValue, AcceptsClosedInterval)
{
    EXPECT_DOUBLE_EQ(ControlValue{1.0}.value(), 1.0);
    EXPECT_DOUBLE_EQ(ControlValue{-1.0}.squared(), 1.0);
    EXPECT_DOUBLE_EQ(ControlValue{}.value(), 0.0);
}

TEST(ControlValue, RejectsOutOfRange)
{
    EXPECT_THROW(ControlValue{1.0000001}, DomainError);
    EXPECT_THROW(ControlValue{NAN}, DomainError);
    EXPECT_THROW(ControlValue{-2.0}, DomainError);
}

TEST(PurityState, Bounds)
{
    EXPECT_NO_THROW((PurityState{0.0, 0.0}.validate()));
    EXPECT_NO_THROW((PurityState{1.0, 0.0}.validate()));
    EXPECT_THROW((PurityState{1.2, 0.0}.validate()), DomainError);
    EXPECT_THROW((PurityState{-1e-3, 0.0}.validate()), DomainError);
}

TEST(DensityMatrix, MaximallyMixedHasZeroBlochVector)
{
    const auto rho = DensityMatrix::maximally_mixed();
    const auto b = rho.to_bloch();
    EXPECT_EQ(b.x, 0.0);
    EXPECT_EQ(b.y, 0.0);
    EXPECT_EQ(b.z, 0.0);
    EXPECT_DOUBLE_EQ(to_purity(rho).s, 1.0);
}

TEST(DensityMatrix, RejectsInvalid)
{
    // trace 1.1
    EXPECT_THROW(DensityMatrix(Complex{0.6}, Complex{}, Complex{}, Complex{0.5}), DomainError);
    // non-Hermitian
    EXPECT_THROW(DensityMatrix(Complex{0.5}, Complex{0.1}, Complex{0.2}, Complex{0.5}), DomainError);
    // negative eigenvalue
    EXPECT_THROW(DensityMatrix(Complex{1.2}, Complex{}, Complex{}, Complex{-0.2}), DomainError);
    EXPECT_THROW(DensityMatrix::from_bloch({0.9, 0.0, 0.9}), DomainError);
}

TEST(DensityMatrix, Eigenvalues)
{
    const auto rho = DensityMatrix::from_bloch({0.3, 0.0, 0.4});
    const auto ev = rho.eigenvalues();
    EXPECT_NEAR(ev[0], 0.25, 1e-15);
    EXPECT_NEAR(ev[1], 0.75, 1e-15);
}

TEST(Conversions, PolarExample)
{
    // R = sqrt(0.1), theta = pi/2 -> x = sqrt(0.1), z = 0, S = 0.9
    const BlochState b = to_bloch(PolarState{std::sqrt(0.1), std::numbers::pi / 2});
    EXPECT_NEAR(b.x, std::sqrt(0.1), 1e-15);
    EXPECT_NEAR(b.z, 0.0, 1e-15);
    EXPECT_NEAR(to_purity(b).s, 0.9, 1e-15);
}

TEST(Conversions, RoundTripBlochDensity)
{
    for (double th = -3.0; th <= 3.0; th += 0.37)
        for (double r : {0.0, 0.2, 0.7, 1.0}) {
            const BlochState b{r * std::sin(th), 0.0, r * std::cos(th)};
            const BlochState back = to_density(b).to_bloch();
            EXPECT_NEAR(back.x, b.x, 1e-15);
            EXPECT_NEAR(back.z, b.z, 1e-15);
            const PolarState p = to_polar(b);
            EXPECT_NEAR(p.radius, r, 1e-15);
            if (r > 0.0) {
                EXPECT_NEAR(std::remainder(p.theta - th, 2 * std::numbers::pi), 0.0, 1e-12);
            }
        }
}

TEST(Conversions, PurityIsOneMinusRadiusSquared)
{
    const BlochState b{0.3, 0.0, -0.5};
    EXPECT_NEAR(to_purity(b).s, 1.0 - 0.34, 1e-15);
    EXPECT_NEAR(to_purity(to_density(b)).s, 1.0 - 0.34, 1e-15);
    EXPECT_NEAR(to_purity(to_polar(b)).s, 1.0 - 0.34, 1e-15);
}

TEST(Conversions, PurityToBlochPlacesAngle)
{
    const BlochState b = to_bloch(PurityState{0.36, 0.0}, 0.0);
    EXPECT_NEAR(b.z, 0.8, 1e-15);
    EXPECT_EQ(b.x, 0.0);
}

TEST(Conversions, PolarRejectsOutOfPlane)
{
    EXPECT_THROW(to_polar(BlochState{0.1, 0.2, 0.1}), DomainError);
    EXPECT_THROW(to_bloch(PolarState{1.5, 0.0}), DomainError);
}

TEST(Rotation, KeepsRadius)
{
    const BlochState b{0.3, 0.0, 0.4};
    const BlochState r = rotate_to_angle(b, 1.1);
    EXPECT_NEAR(r.radius(), 0.5, 1e-15);
    EXPECT_NEAR(r.theta(), 1.1, 1e-15);
    const BlochState o = rotate_to_angle(BlochState{}, 0.7);
    EXPECT_EQ(o.radius(), 0.0);
}
