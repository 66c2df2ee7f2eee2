#include <cmath>
#include <numbers>
#include <sstream>

#include <gtest/gtest.h>

#include "qpurify/noise.hpp"
#include "qpurify/sde.hpp"

using namespace qpurify;

TEST(Coefficients, Values)
{
    EXPECT_DOUBLE_EQ(drift_s(0.5, ControlValue{0.0}), -2.0);
    EXPECT_DOUBLE_EQ(drift_s(0.5, ControlValue{1.0}), -1.0);
    EXPECT_DOUBLE_EQ(diffusion_s(0.5, ControlValue{0.0}), 0.0);
    EXPECT_NEAR(diffusion_s(0.5, ControlValue{1.0}), -2.0 * std::sqrt(0.5), 1e-15);
    EXPECT_THROW(drift_s(1.1, ControlValue{0.0}), DomainError);
}

TEST(Coefficients, DiffusionDerivativeMatchesFiniteDifference)
{
    const ControlValue v{0.7};
    for (double s : {0.1, 0.4, 0.8, 0.95}) {
        const double e = 1e-6;
        const double fd = (diffusion_s(s + e, v) - diffusion_s(s - e, v)) / (2 * e);
        EXPECT_NEAR(diffusion_s_derivative(s, v), fd, 1e-7) << s;
    }
}

TEST(StepS, JacobsIsDeterministic)
{
    // v = 0 kills the noise; one Euler step is s (1 - 4 dt) whatever dW is.
    const StepConfig cfg{1e-3, Scheme::EulerMaruyama, BoundaryPolicy::Clip};
    const auto a = step_s({0.9, 0.0}, ControlValue{0.0}, 0.05, cfg);
    const auto b = step_s({0.9, 0.0}, ControlValue{0.0}, -0.2, cfg);
    EXPECT_DOUBLE_EQ(a.s, 0.9 * (1 - 4e-3));
    EXPECT_DOUBLE_EQ(a.s, b.s);
    EXPECT_DOUBLE_EQ(a.t, 1e-3);
}

TEST(StepS, JacobsPathMatchesExponential)
{
    const StepConfig cfg{1e-4, Scheme::EulerMaruyama, BoundaryPolicy::Clip};
    PurityState p{0.9, 0.0};
    for (int k = 0; k < 5000; ++k)
        p = step_s(p, ControlValue{0.0}, 0.0, cfg);
    EXPECT_NEAR(p.s, 0.9 * std::exp(-2.0), 1e-4);
}

TEST(StepS, PureStateIsFixed)
{
    const StepConfig cfg{1e-3, Scheme::Milstein, BoundaryPolicy::Clip};
    for (double v : {0.0, 0.5, 1.0})
        EXPECT_EQ(step_s({0.0, 0.0}, ControlValue{v}, 0.3, cfg).s, 0.0);
}

TEST(StepS, ClipsIntoUnitInterval)
{
    const StepConfig cfg{1e-2, Scheme::EulerMaruyama, BoundaryPolicy::Clip};
    const auto up = step_s({0.99, 0.0}, ControlValue{1.0}, -3.0, cfg);
    const auto down = step_s({0.5, 0.0}, ControlValue{1.0}, 3.0, cfg);
    EXPECT_LE(up.s, 1.0);
    EXPECT_GE(down.s, 0.0);
}

TEST(StepS, RejectsBadInput)
{
    const StepConfig cfg{1e-3, Scheme::EulerMaruyama, BoundaryPolicy::Clip};
    EXPECT_THROW(step_s({1.5, 0.0}, ControlValue{0.0}, 0.0, cfg), DomainError);
    EXPECT_THROW(step_s({0.5, 0.0}, ControlValue{0.0}, NAN, cfg), DomainError);
    EXPECT_THROW(step_s({0.5, 0.0}, ControlValue{0.0}, 0.0, StepConfig{0.0}), DomainError);
}

TEST(StepBloch, AgreesWithSForm)
{
    // From a Bloch state at angle theta the S update equals step_s with u = cos(theta)
    // to first order in dt (Euler, single step).
    const StepConfig cfg{1e-6, Scheme::EulerMaruyama, BoundaryPolicy::Clip};
    const double s0 = 0.6;
    for (double th : {0.0, 0.4, 1.2, std::numbers::pi / 2}) {
        const BlochState b = to_bloch(PurityState{s0, 0.0}, th);
        const double dW = 1e-3;
        const double via_bloch = to_purity(step_bloch(b, 0.0, dW, cfg)).s;
        const double via_s = step_s({s0, 0.0}, ControlValue{std::cos(th)}, dW, cfg).s;
        EXPECT_NEAR(via_bloch, via_s, 2e-5) << th;
    }
}

TEST(StepBloch, RejectsOutOfPlane)
{
    EXPECT_THROW(step_bloch({0.1, 0.1, 0.1}, 0.0, 0.0, StepConfig{}), DomainError);
}

TEST(StepRho, MatchesBloch)
{
    const StepConfig cfg{1e-4, Scheme::Milstein, BoundaryPolicy::Clip};
    NoiseStream noise(5, 0);
    BlochState b{0.4, 0.0, 0.3};
    DensityMatrix rho = to_density(b);
    for (int k = 0; k < 2000; ++k) {
        const double dW = noise.increment(cfg.dt);
        b = step_bloch(b, 0.0, dW, cfg);
        rho = step_rho(rho, 0.0, dW, cfg);
    }
    const BlochState r = rho.to_bloch();
    EXPECT_NEAR(r.x, b.x, 1e-10);
    EXPECT_NEAR(r.z, b.z, 1e-10);
}

TEST(StepRho, RotationGeneratorMatchesBloch)
{
    const StepConfig cfg{1e-3, Scheme::EulerMaruyama, BoundaryPolicy::Clip};
    const BlochState b{0.3, 0.0, 0.5};
    const BlochState nb = step_bloch(b, 2.0, 0.0, cfg);
    const BlochState nr = step_rho(to_density(b), 2.0, 0.0, cfg).to_bloch();
    EXPECT_NEAR(nr.x, nb.x, 1e-14);
    EXPECT_NEAR(nr.z, nb.z, 1e-14);
}

TEST(StepRho, StaysPhysical)
{
    const StepConfig cfg{1e-2, Scheme::EulerMaruyama, BoundaryPolicy::Clip};
    RepairStats stats;
    NoiseStream noise(1, 2);
    DensityMatrix rho = to_density({0.0, 0.0, 0.99});
    for (int k = 0; k < 5000; ++k) {
        rho = step_rho(rho, 0.3, noise.increment(cfg.dt), cfg, &stats);
        ASSERT_NO_THROW(rho.validate());
        ASSERT_GE(rho.eigenvalues()[0], -1e-15);
        ASSERT_NEAR(rho.trace().real(), 1.0, 1e-12);
    }
    EXPECT_EQ(stats.steps, 5000u);
}

TEST(Measurement, Increment)
{
    EXPECT_DOUBLE_EQ(measurement_increment(0.5, 0.01, 1e-3), 2 * 0.5 * 1e-3 + 0.01);
    EXPECT_THROW(measurement_increment(1.5, 0.0, 1e-3), DomainError);
}

TEST(Noise, Deterministic)
{
    NoiseStream a(42, 7), b(42, 7), c(42, 8);
    double diff = 0;
    for (int i = 0; i < 100; ++i) {
        const double x = a.increment(1e-4);
        EXPECT_EQ(x, b.increment(1e-4));
        diff += std::abs(x - c.increment(1e-4));
    }
    EXPECT_GT(diff, 0.0);
}

TEST(Noise, UniformsDoNotShiftGaussians)
{
    NoiseStream a(3, 1), b(3, 1);
    for (int i = 0; i < 50; ++i) {
        a.uniform();
        EXPECT_EQ(a.standard_normal(), b.standard_normal());
    }
}

TEST(Noise, Moments)
{
    NoiseStream n(0, 0);
    const int N = 200000;
    double m = 0, m2 = 0;
    for (int i = 0; i < N; ++i) {
        const double x = n.increment(0.01);
        m += x;
        m2 += x * x;
    }
    EXPECT_NEAR(m / N, 0.0, 4 * 0.1 / std::sqrt(N));
    EXPECT_NEAR(m2 / N, 0.01, 4 * 0.01 * std::sqrt(2.0 / N));
}

// Strong error at T against a fine path driven by summed fine increments.
static double strong_error(Scheme scheme, double dt, int paths)
{
    const int refine = 16;
    const double T = 0.25;
    const int n = static_cast<int>(std::round(T / dt));
    double err = 0.0;
    for (int p = 0; p < paths; ++p) {
        NoiseStream noise(11, static_cast<std::uint64_t>(p));
        PurityState coarse{0.6, 0.0};
        PurityState fine{0.6, 0.0};
        const StepConfig cc{dt, scheme, BoundaryPolicy::Clip};
        const StepConfig fc{dt / refine, Scheme::Milstein, BoundaryPolicy::Clip};
        for (int k = 0; k < n; ++k) {
            double dW = 0.0;
            for (int j = 0; j < refine; ++j) {
                const double w = noise.increment(fc.dt);
                fine = step_s(fine, ControlValue{0.6}, w, fc);
                dW += w;
            }
            coarse = step_s(coarse, ControlValue{0.6}, dW, cc);
        }
        err += std::abs(coarse.s - fine.s);
    }
    return err / paths;
}

TEST(Schemes, MilsteinStrongErrorBelowEuler)
{
    const double e_euler = strong_error(Scheme::EulerMaruyama, 1e-2, 400);
    const double e_mil = strong_error(Scheme::Milstein, 1e-2, 400);
    EXPECT_LT(e_mil, 0.5 * e_euler);
    // Milstein error roughly halves with dt; Euler's falls like sqrt(dt).
    const double e_mil_half = strong_error(Scheme::Milstein, 5e-3, 400);
    EXPECT_LT(e_mil_half, 0.7 * e_mil);
}

TEST(Trajectory, CsvHeader)
{
    TrajectoryRecord rec;
    rec.samples.push_back({0.0, 0.9, 1.0, 0.01, 0.02});
    std::ostringstream os;
    write_trajectory_csv(os, rec);
    EXPECT_EQ(os.str().substr(0, 12), "t,s,v,dW,dY\n");
}
