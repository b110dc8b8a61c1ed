#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "crowd/errors.hpp"
#include "crowd/nonlocal.hpp"
#include "oracles.hpp"

using namespace crowd;

namespace {

double poly3(double x, double r) {
    const double s = 1.0 - (x / r) * (x / r);
    return std::abs(x) >= r ? 0.0 : s * s * s;
}

ScalarField random_field(const Grid2D& g, unsigned seed) {
    std::mt19937 gen(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    ScalarField f(g);
    for (double& v : f.values()) v = u(gen);
    return f;
}

}  // namespace

TEST(Kernel, UnnormalizedIntegralConverges) {
    const double r = 0.6;
    const double exact = std::pow(32.0 * r / 35.0, 2);
    double prev_err = 1.0;
    for (double dx : {0.1, 0.05, 0.025}) {
        const Grid2D g({0.0, 0.0}, dx, dx, 10, 10);
        const Kernel k = build_kernel({KernelProfile::Poly3, r, false, {}}, g);
        const double err = std::abs(k.integral() - exact);
        EXPECT_LT(err, prev_err);
        prev_err = err;
    }
    EXPECT_LT(prev_err / exact, 1e-3);
}

TEST(Kernel, NormalizedHasUnitIntegralAndFirstMoment) {
    const Grid2D g({0.0, 0.0}, 0.05, 0.05, 10, 10);
    const Kernel k = build_kernel({KernelProfile::Poly3, 0.3, true, {}}, g);
    EXPECT_NEAR(k.integral(), 1.0, 1e-12);
    double moment = 0.0;
    const int m = k.half_width();
    for (int b = -m; b <= m; ++b) {
        for (int a = -m; a <= m; ++a) moment -= a * g.dx() * k.grad_x()[k.offset_index(a, b)];
    }
    EXPECT_NEAR(moment * g.cell_area(), 1.0, 1e-12);
}

TEST(Kernel, ProfileMatchesSeparableFormula) {
    const KernelSpec spec{KernelProfile::Poly3, 0.5, false, {}};
    EXPECT_DOUBLE_EQ(kernel_profile_value(spec, {0.0, 0.0}), 1.0);
    EXPECT_NEAR(kernel_profile_value(spec, {0.2, -0.1}), poly3(0.2, 0.5) * poly3(-0.1, 0.5), 1e-15);
    EXPECT_DOUBLE_EQ(kernel_profile_value(spec, {0.5, 0.0}), 0.0);
    EXPECT_DOUBLE_EQ(kernel_profile_value(spec, {0.1, 0.7}), 0.0);
}

TEST(Kernel, RejectsUnresolvedRadius) {
    const Grid2D g({0.0, 0.0}, 0.1, 0.1, 10, 10);
    EXPECT_THROW(build_kernel({KernelProfile::Poly3, 0.15, false, {}}, g), ConfigError);
    const Grid2D rect({0.0, 0.0}, 0.1, 0.05, 10, 10);
    EXPECT_THROW(build_kernel({KernelProfile::Poly3, 0.6, false, {}}, rect), ConfigError);
}

TEST(Convolution, MatchesDirectDoubleSum) {
    const Grid2D g({0.0, 0.0}, 0.05, 0.05, 37, 29);
    const ScalarField rho = random_field(g, 11);
    for (bool normalized : {false, true}) {
        const Kernel k = build_kernel({KernelProfile::Poly3, 0.23, normalized, {}}, g);
        const ScalarField ref = oracle::direct_sum(rho, k.weights(), k.half_width());
        const ScalarField fast = convolve(rho, k);
        const ScalarField direct = convolve(rho, k, ConvolutionMethod::Direct);
        const VectorField grad = convolve_grad(rho, k);
        const ScalarField ref_gx = oracle::direct_sum(rho, k.grad_x(), k.half_width());
        const ScalarField ref_gy = oracle::direct_sum(rho, k.grad_y(), k.half_width());
        for (std::size_t n = 0; n < rho.size(); ++n) {
            const double scale = std::max(1.0, std::abs(ref[n]));
            EXPECT_NEAR(fast[n], ref[n], 1e-13 * scale);
            EXPECT_NEAR(direct[n], ref[n], 1e-13 * scale);
            EXPECT_NEAR(grad[n].x, ref_gx[n], 1e-12 * std::max(1.0, std::abs(ref_gx[n])));
            EXPECT_NEAR(grad[n].y, ref_gy[n], 1e-12 * std::max(1.0, std::abs(ref_gy[n])));
        }
    }
}

TEST(Convolution, TabulatedKernelMatchesDirectDoubleSum) {
    const Grid2D g({0.0, 0.0}, 0.1, 0.1, 16, 16);
    const ScalarField rho = random_field(g, 3);
    const Kernel k = build_kernel({KernelProfile::Tabulated, 0.45, false, {1.0, 0.8, 0.3, 0.0}}, g);
    EXPECT_FALSE(k.separable());
    const ScalarField ref = oracle::direct_sum(rho, k.weights(), k.half_width());
    const ScalarField got = convolve(rho, k);
    for (std::size_t n = 0; n < rho.size(); ++n) EXPECT_NEAR(got[n], ref[n], 1e-13);
}

TEST(Convolution, SingleUnitMassReproducesStencil) {
    const Grid2D g({0.0, 0.0}, 0.1, 0.1, 21, 21);
    ScalarField rho(g, 0.0);
    rho(10, 10) = 1.0 / g.cell_area();
    const Kernel k = build_kernel({KernelProfile::Poly3, 0.5, false, {}}, g);
    const ScalarField out = convolve(rho, k);
    for (int b = -5; b <= 5; ++b) {
        for (int a = -5; a <= 5; ++a) {
            EXPECT_NEAR(out(10 + a, 10 + b), poly3(a * 0.1, 0.5) * poly3(b * 0.1, 0.5), 1e-14);
        }
    }
}

TEST(Convolution, ZeroAndConstantData) {
    const Grid2D g({0.0, 0.0}, 0.05, 0.05, 40, 40);
    const Kernel k = build_kernel({KernelProfile::Poly3, 0.3, true, {}}, g);
    const ScalarField zero = convolve(ScalarField(g, 0.0), k);
    for (double v : zero.values()) EXPECT_EQ(v, 0.0);
    const ScalarField c = convolve(ScalarField(g, 0.4), k);
    const VectorField dc = convolve_grad(ScalarField(g, 0.4), k);
    EXPECT_NEAR(c(20, 20), 0.4, 1e-13);
    EXPECT_NEAR(dc(20, 20).x, 0.0, 1e-12);
    EXPECT_NEAR(dc(20, 20).y, 0.0, 1e-12);
}

TEST(Convolution, NormalizedGradientExactOnRamp) {
    const Grid2D g({0.0, 0.0}, 0.05, 0.05, 40, 40);
    const Kernel k = build_kernel({KernelProfile::Poly3, 0.3, true, {}}, g);
    ScalarField ramp(g);
    for (int j = 0; j < g.ny(); ++j) {
        for (int i = 0; i < g.nx(); ++i) ramp(i, j) = 0.5 * g.center(i, j).x - 0.25 * g.center(i, j).y;
    }
    const VectorField grad = convolve_grad(ramp, k);
    const ScalarField avg = convolve(ramp, k);
    // rho * grad(eta) = grad(rho * eta) away from the boundary.
    EXPECT_NEAR(grad(20, 20).x, 0.5, 1e-12);
    EXPECT_NEAR(grad(20, 20).y, -0.25, 1e-12);
    EXPECT_NEAR(avg(20, 20), ramp(20, 20), 1e-12);
}

TEST(Convolution, GradientPointsUphillOfBump) {
    const Grid2D g({-1.0, -1.0}, 0.05, 0.05, 40, 40);
    ScalarField rho(g, 0.0);
    for (int j = 0; j < g.ny(); ++j) {
        for (int i = 0; i < g.nx(); ++i) rho(i, j) = std::exp(-8.0 * dot(g.center(i, j), g.center(i, j)));
    }
    const Kernel k = build_kernel({KernelProfile::Poly3, 0.3, false, {}}, g);
    const VectorField grad = convolve_grad(rho, k);
    EXPECT_GT(grad(12, 20).x, 0.0);
    EXPECT_LT(grad(28, 20).x, 0.0);
    EXPECT_GT(grad(20, 12).y, 0.0);
    EXPECT_LT(grad(20, 28).y, 0.0);
}

TEST(Convolution, LinearAndMonotone) {
    const Grid2D g({0.0, 0.0}, 0.05, 0.05, 30, 30);
    const Kernel k = build_kernel({KernelProfile::Poly3, 0.2, false, {}}, g);
    const ScalarField a = random_field(g, 1);
    const ScalarField b = random_field(g, 2);
    ScalarField mix(g);
    for (std::size_t n = 0; n < mix.size(); ++n) mix[n] = 2.0 * a[n] - 0.5 * b[n];
    const ScalarField ca = convolve(a, k), cb = convolve(b, k), cm = convolve(mix, k);
    for (std::size_t n = 0; n < mix.size(); ++n) {
        EXPECT_NEAR(cm[n], 2.0 * ca[n] - 0.5 * cb[n], 1e-13);
        // 0 <= rho <= 1 gives 0 <= rho * eta <= integral of eta.
        EXPECT_GE(ca[n], 0.0);
        EXPECT_LE(ca[n], k.integral() + 1e-13);
    }
}
