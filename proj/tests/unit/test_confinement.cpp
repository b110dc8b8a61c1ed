#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <set>

#include "crowd/confinement.hpp"
#include "crowd/errors.hpp"
#include "oracles.hpp"

using namespace crowd;

namespace {

constexpr double kPi = std::numbers::pi;

// Composite midpoint rule on a fine uniform grid.
double averaged_drift_oracle(const PsiProfile& psi, double R, double s) {
    const int n = 200000;
    double sum = 0.0;
    for (int k = 0; k < n; ++k) {
        const double th = (k + 0.5) * kPi / n;
        const double q = std::sqrt(R * R + s * s - 2.0 * s * R * std::cos(th));
        sum += psi(q) * (s - R * std::cos(th));
    }
    return sum / n;
}

}  // namespace

TEST(Psi, Families) {
    const PsiProfile c = PsiProfile::constant(-1.0);
    EXPECT_DOUBLE_EQ(c(3.0), -1.0);
    EXPECT_DOUBLE_EQ(c.derivative(3.0), 0.0);
    EXPECT_TRUE(c.bounded());
    const PsiProfile e = PsiProfile::exponential(2.0);
    EXPECT_NEAR(e(1.0), 2.0 * std::exp(-1.0), 1e-15);
    EXPECT_NEAR(e.derivative(1.0), -2.0 * std::exp(-1.0), 1e-15);
    const PsiProfile a = PsiProfile::affine(1.0, 0.5);
    EXPECT_FALSE(a.bounded());
    EXPECT_TRUE(PsiProfile::affine(1.0, 0.0).bounded());
    EXPECT_DOUBLE_EQ(a(2.0), 2.0);
}

TEST(Psi, HermiteTableReproducesCubic) {
    auto f = [](double r) { return 0.5 - r + 0.25 * r * r * r; };
    auto df = [](double r) { return -1.0 + 0.75 * r * r; };
    std::vector<double> r{0.0, 0.5, 1.5, 2.0}, p, d;
    for (double x : r) {
        p.push_back(f(x));
        d.push_back(df(x));
    }
    const PsiProfile t = PsiProfile::tabulated(r, p, d);
    for (double x : {0.1, 0.7, 1.2, 1.9}) {
        EXPECT_NEAR(t(x), f(x), 1e-13);
        EXPECT_NEAR(t.derivative(x), df(x), 1e-12);
    }
    EXPECT_DOUBLE_EQ(t(5.0), f(2.0));
    const PsiProfile lin = PsiProfile::tabulated({0.0, 1.0}, {1.0, 3.0});
    EXPECT_DOUBLE_EQ(lin(0.25), 1.5);
    EXPECT_FALSE(lin.has_derivative());
    EXPECT_THROW(lin.derivative(0.5), ConfigError);
    EXPECT_THROW(PsiProfile::tabulated({1.0, 0.5}, {1.0, 1.0}), ConfigError);
}

TEST(Drift, SumsOverAgents) {
    const PsiProfile psi = PsiProfile::constant(-1.0);
    EXPECT_EQ(drift(psi, {1.0, 2.0}, Vec2{0.0, 0.0}), (Vec2{-1.0, -2.0}));
    const std::vector<Vec2> agents{{1.0, 0.0}, {-1.0, 0.0}};
    EXPECT_EQ(drift(psi, {0.0, 0.5}, agents), (Vec2{0.0, -1.0}));
}

TEST(Track, OrbitAndWaypoints) {
    const AgentTrack o = orbit_strategy(2.0, 0.5, 0.25, {1.0, -1.0});
    const Vec2 p = o.position(1.0);
    EXPECT_NEAR(p.x, 1.0 + 2.0 * std::cos(0.75), 1e-15);
    EXPECT_NEAR(p.y, -1.0 + 2.0 * std::sin(0.75), 1e-15);
    EXPECT_DOUBLE_EQ(o.speed(), 1.0);
    AgentTrack w;
    w.kind = AgentTrack::Kind::Waypoints;
    w.waypoints = {{0.0, 0.0}, {3.0, 0.0}, {3.0, 4.0}};
    EXPECT_EQ(w.position(4.0), (Vec2{3.0, 1.0}));
    EXPECT_EQ(w.position(50.0), (Vec2{3.0, 4.0}));
}

TEST(Confinement, AveragedDriftMatchesQuadratureOracle) {
    EXPECT_NEAR(averaged_radial_drift(PsiProfile::constant(-1.0), 1.0, 0.7), -0.7, 1e-8);
    const PsiProfile e = PsiProfile::exponential(1.0);
    for (double s : {0.3, 0.9, 1.0, 1.7, 2.5}) {
        EXPECT_NEAR(averaged_radial_drift(e, 1.0, s), averaged_drift_oracle(e, 1.0, s), 1e-7) << s;
    }
}

TEST(Confinement, AttractingOrbitHoldsWithAnalyticMargin) {
    const ConfinementVerdict v = confinement_condition(PsiProfile::constant(-1.0), 0.5, 1.0, 0.6, 2.0);
    EXPECT_TRUE(v.holds);
    EXPECT_NEAR(v.margin, 0.1, 1e-6);
    EXPECT_NEAR(v.worst_radius, 0.6, 1e-6);
    EXPECT_GE(v.evaluations, 200u);
    const ConfinementVerdict weak = confinement_condition(PsiProfile::constant(-1.0), 0.7, 1.0, 0.6, 2.0);
    EXPECT_FALSE(weak.holds);
    EXPECT_NEAR(weak.margin, -0.1, 1e-6);
    EXPECT_THROW(confinement_condition(PsiProfile::affine(0.0, -1.0), 0.5, 1.0, 0.6, 2.0), ConfigError);
    EXPECT_THROW(confinement_condition(PsiProfile::constant(-1.0), 0.5, 1.0, 2.0, 0.6), ConfigError);
}

TEST(Dispersal, PhiAndRearrangement) {
    EXPECT_DOUBLE_EQ(dispersal_phi(PsiProfile::constant(0.0), 3.0), 0.0);
    EXPECT_DOUBLE_EQ(dispersal_phi(PsiProfile::constant(-0.5), 3.0), -1.0);
    const double q = std::sqrt(2.0 / kPi);
    EXPECT_NEAR(dispersal_phi(PsiProfile::exponential(1.0), 2.0), -std::exp(-q) * q + 2.0 * std::exp(-q), 1e-14);

    std::mt19937 gen(5);
    std::uniform_real_distribution<double> u(-3.0, 3.0);
    std::vector<double> xs(1001);
    for (double& x : xs) x = u(gen);
    xs[10] = xs[20];
    std::vector<double> sorted = xs;
    std::sort(sorted.begin(), sorted.end());
    EXPECT_EQ(rearrange(xs), sorted);
}

TEST(Dispersal, Verdicts) {
    const DispersalVerdict zero = dispersal_condition(PsiProfile::constant(0.0), 1.0, kPi, 20.0 * kPi);
    EXPECT_TRUE(zero.holds);
    EXPECT_TRUE(zero.tail_conclusive);
    EXPECT_FALSE(zero.first_violation.has_value());
    EXPECT_NEAR(zero.margin, 2.0 * std::sqrt(kPi * kPi), 1e-9);
    EXPECT_TRUE(dispersal_condition(PsiProfile::exponential(1.0), 1.0, kPi, 20.0 * kPi).holds);
    // phi = -2: 0.2 sqrt(pi s) - 2 s turns negative at s = 0.01 pi.
    const DispersalVerdict pull = dispersal_condition(PsiProfile::constant(-1.0), 0.1, 0.01, 1.0);
    EXPECT_FALSE(pull.holds);
    ASSERT_TRUE(pull.first_violation.has_value());
    EXPECT_NEAR(*pull.first_violation, 0.01 * kPi, 1e-3);
    EXPECT_FALSE(pull.tail_conclusive);
}

TEST(Reach, FreeBallGrowsAtSpeedC) {
    ReachParams p;
    p.domain = {-3.0, 3.0, -3.0, 3.0};
    p.dx = 0.05;
    p.end_time = 1.5;
    p.snapshot_interval = 0.5;
    const std::vector<Obstacle> k0{Disc{{0.0, 0.0}, 0.5}};
    const ReachResult r = reach_evolve(k0, {}, PsiProfile::constant(0.0), 1.0, p);
    ASSERT_EQ(r.snapshots.size(), 4u);
    for (std::size_t k = 0; k < r.snapshots.size(); ++k) {
        const double t = r.snapshots[k].t;
        EXPECT_NEAR(r.snapshots[k].area() / (kPi * (0.5 + t) * (0.5 + t)), 1.0, 0.05) << t;
    }
    for (std::size_t k = 1; k < r.area.size(); ++k) EXPECT_GE(r.area[k], r.area[k - 1]);
}

TEST(Reach, StillSetWithoutMotion) {
    ReachParams p;
    p.domain = {-2.0, 2.0, -2.0, 2.0};
    p.dx = 0.05;
    p.end_time = 1.0;
    const std::vector<Obstacle> k0{Rect{-0.5, 0.5, -0.3, 0.3}};
    const ReachResult r = reach_evolve(k0, {}, PsiProfile::constant(0.0), 0.0, p);
    EXPECT_EQ(oracle::inside_cells(r.snapshots.front()), oracle::inside_cells(r.snapshots.back()));
}

TEST(Reach, DomainTooSmallIsReported) {
    ReachParams p;
    p.domain = {-1.0, 1.0, -1.0, 1.0};
    p.dx = 0.05;
    p.end_time = 2.0;
    const std::vector<Obstacle> k0{Disc{{0.0, 0.0}, 0.5}};
    EXPECT_THROW(reach_evolve(k0, {}, PsiProfile::constant(0.0), 1.0, p), NumericalError);
}

TEST(Reach, MatchesParticleCloud) {
    const double dx = 0.1;
    const double T = 1.0;
    const double c = 0.5;
    const PsiProfile psi = PsiProfile::constant(-1.0);
    const std::vector<AgentTrack> tracks{orbit_strategy(1.0, 1.0, 0.0)};
    ReachParams p;
    p.domain = {-3.0, 3.0, -3.0, 3.0};
    p.dx = dx;
    p.end_time = T;
    p.snapshot_interval = T;
    const std::vector<Obstacle> k0{Disc{{0.0, 0.0}, 0.6}};
    const ReachResult r = reach_evolve(k0, tracks, psi, c, p);

    const auto f = [&](Vec2 x, double t) { return drift(psi, x, tracks[0].position(t)); };
    const std::set<oracle::Cell> particles =
        oracle::particle_cloud(r.snapshots.back().u.grid(), std::get<Disc>(k0[0]), f, c, T, 20, 32);
    EXPECT_LE(oracle::hausdorff_cells(oracle::inside_cells(r.snapshots.back()), particles), 1);
}
