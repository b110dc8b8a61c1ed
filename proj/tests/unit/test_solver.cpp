#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "crowd/errors.hpp"
#include "crowd/functionals.hpp"
#include "crowd/geometry.hpp"
#include "crowd/solver.hpp"

using namespace crowd;

namespace {

double bump(Vec2 x, Vec2 c, double r) {
    const double s = norm(x - c) / r;
    if (s >= 1.0) return 0.0;
    const double w = 1.0 - s * s;
    return w * w * w * w;
}

SimulationSetup transport_setup(double dx, Vec2 direction, double speed) {
    SimulationSetup setup;
    setup.model.kind = ModelKind::Local;
    setup.model.speed = SpeedLaw::constant(speed);
    setup.geometry = rasterize_geometry({0, 2, 0, 2}, {}, {}, dx);
    VectorField nu(setup.geometry.grid());
    for (std::size_t k = 0; k < nu.size(); ++k) {
        if (setup.geometry.classes()[k] == CellClass::Free) nu[k] = direction;
    }
    setup.directions.push_back(nu);
    return setup;
}

SimulationSetup room_setup(ModelKind kind, bool with_exit) {
    SimulationSetup setup;
    setup.model.kind = kind;
    setup.model.speed = SpeedLaw::linear(2.0, 1.0);
    setup.model.epsilon = 0.2;
    setup.model.kernel = KernelSpec{KernelProfile::Poly3, 0.3, kind == ModelKind::S, {}};
    std::vector<Rect> exits;
    if (with_exit) exits.push_back({3.0, 3.2, 1.0, 2.0});
    const std::vector<Obstacle> obstacles{Disc{{2.0, 1.5}, 0.3}};
    setup.geometry = rasterize_geometry({0, 3, 0, 3}, obstacles, exits, 0.05);
    setup.kernel = build_kernel(*setup.model.kernel, setup.geometry.grid());
    VectorField nu(setup.geometry.grid());
    for (std::size_t k = 0; k < nu.size(); ++k) {
        if (setup.geometry.classes()[k] == CellClass::Free) nu[k] = Vec2{0.8, 0.6};
    }
    setup.directions.push_back(nu);
    return setup;
}

}  // namespace

TEST(Cfl, TimeStepFormula) {
    const Grid2D g({0.0, 0.0}, 0.05, 0.05, 4, 4);
    VectorField w(g, Vec2{});
    const SchemeParams p{0.45, 0.05, 1.0, 1.0};
    EXPECT_DOUBLE_EQ(cfl_dt(w, p), 0.05);
    w(1, 2) = {-3.0, 1.0};
    EXPECT_DOUBLE_EQ(cfl_dt(w, p), 0.45 * 0.05 / 3.0);
    EXPECT_DOUBLE_EQ(cfl_dt(w, p, 0.001), 0.001);
    EXPECT_THROW(validate(SchemeParams{0.6, 0.05, 1.0, 1.0}), ConfigError);
    EXPECT_THROW(validate(SchemeParams{0.45, 0.0, 1.0, 1.0}), ConfigError);
}

TEST(FvStep, ZeroVelocityLeavesDensityUnchanged) {
    const RoomGeometry geom = rasterize_geometry({0, 1, 0, 1}, {}, {}, 0.05);
    const DensityField rho = indicator_datum(geom.grid(), {0.2, 0.6, 0.3, 0.9}, 0.7);
    const DensityField next = fv_step(rho, VectorField(geom.grid()), 0.01, geom);
    EXPECT_EQ(next, rho);
}

TEST(FvStep, RejectsCflViolation) {
    const RoomGeometry geom = rasterize_geometry({0, 1, 0, 1}, {}, {}, 0.05);
    const DensityField rho = indicator_datum(geom.grid(), {0.2, 0.6, 0.3, 0.9}, 0.7);
    VectorField v(geom.grid());
    for (std::size_t k = 0; k < v.size(); ++k) {
        if (geom.classes()[k] == CellClass::Free) v[k] = {1.0, 0.0};
    }
    EXPECT_NO_THROW(fv_step(rho, v, 0.025, geom));
    EXPECT_THROW(fv_step(rho, v, 0.03, geom), NumericalError);
}

TEST(FvStep, ExitsDrainAndStayEmpty) {
    const std::vector<Rect> exits{Rect{1.0, 1.2, 0.0, 1.0}};
    const RoomGeometry geom = rasterize_geometry({0, 1, 0, 1}, {}, exits, 0.05);
    DensityField rho = indicator_datum(geom.grid(), {0.5, 1.0, 0.0, 1.0}, 0.5);
    VectorField v(geom.grid());
    for (std::size_t k = 0; k < v.size(); ++k) {
        if (geom.classes()[k] == CellClass::Free) v[k] = {1.0, 0.0};
    }
    const double m0 = total_mass(rho);
    double drained = 0.0;
    for (int n = 0; n < 10; ++n) {
        rho = fv_step(rho, v, VectorField(v), 0.02, geom, n % 2 ? SweepOrder::YX : SweepOrder::XY, &drained);
    }
    EXPECT_LT(total_mass(rho), m0);
    EXPECT_NEAR(total_mass(rho) + drained, m0, 1e-12 * m0);
    for (std::size_t k = 0; k < rho.size(); ++k) {
        if (geom.classes()[k] != CellClass::Free) EXPECT_EQ(rho[k], 0.0);
        EXPECT_GE(rho[k], 0.0);
    }
}

TEST(Simulation, WalledRoomConservesMassForEveryModel) {
    for (ModelKind kind : {ModelKind::Local, ModelKind::S, ModelKind::R}) {
        const Simulation sim(room_setup(kind, false));
        SimState state;
        state.densities.push_back(indicator_datum(sim.setup().geometry.grid(), {0.3, 1.5, 0.3, 2.5}, 0.8));
        const double m0 = total_mass(state.densities[0]);
        const SchemeParams p{0.45, 0.05, 100.0, 100.0};
        for (int n = 0; n < 200; ++n) {
            const auto tr = sim.transports(state);
            sim.advance(state, sim.stable_dt(tr, p), tr);
        }
        EXPECT_NEAR(total_mass(state.densities[0]) / m0, 1.0, 1e-12);
        double lo = 1.0, hi = 0.0;
        for (double v : state.densities[0].values()) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        EXPECT_GE(lo, 0.0);
        // Only the local-speed models obey the jam bound.
        if (kind != ModelKind::S) EXPECT_LE(hi, 1.0 + 1e-12);
    }
}

TEST(Simulation, PopulationsEvolveIndependently) {
    const Simulation one(room_setup(ModelKind::R, true));
    SimulationSetup pair = one.setup();
    VectorField west = pair.directions.front();
    for (Vec2& v : west.values()) v = -v;
    pair.directions.push_back(west);
    const Simulation two(pair);
    SimulationSetup alone_setup = one.setup();
    alone_setup.directions = {west};
    const Simulation alone(alone_setup);
    const Grid2D& g = one.setup().geometry.grid();
    SimState a, b, both;
    a.densities = {indicator_datum(g, {0.3, 1.5, 0.3, 2.5}, 0.8)};
    b.densities = {indicator_datum(g, {1.0, 2.8, 1.0, 2.0}, 0.6)};
    both.densities = {a.densities[0], b.densities[0]};
    for (int n = 0; n < 40; ++n) {
        one.advance(a, 0.005);
        alone.advance(b, 0.005);
        two.advance(both, 0.005);
    }
    EXPECT_EQ(both.densities[0], a.densities[0]);
    EXPECT_EQ(both.densities[1], b.densities[0]);
}

TEST(Simulation, ConstantVelocityTranslationConverges) {
    const Vec2 dir{0.8, 0.6};
    const Vec2 c0{0.6, 0.6};
    const double T = 0.5;
    std::vector<double> hs, errs;
    for (double dx : {0.04, 0.02, 0.01}) {
        const Simulation sim(transport_setup(dx, dir, 1.0));
        const Grid2D& g = sim.setup().geometry.grid();
        SimState s;
        DensityField rho(g, 0.0);
        for (int j = 0; j < g.ny(); ++j) {
            for (int i = 0; i < g.nx(); ++i) {
                if (sim.setup().geometry.at(i, j) == CellClass::Free) rho(i, j) = bump(g.center(i, j), c0, 0.4);
            }
        }
        s.densities = {rho};
        RunControl control;
        control.scheme = {0.45, 1.0, T, T};
        const RunResult r = run(sim, s, control);
        const DensityField& out = r.snapshots.back().densities.front();
        double err = 0.0;
        for (int j = 0; j < g.ny(); ++j) {
            for (int i = 0; i < g.nx(); ++i) err += std::abs(out(i, j) - bump(g.center(i, j), c0 + dir * T, 0.4));
        }
        hs.push_back(dx);
        errs.push_back(err * g.cell_area());
    }
    for (std::size_t k = 1; k < errs.size(); ++k) EXPECT_GE(std::log2(errs[k - 1] / errs[k]), 0.7);
    EXPECT_GE(loglog_slope(hs, errs), 0.7);
}

TEST(Agents, MidpointRuleIsSecondOrder) {
    const AgentDrift rotation = [](double, std::span<const Vec2> p) {
        std::vector<Vec2> v;
        for (const Vec2& x : p) v.push_back(perp(x));
        return v;
    };
    std::vector<double> dts, errs;
    for (int n : {20, 40, 80, 160}) {
        std::vector<Vec2> p{{1.0, 0.0}, {0.0, 2.0}};
        const double dt = 1.0 / n;
        for (int k = 0; k < n; ++k) p = rk2_agents(p, k * dt, dt, rotation);
        const double err = norm(p[0] - Vec2{std::cos(1.0), std::sin(1.0)}) +
                           norm(p[1] - Vec2{-2.0 * std::sin(1.0), 2.0 * std::cos(1.0)});
        dts.push_back(dt);
        errs.push_back(err);
    }
    EXPECT_GE(loglog_slope(dts, errs), 1.8);
}

TEST(Run, ZeroEndTimeGivesInitialSnapshot) {
    const Simulation sim(room_setup(ModelKind::R, true));
    SimState s;
    s.densities.push_back(indicator_datum(sim.setup().geometry.grid(), {0.3, 1.5, 0.3, 2.5}, 0.8));
    RunControl control;
    control.scheme = {0.45, 0.05, 0.0, 1.0};
    const RunResult r = run(sim, s, control);
    ASSERT_EQ(r.snapshots.size(), 1u);
    EXPECT_EQ(r.steps, 0u);
    EXPECT_EQ(r.snapshots[0].densities[0], s.densities[0]);
}

TEST(Run, DeterministicAndPositiveWithExit) {
    const Simulation sim(room_setup(ModelKind::R, true));
    SimState s;
    s.densities.push_back(indicator_datum(sim.setup().geometry.grid(), {0.3, 1.5, 0.3, 2.5}, 0.8));
    RunControl control;
    control.scheme = {0.45, 0.05, 1.0, 0.25};
    const RunResult a = run(sim, s, control);
    const RunResult b = run(sim, s, control);
    ASSERT_EQ(a.snapshots.size(), 5u);
    for (std::size_t k = 0; k < a.snapshots.size(); ++k) {
        EXPECT_DOUBLE_EQ(a.snapshots[k].t, 0.25 * k);
        EXPECT_EQ(a.snapshots[k].densities[0], b.snapshots[k].densities[0]);
    }
    EXPECT_EQ(a.metrics.total_mass, b.metrics.total_mass);
    EXPECT_GE(a.rho_min, 0.0);
    EXPECT_LE(a.rho_max, 1.0 + 1e-3);
    EXPECT_GT(a.outflow, 0.0);
    for (std::size_t k = 1; k < a.metrics.total_mass.size(); ++k) {
        EXPECT_LE(a.metrics.total_mass[k], a.metrics.total_mass[k - 1] + 1e-12);
    }
}

TEST(Run, StopsOnEvacuation) {
    SimulationSetup setup = room_setup(ModelKind::Local, true);
    setup.directions = {geodesic_directions(solve_eikonal(setup.geometry), setup.geometry)};
    const Simulation sim(setup);
    SimState s;
    s.densities.push_back(indicator_datum(sim.setup().geometry.grid(), {2.5, 2.9, 1.2, 1.8}, 0.5));
    RunControl control;
    control.scheme = {0.45, 0.05, 30.0, 1.0};
    control.evacuation_fraction = 0.9;
    const RunResult r = run(sim, s, control);
    EXPECT_EQ(r.stop, StopReason::Evacuated);
    EXPECT_LE(r.metrics.total_mass.back(), 0.1 * r.metrics.total_mass.front() + 1e-15);
    const auto te = evacuation_time(r, 0.9);
    ASSERT_TRUE(te.has_value());
    EXPECT_LE(*te, r.metrics.t.back());
}
