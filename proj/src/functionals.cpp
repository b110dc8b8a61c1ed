#include "crowd/functionals.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "crowd/errors.hpp"

namespace crowd {

double total_mass(const DensityField& rho) {
    double sum = 0.0;
    for (double v : rho.values()) sum += v;
    return sum * rho.grid().cell_area();
}

Metrics metrics(const DensityField& rho) {
    const Grid2D& g = rho.grid();
    Metrics m;
    m.mass = total_mass(rho);
    for (double v : rho.values()) m.linf = std::max(m.linf, v);
    double tv_x = 0.0;
    double tv_y = 0.0;
    for (int j = 0; j < g.ny(); ++j) {
        for (int i = 0; i < g.nx(); ++i) {
            if (i + 1 < g.nx()) tv_x += std::abs(rho(i + 1, j) - rho(i, j));
            if (j + 1 < g.ny()) tv_y += std::abs(rho(i, j + 1) - rho(i, j));
        }
    }
    m.tv = tv_x * g.dy() + tv_y * g.dx();
    return m;
}

double Penalty::operator()(double rho) const {
    if (kind == Kind::QuadraticExcess) {
        const double excess = std::max(0.0, rho - threshold);
        return excess * excess;
    }
    if (table.empty()) return 0.0;
    if (rho <= table.front().first) return table.front().second;
    if (rho >= table.back().first) return table.back().second;
    auto it = std::upper_bound(table.begin(), table.end(), rho,
                               [](double r, const auto& node) { return r < node.first; });
    const auto& hi = *it;
    const auto& lo = *(it - 1);
    return lo.second + (rho - lo.first) / (hi.first - lo.first) * (hi.second - lo.second);
}

void validate(const CostSpec& spec) {
    if (!(spec.horizon >= 0.0)) throw ConfigError("cost horizon must be non-negative");
    if (spec.region.empty()) throw ConfigError("cost region is empty");
    if (spec.penalty.kind == Penalty::Kind::Tabulated) {
        if (spec.penalty.table.empty()) throw ConfigError("tabulated penalty needs at least one node");
        for (std::size_t k = 0; k < spec.penalty.table.size(); ++k) {
            if (spec.penalty.table[k].second < 0.0) throw ConfigError("penalty must be non-negative");
            if (k > 0 && !(spec.penalty.table[k].first > spec.penalty.table[k - 1].first)) {
                throw ConfigError("penalty table densities must be strictly increasing");
            }
        }
    }
}

namespace {

double region_integral(const Snapshot& snap, const CostSpec& spec) {
    const DensityField rho = total_density(snap.densities);
    const Grid2D& g = rho.grid();
    double sum = 0.0;
    for (int j = 0; j < g.ny(); ++j) {
        for (int i = 0; i < g.nx(); ++i) {
            const Vec2 c = g.center(i, j);
            const bool inside = std::any_of(spec.region.begin(), spec.region.end(),
                                            [&](const Rect& r) { return r.contains(c); });
            if (inside) sum += spec.penalty(rho(i, j));
        }
    }
    return sum * g.cell_area();
}

}  // namespace

double cost_JT(const RunResult& run, const CostSpec& spec) {
    validate(spec);
    if (run.snapshots.empty()) throw ConfigError("run has no snapshots");
    const double horizon = spec.horizon;
    const double last = run.snapshots.back().t;
    if (horizon > last * (1.0 + 1e-12) + 1e-12) {
        throw ConfigError("cost horizon " + std::to_string(horizon) + " beyond run end " + std::to_string(last));
    }
    double total = 0.0;
    double prev_t = run.snapshots.front().t;
    double prev_s = region_integral(run.snapshots.front(), spec);
    for (std::size_t k = 1; k < run.snapshots.size() && prev_t < horizon; ++k) {
        const double t = run.snapshots[k].t;
        const double s = region_integral(run.snapshots[k], spec);
        if (t <= horizon) {
            total += 0.5 * (t - prev_t) * (s + prev_s);
        } else {
            const double w = (horizon - prev_t) / (t - prev_t);
            const double s_end = prev_s + w * (s - prev_s);
            total += 0.5 * (horizon - prev_t) * (s_end + prev_s);
        }
        prev_t = t;
        prev_s = s;
    }
    return total;
}

std::optional<double> evacuation_time(const RunResult& run, double fraction) {
    if (!(fraction > 0.0) || fraction > 1.0) throw ConfigError("evacuation fraction must lie in (0, 1]");
    const auto& t = run.metrics.t;
    const auto& m = run.metrics.total_mass;
    if (m.empty()) return std::nullopt;
    const double m0 = m.front();
    if (m0 <= 0.0) return 0.0;
    const double target = (1.0 - fraction) * m0;
    for (std::size_t k = 0; k < m.size(); ++k) {
        if (m[k] > target) continue;
        if (k == 0) return t[0];
        const double w = (m[k - 1] - target) / (m[k - 1] - m[k]);
        return t[k - 1] + w * (t[k] - t[k - 1]);
    }
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// Sensitivity

namespace {

void require_model_S(const SimulationSetup& setup) {
    if (setup.model.kind != ModelKind::S) throw ConfigError("linearized solver supports model S only");
    if (!setup.kernel) throw ConfigError("model S needs a kernel");
    if (setup.directions.empty()) throw ConfigError("setup has no direction field");
}

DensityField integrate_fixed(const Simulation& sim, const DensityField& rho0, std::span<const double> steps) {
    SimState state;
    state.densities = {rho0};
    for (double dt : steps) sim.advance(state, dt);
    return state.densities.front();
}

double l1_distance_scaled(const DensityField& a, const DensityField& b, double inv_h, const DensityField& r) {
    double sum = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) sum += std::abs((a[k] - b[k]) * inv_h - r[k]);
    return sum * a.grid().cell_area();
}

}  // namespace

LinearizedResult solve_linearized(const SimulationSetup& setup, const DensityField& rho0, const DensityField& r0,
                                  double end_time, const SchemeParams& scheme) {
    require_model_S(setup);
    validate(scheme);
    const RoomGeometry& geom = setup.geometry;
    if (!geom.grid().compatible(rho0.grid()) || !geom.grid().compatible(r0.grid())) {
        throw ConfigError("solve_linearized: grid mismatch");
    }
    const Kernel& kernel = *setup.kernel;
    const VectorField& nu = setup.directions.front();
    const SpeedLaw& law = setup.model.speed;

    LinearizedResult out{rho0, r0, {}};
    double t = 0.0;
    std::uint64_t step = 0;
    const AgentState no_agents;
    while (t < end_time) {
        const Transport tr = assemble_transport(setup.model, out.rho, geom, nu, &kernel, no_agents);
        const double dt = std::min(cfl_dt(tr.wave_speed, scheme), end_time - t);
        const ScalarField avg = convolve(out.rho, kernel);
        const ScalarField ravg = convolve(out.r, kernel);
        VectorField dv(geom.grid());
        const auto classes = geom.classes();
        for (std::size_t k = 0; k < dv.size(); ++k) {
            if (classes[k] == CellClass::Free) dv[k] = nu[k] * (law.derivative(avg[k]) * ravg[k]);
        }
        const SweepOrder order = step % 2 == 0 ? SweepOrder::XY : SweepOrder::YX;
        out.r = fv_step_tangent(out.rho, out.r, tr.velocity, dv, tr.wave_speed, dt, geom, order);
        out.steps.push_back(dt);
        t += dt;
        if (end_time - t < 1e-14 * std::max(1.0, end_time)) t = end_time;
        ++step;
    }
    return out;
}

GateauxResult gateaux_check(const SimulationSetup& setup, const DensityField& rho0, const DensityField& r0,
                            std::span<const double> hs, double end_time, const SchemeParams& scheme) {
    require_model_S(setup);
    for (std::size_t k = 0; k < hs.size(); ++k) {
        if (!(hs[k] > 0.0)) throw ConfigError("Gateaux step sizes must be positive");
        if (k > 0 && !(hs[k] < hs[k - 1])) throw ConfigError("Gateaux step sizes must be decreasing");
    }
    const LinearizedResult lin = solve_linearized(setup, rho0, r0, end_time, scheme);
    const Simulation sim(setup);
    const DensityField base = integrate_fixed(sim, rho0, lin.steps);

    GateauxResult result;
    for (double h : hs) {
        DensityField perturbed = rho0;
        for (std::size_t k = 0; k < perturbed.size(); ++k) perturbed[k] += h * r0[k];
        const DensityField rho_h = integrate_fixed(sim, perturbed, lin.steps);
        result.h.push_back(h);
        result.error.push_back(l1_distance_scaled(rho_h, base, 1.0 / h, lin.r));
    }
    result.nonincreasing = true;
    for (std::size_t k = 1; k < result.error.size(); ++k) {
        if (result.error[k] > result.error[k - 1]) result.nonincreasing = false;
    }
    result.slope = result.h.size() >= 2 ? loglog_slope(result.h, result.error) : std::numeric_limits<double>::quiet_NaN();
    return result;
}

double loglog_slope(std::span<const double> x, std::span<const double> y) {
    const std::size_t n = std::min(x.size(), y.size());
    if (n < 2) return std::numeric_limits<double>::quiet_NaN();
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        if (!(x[k] > 0.0) || !(y[k] > 0.0)) return std::numeric_limits<double>::quiet_NaN();
        const double lx = std::log(x[k]);
        const double ly = std::log(y[k]);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    const double dn = static_cast<double>(n);
    return (dn * sxy - sx * sy) / (dn * sxx - sx * sx);
}

}  // namespace crowd
