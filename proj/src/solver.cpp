#include "crowd/solver.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <string>

#include "crowd/functionals.hpp"
#include "crowd/log.hpp"
#include "crowd/parallel.hpp"

namespace crowd {

void validate(const SchemeParams& p) {
    if (!(p.cfl > 0.0) || p.cfl > 0.5) throw ConfigError("cfl must lie in (0, 0.5]");
    if (!(p.dt_max > 0.0) || !std::isfinite(p.dt_max)) throw ConfigError("dt_max must be positive");
    if (!(p.end_time >= 0.0) || !std::isfinite(p.end_time)) throw ConfigError("end_time must be non-negative");
    if (!(p.snapshot_interval > 0.0) || !std::isfinite(p.snapshot_interval)) {
        throw ConfigError("snapshot_interval must be positive");
    }
}

double cfl_dt(const VectorField& speeds, const SchemeParams& params, double until_next) {
    double vmax = 0.0;
    for (const Vec2& v : speeds.values()) vmax = std::max({vmax, std::abs(v.x), std::abs(v.y)});
    const Grid2D& g = speeds.grid();
    double dt = params.dt_max;
    if (vmax > 0.0) dt = std::min(dt, params.cfl * std::min(g.dx(), g.dy()) / vmax);
    return std::min(dt, until_next);
}

// ---------------------------------------------------------------------------
// Split Lax-Friedrichs sweeps

namespace {

constexpr double kCflSlack = 1e-12;
// Values this small are set to zero so the arithmetic never goes subnormal.
constexpr double kFlush = 1e-250;

double flush(double v) { return std::abs(v) < kFlush ? 0.0 : v; }

struct FaceFlux {
    static double value(CellClass cl, CellClass cr, double rl, double rr, double vl, double vr, double alpha) {
        if (cl == CellClass::Wall || cr == CellClass::Wall) return 0.0;
        if (cl == CellClass::Free && cr == CellClass::Free) return 0.5 * (rl * vl + rr * vr) - 0.5 * alpha * (rr - rl);
        if (cl == CellClass::Free) return rl * std::max(vl, 0.0);  // into exit
        if (cr == CellClass::Free) return rr * std::min(vr, 0.0);  // out of the right cell into exit on the left
        return 0.0;
    }

    // Derivative of value() along (r, dv) at fixed alpha.
    static double tangent(CellClass cl, CellClass cr, double rl, double rr, double vl, double vr, double ql,
                          double qr, double dvl, double dvr, double alpha) {
        if (cl == CellClass::Wall || cr == CellClass::Wall) return 0.0;
        if (cl == CellClass::Free && cr == CellClass::Free) {
            return 0.5 * (ql * vl + qr * vr + rl * dvl + rr * dvr) - 0.5 * alpha * (qr - ql);
        }
        if (cl == CellClass::Free) return vl > 0.0 ? ql * vl + rl * dvl : 0.0;
        if (cr == CellClass::Free) return vr < 0.0 ? qr * vr + rr * dvr : 0.0;
        return 0.0;
    }
};

enum class Axis { X, Y };

double component(const Vec2& v, Axis axis) { return axis == Axis::X ? v.x : v.y; }

void check_cfl(const VectorField& wave, const RoomGeometry& geom, double dt) {
    const Grid2D& g = geom.grid();
    const auto classes = geom.classes();
    double worst = 0.0;
    for (std::size_t k = 0; k < g.size(); ++k) {
        if (classes[k] != CellClass::Free) continue;
        worst = std::max({worst, dt * std::abs(wave[k].x) / g.dx(), dt * std::abs(wave[k].y) / g.dy()});
    }
    if (worst > 0.5 + kCflSlack) {
        throw NumericalError("CFL violation: dt * alpha / h = " + std::to_string(worst) + " > 0.5");
    }
}

// One sweep along `axis`. With `tangent` set, also advances the perturbation
// q (reading rho before the sweep) using the velocity perturbation dv.
void sweep(Axis axis, const DensityField& rho, DensityField& rho_out, const VectorField& vel, const VectorField& wave,
           double dt, const RoomGeometry& geom, double& outflow, const DensityField* q = nullptr,
           DensityField* q_out = nullptr, const VectorField* dvel = nullptr) {
    const Grid2D& g = geom.grid();
    const auto classes = geom.classes();
    const bool tangent = q != nullptr;
    const double h = axis == Axis::X ? g.dx() : g.dy();
    const double lambda = dt / h;
    const double face_len = axis == Axis::X ? g.dy() : g.dx();

    auto face = [&](std::size_t kl, std::size_t kr, double& f, double& fq) {
        const double vl = component(vel[kl], axis);
        const double vr = component(vel[kr], axis);
        const double alpha = std::max(std::abs(component(wave[kl], axis)), std::abs(component(wave[kr], axis)));
        f = FaceFlux::value(classes[kl], classes[kr], rho[kl], rho[kr], vl, vr, alpha);
        if (tangent) {
            fq = FaceFlux::tangent(classes[kl], classes[kr], rho[kl], rho[kr], vl, vr, (*q)[kl], (*q)[kr],
                                   component((*dvel)[kl], axis), component((*dvel)[kr], axis), alpha);
        }
    };
    auto exit_face = [&](std::size_t kl, std::size_t kr) {
        return (classes[kl] == CellClass::Exit) != (classes[kr] == CellClass::Exit) &&
               classes[kl] != CellClass::Wall && classes[kr] != CellClass::Wall;
    };

    if (axis == Axis::X) {
        std::vector<double> row_out(static_cast<std::size_t>(g.ny()), 0.0);
        parallel_for(g.ny(), [&](int j0, int j1) {
            std::vector<double> flux(static_cast<std::size_t>(g.nx() + 1), 0.0);
            std::vector<double> qflux(static_cast<std::size_t>(g.nx() + 1), 0.0);
            for (int j = j0; j < j1; ++j) {
                double out = 0.0;
                for (int i = 0; i + 1 < g.nx(); ++i) {
                    const std::size_t kl = g.index(i, j);
                    face(kl, kl + 1, flux[static_cast<std::size_t>(i + 1)], qflux[static_cast<std::size_t>(i + 1)]);
                    if (exit_face(kl, kl + 1)) {
                        out += classes[kl + 1] == CellClass::Exit ? flux[static_cast<std::size_t>(i + 1)]
                                                                   : -flux[static_cast<std::size_t>(i + 1)];
                    }
                }
                for (int i = 0; i < g.nx(); ++i) {
                    const std::size_t k = g.index(i, j);
                    const std::size_t fi = static_cast<std::size_t>(i);
                    if (classes[k] == CellClass::Free) {
                        rho_out[k] = flush(rho[k] - lambda * (flux[fi + 1] - flux[fi]));
                        if (tangent) (*q_out)[k] = flush((*q)[k] - lambda * (qflux[fi + 1] - qflux[fi]));
                    } else {
                        rho_out[k] = 0.0;
                        if (tangent) (*q_out)[k] = 0.0;
                    }
                }
                row_out[static_cast<std::size_t>(j)] = out;
            }
        });
        double total = 0.0;
        for (double v : row_out) total += v;
        outflow += total * dt * face_len;
        return;
    }

    // Y sweep: face j+1/2 between rows j and j+1, processed row by row.
    const std::size_t nx = static_cast<std::size_t>(g.nx());
    std::vector<double> below(nx, 0.0), above(nx, 0.0), qbelow(nx, 0.0), qabove(nx, 0.0);
    double out = 0.0;
    for (int j = 0; j < g.ny(); ++j) {
        if (j + 1 < g.ny()) {
            for (int i = 0; i < g.nx(); ++i) {
                const std::size_t kl = g.index(i, j);
                const std::size_t kr = g.index(i, j + 1);
                face(kl, kr, above[static_cast<std::size_t>(i)], qabove[static_cast<std::size_t>(i)]);
                if (exit_face(kl, kr)) {
                    out += classes[kr] == CellClass::Exit ? above[static_cast<std::size_t>(i)]
                                                          : -above[static_cast<std::size_t>(i)];
                }
            }
        } else {
            std::fill(above.begin(), above.end(), 0.0);
            std::fill(qabove.begin(), qabove.end(), 0.0);
        }
        for (int i = 0; i < g.nx(); ++i) {
            const std::size_t k = g.index(i, j);
            const std::size_t fi = static_cast<std::size_t>(i);
            if (classes[k] == CellClass::Free) {
                rho_out[k] = flush(rho[k] - lambda * (above[fi] - below[fi]));
                if (tangent) (*q_out)[k] = flush((*q)[k] - lambda * (qabove[fi] - qbelow[fi]));
            } else {
                rho_out[k] = 0.0;
                if (tangent) (*q_out)[k] = 0.0;
            }
        }
        std::swap(below, above);
        std::swap(qbelow, qabove);
    }
    outflow += out * dt * face_len;
}

VectorField abs_velocity(const VectorField& v) {
    VectorField a(v.grid());
    for (std::size_t k = 0; k < v.size(); ++k) a[k] = {std::abs(v[k].x), std::abs(v[k].y)};
    return a;
}

}  // namespace

DensityField fv_step(const DensityField& rho, const VectorField& velocity, const VectorField& wave_speed, double dt,
                     const RoomGeometry& geometry, SweepOrder order, double* outflow) {
    const Grid2D& g = geometry.grid();
    if (!g.compatible(rho.grid()) || !g.compatible(velocity.grid()) || !g.compatible(wave_speed.grid())) {
        throw ConfigError("fv_step: grid mismatch");
    }
    if (!(dt >= 0.0)) throw NumericalError("fv_step: negative time step");
    check_cfl(wave_speed, geometry, dt);
    DensityField mid(g, 0.0);
    DensityField out(g, 0.0);
    double gone = 0.0;
    const Axis first = order == SweepOrder::XY ? Axis::X : Axis::Y;
    const Axis second = order == SweepOrder::XY ? Axis::Y : Axis::X;
    sweep(first, rho, mid, velocity, wave_speed, dt, geometry, gone);
    sweep(second, mid, out, velocity, wave_speed, dt, geometry, gone);
    if (outflow != nullptr) *outflow += gone;
    return out;
}

DensityField fv_step(const DensityField& rho, const VectorField& velocity, double dt, const RoomGeometry& geometry,
                     SweepOrder order) {
    return fv_step(rho, velocity, abs_velocity(velocity), dt, geometry, order);
}

DensityField fv_step_tangent(DensityField& rho, const DensityField& r, const VectorField& velocity,
                             const VectorField& dvelocity, const VectorField& wave_speed, double dt,
                             const RoomGeometry& geometry, SweepOrder order) {
    const Grid2D& g = geometry.grid();
    check_cfl(wave_speed, geometry, dt);
    DensityField rho_mid(g, 0.0), r_mid(g, 0.0), rho_out(g, 0.0), r_out(g, 0.0);
    double gone = 0.0;
    const Axis first = order == SweepOrder::XY ? Axis::X : Axis::Y;
    const Axis second = order == SweepOrder::XY ? Axis::Y : Axis::X;
    sweep(first, rho, rho_mid, velocity, wave_speed, dt, geometry, gone, &r, &r_mid, &dvelocity);
    sweep(second, rho_mid, rho_out, velocity, wave_speed, dt, geometry, gone, &r_mid, &r_out, &dvelocity);
    rho = std::move(rho_out);
    return r_out;
}

std::vector<Vec2> rk2_agents(std::span<const Vec2> positions, double t, double dt, const AgentDrift& drift) {
    std::vector<Vec2> p(positions.begin(), positions.end());
    if (p.empty()) return p;
    const std::vector<Vec2> k1 = drift(t, p);
    std::vector<Vec2> mid(p.size());
    for (std::size_t a = 0; a < p.size(); ++a) mid[a] = p[a] + k1[a] * (0.5 * dt);
    const std::vector<Vec2> k2 = drift(t + 0.5 * dt, mid);
    for (std::size_t a = 0; a < p.size(); ++a) p[a] += k2[a] * dt;
    return p;
}

DensityField total_density(std::span<const DensityField> densities) {
    if (densities.empty()) return {};
    DensityField sum = densities.front();
    for (std::size_t n = 1; n < densities.size(); ++n) {
        for (std::size_t k = 0; k < sum.size(); ++k) sum[k] += densities[n][k];
    }
    return sum;
}

// ---------------------------------------------------------------------------
// Simulation

Simulation::Simulation(SimulationSetup setup) : setup_(std::move(setup)) {
    retain_heap();
    const ModelKind kind = setup_.model.kind;
    const bool needs_kernel = kind != ModelKind::Local;
    if (needs_kernel && !setup_.kernel) throw ConfigError("model needs a kernel");
    if (setup_.directions.empty()) throw ConfigError("simulation needs at least one population");
    for (const auto& d : setup_.directions) {
        if (!d.grid().compatible(setup_.geometry.grid())) throw ConfigError("direction field grid mismatch");
    }
}

std::vector<Transport> Simulation::transports(const SimState& state) const {
    std::vector<Transport> out;
    out.reserve(state.densities.size());
    const Kernel* kernel = setup_.kernel ? &*setup_.kernel : nullptr;
    for (std::size_t n = 0; n < state.densities.size(); ++n) {
        out.push_back(assemble_transport(setup_.model, state.densities[n], setup_.geometry, setup_.directions[n], kernel,
                                         state.agents));
    }
    return out;
}

double Simulation::stable_dt(std::span<const Transport> transports, const SchemeParams& params,
                             double until_next) const {
    double dt = std::min(params.dt_max, until_next);
    for (const Transport& tr : transports) dt = std::min(dt, cfl_dt(tr.wave_speed, params, until_next));
    if (std::isfinite(until_next) && until_next - dt <= 1e-9 * until_next) dt = until_next;
    return dt;
}

AgentDrift Simulation::agent_drift(const DensityField& rho_total, const std::vector<AgentRole>& roles) const {
    if (setup_.agent_drift_override) return setup_.agent_drift_override;
    const ModelKind kind = setup_.model.kind;
    if (kind == ModelKind::Piper) {
        auto averaged = std::make_shared<const ScalarField>(convolve(rho_total, *setup_.kernel));
        return [averaged, roles, track = setup_.track](double t, std::span<const Vec2> p) {
            std::vector<Vec2> v(p.size());
            for (std::size_t a = 0; a < p.size(); ++a) {
                if (roles[a] == AgentRole::Leader) v[a] = phi_piper(*averaged, p[a], t, track);
            }
            return v;
        };
    }
    if (kind == ModelKind::Shepherd) {
        auto gradient = std::make_shared<const VectorField>(convolve_grad(rho_total, *setup_.kernel));
        return [gradient, roles, sign = setup_.model.perp_sign](double, std::span<const Vec2> p) {
            const AgentState probe{{p.begin(), p.end()}, roles};
            return phi_dogs(*gradient, probe, sign);
        };
    }
    return [](double, std::span<const Vec2> p) { return std::vector<Vec2>(p.size()); };
}

void Simulation::advance(SimState& state, double dt) const { advance(state, dt, transports(state)); }

void Simulation::advance(SimState& state, double dt, std::span<const Transport> transports) const {
    if (transports.size() != state.densities.size()) throw ConfigError("advance: one transport per population");
    const SweepOrder order = state.step % 2 == 0 ? SweepOrder::XY : SweepOrder::YX;
    if (!state.agents.positions.empty()) {
        const AgentDrift drift = agent_drift(total_density(state.densities), state.agents.roles);
        state.agents.positions = rk2_agents(state.agents.positions, state.t, dt, drift);
    }
    const bool local_speed =
        std::all_of(transports.begin(), transports.end(), [](const Transport& tr) { return tr.local_speed; });
    if (!local_speed) {
        for (std::size_t n = 0; n < state.densities.size(); ++n) {
            state.densities[n] = fv_step(state.densities[n], transports[n].velocity, transports[n].wave_speed, dt,
                                         setup_.geometry, order);
        }
    } else {
        // v(rho) is re-evaluated on the half-step density so each sweep is a
        // consistent flux rho v(rho) W + rho U.
        const RoomGeometry& geom = setup_.geometry;
        const Grid2D& g = geom.grid();
        const Axis first = order == SweepOrder::XY ? Axis::X : Axis::Y;
        const Axis second = order == SweepOrder::XY ? Axis::Y : Axis::X;
        double gone = 0.0;
        std::vector<DensityField> mid;
        mid.reserve(state.densities.size());
        for (std::size_t n = 0; n < state.densities.size(); ++n) {
            check_cfl(transports[n].wave_speed, geom, dt);
            mid.emplace_back(g, 0.0);
            sweep(first, state.densities[n], mid.back(), transports[n].velocity, transports[n].wave_speed, dt, geom,
                  gone);
        }
        const auto classes = geom.classes();
        const SpeedLaw& law = setup_.model.speed;
        VectorField velocity(g);
        for (std::size_t n = 0; n < state.densities.size(); ++n) {
            const Transport& tr = transports[n];
            for (std::size_t k = 0; k < g.size(); ++k) {
                velocity[k] = classes[k] == CellClass::Free ? tr.direction[k] * law(mid[n][k]) + tr.drift[k] : Vec2{};
            }
            sweep(second, mid[n], state.densities[n], velocity, tr.wave_speed, dt, geom, gone);
        }
    }
    state.t += dt;
    ++state.step;
}

SimState advance(const SimState& state, double dt, const SimulationSetup& setup) {
    Simulation sim(setup);
    SimState next = state;
    sim.advance(next, dt);
    return next;
}

// ---------------------------------------------------------------------------
// Time loop

namespace {

Snapshot take_snapshot(const SimState& s) { return {s.t, s.densities, s.agents.positions}; }

void record_metrics(RunResult& r, const SimState& s) {
    MetricSeries& m = r.metrics;
    m.t.push_back(s.t);
    double total = 0.0;
    for (std::size_t n = 0; n < s.densities.size(); ++n) {
        const Metrics mt = metrics(s.densities[n]);
        for (double v : s.densities[n].values()) r.rho_min = std::min(r.rho_min, v);
        r.rho_max = std::max(r.rho_max, mt.linf);
        m.mass[n].push_back(mt.mass);
        m.linf[n].push_back(mt.linf);
        m.tv[n].push_back(mt.tv);
        total += mt.mass;
    }
    m.total_mass.push_back(total);
    m.agents.push_back(s.agents.positions);
}

}  // namespace

RunResult run(const Simulation& sim, SimState state, const RunControl& control) {
    validate(control.scheme);
    const SchemeParams& scheme = control.scheme;
    RunResult result;
    result.scheme = scheme;
    const std::size_t npop = state.densities.size();
    result.metrics.mass.resize(npop);
    result.metrics.linf.resize(npop);
    result.metrics.tv.resize(npop);

    result.rho_min = std::numeric_limits<double>::infinity();
    result.rho_max = -std::numeric_limits<double>::infinity();
    record_metrics(result, state);
    result.snapshots.push_back(take_snapshot(state));
    const double initial_mass = result.metrics.total_mass.front();
    const double end = scheme.end_time;
    std::uint64_t next_index = 1;
    result.dt_min = std::numeric_limits<double>::infinity();

    auto evacuated = [&] {
        return control.evacuation_fraction && initial_mass > 0.0 &&
               result.metrics.total_mass.back() <= (1.0 - *control.evacuation_fraction) * initial_mass;
    };

    while (state.t < end && !evacuated()) {
        const double next_snapshot = std::min(end, static_cast<double>(next_index) * scheme.snapshot_interval);
        const std::vector<Transport> tr = sim.transports(state);
        const double remaining = next_snapshot - state.t;
        double dt = sim.stable_dt(tr, scheme, remaining);
        const bool hits_snapshot = dt >= remaining;
        sim.advance(state, dt, tr);
        if (hits_snapshot) state.t = next_snapshot;
        ++result.steps;
        result.dt_min = std::min(result.dt_min, dt);
        result.dt_max = std::max(result.dt_max, dt);
        record_metrics(result, state);
        if (!std::isfinite(result.metrics.total_mass.back())) {
            throw SimulationAborted("non-finite density at t = " + std::to_string(state.t), take_snapshot(state));
        }
        if (hits_snapshot) {
            result.snapshots.push_back(take_snapshot(state));
            ++next_index;
        }
    }
    if (result.snapshots.back().t != state.t) result.snapshots.push_back(take_snapshot(state));
    if (evacuated()) result.stop = StopReason::Evacuated;
    if (result.steps == 0) result.dt_min = 0.0;
    result.outflow = initial_mass - result.metrics.total_mass.back();
    return result;
}

}  // namespace crowd
