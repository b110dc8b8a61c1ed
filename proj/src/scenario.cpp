#include "crowd/scenario.hpp"

#include <cmath>
#include <string>

#include "crowd/errors.hpp"
#include "crowd/geometry.hpp"
#include "crowd/log.hpp"

namespace crowd {

double Bump::operator()(Vec2 x) const {
    const double s = norm(x - center) / radius;
    if (s >= 1.0) return 0.0;
    const double w = 1.0 - s * s;
    return amplitude * w * w * w * w;
}

DensityField population_datum(const PopulationSpec& spec, const RoomGeometry& geometry) {
    const Grid2D& g = geometry.grid();
    DensityField rho(g, 0.0);
    for (const LevelRect& lr : spec.rects) {
        const DensityField part = indicator_datum(g, lr.rect, lr.level);
        for (std::size_t k = 0; k < rho.size(); ++k) rho[k] += part[k];
    }
    for (const Bump& b : spec.bumps) {
        for (int j = 0; j < g.ny(); ++j) {
            for (int i = 0; i < g.nx(); ++i) rho(i, j) += b(g.center(i, j));
        }
    }
    const auto classes = geometry.classes();
    for (std::size_t k = 0; k < rho.size(); ++k) {
        if (classes[k] != CellClass::Free) rho[k] = 0.0;
    }
    return rho;
}

DensityField bump_field(const Bump& bump, const RoomGeometry& geometry) {
    PopulationSpec spec;
    spec.bumps.push_back(bump);
    return population_datum(spec, geometry);
}

void validate(const ScenarioConfig& config) {
    const ModelKind kind = config.model.kind;
    if (config.populations.empty()) throw ConfigError("scenario needs at least one [population]");
    if (!(config.geometry.dx > 0.0)) throw ConfigError("dx must be positive");
    validate(config.scheme);
    if (kind != ModelKind::Local && !config.model.kernel) throw ConfigError("model needs a kernel");
    if (kind == ModelKind::R && !(config.model.epsilon >= 0.0)) throw ConfigError("epsilon must be non-negative");
    if (config.model.perp_sign != 1 && config.model.perp_sign != -1) throw ConfigError("perp_sign must be 1 or -1");

    std::size_t leaders = 0;
    std::size_t dogs = 0;
    for (const AgentSpec& a : config.agents) {
        if (!std::isfinite(a.position.x) || !std::isfinite(a.position.y)) throw ConfigError("agent position not finite");
        (a.role == AgentRole::Leader ? leaders : dogs) += 1;
    }
    if (kind == ModelKind::Piper) {
        if (leaders != 1 || dogs != 0) throw ConfigError("piper model needs exactly one leader and no dogs");
        if (config.track.waypoints.empty()) throw ConfigError("piper model needs leader waypoints");
    } else if (kind == ModelKind::Shepherd) {
        if (leaders != 0) throw ConfigError("shepherd model takes dogs only");
    } else if (!config.agents.empty()) {
        throw ConfigError("agents are only used by the piper and shepherd models");
    }

    for (const PopulationSpec& p : config.populations) {
        for (int e : p.exits) {
            if (e < 0 || static_cast<std::size_t>(e) >= config.geometry.exits.size()) {
                throw ConfigError("population exit index " + std::to_string(e) + " out of range");
            }
        }
        for (const LevelRect& r : p.rects) {
            if (!(r.level >= 0.0)) throw ConfigError("density level must be non-negative");
        }
        for (const Bump& b : p.bumps) {
            if (!(b.radius > 0.0) || !(b.amplitude >= 0.0)) throw ConfigError("bump needs radius > 0, amplitude >= 0");
        }
    }
    if (config.evacuation_fraction) {
        const double f = *config.evacuation_fraction;
        if (!(f > 0.0) || f > 1.0) throw ConfigError("evacuation_fraction must lie in (0, 1]");
    }
    if (config.cost) validate(*config.cost);
    if (config.gateaux) {
        if (kind != ModelKind::S) throw ConfigError("gateaux check needs model S");
        if (config.populations.size() != 1) throw ConfigError("gateaux check needs a single population");
        if (config.gateaux->h.empty()) throw ConfigError("gateaux h list is empty");
        for (std::size_t k = 0; k < config.gateaux->h.size(); ++k) {
            if (!(config.gateaux->h[k] > 0.0)) throw ConfigError("gateaux h must be positive");
            if (k > 0 && !(config.gateaux->h[k] < config.gateaux->h[k - 1])) {
                throw ConfigError("gateaux h list must be decreasing");
            }
        }
        if (!(config.gateaux->direction.radius > 0.0)) throw ConfigError("gateaux direction bump needs a radius");
    }
    if (config.confinement) {
        const ConfinementSpec& c = *config.confinement;
        if (!(c.c >= 0.0)) throw ConfigError("confinement c must be non-negative");
        if (c.initial_set.empty()) throw ConfigError("confinement needs an initial set");
        if (c.r_plus > 0.0 && !(c.r_minus > 0.0 && c.r_plus >= c.r_minus)) throw ConfigError("need 0 < R- <= R+");
        if (!(c.reach.dx > 0.0)) throw ConfigError("confinement dx must be positive");
        if (c.samples < 2) throw ConfigError("confinement samples must be at least 2");
    }
    if (config.braess) {
        if (config.braess->baseline.empty() || config.braess->variant.empty()) {
            throw ConfigError("braess needs baseline and variant files");
        }
        if (!(config.braess->fraction > 0.0) || config.braess->fraction > 1.0) {
            throw ConfigError("braess fraction must lie in (0, 1]");
        }
    }
}

// ---------------------------------------------------------------------------

namespace {

VectorField uniform_directions(const RoomGeometry& geometry, Vec2 dir) {
    const double len = norm(dir);
    if (!(len > 0.0)) throw ConfigError("uniform direction must be non-zero");
    const Vec2 unit = dir * (1.0 / len);
    VectorField out(geometry.grid());
    const auto classes = geometry.classes();
    for (std::size_t k = 0; k < out.size(); ++k) {
        if (classes[k] == CellClass::Free) out[k] = unit;
    }
    return out;
}

}  // namespace

SimulationSetup make_setup(const ScenarioConfig& config) {
    validate(config);
    SimulationSetup setup;
    setup.model = config.model;
    setup.geometry = rasterize_geometry(config.geometry.domain, config.geometry.obstacles, config.geometry.exits,
                                        config.geometry.dx);
    if (config.model.kernel) setup.kernel = build_kernel(*config.model.kernel, setup.geometry.grid());
    for (const PopulationSpec& p : config.populations) {
        if (config.model.kind == ModelKind::Piper) {
            setup.directions.emplace_back(setup.geometry.grid());
        } else if (config.direction.kind == DirectionSpec::Kind::Uniform) {
            setup.directions.push_back(uniform_directions(setup.geometry, config.direction.uniform));
        } else {
            const DistanceField d = solve_eikonal(setup.geometry, p.exits);
            DirectionDiagnostics diag;
            setup.directions.push_back(geodesic_directions(d, setup.geometry, &diag));
            if (diag.degenerate_cells > 0) {
                log::info(std::to_string(diag.degenerate_cells) + " free cells with a degenerate direction");
            }
        }
    }
    setup.track = config.track;
    return setup;
}

SimState make_initial_state(const ScenarioConfig& config, const SimulationSetup& setup) {
    SimState state;
    for (const PopulationSpec& p : config.populations) state.densities.push_back(population_datum(p, setup.geometry));
    for (const AgentSpec& a : config.agents) {
        state.agents.positions.push_back(a.position);
        state.agents.roles.push_back(a.role);
    }
    return state;
}

RunResult run_scenario(const ScenarioConfig& config) {
    const Simulation sim(make_setup(config));
    RunControl control;
    control.scheme = config.scheme;
    if (config.stop_on_evacuation) control.evacuation_fraction = config.evacuation_fraction.value_or(0.999);
    return run(sim, make_initial_state(config, sim.setup()), control);
}

}  // namespace crowd
