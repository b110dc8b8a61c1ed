#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "crowd/confinement.hpp"
#include "crowd/dynamics.hpp"
#include "crowd/functionals.hpp"
#include "crowd/grid.hpp"
#include "crowd/solver.hpp"

namespace crowd {

struct GeometrySpec {
    Rect domain;
    double dx = 0.05;
    std::vector<Obstacle> obstacles;
    std::vector<Rect> exits;
};

struct DirectionSpec {
    enum class Kind { Geodesic, Uniform };
    Kind kind = Kind::Geodesic;
    Vec2 uniform{1.0, 0.0};
};

/// Smooth bump amplitude (1 - s^2)^4, s = |x - center| / radius.
struct Bump {
    Vec2 center;
    double radius = 1.0;
    double amplitude = 1.0;

    double operator()(Vec2 x) const;
};

struct LevelRect {
    Rect rect;
    double level = 0.0;
};

struct PopulationSpec {
    std::vector<LevelRect> rects;
    std::vector<Bump> bumps;
    std::vector<int> exits;  // indices into GeometrySpec::exits; empty = all
};

struct AgentSpec {
    AgentRole role = AgentRole::Leader;
    Vec2 position;
};

struct OutputSpec {
    bool csv = true;
    bool pgm = false;
    double pgm_max = 1.0;  // density mapped to white
};

struct GateauxSpec {
    std::vector<double> h{0.1, 0.05, 0.025, 0.0125};
    Bump direction;
};

struct ConfinementSpec {
    PsiProfile psi = PsiProfile::constant(0.0);
    double c = 0.0;
    std::vector<Obstacle> initial_set;
    std::vector<AgentTrack> tracks;
    ReachParams reach;
    double orbit_radius = 1.0;  // R used by the confinement check; defaults to the first orbit
    double r_minus = 0.0;
    double r_plus = 0.0;
    double sigma_max = 0.0;     // 0: 20 times the initial area
    int samples = 200;
};

struct BraessSpec {
    std::string baseline;
    std::string variant;
    double fraction = 0.999;
};

struct ScenarioConfig {
    std::string name;
    GeometrySpec geometry;
    ModelSpec model;
    DirectionSpec direction;
    std::vector<PopulationSpec> populations;
    std::vector<AgentSpec> agents;
    LeaderTrack track;
    SchemeParams scheme;
    std::optional<double> evacuation_fraction;
    bool stop_on_evacuation = false;
    OutputSpec output;
    std::optional<CostSpec> cost;
    std::optional<GateauxSpec> gateaux;
    std::optional<ConfinementSpec> confinement;
    std::optional<BraessSpec> braess;

    std::string source;     // config text as read
    std::uint64_t hash = 0; // FNV-1a of the source
};

/// Density of one population on the geometry grid, zero off the free cells.
DensityField population_datum(const PopulationSpec& spec, const RoomGeometry& geometry);

/// The direction-perturbation field of a Gateaux check on the geometry grid.
DensityField bump_field(const Bump& bump, const RoomGeometry& geometry);

/// Cross-field checks; throws ConfigError.
void validate(const ScenarioConfig& config);

}  // namespace crowd
