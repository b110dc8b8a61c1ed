#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "crowd/dynamics.hpp"
#include "crowd/errors.hpp"
#include "crowd/grid.hpp"
#include "crowd/nonlocal.hpp"

namespace crowd {

struct ScenarioConfig;

struct SchemeParams {
    double cfl = 0.45;                 // in (0, 0.5]
    double dt_max = 0.05;              // s
    double end_time = 1.0;             // s
    double snapshot_interval = 1.0;    // s; field snapshots are kept at multiples of this
};

void validate(const SchemeParams& params);

enum class SweepOrder { XY, YX };

/// dt = min(dt_max, cfl * min(dx, dy) / max_cells max(|V_x|, |V_y|), until_next);
/// dt_max when the field vanishes.
double cfl_dt(const VectorField& speeds, const SchemeParams& params,
              double until_next = std::numeric_limits<double>::infinity());

/// One dimensionally split step of the local Lax-Friedrichs scheme
///   F = (rho_L V_L + rho_R V_R) / 2 - alpha (rho_R - rho_L) / 2,
/// alpha = max(wave_L, wave_R) along the face normal. Wall faces carry no flux;
/// faces between a free cell and an exit carry the upwind outflow of the free
/// cell. Exit cells are sinks and are reset to 0. Throws NumericalError if
/// dt * alpha / h > 1/2 anywhere.
DensityField fv_step(const DensityField& rho, const VectorField& velocity, const VectorField& wave_speed, double dt,
                     const RoomGeometry& geometry, SweepOrder order = SweepOrder::XY, double* outflow = nullptr);

/// As above with alpha = |V . n|.
DensityField fv_step(const DensityField& rho, const VectorField& velocity, double dt, const RoomGeometry& geometry,
                     SweepOrder order = SweepOrder::XY);

/// Tangent of fv_step with respect to rho, for a velocity perturbation
/// dvelocity induced by the density perturbation r (wave speeds held fixed).
/// Returns the stepped perturbation; rho itself is stepped in place.
DensityField fv_step_tangent(DensityField& rho, const DensityField& r, const VectorField& velocity,
                             const VectorField& dvelocity, const VectorField& wave_speed, double dt,
                             const RoomGeometry& geometry, SweepOrder order);

using AgentDrift = std::function<std::vector<Vec2>(double t, std::span<const Vec2> positions)>;

/// Explicit midpoint step p + dt phi(t + dt/2, p + dt/2 phi(t, p)).
std::vector<Vec2> rk2_agents(std::span<const Vec2> positions, double t, double dt, const AgentDrift& drift);

/// Immutable pieces shared by every step of a run.
struct SimulationSetup {
    ModelSpec model;
    RoomGeometry geometry;
    std::optional<Kernel> kernel;
    std::vector<VectorField> directions;  // one per population
    LeaderTrack track;
    /// Replaces the model's agent law when set (manufactured-solution tests).
    AgentDrift agent_drift_override;

    std::size_t populations() const { return directions.size(); }
};

struct SimState {
    double t = 0.0;
    std::uint64_t step = 0;
    std::vector<DensityField> densities;
    AgentState agents;
};

/// Sum of the population densities.
DensityField total_density(std::span<const DensityField> densities);

class Simulation {
public:
    explicit Simulation(SimulationSetup setup);

    const SimulationSetup& setup() const { return setup_; }

    std::vector<Transport> transports(const SimState& state) const;
    /// Largest stable step for the given transports.
    double stable_dt(std::span<const Transport> transports, const SchemeParams& params,
                     double until_next = std::numeric_limits<double>::infinity()) const;

    /// Densities stepped with the transports of the pre-step state, agents by
    /// the midpoint rule on the pre-step density, then t += dt.
    void advance(SimState& state, double dt) const;
    void advance(SimState& state, double dt, std::span<const Transport> transports) const;

    /// Agent velocities at time t for positions p, with nonlocal fields frozen
    /// from `rho_total`.
    AgentDrift agent_drift(const DensityField& rho_total, const std::vector<AgentRole>& roles) const;

private:
    SimulationSetup setup_;
};

/// Free-function form of Simulation::advance.
SimState advance(const SimState& state, double dt, const SimulationSetup& setup);

struct Snapshot {
    double t = 0.0;
    std::vector<DensityField> densities;
    std::vector<Vec2> agents;
};

/// Metrics sampled after every step (and at t = 0).
struct MetricSeries {
    std::vector<double> t;
    std::vector<double> total_mass;
    // [population][sample]
    std::vector<std::vector<double>> mass;
    std::vector<std::vector<double>> linf;
    std::vector<std::vector<double>> tv;
    // [sample][agent]
    std::vector<std::vector<Vec2>> agents;
};

enum class StopReason { EndTime, Evacuated };

struct RunResult {
    std::vector<Snapshot> snapshots;
    MetricSeries metrics;
    StopReason stop = StopReason::EndTime;
    std::uint64_t steps = 0;
    double dt_min = 0.0;
    double dt_max = 0.0;
    double outflow = 0.0;  // mass that left through exits
    double rho_min = 0.0;  // extremes over every population and step
    double rho_max = 0.0;
    SchemeParams scheme;
};

struct RunControl {
    SchemeParams scheme;
    /// Stop once total mass <= (1 - fraction) * initial mass, when set.
    std::optional<double> evacuation_fraction;
};

/// Thrown when the density stops being finite; carries the last state.
class SimulationAborted : public NumericalError {
public:
    SimulationAborted(const std::string& what, Snapshot snapshot)
        : NumericalError(what), snapshot_(std::move(snapshot)) {}
    const Snapshot& snapshot() const { return snapshot_; }

private:
    Snapshot snapshot_;
};

RunResult run(const Simulation& sim, SimState initial, const RunControl& control);

/// Builds the setup and initial state from a validated scenario.
SimulationSetup make_setup(const ScenarioConfig& config);
SimState make_initial_state(const ScenarioConfig& config, const SimulationSetup& setup);

RunResult run_scenario(const ScenarioConfig& config);

}  // namespace crowd
