#pragma once

#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "crowd/grid.hpp"
#include "crowd/nonlocal.hpp"

namespace crowd {

/// Scalar speed law v(rho), m/s.
class SpeedLaw {
public:
    enum class Family { Linear, Tabulated, Constant };

    /// v(rho) = vmax (1 - rho / jam).
    static SpeedLaw linear(double vmax, double jam);
    /// Piecewise linear through (rho_k, v_k); requires rho_0 = 0, increasing
    /// rho_k, non-increasing v_k and v = 0 at the last node (the jam density).
    static SpeedLaw tabulated(std::vector<std::pair<double, double>> nodes);
    /// v = vmax everywhere. Has no jam density; meant for linear transport checks.
    static SpeedLaw constant(double vmax);

    Family family() const { return family_; }
    double vmax() const { return vmax_; }
    /// Jam density R; +inf for the constant family.
    double jam() const { return jam_; }
    const std::vector<std::pair<double, double>>& nodes() const { return nodes_; }

    /// Negative densities evaluate as 0; densities above R give 0.
    double operator()(double rho) const;
    /// dv/drho, 0 above R.
    double derivative(double rho) const;
    /// Upper bound of |d(rho v(rho))/drho| and v over [0, R].
    double flux_speed_bound() const;

private:
    Family family_ = Family::Linear;
    double vmax_ = 1.0;
    double jam_ = 1.0;
    std::vector<std::pair<double, double>> nodes_;
};

enum class ModelKind { Local, S, R, Piper, Shepherd };

struct ModelSpec {
    ModelKind kind = ModelKind::Local;
    SpeedLaw speed = SpeedLaw::linear(1.0, 1.0);
    std::optional<KernelSpec> kernel;
    /// Deviation strength of model R.
    double epsilon = 0.0;
    /// Orientation of the dogs' quarter turn: +1 counterclockwise, -1 clockwise.
    int perp_sign = 1;
};

enum class AgentRole { Leader, Dog };

/// Prescribed leader route: unit-speed traversal of a polyline. The direction
/// is the unit tangent of the segment reached after travelling arclength t, and
/// zero once the route is exhausted.
struct LeaderTrack {
    std::vector<Vec2> waypoints;

    Vec2 direction(double t) const;
    double length() const;
};

struct AgentState {
    std::vector<Vec2> positions;
    std::vector<AgentRole> roles;

    std::size_t count() const { return positions.size(); }
    std::size_t count(AgentRole role) const;
};

double speed(const SpeedLaw& law, double rho);

/// V = v(rho) nu.
VectorField velocity_local(const DensityField& rho, const SpeedLaw& law, const VectorField& directions);
/// V = v(rho * eta) nu.
VectorField velocity_S(const DensityField& rho, const Kernel& kernel, const SpeedLaw& law,
                       const VectorField& directions);
/// I = -eps g / sqrt(1 + |g|^2), g = grad(rho * eta).
VectorField deviation_I(const DensityField& rho, const Kernel& kernel, double epsilon);
/// V = v(rho) (nu + I(rho)), with v taken at the local density.
VectorField velocity_R(const DensityField& rho, const Kernel& kernel, const SpeedLaw& law,
                       const VectorField& directions, double epsilon);
/// V = v(rho) (p - x) exp(-|p - x|) for a single leader at p.
VectorField velocity_piper(const DensityField& rho, Vec2 leader, const SpeedLaw& law);
/// Leader velocity (1 + (rho * eta)(p)) psi(t); `averaged` is rho * eta.
Vec2 phi_piper(const ScalarField& averaged, Vec2 leader, double t, const LeaderTrack& track);
Vec2 phi_piper(const DensityField& rho, Vec2 leader, const Kernel& kernel, double t, const LeaderTrack& track);
/// V = v(rho) nu + sum_i (x - p_i) exp(-|p_i - x|) over the dogs.
VectorField velocity_sheep(const DensityField& rho, const AgentState& agents, const SpeedLaw& law,
                           const VectorField& directions);
/// Per agent: dogs get g_perp / sqrt(1 + |g|^2) with g = (rho * grad eta)(p_i)
/// sampled bilinearly; non-dogs get 0. `gradient` is rho * grad eta.
std::vector<Vec2> phi_dogs(const VectorField& gradient, const AgentState& agents, int perp_sign = 1);
std::vector<Vec2> phi_dogs(const DensityField& rho, const AgentState& agents, const Kernel& kernel,
                           int perp_sign = 1);

/// Velocity of one population together with a per-axis bound on the
/// characteristic speed |d(rho V_n)/d rho| (nonlocal terms frozen), which the
/// Lax-Friedrichs flux uses as its dissipation coefficient.
///
/// The velocity splits as V = v(rho) W + U. When `local_speed` is set, v is
/// the speed law at the local density and the solver re-evaluates it between
/// the two sweeps of a split step.
struct Transport {
    VectorField velocity;
    VectorField wave_speed;
    VectorField direction;  // W
    VectorField drift;      // U
    bool local_speed = false;
};

/// Assembles the transport for one population. Velocities are zeroed on wall
/// and exit cells; exit faces use the adjacent free cell's velocity.
Transport assemble_transport(const ModelSpec& model, const DensityField& rho, const RoomGeometry& geometry,
                             const VectorField& directions, const Kernel* kernel, const AgentState& agents);

}  // namespace crowd
