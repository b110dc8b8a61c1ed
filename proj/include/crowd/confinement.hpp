#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "crowd/grid.hpp"

namespace crowd {

/// Radial profile psi(r) of the agent drift v(x, xi) = psi(|x - xi|) (x - xi).
class PsiProfile {
public:
    enum class Family { Constant, ScaledExponential, Tabulated, Affine };

    static PsiProfile constant(double value);
    /// psi(r) = a exp(-r).
    static PsiProfile exponential(double a);
    /// Piecewise cubic Hermite through (r_k, psi_k, psi'_k) when derivatives are
    /// given, piecewise linear otherwise. Constant beyond the last node.
    static PsiProfile tabulated(std::vector<double> r, std::vector<double> psi, std::vector<double> dpsi = {});
    /// psi(r) = a + b r; unbounded unless b = 0.
    static PsiProfile affine(double a, double b);

    Family family() const { return family_; }
    bool bounded() const;
    bool has_derivative() const;

    double operator()(double r) const;
    /// Throws ConfigError when the profile carries no derivative.
    double derivative(double r) const;

private:
    Family family_ = Family::Constant;
    double a_ = 0.0;
    double b_ = 0.0;
    std::vector<double> r_, psi_, dpsi_;
};

/// psi(|x - xi|) (x - xi), summed over the agents.
Vec2 drift(const PsiProfile& psi, Vec2 x, Vec2 xi);
Vec2 drift(const PsiProfile& psi, Vec2 x, std::span<const Vec2> agents);

/// Agent path: circular orbit xi(t) = center + R (cos(w t + theta0), sin(w t + theta0)),
/// or a unit-speed waypoint track that stops at its last point.
struct AgentTrack {
    enum class Kind { Orbit, Waypoints };
    Kind kind = Kind::Orbit;
    Vec2 center;
    double radius = 1.0;
    double omega = 1.0;
    double theta0 = 0.0;
    std::vector<Vec2> waypoints;

    Vec2 position(double t) const;
    /// Speed |xi'(t)|.
    double speed() const;
};

AgentTrack orbit_strategy(double radius, double omega, double theta0, Vec2 center = {});

/// Reachable-set snapshot: u < 0 inside.
struct OccupancyField {
    double t = 0.0;
    ScalarField u;

    double area() const;
    bool inside(int i, int j) const { return u(i, j) < 0.0; }
};

struct ReachParams {
    Rect domain{-4.0, 4.0, -4.0, 4.0};
    double dx = 0.05;
    double end_time = 1.0;
    double cfl = 0.5;
    int reinit_every = 10;          // steps between signed-distance rebuilds; 0 disables
    double snapshot_interval = 0.5;
};

struct ReachResult {
    std::vector<OccupancyField> snapshots;
    std::vector<double> t;     // every step
    std::vector<double> area;  // every step
    std::uint64_t steps = 0;
};

/// Signed distance to the union of the initial shapes, sampled on `grid`.
ScalarField initial_level_set(const Grid2D& grid, std::span<const Obstacle> shapes);

/// Level-set evolution of u_t + f . grad u + c |grad u| = 0 with f the summed
/// drift of the tracks: upwind differences for the drift, Godunov for the
/// expansion term, fast-marching reinitialization every `reinit_every` steps.
/// Throws NumericalError("domain too small") once the set touches the outer
/// two cell layers.
ReachResult reach_evolve(std::span<const Obstacle> initial_set, std::span<const AgentTrack> tracks,
                         const PsiProfile& psi, double c, const ReachParams& params);

/// Re-distances u while keeping its zero level set.
void reinitialize(ScalarField& u);

struct ConfinementVerdict {
    bool holds = false;
    double margin = 0.0;        // -c - max over R* of the averaged radial drift
    double worst_radius = 0.0;  // R* attaining the maximum
    std::size_t evaluations = 0;
};

/// (1/pi) int_0^pi psi(sqrt(R^2 + s^2 - 2 s R cos th)) (s - R cos th) dth by
/// adaptive Simpson with absolute tolerance `tol`.
double averaged_radial_drift(const PsiProfile& psi, double R, double s, double tol = 1e-8);

/// Checks averaged_radial_drift < -c for every R* in [r_minus, r_plus] on a
/// uniform grid of max(samples, 200) radii, refined around the worst point.
/// Throws ConfigError for unbounded profiles or a bad radius window.
ConfinementVerdict confinement_condition(const PsiProfile& psi, double c, double R, double r_minus, double r_plus,
                                         int samples = 200);

/// phi(s) = psi'(q) q + 2 psi(q), q = sqrt(s / pi).
double dispersal_phi(const PsiProfile& psi, double s);

/// Ascending sort of uniformly spaced samples.
std::vector<double> rearrange(std::span<const double> samples);

struct DispersalVerdict {
    bool holds = false;
    double margin = 0.0;                       // min over the window of 2c sqrt(pi s) + int_0^s phi_*
    std::optional<double> first_violation;     // first s >= area0 where the sum is <= 0
    bool tail_conclusive = false;              // phi >= 0 over the upper half of the window
    double window_end = 0.0;
    int samples = 0;
};

/// Evaluates phi at n + 1 uniform points on [0, sigma_max], rearranges, and
/// integrates cumulatively with the trapezoid rule.
DispersalVerdict dispersal_condition(const PsiProfile& psi, double c, double area0, double sigma_max,
                                     int samples = 4000);

}  // namespace crowd
