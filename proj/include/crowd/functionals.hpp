#pragma once

#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "crowd/grid.hpp"
#include "crowd/solver.hpp"

namespace crowd {

struct Metrics {
    double mass = 0.0;  // people
    double linf = 0.0;  // people / m^2
    double tv = 0.0;    // people / m
};

/// sum(rho) dx dy in row-major order. The solver's mass diagnostics use this
/// same routine.
double total_mass(const DensityField& rho);

/// Mass, maximum and discrete total variation (jumps across every interior
/// face times the face length).
Metrics metrics(const DensityField& rho);

/// Penalty f(rho) >= 0 used by the cost functional.
struct Penalty {
    enum class Kind { QuadraticExcess, Tabulated };
    Kind kind = Kind::QuadraticExcess;
    double threshold = 0.0;                          // quadratic excess: max(0, rho - threshold)^2
    std::vector<std::pair<double, double>> table;    // tabulated: piecewise linear, constant outside

    double operator()(double rho) const;
};

struct CostSpec {
    std::vector<Rect> region;  // union of rectangles; cells selected by centre
    double horizon = 0.0;
    Penalty penalty;
};

void validate(const CostSpec& spec);

/// int_0^T int_Omega f(rho_total) dx dt: midpoint rule in space over the
/// stored snapshots, trapezoid rule in time. Throws ConfigError if T exceeds
/// the last snapshot.
double cost_JT(const RunResult& run, const CostSpec& spec);

/// First time the total mass reaches (1 - fraction) * initial mass, linearly
/// interpolated between metric samples; nullopt when never reached. Zero
/// initial mass gives 0.
std::optional<double> evacuation_time(const RunResult& run, double fraction = 0.999);

struct LinearizedResult {
    DensityField rho;  // base solution at T
    DensityField r;    // perturbation at T
    std::vector<double> steps;
};

/// Co-evolves a model-S density and its first-order perturbation
///   d_t r + div(r v(rho*eta) nu) = -div(rho v'(rho*eta) (r*eta) nu)
/// with the same split Lax-Friedrichs steps as the nonlinear run. Only the
/// first population is used. Throws ConfigError for non-S models.
LinearizedResult solve_linearized(const SimulationSetup& setup, const DensityField& rho0, const DensityField& r0,
                                  double end_time, const SchemeParams& scheme);

struct GateauxResult {
    std::vector<double> h;
    std::vector<double> error;  // || (rho_h(T) - rho(T)) / h - r(T) ||_L1
    double slope = 0.0;         // least-squares slope of log e vs log h
    bool nonincreasing = false;
};

GateauxResult gateaux_check(const SimulationSetup& setup, const DensityField& rho0, const DensityField& r0,
                            std::span<const double> hs, double end_time, const SchemeParams& scheme);

/// Least-squares slope of log(y) against log(x).
double loglog_slope(std::span<const double> x, std::span<const double> y);

}  // namespace crowd
