#pragma once

#include <filesystem>
#include <string>

#include "crowd/confinement.hpp"
#include "crowd/scenario.hpp"
#include "crowd/solver.hpp"

namespace crowd::io {

/// Shortest text with 17 significant digits ("%.17g"), round-trip exact.
std::string format_double(double v);

/// "config_hash=<hex> cfl=... dt_max=... end_time=... snapshot_interval=..."
std::string provenance(const ScenarioConfig& config);

/// One CSV per snapshot: a '#' provenance line, then `i,j,x,y,rho[,rho2...]`
/// in row-major order.
std::string snapshot_csv(const Snapshot& snapshot, const ScenarioConfig& config);

/// Binary 8-bit PGM of the total density, top row = largest y.
/// gray = round(255 * min(rho, max) / max).
std::string density_pgm(const DensityField& rho, double max, const ScenarioConfig& config);

/// `i,j,x,y,u` for a reachable-set snapshot.
std::string occupancy_csv(const OccupancyField& occupancy, const ScenarioConfig& config);

/// Inside cells black, outside white.
std::string occupancy_pgm(const OccupancyField& occupancy, const ScenarioConfig& config);

void write_file(const std::filesystem::path& path, const std::string& contents);

}  // namespace crowd::io
