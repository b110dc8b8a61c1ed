#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "crowd/scenario.hpp"

namespace crowd {

/// 64-bit FNV-1a.
std::uint64_t fnv1a64(std::string_view text);

/// Parses a scenario file made of `[section]` headers and `key = value` lines.
/// `#` starts a comment. [population] and [agent] may repeat; keys marked
/// repeatable below may appear more than once within a section.
///
///   [scenario]    name
///   [geometry]    domain = x0 x1 y0 y1; dx; exit = x0 x1 y0 y1 (rep);
///                 rect = x0 x1 y0 y1 (rep); disc = cx cy r (rep)
///   [model]       type = local|S|R|piper|shepherd; speed = linear|table|constant;
///                 vmax; rho_max; speed_table = rho v, rho v, ...;
///                 kernel = poly3|table; kernel_table = h0 h1 ...; kernel_radius;
///                 kernel_normalized; epsilon; perp_sign; direction = geodesic | uniform ax ay
///   [population]  rect = x0 x1 y0 y1 level (rep); bump = cx cy r amplitude (rep); exits = k ...
///   [agent]       role = leader|dog; position = x y; waypoints = x y, x y, ...
///   [scheme]      cfl; dt_max; end_time; snapshot_interval; evacuation_fraction; stop_on_evacuation
///   [output]      csv; pgm; pgm_max
///   [cost]        region = x0 x1 y0 y1 (rep); horizon; penalty = excess rho_hat | table rho f, ...
///   [gateaux]     h = h1 h2 ...; direction = cx cy r amplitude
///   [confinement] psi = constant a | exp a | affine a b | table r psi [dpsi], ...; c;
///                 initial_disc = cx cy r (rep); initial_rect = x0 x1 y0 y1 (rep);
///                 orbit = R omega theta0 [cx cy] (rep); domain; dx; end_time; cfl; reinit;
///                 snapshot_interval; radius; r_minus; r_plus; sigma_max; samples
///   [braess]      baseline = path; variant = path; fraction
///
/// Errors carry the offending line. A file without [model] (and without
/// [braess]) is rejected with "missing model".
ScenarioConfig parse_config(std::string_view text);

/// Reads and parses a file; relative [braess] paths resolve against its directory.
ScenarioConfig load_config(const std::filesystem::path& path);

}  // namespace crowd
