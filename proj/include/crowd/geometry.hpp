#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "crowd/grid.hpp"

namespace crowd {

/// Geodesic distance to the exit set through free cells, metres; +inf where unreachable.
using DistanceField = ScalarField;

/// First-order fast marching for |grad d| = 1. Cells with a finite entry in
/// `seeds` are accepted with that value; the front then spreads through cells
/// whose `passable` flag is set. Everything not reached stays +inf.
ScalarField fast_march(const Grid2D& grid, std::span<const std::uint8_t> passable, const ScalarField& seeds);

/// Distance from every free cell to the exit cells whose tag is listed in
/// `target_exits` (all exits when empty). Walls and non-target exits are
/// impassable. Throws ConfigError("no exit") when no target exit cell exists.
DistanceField solve_eikonal(const RoomGeometry& geometry, std::span<const int> target_exits = {});

struct DirectionDiagnostics {
    std::size_t degenerate_cells = 0;  // free cells where grad d vanished
};

/// Unit preferred direction -grad d / |grad d| on free cells: central
/// differences, one-sided next to walls, components pointing into an adjacent
/// wall removed before renormalizing. Zero on walls, exits and degenerate cells.
VectorField geodesic_directions(const DistanceField& distance, const RoomGeometry& geometry,
                                DirectionDiagnostics* diagnostics = nullptr);

}  // namespace crowd
