#include "crowd/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <string>

#include "crowd/errors.hpp"
#include "crowd/log.hpp"

namespace crowd {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Trial {
    double d;
    std::size_t k;
    bool operator>(const Trial& o) const { return d > o.d || (d == o.d && k > o.k); }
};

}  // namespace

ScalarField fast_march(const Grid2D& grid, std::span<const std::uint8_t> passable, const ScalarField& seeds) {
    if (passable.size() != grid.size() || !grid.compatible(seeds.grid())) {
        throw ConfigError("fast_march: mask/seed size mismatch");
    }
    const double h = grid.dx();
    if (grid.dx() != grid.dy()) throw ConfigError("fast_march needs square cells");

    ScalarField d(grid, kInf);
    std::vector<std::uint8_t> accepted(grid.size(), 0);
    std::priority_queue<Trial, std::vector<Trial>, std::greater<>> heap;

    for (std::size_t k = 0; k < grid.size(); ++k) {
        if (std::isfinite(seeds[k])) {
            d[k] = seeds[k];
            accepted[k] = 1;
        }
    }

    auto accepted_value = [&](int i, int j) {
        if (!grid.contains(i, j)) return kInf;
        const std::size_t k = grid.index(i, j);
        return accepted[k] ? d[k] : kInf;
    };

    auto update = [&](int i, int j) {
        if (!grid.contains(i, j)) return;
        const std::size_t k = grid.index(i, j);
        if (accepted[k] || !passable[k]) return;
        const double a = std::min(accepted_value(i - 1, j), accepted_value(i + 1, j));
        const double b = std::min(accepted_value(i, j - 1), accepted_value(i, j + 1));
        double candidate;
        if (std::isfinite(a) && std::isfinite(b) && std::abs(a - b) < h) {
            candidate = 0.5 * (a + b + std::sqrt(2.0 * h * h - (a - b) * (a - b)));
        } else {
            candidate = std::min(a, b) + h;
        }
        if (candidate < d[k]) {
            d[k] = candidate;
            heap.push({candidate, k});
        }
    };

    for (std::size_t k = 0; k < grid.size(); ++k) {
        if (!accepted[k]) continue;
        const int i = grid.col(k);
        const int j = grid.row(k);
        update(i - 1, j);
        update(i + 1, j);
        update(i, j - 1);
        update(i, j + 1);
    }

    while (!heap.empty()) {
        const Trial t = heap.top();
        heap.pop();
        if (accepted[t.k] || t.d > d[t.k]) continue;
        accepted[t.k] = 1;
        const int i = grid.col(t.k);
        const int j = grid.row(t.k);
        update(i - 1, j);
        update(i + 1, j);
        update(i, j - 1);
        update(i, j + 1);
    }
    return d;
}

DistanceField solve_eikonal(const RoomGeometry& geometry, std::span<const int> target_exits) {
    const Grid2D& grid = geometry.grid();
    ScalarField seeds(grid, kInf);
    std::vector<std::uint8_t> passable(grid.size(), 0);
    const auto classes = geometry.classes();
    const auto tags = geometry.exit_tags();
    std::size_t exit_cells = 0;
    for (std::size_t k = 0; k < grid.size(); ++k) {
        if (classes[k] == CellClass::Free) {
            passable[k] = 1;
        } else if (classes[k] == CellClass::Exit) {
            const bool target = target_exits.empty() ||
                                std::find(target_exits.begin(), target_exits.end(), tags[k]) != target_exits.end();
            if (target) {
                seeds[k] = 0.0;
                ++exit_cells;
            }
        }
    }
    if (exit_cells == 0) throw ConfigError("no exit");
    return fast_march(grid, passable, seeds);
}

VectorField geodesic_directions(const DistanceField& distance, const RoomGeometry& geometry,
                                DirectionDiagnostics* diagnostics) {
    const Grid2D& grid = geometry.grid();
    if (!grid.compatible(distance.grid())) throw ConfigError("distance field and geometry grids differ");
    VectorField nu(grid, Vec2{});
    std::size_t degenerate = 0;
    const double hx = grid.dx();
    const double hy = grid.dy();

    auto usable = [&](int i, int j) {
        return geometry.at_or_wall(i, j) != CellClass::Wall && std::isfinite(distance(i, j));
    };
    auto wall = [&](int i, int j) { return geometry.at_or_wall(i, j) == CellClass::Wall; };

    // Central difference when both neighbours are usable, one-sided otherwise.
    auto diff = [&](double dm, bool has_m, double d0, double dp, bool has_p, double h) {
        if (has_m && has_p) return (dp - dm) / (2.0 * h);
        if (has_p) return (dp - d0) / h;
        if (has_m) return (d0 - dm) / h;
        return 0.0;
    };

    for (int j = 0; j < grid.ny(); ++j) {
        for (int i = 0; i < grid.nx(); ++i) {
            if (geometry.at(i, j) != CellClass::Free || !std::isfinite(distance(i, j))) continue;
            const double d0 = distance(i, j);
            const bool w = usable(i - 1, j), e = usable(i + 1, j), s = usable(i, j - 1), n = usable(i, j + 1);
            Vec2 g{diff(w ? distance(i - 1, j) : 0.0, w, d0, e ? distance(i + 1, j) : 0.0, e, hx),
                   diff(s ? distance(i, j - 1) : 0.0, s, d0, n ? distance(i, j + 1) : 0.0, n, hy)};
            Vec2 v = -g;
            if ((v.x > 0.0 && wall(i + 1, j)) || (v.x < 0.0 && wall(i - 1, j))) v.x = 0.0;
            if ((v.y > 0.0 && wall(i, j + 1)) || (v.y < 0.0 && wall(i, j - 1))) v.y = 0.0;
            const double len = norm(v);
            if (len > 1e-12) {
                nu(i, j) = v * (1.0 / len);
            } else {
                ++degenerate;
            }
        }
    }
    if (degenerate > 0) {
        log::info("geodesic_directions: " + std::to_string(degenerate) + " free cells with vanishing gradient");
    }
    if (diagnostics != nullptr) diagnostics->degenerate_cells = degenerate;
    return nu;
}

}  // namespace crowd
