#include "crowd/grid.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "crowd/errors.hpp"

namespace crowd {

Grid2D::Grid2D(Vec2 origin, double dx, double dy, int nx, int ny)
    : origin_(origin), dx_(dx), dy_(dy), nx_(nx), ny_(ny) {
    if (!(dx > 0.0) || !(dy > 0.0) || !std::isfinite(dx) || !std::isfinite(dy)) {
        throw ConfigError("grid spacing must be positive and finite");
    }
    if (nx < 1 || ny < 1) {
        throw ConfigError("grid needs at least one cell in each direction");
    }
}

void Grid2D::locate(Vec2 p, int& i, int& j) const {
    i = static_cast<int>(std::floor((p.x - origin_.x) / dx_));
    j = static_cast<int>(std::floor((p.y - origin_.y) / dy_));
}

bool Grid2D::compatible(const Grid2D& other) const {
    return nx_ == other.nx_ && ny_ == other.ny_ && dx_ == other.dx_ && dy_ == other.dy_;
}

namespace {

template <class T>
T bilinear(const Field<T>& f, Vec2 p) {
    const Grid2D& g = f.grid();
    double s = (p.x - g.origin().x) / g.dx() - 0.5;
    double t = (p.y - g.origin().y) / g.dy() - 0.5;
    s = std::clamp(s, 0.0, static_cast<double>(g.nx() - 1));
    t = std::clamp(t, 0.0, static_cast<double>(g.ny() - 1));
    int i0 = std::min(static_cast<int>(s), std::max(g.nx() - 2, 0));
    int j0 = std::min(static_cast<int>(t), std::max(g.ny() - 2, 0));
    int i1 = std::min(i0 + 1, g.nx() - 1);
    int j1 = std::min(j0 + 1, g.ny() - 1);
    double a = s - i0;
    double b = t - j0;
    return (f(i0, j0) * (1.0 - a) + f(i1, j0) * a) * (1.0 - b) + (f(i0, j1) * (1.0 - a) + f(i1, j1) * a) * b;
}

}  // namespace

double sample_bilinear(const ScalarField& f, Vec2 p) { return bilinear(f, p); }
Vec2 sample_bilinear(const VectorField& f, Vec2 p) { return bilinear(f, p); }

bool obstacle_contains(const Obstacle& o, Vec2 p) {
    return std::visit([&](const auto& shape) { return shape.contains(p); }, o);
}

RoomGeometry::RoomGeometry(Grid2D grid, Rect domain, std::vector<CellClass> classes, std::vector<Obstacle> obstacles,
                           std::vector<Rect> exits)
    : grid_(grid), domain_(domain), classes_(std::move(classes)), exit_tags_(classes_.size(), -1),
      obstacles_(std::move(obstacles)), exits_(std::move(exits)) {
    if (classes_.size() != grid_.size()) {
        throw ConfigError("cell class array does not match grid size");
    }
    for (std::size_t k = 0; k < classes_.size(); ++k) {
        if (classes_[k] == CellClass::Exit) exit_tags_[k] = 0;
    }
}

std::size_t RoomGeometry::count(CellClass c) const {
    return static_cast<std::size_t>(std::count(classes_.begin(), classes_.end(), c));
}

RoomGeometry rasterize_geometry(const Rect& domain, std::span<const Obstacle> obstacles, std::span<const Rect> exits,
                                double dx) {
    const double w = domain.x1 - domain.x0;
    const double h = domain.y1 - domain.y0;
    if (!(w > 0.0) || !(h > 0.0)) {
        throw ConfigError("domain has zero area");
    }
    if (!(dx > 0.0)) {
        throw ConfigError("dx must be positive");
    }
    // Tolerate bounds that are an integer multiple of dx up to rounding.
    const int inner_x = static_cast<int>(std::ceil(w / dx - 1e-9));
    const int inner_y = static_cast<int>(std::ceil(h / dx - 1e-9));
    Grid2D grid({domain.x0 - dx, domain.y0 - dx}, dx, dx, inner_x + 2, inner_y + 2);

    std::vector<CellClass> classes(grid.size(), CellClass::Free);
    std::vector<int> tags(grid.size(), -1);
    for (int j = 0; j < grid.ny(); ++j) {
        for (int i = 0; i < grid.nx(); ++i) {
            const Vec2 c = grid.center(i, j);
            const bool in_obstacle =
                std::any_of(obstacles.begin(), obstacles.end(), [&](const Obstacle& o) { return obstacle_contains(o, c); });
            const std::size_t k = grid.index(i, j);
            const bool in_domain = domain.contains(c);
            for (std::size_t e = 0; e < exits.size(); ++e) {
                if (exits[e].contains(c)) {
                    if (in_obstacle) {
                        throw ConfigError("exit " + std::to_string(e) + " has a cell inside an obstacle");
                    }
                    tags[k] = static_cast<int>(e);
                    break;
                }
            }
            if (tags[k] >= 0) {
                classes[k] = CellClass::Exit;
            } else if (in_obstacle || !in_domain) {
                classes[k] = CellClass::Wall;
            }
        }
    }

    for (int j = 0; j < grid.ny(); ++j) {
        for (int i = 0; i < grid.nx(); ++i) {
            if (classes[grid.index(i, j)] != CellClass::Exit) continue;
            bool touches_free = false;
            const int di[4] = {1, -1, 0, 0};
            const int dj[4] = {0, 0, 1, -1};
            for (int n = 0; n < 4; ++n) {
                const int a = i + di[n];
                const int b = j + dj[n];
                if (grid.contains(a, b) && classes[grid.index(a, b)] == CellClass::Free) touches_free = true;
            }
            if (!touches_free) {
                throw ConfigError("exit " + std::to_string(tags[grid.index(i, j)]) +
                                  " has a cell not adjacent to the free region");
            }
        }
    }

    RoomGeometry geom(grid, domain, std::move(classes), {obstacles.begin(), obstacles.end()},
                      {exits.begin(), exits.end()});
    geom.exit_tags_ = std::move(tags);
    return geom;
}

DensityField indicator_datum(const Grid2D& grid, const Rect& rect, double level) {
    if (!(level >= 0.0) || !std::isfinite(level)) {
        throw ConfigError("indicator level must be finite and non-negative");
    }
    DensityField out(grid, 0.0);
    for (int j = 0; j < grid.ny(); ++j) {
        for (int i = 0; i < grid.nx(); ++i) {
            if (rect.contains(grid.center(i, j))) out(i, j) = level;
        }
    }
    return out;
}

}  // namespace crowd
