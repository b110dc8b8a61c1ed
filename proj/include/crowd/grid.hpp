#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <variant>
#include <vector>

#include "crowd/vec2.hpp"

namespace crowd {

/// Uniform cell-centred Cartesian grid. Cell (i, j) has its centre at
/// origin + ((i + 1/2) dx, (j + 1/2) dy); storage is row-major with i fastest.
class Grid2D {
public:
    Grid2D() = default;
    Grid2D(Vec2 origin, double dx, double dy, int nx, int ny);

    Vec2 origin() const { return origin_; }
    double dx() const { return dx_; }
    double dy() const { return dy_; }
    int nx() const { return nx_; }
    int ny() const { return ny_; }
    std::size_t size() const { return static_cast<std::size_t>(nx_) * static_cast<std::size_t>(ny_); }
    double cell_area() const { return dx_ * dy_; }

    std::size_t index(int i, int j) const {
        return static_cast<std::size_t>(j) * static_cast<std::size_t>(nx_) + static_cast<std::size_t>(i);
    }
    int col(std::size_t k) const { return static_cast<int>(k % static_cast<std::size_t>(nx_)); }
    int row(std::size_t k) const { return static_cast<int>(k / static_cast<std::size_t>(nx_)); }
    bool contains(int i, int j) const { return i >= 0 && j >= 0 && i < nx_ && j < ny_; }

    Vec2 center(int i, int j) const {
        return {origin_.x + (i + 0.5) * dx_, origin_.y + (j + 0.5) * dy_};
    }

    /// Cell containing p (may lie outside the grid; check with contains()).
    void locate(Vec2 p, int& i, int& j) const;

    /// Same spacing and extent.
    bool compatible(const Grid2D& other) const;

    friend bool operator==(const Grid2D&, const Grid2D&) = default;

private:
    Vec2 origin_{};
    double dx_ = 1.0;
    double dy_ = 1.0;
    int nx_ = 1;
    int ny_ = 1;
};

template <class T>
class Field {
public:
    Field() = default;
    explicit Field(const Grid2D& grid, T fill = T{}) : grid_(grid), values_(grid.size(), fill) {}

    const Grid2D& grid() const { return grid_; }
    T& operator()(int i, int j) { return values_[grid_.index(i, j)]; }
    const T& operator()(int i, int j) const { return values_[grid_.index(i, j)]; }
    T& operator[](std::size_t k) { return values_[k]; }
    const T& operator[](std::size_t k) const { return values_[k]; }
    std::size_t size() const { return values_.size(); }

    std::span<T> values() { return values_; }
    std::span<const T> values() const { return values_; }

    friend bool operator==(const Field&, const Field&) = default;

private:
    Grid2D grid_;
    std::vector<T> values_;
};

using ScalarField = Field<double>;
using VectorField = Field<Vec2>;
/// Cell-averaged crowd density of one population, people per square metre.
using DensityField = ScalarField;

/// Bilinear interpolation of cell-centred values; constant extrapolation beyond
/// the outermost centres.
double sample_bilinear(const ScalarField& f, Vec2 p);
Vec2 sample_bilinear(const VectorField& f, Vec2 p);

// ---------------------------------------------------------------------------
// Room geometry

struct Rect {
    double x0 = 0.0, x1 = 0.0, y0 = 0.0, y1 = 0.0;

    bool contains(Vec2 p) const { return p.x >= x0 && p.x <= x1 && p.y >= y0 && p.y <= y1; }
    double area() const { return (x1 - x0) * (y1 - y0); }
    friend bool operator==(const Rect&, const Rect&) = default;
};

struct Disc {
    Vec2 center;
    double radius = 0.0;

    bool contains(Vec2 p) const { return dot(p - center, p - center) <= radius * radius; }
    friend bool operator==(const Disc&, const Disc&) = default;
};

using Obstacle = std::variant<Rect, Disc>;
bool obstacle_contains(const Obstacle& o, Vec2 p);

enum class CellClass : std::uint8_t { Free, Wall, Exit };

class RoomGeometry {
public:
    RoomGeometry() = default;
    RoomGeometry(Grid2D grid, Rect domain, std::vector<CellClass> classes, std::vector<Obstacle> obstacles,
                 std::vector<Rect> exits);

    const Grid2D& grid() const { return grid_; }
    const Rect& domain() const { return domain_; }
    const std::vector<Obstacle>& obstacles() const { return obstacles_; }
    const std::vector<Rect>& exits() const { return exits_; }
    std::span<const CellClass> classes() const { return classes_; }

    CellClass at(int i, int j) const { return classes_[grid_.index(i, j)]; }
    /// Out-of-grid cells behave as walls.
    CellClass at_or_wall(int i, int j) const { return grid_.contains(i, j) ? at(i, j) : CellClass::Wall; }
    bool is_free(int i, int j) const { return at_or_wall(i, j) == CellClass::Free; }

    std::size_t count(CellClass c) const;
    /// Which exit rectangle each exit cell came from (-1 for non-exit cells).
    std::span<const int> exit_tags() const { return exit_tags_; }

private:
    friend RoomGeometry rasterize_geometry(const Rect&, std::span<const Obstacle>, std::span<const Rect>, double);

    Grid2D grid_;
    Rect domain_;
    std::vector<CellClass> classes_;
    std::vector<int> exit_tags_;
    std::vector<Obstacle> obstacles_;
    std::vector<Rect> exits_;
};

/// Classify the cells of a grid with spacing dx covering `domain` plus a one-cell
/// ring. A cell is a wall iff its centre lies in an obstacle or outside the
/// domain, except cells whose centre lies in an exit rectangle, which become exits.
/// Throws ConfigError for a degenerate domain, an exit cell inside an obstacle,
/// or an exit cell with no free 4-neighbour.
RoomGeometry rasterize_geometry(const Rect& domain, std::span<const Obstacle> obstacles,
                                std::span<const Rect> exits, double dx);

/// level on cells whose centre lies in the rectangle, 0 elsewhere.
DensityField indicator_datum(const Grid2D& grid, const Rect& rect, double level);

}  // namespace crowd
