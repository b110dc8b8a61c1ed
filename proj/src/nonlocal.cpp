#include "crowd/nonlocal.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "crowd/errors.hpp"
#include "crowd/parallel.hpp"

namespace crowd {

namespace {

double poly3(double s, double r) {
    const double u = s / r;
    if (std::abs(u) > 1.0) return 0.0;
    const double q = 1.0 - u * u;
    return q * q * q;
}

double poly3_derivative(double s, double r) {
    const double u = s / r;
    if (std::abs(u) > 1.0) return 0.0;
    const double q = 1.0 - u * u;
    return -6.0 * s / (r * r) * q * q;
}

// Piecewise-linear radial table h on [0, 1]; returns value and slope dh/du.
void radial_table(const std::vector<double>& table, double u, double& value, double& slope) {
    value = 0.0;
    slope = 0.0;
    if (u > 1.0 || table.size() < 2) return;
    const double pos = u * static_cast<double>(table.size() - 1);
    const std::size_t k = std::min(static_cast<std::size_t>(pos), table.size() - 2);
    const double t = pos - static_cast<double>(k);
    slope = (table[k + 1] - table[k]) * static_cast<double>(table.size() - 1);
    value = table[k] + t * (table[k + 1] - table[k]);
}

// Half-open index window [lo, hi) of a 1D span of length n.
struct Window {
    int lo = 0;
    int hi = 0;
    bool empty() const { return hi <= lo; }
};

// Bounding box of the nonzero entries. The convolution vanishes outside this box
// dilated by the stencil half-width, so work is restricted to the dilated box.
void support_box(const ScalarField& f, Window& cols, Window& rows) {
    const Grid2D& g = f.grid();
    cols = {g.nx(), 0};
    rows = {g.ny(), 0};
    for (int j = 0; j < g.ny(); ++j) {
        for (int i = 0; i < g.nx(); ++i) {
            if (f(i, j) != 0.0) {
                cols.lo = std::min(cols.lo, i);
                cols.hi = std::max(cols.hi, i + 1);
                rows.lo = std::min(rows.lo, j);
                rows.hi = std::max(rows.hi, j + 1);
            }
        }
    }
}

Window dilate(Window w, int m, int n) { return {std::max(0, w.lo - m), std::min(n, w.hi + m)}; }

void check_grid(const ScalarField& field, const Kernel& kernel) {
    if (field.grid().dx() != kernel.dx() || field.grid().dy() != kernel.dy()) {
        throw ConfigError("field and kernel grid spacings differ");
    }
}

// out(i, j) = sum_a in(i - a, j) * c[a + m] along x, for rows in `rows` and
// output columns in `out_cols`, reading only columns in `in_cols`.
void pass_x(const ScalarField& in, const std::vector<double>& c, int m, Window in_cols, Window out_cols, Window rows,
            ScalarField& out) {
    const int width = 2 * m + 1;
    parallel_for(rows.hi - rows.lo, [&](int begin, int end) {
        std::vector<double> padded(static_cast<std::size_t>(out_cols.hi - out_cols.lo + width), 0.0);
        std::vector<double> acc(static_cast<std::size_t>(out_cols.hi - out_cols.lo));
        for (int jj = begin; jj < end; ++jj) {
            const int j = rows.lo + jj;
            // padded[p] = in(out_cols.lo - m + p, j)
            std::fill(padded.begin(), padded.end(), 0.0);
            for (int i = std::max(in_cols.lo, out_cols.lo - m); i < std::min(in_cols.hi, out_cols.hi + m); ++i) {
                padded[static_cast<std::size_t>(i - out_cols.lo + m)] = in(i, j);
            }
            std::fill(acc.begin(), acc.end(), 0.0);
            // a = m - k, so in(i - a) = padded[(i - out_cols.lo) + k].
            for (int k = 0; k < width; ++k) {
                const double w = c[static_cast<std::size_t>(width - 1 - k)];
                if (w == 0.0) continue;
                const double* src = padded.data() + k;
                for (std::size_t p = 0; p < acc.size(); ++p) acc[p] += src[p] * w;
            }
            for (int i = out_cols.lo; i < out_cols.hi; ++i) out(i, j) = acc[static_cast<std::size_t>(i - out_cols.lo)];
        }
    });
}

// out(i, j) = scale * sum_b in(i, j - b) * c[b + m] along y.
void pass_y(const ScalarField& in, const std::vector<double>& c, int m, double scale, Window cols, Window in_rows,
            Window out_rows, ScalarField& out) {
    const int width = 2 * m + 1;
    parallel_for(out_rows.hi - out_rows.lo, [&](int begin, int end) {
        std::vector<double> acc(static_cast<std::size_t>(cols.hi - cols.lo));
        for (int jj = begin; jj < end; ++jj) {
            const int j = out_rows.lo + jj;
            std::fill(acc.begin(), acc.end(), 0.0);
            for (int k = 0; k < width; ++k) {
                const int b = m - k;
                const int src_row = j - b;
                if (src_row < in_rows.lo || src_row >= in_rows.hi) continue;
                const double w = c[static_cast<std::size_t>(b + m)];
                if (w == 0.0) continue;
                const double* src = &in(cols.lo, src_row);
                for (std::size_t p = 0; p < acc.size(); ++p) acc[p] += src[p] * w;
            }
            for (int i = cols.lo; i < cols.hi; ++i) out(i, j) = scale * acc[static_cast<std::size_t>(i - cols.lo)];
        }
    });
}

// Fused even/odd x pass for the gradient: with f even and d odd,
//   out_f(i) = f0 in(i) + sum_{a>0} f[a] (in(i - a) + in(i + a)),
//   out_d(i) = sum_{a>0} d[a] (in(i - a) - in(i + a)).
void pass_x_pair(const ScalarField& in, const std::vector<double>& f, const std::vector<double>& d, int m,
                 Window in_cols, Window out_cols, Window rows, ScalarField& out_f, ScalarField& out_d) {
    const int width = 2 * m + 1;
    parallel_for(rows.hi - rows.lo, [&](int begin, int end) {
        const std::size_t n = static_cast<std::size_t>(out_cols.hi - out_cols.lo);
        std::vector<double> padded(n + static_cast<std::size_t>(width), 0.0);
        std::vector<double> acc_f(n), acc_d(n);
        for (int jj = begin; jj < end; ++jj) {
            const int j = rows.lo + jj;
            std::fill(padded.begin(), padded.end(), 0.0);
            for (int i = std::max(in_cols.lo, out_cols.lo - m); i < std::min(in_cols.hi, out_cols.hi + m); ++i) {
                padded[static_cast<std::size_t>(i - out_cols.lo + m)] = in(i, j);
            }
            const double* centre = padded.data() + m;
            const double f0 = f[static_cast<std::size_t>(m)];
            for (std::size_t p = 0; p < n; ++p) {
                acc_f[p] = f0 * centre[p];
                acc_d[p] = 0.0;
            }
            for (int a = 1; a <= m; ++a) {
                const double wf = f[static_cast<std::size_t>(m + a)];
                const double wd = d[static_cast<std::size_t>(m + a)];
                const double* lo = centre - a;
                const double* hi = centre + a;
                for (std::size_t p = 0; p < n; ++p) {
                    acc_f[p] += wf * (lo[p] + hi[p]);
                    acc_d[p] += wd * (lo[p] - hi[p]);
                }
            }
            std::copy(acc_f.begin(), acc_f.end(), &out_f(out_cols.lo, j));
            std::copy(acc_d.begin(), acc_d.end(), &out_d(out_cols.lo, j));
        }
    });
}

// Fused y pass: gx = scale * (f along y of in_d), gy = scale * (d along y of in_f).
void pass_y_pair(const ScalarField& in_f, const ScalarField& in_d, const std::vector<double>& f,
                 const std::vector<double>& d, int m, double scale, Window cols, Window in_rows, Window out_rows,
                 ScalarField& gx, ScalarField& gy) {
    parallel_for(out_rows.hi - out_rows.lo, [&](int begin, int end) {
        const std::size_t n = static_cast<std::size_t>(cols.hi - cols.lo);
        std::vector<double> acc_x(n), acc_y(n);
        auto row = [&](const ScalarField& in, int r) -> const double* {
            return r >= in_rows.lo && r < in_rows.hi ? &in(cols.lo, r) : nullptr;
        };
        for (int jj = begin; jj < end; ++jj) {
            const int j = out_rows.lo + jj;
            std::fill(acc_x.begin(), acc_x.end(), 0.0);
            std::fill(acc_y.begin(), acc_y.end(), 0.0);
            if (const double* c = row(in_d, j)) {
                const double f0 = f[static_cast<std::size_t>(m)];
                for (std::size_t p = 0; p < n; ++p) acc_x[p] = f0 * c[p];
            }
            for (int b = 1; b <= m; ++b) {
                const double wf = f[static_cast<std::size_t>(m + b)];
                const double wd = d[static_cast<std::size_t>(m + b)];
                const double* dlo = row(in_d, j - b);
                const double* dhi = row(in_d, j + b);
                const double* flo = row(in_f, j - b);
                const double* fhi = row(in_f, j + b);
                if (dlo && dhi) {
                    for (std::size_t p = 0; p < n; ++p) {
                        acc_x[p] += wf * (dlo[p] + dhi[p]);
                        acc_y[p] += wd * (flo[p] - fhi[p]);
                    }
                    continue;
                }
                if (dlo) {
                    for (std::size_t p = 0; p < n; ++p) {
                        acc_x[p] += wf * dlo[p];
                        acc_y[p] += wd * flo[p];
                    }
                }
                if (dhi) {
                    for (std::size_t p = 0; p < n; ++p) {
                        acc_x[p] += wf * dhi[p];
                        acc_y[p] -= wd * fhi[p];
                    }
                }
            }
            for (std::size_t p = 0; p < n; ++p) {
                gx(cols.lo + static_cast<int>(p), j) = scale * acc_x[p];
                gy(cols.lo + static_cast<int>(p), j) = scale * acc_y[p];
            }
        }
    });
}

// Direct stencil sum, row-major over the stencil (b outer, a inner).
void direct(const ScalarField& in, const std::vector<double>& stencil, int m, double scale, Window cols, Window rows,
            ScalarField& out) {
    const Grid2D& g = in.grid();
    const int width = 2 * m + 1;
    parallel_for(rows.hi - rows.lo, [&](int begin, int end) {
        for (int jj = begin; jj < end; ++jj) {
            const int j = rows.lo + jj;
            for (int i = cols.lo; i < cols.hi; ++i) {
                double sum = 0.0;
                for (int b = -m; b <= m; ++b) {
                    const int y = j - b;
                    if (y < 0 || y >= g.ny()) continue;
                    const double* row = &stencil[static_cast<std::size_t>((b + m) * width)];
                    for (int a = -m; a <= m; ++a) {
                        const int x = i - a;
                        if (x < 0 || x >= g.nx()) continue;
                        sum += in(x, y) * row[a + m];
                    }
                }
                out(i, j) = scale * sum;
            }
        }
    });
}

}  // namespace

double kernel_profile_value(const KernelSpec& spec, Vec2 x) {
    switch (spec.profile) {
        case KernelProfile::Poly3:
            return poly3(x.x, spec.radius) * poly3(x.y, spec.radius);
        case KernelProfile::Tabulated: {
            double v = 0.0;
            double s = 0.0;
            radial_table(spec.table, norm(x) / spec.radius, v, s);
            return v;
        }
    }
    return 0.0;
}

double Kernel::integral() const {
    return std::accumulate(weights_.begin(), weights_.end(), 0.0) * dx_ * dy_;
}

Kernel build_kernel(const KernelSpec& spec, const Grid2D& grid) {
    const double dx = grid.dx();
    const double dy = grid.dy();
    if (dx != dy) {
        throw ConfigError("convolution kernels need square cells (dx == dy)");
    }
    if (!(spec.radius > 0.0) || !std::isfinite(spec.radius)) {
        throw ConfigError("kernel radius must be positive");
    }
    if (spec.radius < 2.0 * dx) {
        throw ConfigError("kernel radius " + std::to_string(spec.radius) + " is under-resolved (needs r >= 2 dx)");
    }
    if (spec.profile == KernelProfile::Tabulated) {
        if (spec.table.size() < 2) throw ConfigError("tabulated kernel needs at least two samples");
        if (std::any_of(spec.table.begin(), spec.table.end(), [](double v) { return !(v >= 0.0) || !std::isfinite(v); })) {
            throw ConfigError("tabulated kernel samples must be finite and non-negative");
        }
    }

    Kernel k;
    k.spec_ = spec;
    k.dx_ = dx;
    k.dy_ = dy;
    k.m_ = static_cast<int>(std::ceil(spec.radius / dx - 1e-12));
    const int m = k.m_;
    const int width = k.width();
    const std::size_t n = static_cast<std::size_t>(width) * static_cast<std::size_t>(width);
    k.weights_.assign(n, 0.0);
    k.grad_x_.assign(n, 0.0);
    k.grad_y_.assign(n, 0.0);

    if (spec.profile == KernelProfile::Poly3) {
        k.separable_ = true;
        k.factor_.resize(static_cast<std::size_t>(width));
        k.dfactor_.resize(static_cast<std::size_t>(width));
        for (int a = -m; a <= m; ++a) {
            k.factor_[static_cast<std::size_t>(a + m)] = poly3(a * dx, spec.radius);
            // Exact antisymmetry keeps the gradient stencils zero-sum.
            k.dfactor_[static_cast<std::size_t>(a + m)] = a < 0 ? -poly3_derivative(-a * dx, spec.radius)
                                                                : poly3_derivative(a * dx, spec.radius);
        }
        if (spec.normalized) {
            double sum_f = 0.0;
            double moment = 0.0;
            for (int a = -m; a <= m; ++a) {
                sum_f += k.factor_[static_cast<std::size_t>(a + m)];
                moment -= a * dx * k.dfactor_[static_cast<std::size_t>(a + m)];
            }
            k.value_scale_ = 1.0 / (sum_f * sum_f * dx * dy);
            k.grad_scale_ = 1.0 / (moment * sum_f * dx * dy);
        }
        for (int b = -m; b <= m; ++b) {
            for (int a = -m; a <= m; ++a) {
                const std::size_t idx = k.offset_index(a, b);
                const double fa = k.factor_[static_cast<std::size_t>(a + m)];
                const double fb = k.factor_[static_cast<std::size_t>(b + m)];
                const double da = k.dfactor_[static_cast<std::size_t>(a + m)];
                const double db = k.dfactor_[static_cast<std::size_t>(b + m)];
                k.weights_[idx] = k.value_scale_ * fa * fb;
                k.grad_x_[idx] = k.grad_scale_ * da * fb;
                k.grad_y_[idx] = k.grad_scale_ * fa * db;
            }
        }
        return k;
    }

    for (int b = -m; b <= m; ++b) {
        for (int a = -m; a <= m; ++a) {
            const Vec2 x{a * dx, b * dy};
            const double r = norm(x);
            double value = 0.0;
            double slope = 0.0;
            radial_table(spec.table, r / spec.radius, value, slope);
            const std::size_t idx = k.offset_index(a, b);
            k.weights_[idx] = value;
            if (r > 0.0 && r <= spec.radius) {
                const double g = slope / spec.radius / r;
                k.grad_x_[idx] = g * x.x;
                k.grad_y_[idx] = g * x.y;
            }
        }
    }
    // Antisymmetrize so the gradient stencils sum to zero exactly.
    for (int b = -m; b <= m; ++b) {
        for (int a = 1; a <= m; ++a) {
            k.grad_x_[k.offset_index(-a, b)] = -k.grad_x_[k.offset_index(a, b)];
            k.grad_y_[k.offset_index(b, -a)] = -k.grad_y_[k.offset_index(b, a)];
        }
        k.grad_x_[k.offset_index(0, b)] = 0.0;
        k.grad_y_[k.offset_index(b, 0)] = 0.0;
    }
    if (spec.normalized) {
        double sum = 0.0;
        double moment = 0.0;
        for (int b = -m; b <= m; ++b) {
            for (int a = -m; a <= m; ++a) {
                sum += k.weights_[k.offset_index(a, b)];
                moment -= a * dx * k.grad_x_[k.offset_index(a, b)];
            }
        }
        if (!(sum > 0.0) || !(moment > 0.0)) {
            throw ConfigError("tabulated kernel cannot be normalized (zero integral or non-decreasing profile)");
        }
        k.value_scale_ = 1.0 / (sum * dx * dy);
        k.grad_scale_ = 1.0 / (moment * dx * dy);
        for (std::size_t i = 0; i < n; ++i) {
            k.weights_[i] *= k.value_scale_;
            k.grad_x_[i] *= k.grad_scale_;
            k.grad_y_[i] *= k.grad_scale_;
        }
    }
    return k;
}

ScalarField convolve(const ScalarField& field, const Kernel& kernel, ConvolutionMethod method) {
    check_grid(field, kernel);
    const Grid2D& g = field.grid();
    ScalarField out(g, 0.0);
    Window cols, rows;
    support_box(field, cols, rows);
    if (cols.empty()) return out;
    const int m = kernel.half_width();
    const Window out_cols = dilate(cols, m, g.nx());
    const Window out_rows = dilate(rows, m, g.ny());
    const double area = g.cell_area();

    if (method == ConvolutionMethod::Direct || !kernel.separable()) {
        direct(field, kernel.weights(), m, area, out_cols, out_rows, out);
        return out;
    }
    ScalarField tmp(g, 0.0);
    pass_x(field, kernel.factor(), m, cols, out_cols, rows, tmp);
    pass_y(tmp, kernel.factor(), m, kernel.value_scale() * area, out_cols, rows, out_rows, out);
    return out;
}

VectorField convolve_grad(const ScalarField& field, const Kernel& kernel, ConvolutionMethod method) {
    check_grid(field, kernel);
    const Grid2D& g = field.grid();
    VectorField out(g, Vec2{});
    Window cols, rows;
    support_box(field, cols, rows);
    if (cols.empty()) return out;
    const int m = kernel.half_width();
    const Window out_cols = dilate(cols, m, g.nx());
    const Window out_rows = dilate(rows, m, g.ny());
    const double area = g.cell_area();

    ScalarField gx(g, 0.0);
    ScalarField gy(g, 0.0);
    if (method == ConvolutionMethod::Direct || !kernel.separable()) {
        direct(field, kernel.grad_x(), m, area, out_cols, out_rows, gx);
        direct(field, kernel.grad_y(), m, area, out_cols, out_rows, gy);
    } else {
        ScalarField tmp_f(g, 0.0);
        ScalarField tmp_d(g, 0.0);
        pass_x_pair(field, kernel.factor(), kernel.dfactor(), m, cols, out_cols, rows, tmp_f, tmp_d);
        pass_y_pair(tmp_f, tmp_d, kernel.factor(), kernel.dfactor(), m, kernel.grad_scale() * area, out_cols, rows,
                    out_rows, gx, gy);
    }
    for (std::size_t k = 0; k < out.size(); ++k) out[k] = {gx[k], gy[k]};
    return out;
}

}  // namespace crowd
