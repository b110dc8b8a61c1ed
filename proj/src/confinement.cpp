#include "crowd/confinement.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "crowd/errors.hpp"
#include "crowd/geometry.hpp"
#include "crowd/log.hpp"
#include "crowd/parallel.hpp"

namespace crowd {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

// ---------------------------------------------------------------------------
// PsiProfile

PsiProfile PsiProfile::constant(double value) {
    if (!std::isfinite(value)) throw ConfigError("psi constant must be finite");
    PsiProfile p;
    p.family_ = Family::Constant;
    p.a_ = value;
    return p;
}

PsiProfile PsiProfile::exponential(double a) {
    if (!std::isfinite(a)) throw ConfigError("psi amplitude must be finite");
    PsiProfile p;
    p.family_ = Family::ScaledExponential;
    p.a_ = a;
    return p;
}

PsiProfile PsiProfile::tabulated(std::vector<double> r, std::vector<double> psi, std::vector<double> dpsi) {
    if (r.size() < 2 || psi.size() != r.size()) throw ConfigError("psi table needs at least two (r, psi) nodes");
    if (!dpsi.empty() && dpsi.size() != r.size()) throw ConfigError("psi table derivative column has wrong length");
    if (r.front() != 0.0) throw ConfigError("psi table must start at r = 0");
    for (std::size_t k = 1; k < r.size(); ++k) {
        if (!(r[k] > r[k - 1])) throw ConfigError("psi table radii must be strictly increasing");
    }
    for (double v : psi) {
        if (!std::isfinite(v)) throw ConfigError("psi table values must be finite");
    }
    PsiProfile p;
    p.family_ = Family::Tabulated;
    p.r_ = std::move(r);
    p.psi_ = std::move(psi);
    p.dpsi_ = std::move(dpsi);
    return p;
}

PsiProfile PsiProfile::affine(double a, double b) {
    PsiProfile p;
    p.family_ = Family::Affine;
    p.a_ = a;
    p.b_ = b;
    return p;
}

bool PsiProfile::bounded() const { return family_ != Family::Affine || b_ == 0.0; }

bool PsiProfile::has_derivative() const { return family_ != Family::Tabulated || !dpsi_.empty(); }

double PsiProfile::operator()(double r) const {
    switch (family_) {
        case Family::Constant: return a_;
        case Family::ScaledExponential: return a_ * std::exp(-r);
        case Family::Affine: return a_ + b_ * r;
        case Family::Tabulated: break;
    }
    if (r <= r_.front()) return psi_.front();
    if (r >= r_.back()) return psi_.back();
    const auto it = std::upper_bound(r_.begin(), r_.end(), r);
    const std::size_t k = static_cast<std::size_t>(it - r_.begin()) - 1;
    const double h = r_[k + 1] - r_[k];
    const double s = (r - r_[k]) / h;
    if (dpsi_.empty()) return psi_[k] + s * (psi_[k + 1] - psi_[k]);
    const double s2 = s * s;
    const double s3 = s2 * s;
    return (2 * s3 - 3 * s2 + 1) * psi_[k] + (s3 - 2 * s2 + s) * h * dpsi_[k] + (-2 * s3 + 3 * s2) * psi_[k + 1] +
           (s3 - s2) * h * dpsi_[k + 1];
}

double PsiProfile::derivative(double r) const {
    switch (family_) {
        case Family::Constant: return 0.0;
        case Family::ScaledExponential: return -a_ * std::exp(-r);
        case Family::Affine: return b_;
        case Family::Tabulated: break;
    }
    if (dpsi_.empty()) throw ConfigError("psi table has no derivative column");
    if (r <= r_.front()) return dpsi_.front();
    if (r >= r_.back()) return 0.0;
    const auto it = std::upper_bound(r_.begin(), r_.end(), r);
    const std::size_t k = static_cast<std::size_t>(it - r_.begin()) - 1;
    const double h = r_[k + 1] - r_[k];
    const double s = (r - r_[k]) / h;
    const double s2 = s * s;
    return ((6 * s2 - 6 * s) * psi_[k] + (3 * s2 - 4 * s + 1) * h * dpsi_[k] + (-6 * s2 + 6 * s) * psi_[k + 1] +
            (3 * s2 - 2 * s) * h * dpsi_[k + 1]) /
           h;
}

Vec2 drift(const PsiProfile& psi, Vec2 x, Vec2 xi) {
    const Vec2 d = x - xi;
    return d * psi(norm(d));
}

Vec2 drift(const PsiProfile& psi, Vec2 x, std::span<const Vec2> agents) {
    Vec2 v{};
    for (const Vec2& xi : agents) v += drift(psi, x, xi);
    return v;
}

// ---------------------------------------------------------------------------
// Tracks

Vec2 AgentTrack::position(double t) const {
    if (kind == Kind::Orbit) {
        const double a = omega * t + theta0;
        return center + Vec2{radius * std::cos(a), radius * std::sin(a)};
    }
    if (waypoints.empty()) return {};
    double left = t;
    for (std::size_t k = 0; k + 1 < waypoints.size(); ++k) {
        const Vec2 seg = waypoints[k + 1] - waypoints[k];
        const double len = norm(seg);
        if (left <= len && len > 0.0) return waypoints[k] + seg * (left / len);
        left -= len;
    }
    return waypoints.back();
}

double AgentTrack::speed() const { return kind == Kind::Orbit ? std::abs(omega) * radius : 1.0; }

AgentTrack orbit_strategy(double radius, double omega, double theta0, Vec2 center) {
    if (!(radius > 0.0)) throw ConfigError("orbit radius must be positive");
    AgentTrack track;
    track.kind = AgentTrack::Kind::Orbit;
    track.center = center;
    track.radius = radius;
    track.omega = omega;
    track.theta0 = theta0;
    return track;
}

// ---------------------------------------------------------------------------
// Level set

double OccupancyField::area() const {
    std::size_t n = 0;
    for (double v : u.values()) n += v < 0.0 ? 1 : 0;
    return static_cast<double>(n) * u.grid().cell_area();
}

namespace {

double signed_distance(const Obstacle& shape, Vec2 p) {
    if (const auto* d = std::get_if<Disc>(&shape)) return norm(p - d->center) - d->radius;
    const Rect& r = std::get<Rect>(shape);
    const double cx = 0.5 * (r.x0 + r.x1);
    const double cy = 0.5 * (r.y0 + r.y1);
    const double qx = std::abs(p.x - cx) - 0.5 * (r.x1 - r.x0);
    const double qy = std::abs(p.y - cy) - 0.5 * (r.y1 - r.y0);
    const double outside = std::hypot(std::max(qx, 0.0), std::max(qy, 0.0));
    return outside + std::min(std::max(qx, qy), 0.0);
}

}  // namespace

ScalarField initial_level_set(const Grid2D& grid, std::span<const Obstacle> shapes) {
    if (shapes.empty()) throw ConfigError("initial set is empty");
    ScalarField u(grid, kInf);
    for (int j = 0; j < grid.ny(); ++j) {
        for (int i = 0; i < grid.nx(); ++i) {
            const Vec2 p = grid.center(i, j);
            for (const Obstacle& s : shapes) u(i, j) = std::min(u(i, j), signed_distance(s, p));
        }
    }
    return u;
}

void reinitialize(ScalarField& u) {
    const Grid2D& g = u.grid();
    const double h = g.dx();
    ScalarField seeds(g, kInf);
    bool any = false;
    for (int j = 0; j < g.ny(); ++j) {
        for (int i = 0; i < g.nx(); ++i) {
            const double uk = u(i, j);
            const bool in = uk < 0.0;
            auto crossing = [&](int a, int b) {
                if (!g.contains(a, b)) return kInf;
                const double un = u(a, b);
                if ((un < 0.0) == in) return kInf;
                return h * uk / (uk - un);
            };
            const double dxs = std::min(crossing(i - 1, j), crossing(i + 1, j));
            const double dys = std::min(crossing(i, j - 1), crossing(i, j + 1));
            double d = kInf;
            if (std::isfinite(dxs) && std::isfinite(dys)) {
                d = dxs * dys / std::max(std::hypot(dxs, dys), 1e-300);
            } else {
                d = std::min(dxs, dys);
            }
            if (std::isfinite(d)) {
                seeds(i, j) = std::abs(d);
                any = true;
            }
        }
    }
    if (!any) return;
    const std::vector<std::uint8_t> passable(g.size(), 1);
    const ScalarField dist = fast_march(g, passable, seeds);
    for (std::size_t k = 0; k < u.size(); ++k) u[k] = u[k] < 0.0 ? -dist[k] : dist[k];
}

ReachResult reach_evolve(std::span<const Obstacle> initial_set, std::span<const AgentTrack> tracks,
                         const PsiProfile& psi, double c, const ReachParams& params) {
    retain_heap();
    if (!(c >= 0.0) || !std::isfinite(c)) throw ConfigError("c must be non-negative");
    if (!(params.dx > 0.0)) throw ConfigError("dx must be positive");
    if (!(params.end_time >= 0.0)) throw ConfigError("end_time must be non-negative");
    if (!(params.cfl > 0.0) || params.cfl > 1.0) throw ConfigError("level-set cfl must lie in (0, 1]");
    if (!(params.snapshot_interval > 0.0)) throw ConfigError("snapshot_interval must be positive");
    const Rect& dom = params.domain;
    if (!(dom.x1 > dom.x0) || !(dom.y1 > dom.y0)) throw ConfigError("zero-area confinement domain");
    const double h = params.dx;
    const int nx = static_cast<int>(std::ceil((dom.x1 - dom.x0) / h - 1e-9));
    const int ny = static_cast<int>(std::ceil((dom.y1 - dom.y0) / h - 1e-9));
    const Grid2D grid({dom.x0, dom.y0}, h, h, nx, ny);

    ScalarField u = initial_level_set(grid, initial_set);
    auto occupied = [&] {
        return std::count_if(u.values().begin(), u.values().end(), [](double v) { return v < 0.0; });
    };
    if (occupied() == 0) throw ConfigError("initial set covers no cell centre");

    auto check_margin = [&](double t) {
        for (int j = 0; j < ny; ++j) {
            for (int i = 0; i < nx; ++i) {
                const bool rim = i < 2 || j < 2 || i >= nx - 2 || j >= ny - 2;
                if (rim && u(i, j) < 0.0) {
                    throw NumericalError("domain too small: reachable set hit the grid boundary at t = " +
                                         std::to_string(t));
                }
            }
        }
    };
    check_margin(0.0);

    ReachResult result;
    auto area = [&] { return static_cast<double>(occupied()) * grid.cell_area(); };
    result.t.push_back(0.0);
    result.area.push_back(area());
    result.snapshots.push_back({0.0, u});

    std::vector<Vec2> agents(tracks.size());
    VectorField f(grid);
    ScalarField next(grid);
    double t = 0.0;
    std::uint64_t next_index = 1;
    const double end = params.end_time;
    while (t < end) {
        for (std::size_t a = 0; a < tracks.size(); ++a) agents[a] = tracks[a].position(t);
        double rate = c * std::sqrt(2.0) / h;
        double fmax = 0.0;
        for (int j = 0; j < ny; ++j) {
            for (int i = 0; i < nx; ++i) {
                const Vec2 v = drift(psi, grid.center(i, j), agents);
                f(i, j) = v;
                fmax = std::max(fmax, (std::abs(v.x) + std::abs(v.y)) / h);
            }
        }
        rate += fmax;
        const double next_snap = std::min(end, static_cast<double>(next_index) * params.snapshot_interval);
        double dt = rate > 0.0 ? params.cfl / rate : next_snap - t;
        const bool hits = dt >= next_snap - t;
        if (hits) dt = next_snap - t;

        parallel_for(ny, [&](int j0, int j1) {
            for (int j = j0; j < j1; ++j) {
                for (int i = 0; i < nx; ++i) {
                    const double uk = u(i, j);
                    const double dxm = i > 0 ? (uk - u(i - 1, j)) / h : 0.0;
                    const double dxp = i + 1 < nx ? (u(i + 1, j) - uk) / h : 0.0;
                    const double dym = j > 0 ? (uk - u(i, j - 1)) / h : 0.0;
                    const double dyp = j + 1 < ny ? (u(i, j + 1) - uk) / h : 0.0;
                    const Vec2 v = f(i, j);
                    const double adv = std::max(v.x, 0.0) * dxm + std::min(v.x, 0.0) * dxp +
                                       std::max(v.y, 0.0) * dym + std::min(v.y, 0.0) * dyp;
                    const double a = std::max(dxm, 0.0), b = std::min(dxp, 0.0);
                    const double e = std::max(dym, 0.0), g = std::min(dyp, 0.0);
                    const double grad = std::sqrt(a * a + b * b + e * e + g * g);
                    next(i, j) = uk - dt * (adv + c * grad);
                }
            }
        });
        std::swap(u, next);
        ++result.steps;
        t = hits ? next_snap : t + dt;
        if (params.reinit_every > 0 && result.steps % static_cast<std::uint64_t>(params.reinit_every) == 0) {
            reinitialize(u);
        }
        check_margin(t);
        result.t.push_back(t);
        result.area.push_back(area());
        if (hits) {
            result.snapshots.push_back({t, u});
            ++next_index;
        }
    }
    log::debug("reach_evolve: " + std::to_string(result.steps) + " steps");
    return result;
}

// ---------------------------------------------------------------------------
// Confinement condition

namespace {

template <class F>
double simpson_step(const F& f, double a, double b, double fa, double fm, double fb, double whole, double tol,
                    int depth, std::size_t& evals) {
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m);
    const double rm = 0.5 * (m + b);
    const double flm = f(lm);
    const double frm = f(rm);
    evals += 2;
    const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    const double delta = left + right - whole;
    if (depth <= 0 || std::abs(delta) <= 15.0 * tol) return left + right + delta / 15.0;
    return simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1, evals) +
           simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1, evals);
}

template <class F>
double adaptive_simpson(const F& f, double a, double b, double tol, std::size_t& evals) {
    const double fa = f(a);
    const double fb = f(b);
    const double fm = f(0.5 * (a + b));
    evals += 3;
    const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    return simpson_step(f, a, b, fa, fm, fb, whole, tol, 48, evals);
}

double radial_drift(const PsiProfile& psi, double R, double s, double tol, std::size_t& evals) {
    auto integrand = [&](double th) {
        const double ct = std::cos(th);
        const double dist = std::sqrt(std::max(0.0, R * R + s * s - 2.0 * s * R * ct));
        return psi(dist) * (s - R * ct);
    };
    return adaptive_simpson(integrand, 0.0, std::numbers::pi, tol * std::numbers::pi, evals) / std::numbers::pi;
}

}  // namespace

double averaged_radial_drift(const PsiProfile& psi, double R, double s, double tol) {
    std::size_t evals = 0;
    return radial_drift(psi, R, s, tol, evals);
}

ConfinementVerdict confinement_condition(const PsiProfile& psi, double c, double R, double r_minus, double r_plus,
                                         int samples) {
    if (!psi.bounded()) throw ConfigError("confinement check needs a bounded psi");
    if (!(r_minus > 0.0) || !(r_plus >= r_minus)) throw ConfigError("need 0 < R- <= R+");
    if (!(R > 0.0)) throw ConfigError("orbit radius must be positive");
    if (!(c >= 0.0)) throw ConfigError("c must be non-negative");
    const int n = std::max(samples, 200);
    constexpr double tol = 1e-8;

    std::vector<double> values(static_cast<std::size_t>(n));
    std::vector<std::size_t> evals(static_cast<std::size_t>(n), 0);
    auto radius_at = [&](int k) {
        return n == 1 ? r_minus : r_minus + (r_plus - r_minus) * static_cast<double>(k) / (n - 1);
    };
    parallel_for(n, [&](int k0, int k1) {
        for (int k = k0; k < k1; ++k) {
            const auto ku = static_cast<std::size_t>(k);
            values[ku] = radial_drift(psi, R, radius_at(k), tol, evals[ku]);
        }
    });

    ConfinementVerdict v;
    for (std::size_t e : evals) v.evaluations += e;
    std::size_t worst = 0;
    for (std::size_t k = 1; k < values.size(); ++k) {
        if (values[k] > values[worst]) worst = k;
    }
    double best = values[worst];
    double best_r = radius_at(static_cast<int>(worst));

    // Golden-section refinement on the bracketing interval.
    double lo = radius_at(std::max(0, static_cast<int>(worst) - 1));
    double hi = radius_at(std::min(n - 1, static_cast<int>(worst) + 1));
    const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
    double a = hi - phi * (hi - lo);
    double b = lo + phi * (hi - lo);
    double fa = radial_drift(psi, R, a, tol, v.evaluations);
    double fb = radial_drift(psi, R, b, tol, v.evaluations);
    for (int it = 0; it < 60 && hi - lo > 1e-12 * std::max(1.0, hi); ++it) {
        if (fa > fb) {
            hi = b;
            b = a;
            fb = fa;
            a = hi - phi * (hi - lo);
            fa = radial_drift(psi, R, a, tol, v.evaluations);
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + phi * (hi - lo);
            fb = radial_drift(psi, R, b, tol, v.evaluations);
        }
    }
    if (fa > best) {
        best = fa;
        best_r = a;
    }
    if (fb > best) {
        best = fb;
        best_r = b;
    }
    v.margin = -c - best;
    v.worst_radius = best_r;
    v.holds = v.margin > 0.0;
    return v;
}

// ---------------------------------------------------------------------------
// Dispersal condition

double dispersal_phi(const PsiProfile& psi, double s) {
    if (!(s >= 0.0)) throw ConfigError("dispersal_phi needs s >= 0");
    if (!psi.has_derivative()) throw ConfigError("psi profile has no derivative");
    const double q = std::sqrt(s / std::numbers::pi);
    return psi.derivative(q) * q + 2.0 * psi(q);
}

std::vector<double> rearrange(std::span<const double> samples) {
    std::vector<double> out(samples.begin(), samples.end());
    std::sort(out.begin(), out.end());
    return out;
}

DispersalVerdict dispersal_condition(const PsiProfile& psi, double c, double area0, double sigma_max, int samples) {
    if (!(c >= 0.0)) throw ConfigError("c must be non-negative");
    if (!(area0 > 0.0)) throw ConfigError("initial area must be positive");
    if (!(sigma_max >= area0)) throw ConfigError("sigma_max must be at least the initial area");
    if (samples < 2) throw ConfigError("dispersal check needs at least two samples");
    const std::size_t n = static_cast<std::size_t>(samples);
    const double step = sigma_max / static_cast<double>(n);

    std::vector<double> phi(n + 1);
    for (std::size_t k = 0; k <= n; ++k) phi[k] = dispersal_phi(psi, step * static_cast<double>(k));
    const std::vector<double> sorted = rearrange(phi);

    DispersalVerdict v;
    v.window_end = sigma_max;
    v.samples = samples;
    v.tail_conclusive = std::all_of(phi.begin() + static_cast<std::ptrdiff_t>(n / 2), phi.end(),
                                    [](double x) { return x >= 0.0; });

    auto value = [&](double s, double integral) { return 2.0 * c * std::sqrt(std::numbers::pi * s) + integral; };
    double integral = 0.0;
    double prev_s = 0.0;
    double prev_val = value(0.0, 0.0);
    double margin = kInf;
    for (std::size_t k = 1; k <= n; ++k) {
        const double s = step * static_cast<double>(k);
        integral += 0.5 * step * (sorted[k - 1] + sorted[k]);
        const double val = value(s, integral);
        if (s >= area0) {
            double lo_s = prev_s;
            double lo_val = prev_val;
            if (prev_s < area0) {
                // Start of the window, interpolated inside this interval.
                const double w = (area0 - prev_s) / step;
                lo_s = area0;
                lo_val = prev_val + w * (val - prev_val);
                margin = std::min(margin, lo_val);
                if (lo_val <= 0.0 && !v.first_violation) v.first_violation = area0;
            }
            margin = std::min(margin, val);
            if (val <= 0.0 && !v.first_violation) {
                const double w = lo_val > 0.0 ? lo_val / (lo_val - val) : 0.0;
                v.first_violation = lo_s + w * (s - lo_s);
            }
        }
        prev_s = s;
        prev_val = val;
    }
    v.margin = margin;
    v.holds = !v.first_violation;
    return v;
}

}  // namespace crowd
