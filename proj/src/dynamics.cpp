#include "crowd/dynamics.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <string>

#include "crowd/errors.hpp"
#include "crowd/log.hpp"
#include "crowd/parallel.hpp"

namespace crowd {

// ---------------------------------------------------------------------------
// SpeedLaw

SpeedLaw SpeedLaw::linear(double vmax, double jam) {
    if (!(vmax > 0.0) || !(jam > 0.0) || !std::isfinite(vmax) || !std::isfinite(jam)) {
        throw ConfigError("linear speed law needs vmax > 0 and jam density > 0");
    }
    SpeedLaw law;
    law.family_ = Family::Linear;
    law.vmax_ = vmax;
    law.jam_ = jam;
    law.nodes_ = {{0.0, vmax}, {jam, 0.0}};
    return law;
}

SpeedLaw SpeedLaw::tabulated(std::vector<std::pair<double, double>> nodes) {
    if (nodes.size() < 2) throw ConfigError("tabulated speed law needs at least two nodes");
    if (nodes.front().first != 0.0) throw ConfigError("tabulated speed law must start at rho = 0");
    for (std::size_t k = 0; k < nodes.size(); ++k) {
        if (!std::isfinite(nodes[k].first) || !std::isfinite(nodes[k].second)) {
            throw ConfigError("tabulated speed law has a non-finite node");
        }
        if (k > 0 && !(nodes[k].first > nodes[k - 1].first)) {
            throw ConfigError("tabulated speed law densities must be strictly increasing");
        }
        if (k > 0 && nodes[k].second > nodes[k - 1].second) {
            throw ConfigError("tabulated speed law must be non-increasing (found an increasing segment at rho = " +
                              std::to_string(nodes[k - 1].first) + ")");
        }
    }
    if (nodes.back().second != 0.0) throw ConfigError("tabulated speed law must vanish at its last node (jam density)");
    if (!(nodes.front().second > 0.0)) throw ConfigError("tabulated speed law needs v(0) > 0");
    SpeedLaw law;
    law.family_ = Family::Tabulated;
    law.vmax_ = nodes.front().second;
    law.jam_ = nodes.back().first;
    law.nodes_ = std::move(nodes);
    return law;
}

SpeedLaw SpeedLaw::constant(double vmax) {
    if (!(vmax > 0.0) || !std::isfinite(vmax)) throw ConfigError("constant speed law needs vmax > 0");
    SpeedLaw law;
    law.family_ = Family::Constant;
    law.vmax_ = vmax;
    law.jam_ = std::numeric_limits<double>::infinity();
    law.nodes_ = {{0.0, vmax}};
    return law;
}

double SpeedLaw::operator()(double rho) const {
    switch (family_) {
        case Family::Constant:
            return vmax_;
        case Family::Linear:
            if (rho <= 0.0) return vmax_;
            if (rho >= jam_) return 0.0;
            return vmax_ * (1.0 - rho / jam_);
        case Family::Tabulated: {
            if (rho <= 0.0) return vmax_;
            if (rho >= jam_) return 0.0;
            auto it = std::upper_bound(nodes_.begin(), nodes_.end(), rho,
                                       [](double r, const auto& node) { return r < node.first; });
            const auto& hi = *it;
            const auto& lo = *(it - 1);
            const double t = (rho - lo.first) / (hi.first - lo.first);
            return lo.second + t * (hi.second - lo.second);
        }
    }
    return 0.0;
}

double SpeedLaw::derivative(double rho) const {
    switch (family_) {
        case Family::Constant:
            return 0.0;
        case Family::Linear:
            return (rho >= 0.0 && rho < jam_) ? -vmax_ / jam_ : 0.0;
        case Family::Tabulated: {
            if (rho < 0.0 || rho >= jam_) return 0.0;
            auto it = std::upper_bound(nodes_.begin(), nodes_.end(), rho,
                                       [](double r, const auto& node) { return r < node.first; });
            const auto& hi = *it;
            const auto& lo = *(it - 1);
            return (hi.second - lo.second) / (hi.first - lo.first);
        }
    }
    return 0.0;
}

double SpeedLaw::flux_speed_bound() const {
    double bound = vmax_;
    if (family_ == Family::Tabulated) {
        for (std::size_t k = 0; k + 1 < nodes_.size(); ++k) {
            const auto& [r0, v0] = nodes_[k];
            const auto& [r1, v1] = nodes_[k + 1];
            const double slope = (v1 - v0) / (r1 - r0);
            // d(rho v)/drho is affine on each segment; extremes sit at the nodes.
            bound = std::max({bound, std::abs(v0 + r0 * slope), std::abs(v1 + r1 * slope)});
        }
    }
    return bound;
}

// ---------------------------------------------------------------------------
// Agents

double LeaderTrack::length() const {
    double total = 0.0;
    for (std::size_t k = 1; k < waypoints.size(); ++k) total += norm(waypoints[k] - waypoints[k - 1]);
    return total;
}

Vec2 LeaderTrack::direction(double t) const {
    if (t < 0.0) t = 0.0;
    double travelled = 0.0;
    for (std::size_t k = 1; k < waypoints.size(); ++k) {
        const Vec2 seg = waypoints[k] - waypoints[k - 1];
        const double len = norm(seg);
        if (len == 0.0) continue;
        if (t < travelled + len) return seg * (1.0 / len);
        travelled += len;
    }
    return {};
}

std::size_t AgentState::count(AgentRole role) const {
    return static_cast<std::size_t>(std::count(roles.begin(), roles.end(), role));
}

// ---------------------------------------------------------------------------
// Velocity laws

namespace {

void require_same_grid(const Grid2D& a, const Grid2D& b, const char* what) {
    if (!a.compatible(b)) throw ConfigError(std::string(what) + ": grid mismatch");
}

void note_overjam(const DensityField& rho, const SpeedLaw& law) {
    if (!std::isfinite(law.jam())) return;
    std::size_t over = 0;
    for (double r : rho.values()) over += r > law.jam() ? 1 : 0;
    if (over > 0) log::debug(std::to_string(over) + " cells above jam density; speed clamped to 0");
}

Vec2 leader_attraction(Vec2 leader, Vec2 x) {
    const Vec2 d = leader - x;
    return d * std::exp(-norm(d));
}

}  // namespace

double speed(const SpeedLaw& law, double rho) { return law(rho); }

VectorField velocity_local(const DensityField& rho, const SpeedLaw& law, const VectorField& directions) {
    require_same_grid(rho.grid(), directions.grid(), "velocity_local");
    note_overjam(rho, law);
    VectorField v(rho.grid());
    for (std::size_t k = 0; k < v.size(); ++k) v[k] = directions[k] * law(rho[k]);
    return v;
}

VectorField velocity_S(const DensityField& rho, const Kernel& kernel, const SpeedLaw& law,
                       const VectorField& directions) {
    require_same_grid(rho.grid(), directions.grid(), "velocity_S");
    const ScalarField avg = convolve(rho, kernel);
    note_overjam(avg, law);
    VectorField v(rho.grid());
    for (std::size_t k = 0; k < v.size(); ++k) v[k] = directions[k] * law(avg[k]);
    return v;
}

VectorField deviation_I(const DensityField& rho, const Kernel& kernel, double epsilon) {
    const VectorField g = convolve_grad(rho, kernel);
    VectorField dev(rho.grid());
    for (std::size_t k = 0; k < dev.size(); ++k) {
        const Vec2 gk = g[k];
        dev[k] = gk * (-epsilon / std::sqrt(1.0 + dot(gk, gk)));
    }
    return dev;
}

VectorField velocity_R(const DensityField& rho, const Kernel& kernel, const SpeedLaw& law,
                       const VectorField& directions, double epsilon) {
    require_same_grid(rho.grid(), directions.grid(), "velocity_R");
    note_overjam(rho, law);
    const VectorField dev = deviation_I(rho, kernel, epsilon);
    VectorField v(rho.grid());
    for (std::size_t k = 0; k < v.size(); ++k) v[k] = (directions[k] + dev[k]) * law(rho[k]);
    return v;
}

VectorField velocity_piper(const DensityField& rho, Vec2 leader, const SpeedLaw& law) {
    const Grid2D& g = rho.grid();
    VectorField v(g);
    for (int j = 0; j < g.ny(); ++j) {
        for (int i = 0; i < g.nx(); ++i) v(i, j) = leader_attraction(leader, g.center(i, j)) * law(rho(i, j));
    }
    return v;
}

Vec2 phi_piper(const ScalarField& averaged, Vec2 leader, double t, const LeaderTrack& track) {
    const Grid2D& g = averaged.grid();
    int i, j;
    g.locate(leader, i, j);
    double avg = 0.0;
    if (g.contains(i, j)) {
        avg = sample_bilinear(averaged, leader);
    } else {
        static std::atomic<bool> warned{false};
        if (!warned.exchange(true)) log::warn("phi_piper: leader outside the grid; averaged density taken as 0");
    }
    return track.direction(t) * (1.0 + avg);
}

Vec2 phi_piper(const DensityField& rho, Vec2 leader, const Kernel& kernel, double t, const LeaderTrack& track) {
    return phi_piper(convolve(rho, kernel), leader, t, track);
}

VectorField velocity_sheep(const DensityField& rho, const AgentState& agents, const SpeedLaw& law,
                           const VectorField& directions) {
    require_same_grid(rho.grid(), directions.grid(), "velocity_sheep");
    const Grid2D& g = rho.grid();
    VectorField v = velocity_local(rho, law, directions);
    for (std::size_t a = 0; a < agents.count(); ++a) {
        if (agents.roles[a] != AgentRole::Dog) continue;
        const Vec2 p = agents.positions[a];
        for (int j = 0; j < g.ny(); ++j) {
            for (int i = 0; i < g.nx(); ++i) {
                const Vec2 d = g.center(i, j) - p;
                v(i, j) += d * std::exp(-norm(d));
            }
        }
    }
    return v;
}

std::vector<Vec2> phi_dogs(const VectorField& gradient, const AgentState& agents, int perp_sign) {
    const Grid2D& g = gradient.grid();
    std::vector<Vec2> out(agents.count());
    const double sign = perp_sign >= 0 ? 1.0 : -1.0;
    for (std::size_t a = 0; a < agents.count(); ++a) {
        if (agents.roles[a] != AgentRole::Dog) continue;
        const Vec2 p = agents.positions[a];
        int i, j;
        g.locate(p, i, j);
        if (!g.contains(i, j)) {
            log::warn("phi_dogs: dog " + std::to_string(a) + " outside the grid; velocity set to 0");
            continue;
        }
        const Vec2 grad = sample_bilinear(gradient, p);
        out[a] = perp(grad) * (sign / std::sqrt(1.0 + dot(grad, grad)));
    }
    return out;
}

std::vector<Vec2> phi_dogs(const DensityField& rho, const AgentState& agents, const Kernel& kernel, int perp_sign) {
    return phi_dogs(convolve_grad(rho, kernel), agents, perp_sign);
}

// ---------------------------------------------------------------------------
// Transport assembly

Transport assemble_transport(const ModelSpec& model, const DensityField& rho, const RoomGeometry& geometry,
                             const VectorField& directions, const Kernel* kernel, const AgentState& agents) {
    const Grid2D& g = rho.grid();
    require_same_grid(g, geometry.grid(), "assemble_transport");
    require_same_grid(g, directions.grid(), "assemble_transport");
    const SpeedLaw& law = model.speed;
    const bool needs_kernel = model.kind == ModelKind::S || model.kind == ModelKind::R;
    if (needs_kernel && kernel == nullptr) throw ConfigError("model needs a kernel");
    note_overjam(rho, law);

    // V = v(sigma) W + U; the characteristic speed along axis n is bounded by
    // B |W_n| + |U_n| with B the flux-speed bound of the law (the plain speed
    // bound for model S, whose flux is linear in rho once the average is frozen).
    ScalarField sigma;
    VectorField deviation;
    if (model.kind == ModelKind::S) sigma = convolve(rho, *kernel);
    if (model.kind == ModelKind::R) deviation = deviation_I(rho, *kernel, model.epsilon);
    const double bound = model.kind == ModelKind::S ? law.vmax() : law.flux_speed_bound();

    std::vector<Vec2> dogs;
    Vec2 leader{};
    if (model.kind == ModelKind::Shepherd) {
        for (std::size_t a = 0; a < agents.count(); ++a) {
            if (agents.roles[a] == AgentRole::Dog) dogs.push_back(agents.positions[a]);
        }
    }
    if (model.kind == ModelKind::Piper) {
        if (agents.count(AgentRole::Leader) != 1) throw ConfigError("piper model needs exactly one leader");
        for (std::size_t a = 0; a < agents.count(); ++a) {
            if (agents.roles[a] == AgentRole::Leader) leader = agents.positions[a];
        }
    }

    Transport out{VectorField(g), VectorField(g), VectorField(g), VectorField(g), model.kind != ModelKind::S};
    const auto classes = geometry.classes();
    parallel_for(g.ny(), [&](int j0, int j1) {
        for (int j = j0; j < j1; ++j) {
            for (int i = 0; i < g.nx(); ++i) {
                const std::size_t k = g.index(i, j);
                if (classes[k] != CellClass::Free) continue;
                Vec2 w{};
                Vec2 u{};
                double v = 0.0;
                switch (model.kind) {
                    case ModelKind::Local:
                        w = directions[k];
                        v = law(rho[k]);
                        break;
                    case ModelKind::S:
                        w = directions[k];
                        v = law(sigma[k]);
                        break;
                    case ModelKind::R:
                        w = directions[k] + deviation[k];
                        v = law(rho[k]);
                        break;
                    case ModelKind::Piper:
                        w = leader_attraction(leader, g.center(i, j));
                        v = law(rho[k]);
                        break;
                    case ModelKind::Shepherd: {
                        w = directions[k];
                        v = law(rho[k]);
                        const Vec2 x = g.center(i, j);
                        for (const Vec2& p : dogs) {
                            const Vec2 d = x - p;
                            u += d * std::exp(-norm(d));
                        }
                        break;
                    }
                }
                out.direction[k] = w;
                out.drift[k] = u;
                out.velocity[k] = w * v + u;
                out.wave_speed[k] = {bound * std::abs(w.x) + std::abs(u.x), bound * std::abs(w.y) + std::abs(u.y)};
            }
        }
    });
    return out;
}

}  // namespace crowd
