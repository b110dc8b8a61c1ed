#include "crowd/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "crowd/errors.hpp"

namespace crowd::io {

std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 17);
    return {buf, res.ptr};
}

std::string provenance(const ScenarioConfig& config) {
    char hash[32];
    std::snprintf(hash, sizeof(hash), "%016llx", static_cast<unsigned long long>(config.hash));
    const SchemeParams& s = config.scheme;
    return "config_hash=" + std::string(hash) + " cfl=" + format_double(s.cfl) + " dt_max=" + format_double(s.dt_max) +
           " end_time=" + format_double(s.end_time) + " snapshot_interval=" + format_double(s.snapshot_interval) +
           " dx=" + format_double(config.geometry.dx);
}

std::string snapshot_csv(const Snapshot& snapshot, const ScenarioConfig& config) {
    if (snapshot.densities.empty()) return {};
    const Grid2D& g = snapshot.densities.front().grid();
    std::string out = "# " + provenance(config) + " t=" + format_double(snapshot.t) + "\n";
    out += "i,j,x,y,rho";
    for (std::size_t n = 1; n < snapshot.densities.size(); ++n) out += ",rho" + std::to_string(n + 1);
    out += '\n';
    out.reserve(out.size() + g.size() * 64 * snapshot.densities.size());
    for (int j = 0; j < g.ny(); ++j) {
        for (int i = 0; i < g.nx(); ++i) {
            const Vec2 c = g.center(i, j);
            out += std::to_string(i);
            out += ',';
            out += std::to_string(j);
            out += ',';
            out += format_double(c.x);
            out += ',';
            out += format_double(c.y);
            for (const DensityField& rho : snapshot.densities) {
                out += ',';
                out += format_double(rho(i, j));
            }
            out += '\n';
        }
    }
    return out;
}

namespace {

std::string pgm(const Grid2D& g, const std::string& comment, auto&& gray) {
    std::string out = "P5\n# " + comment + "\n" + std::to_string(g.nx()) + " " + std::to_string(g.ny()) + "\n255\n";
    for (int j = g.ny() - 1; j >= 0; --j) {
        for (int i = 0; i < g.nx(); ++i) out += static_cast<char>(gray(i, j));
    }
    return out;
}

}  // namespace

std::string density_pgm(const DensityField& rho, double max, const ScenarioConfig& config) {
    if (!(max > 0.0)) throw ConfigError("pgm_max must be positive");
    const std::string comment =
        "gray = round(255 * min(rho, " + format_double(max) + ") / " + format_double(max) + ") " + provenance(config);
    return pgm(rho.grid(), comment, [&](int i, int j) {
        const double v = std::clamp(rho(i, j), 0.0, max) / max;
        return static_cast<unsigned char>(std::lround(255.0 * v));
    });
}

std::string occupancy_csv(const OccupancyField& occupancy, const ScenarioConfig& config) {
    const Grid2D& g = occupancy.u.grid();
    std::string out = "# " + provenance(config) + " t=" + format_double(occupancy.t) + "\n";
    out += "i,j,x,y,u\n";
    for (int j = 0; j < g.ny(); ++j) {
        for (int i = 0; i < g.nx(); ++i) {
            const Vec2 c = g.center(i, j);
            out += std::to_string(i) + ',' + std::to_string(j) + ',' + format_double(c.x) + ',' + format_double(c.y) +
                   ',' + format_double(occupancy.u(i, j)) + '\n';
        }
    }
    return out;
}

std::string occupancy_pgm(const OccupancyField& occupancy, const ScenarioConfig& config) {
    const std::string comment = "reachable set: 0 inside, 255 outside " + provenance(config);
    return pgm(occupancy.u.grid(), comment,
               [&](int i, int j) { return static_cast<unsigned char>(occupancy.inside(i, j) ? 0 : 255); });
}

void write_file(const std::filesystem::path& path, const std::string& contents) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw std::runtime_error("write failed for " + path.string());
}

}  // namespace crowd::io
