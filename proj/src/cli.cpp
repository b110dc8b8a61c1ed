#include "crowd/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <iostream>

#include "CLI11.hpp"
#include "json.hpp"

#include "crowd/config.hpp"
#include "crowd/errors.hpp"
#include "crowd/functionals.hpp"
#include "crowd/io.hpp"
#include "crowd/log.hpp"

namespace crowd {

using Json = nlohmann::ordered_json;

namespace {

const char* model_name(ModelKind k) {
    switch (k) {
        case ModelKind::Local: return "local";
        case ModelKind::S: return "S";
        case ModelKind::R: return "R";
        case ModelKind::Piper: return "piper";
        case ModelKind::Shepherd: return "shepherd";
    }
    return "?";
}

std::string hex(std::uint64_t h) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

Json optional_number(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

Json header(const ScenarioConfig& c, const char* command) {
    Json j;
    j["command"] = command;
    j["config_hash"] = hex(c.hash);
    j["scenario"] = c.name;
    j["scheme"] = {{"cfl", c.scheme.cfl},
                   {"dt_max", c.scheme.dt_max},
                   {"end_time", c.scheme.end_time},
                   {"snapshot_interval", c.scheme.snapshot_interval},
                   {"dx", c.geometry.dx}};
    return j;
}

std::string numbered(const char* stem, std::size_t k, const char* ext) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%s_%04zu.%s", stem, k, ext);
    return buf;
}

ScenarioConfig load_with(const std::filesystem::path& path, const CliOptions& options) {
    ScenarioConfig c = load_config(path);
    apply_overrides(c, options);
    return c;
}

int cmd_simulate(const std::filesystem::path& path, const CliOptions& options, std::ostream& out) {
    ScenarioConfig config = load_with(path, options);
    if (config.populations.empty()) throw ConfigError("missing model");
    const RunResult run = run_scenario(config);

    Json report = header(config, "simulate");
    report["model"] = model_name(config.model.kind);
    report["populations"] = config.populations.size();
    report["stop"] = run.stop == StopReason::Evacuated ? "evacuated" : "end_time";
    report["steps"] = run.steps;
    report["dt_min"] = run.dt_min;
    report["dt_max"] = run.dt_max;
    report["outflow"] = run.outflow;
    report["rho_min"] = run.rho_min;
    report["rho_max"] = run.rho_max;
    const double fraction = config.evacuation_fraction.value_or(0.999);
    report["evacuation_fraction"] = fraction;
    report["evacuation_time"] = optional_number(evacuation_time(run, fraction));
    if (config.cost) {
        const double horizon = std::min(config.cost->horizon, run.snapshots.back().t);
        CostSpec spec = *config.cost;
        spec.horizon = horizon;
        report["cost"] = {{"horizon", horizon}, {"value", cost_JT(run, spec)}};
    }

    Json snaps = Json::array();
    for (std::size_t k = 0; k < run.snapshots.size(); ++k) {
        const Snapshot& s = run.snapshots[k];
        Json entry{{"t", s.t}};
        if (config.output.csv) {
            const std::string name = numbered("snapshot", k, "csv");
            io::write_file(options.out / name, io::snapshot_csv(s, config));
            entry["csv"] = name;
        }
        if (config.output.pgm) {
            const std::string name = numbered("snapshot", k, "pgm");
            io::write_file(options.out / name, io::density_pgm(total_density(s.densities), config.output.pgm_max, config));
            entry["pgm"] = name;
        }
        snaps.push_back(std::move(entry));
    }
    report["snapshots"] = std::move(snaps);

    const MetricSeries& m = run.metrics;
    Json series;
    series["t"] = m.t;
    series["mass"] = m.total_mass;
    Json pops = Json::array();
    for (std::size_t n = 0; n < m.mass.size(); ++n) {
        pops.push_back({{"mass", m.mass[n]}, {"linf", m.linf[n]}, {"tv", m.tv[n]}});
    }
    series["populations"] = std::move(pops);
    if (!config.agents.empty()) {
        Json tracks = Json::array();
        for (const auto& sample : m.agents) {
            Json row = Json::array();
            for (const Vec2& p : sample) row.push_back({p.x, p.y});
            tracks.push_back(std::move(row));
        }
        series["agents"] = std::move(tracks);
    }
    report["series"] = std::move(series);
    io::write_file(options.out / "metrics.json", report.dump(1) + "\n");

    out << "simulate " << config.name << ": " << run.steps << " steps, t = " << io::format_double(run.snapshots.back().t)
        << ", mass " << io::format_double(m.total_mass.front()) << " -> " << io::format_double(m.total_mass.back())
        << ", max density " << io::format_double(run.rho_max) << "\n";
    return 0;
}

Json evac_json(const EvacuationRun& r, const std::string& file) {
    return {{"name", r.name},
            {"file", file},
            {"exit_time", optional_number(r.exit_time)},
            {"steps", r.steps},
            {"initial_mass", r.initial_mass},
            {"final_mass", r.final_mass},
            {"rho_min", r.rho_min},
            {"rho_max", r.rho_max}};
}

int cmd_braess(const std::filesystem::path& path, const CliOptions& options, std::ostream& out) {
    const ScenarioConfig pair = load_config(path);
    if (!pair.braess) throw ConfigError("missing [braess]");
    const ScenarioConfig base = load_with(pair.braess->baseline, options);
    const ScenarioConfig variant = load_with(pair.braess->variant, options);
    const BraessReport rep = run_braess(base, variant, pair.braess->fraction);

    Json report = header(base, "braess");
    report["config_hash"] = hex(pair.hash);
    report["baseline_hash"] = hex(base.hash);
    report["variant_hash"] = hex(variant.hash);
    report["fraction"] = rep.fraction;
    report["baseline"] = evac_json(rep.baseline, std::filesystem::path(pair.braess->baseline).filename().string());
    report["variant"] = evac_json(rep.variant, std::filesystem::path(pair.braess->variant).filename().string());
    if (rep.baseline.exit_time && rep.variant.exit_time) {
        report["difference"] = *rep.baseline.exit_time - *rep.variant.exit_time;
    } else {
        report["difference"] = nullptr;
    }
    report["variant_faster"] = rep.variant_faster();
    io::write_file(options.out / "braess.json", report.dump(1) + "\n");

    auto show = [](const std::optional<double>& t) { return t ? io::format_double(*t) : std::string("not reached"); };
    out << "baseline " << rep.baseline.name << ": exit time " << show(rep.baseline.exit_time) << "\n";
    out << "variant  " << rep.variant.name << ": exit time " << show(rep.variant.exit_time) << "\n";
    out << (rep.variant_faster() ? "variant evacuates faster\n" : "variant does not evacuate faster\n");
    return 0;
}

int cmd_gateaux(const std::filesystem::path& path, const CliOptions& options, std::ostream& out) {
    const ScenarioConfig config = load_with(path, options);
    if (!config.gateaux) throw ConfigError("missing [gateaux]");
    const SimulationSetup setup = make_setup(config);
    const DensityField rho0 = population_datum(config.populations.front(), setup.geometry);
    const DensityField r0 = bump_field(config.gateaux->direction, setup.geometry);
    const GateauxResult g = gateaux_check(setup, rho0, r0, config.gateaux->h, config.scheme.end_time, config.scheme);

    Json report = header(config, "gateaux");
    report["h"] = g.h;
    report["error"] = g.error;
    report["slope"] = std::isfinite(g.slope) ? Json(g.slope) : Json(nullptr);
    report["nonincreasing"] = g.nonincreasing;
    io::write_file(options.out / "gateaux.json", report.dump(1) + "\n");

    out << "h,error\n";
    for (std::size_t k = 0; k < g.h.size(); ++k) {
        out << io::format_double(g.h[k]) << "," << io::format_double(g.error[k]) << "\n";
    }
    const double worst = g.error.empty() ? 0.0 : *std::max_element(g.error.begin(), g.error.end());
    if (worst <= 1e-10) {
        out << "max error " << io::format_double(worst) << ", exact to roundoff\n";
    } else {
        out << "slope " << io::format_double(g.slope) << (g.nonincreasing ? ", non-increasing\n" : ", not monotone\n");
    }
    return 0;
}

int cmd_confine(const std::filesystem::path& path, const CliOptions& options, std::ostream& out) {
    const ScenarioConfig config = load_with(path, options);
    if (!config.confinement) throw ConfigError("missing [confinement]");
    const ConfinementSpec& spec = *config.confinement;
    const ReachResult reach = reach_evolve(spec.initial_set, spec.tracks, spec.psi, spec.c, spec.reach);
    const double area0 = reach.area.front();

    Json report = header(config, "confine");
    report["scheme"] = {{"cfl", spec.reach.cfl},
                        {"dx", spec.reach.dx},
                        {"end_time", spec.reach.end_time},
                        {"snapshot_interval", spec.reach.snapshot_interval},
                        {"reinit", spec.reach.reinit_every}};
    report["c"] = spec.c;

    Json conf = nullptr;
    if (spec.r_plus > 0.0) {
        const ConfinementVerdict v =
            confinement_condition(spec.psi, spec.c, spec.orbit_radius, spec.r_minus, spec.r_plus, spec.samples);
        conf = {{"holds", v.holds},
                {"margin", v.margin},
                {"worst_radius", v.worst_radius},
                {"R", spec.orbit_radius},
                {"r_minus", spec.r_minus},
                {"r_plus", spec.r_plus}};
        out << "confinement condition " << (v.holds ? "holds" : "fails") << ", margin "
            << io::format_double(v.margin) << "\n";
    }
    report["confinement"] = std::move(conf);

    Json disp = nullptr;
    if (spec.psi.has_derivative()) {
        const double sigma_max = spec.sigma_max > 0.0 ? spec.sigma_max : 20.0 * area0;
        const DispersalVerdict v = dispersal_condition(spec.psi, spec.c, area0, sigma_max, std::max(4000, spec.samples));
        disp = {{"holds", v.holds},
                {"verdict", v.holds ? "holds" : "fails"},
                {"margin", v.margin},
                {"first_violation", optional_number(v.first_violation)},
                {"tail_conclusive", v.tail_conclusive},
                {"area0", area0},
                {"sigma_max", sigma_max}};
        out << "dispersal condition " << (v.holds ? "holds" : "fails") << ", margin " << io::format_double(v.margin)
            << "\n";
    }
    report["dispersal"] = std::move(disp);

    const Vec2 center = spec.tracks.empty() ? Vec2{} : spec.tracks.front().center;
    Json snaps = Json::array();
    for (std::size_t k = 0; k < reach.snapshots.size(); ++k) {
        const OccupancyField& o = reach.snapshots[k];
        const Grid2D& g = o.u.grid();
        double rmax = 0.0;
        for (int j = 0; j < g.ny(); ++j) {
            for (int i = 0; i < g.nx(); ++i) {
                if (o.inside(i, j)) rmax = std::max(rmax, norm(g.center(i, j) - center));
            }
        }
        Json entry{{"t", o.t}, {"area", o.area()}, {"max_radius", rmax}};
        if (config.output.csv) {
            const std::string name = numbered("reach", k, "csv");
            io::write_file(options.out / name, io::occupancy_csv(o, config));
            entry["csv"] = name;
        }
        if (config.output.pgm) {
            const std::string name = numbered("reach", k, "pgm");
            io::write_file(options.out / name, io::occupancy_pgm(o, config));
            entry["pgm"] = name;
        }
        snaps.push_back(std::move(entry));
    }
    report["snapshots"] = std::move(snaps);
    report["series"] = {{"t", reach.t}, {"area", reach.area}};
    io::write_file(options.out / "confine.json", report.dump(1) + "\n");
    out << "reachable set area " << io::format_double(area0) << " -> " << io::format_double(reach.area.back())
        << " over " << reach.steps << " steps\n";
    return 0;
}

}  // namespace

void apply_overrides(ScenarioConfig& config, const CliOptions& options) {
    if (options.dx) {
        if (!(*options.dx > 0.0)) throw ConfigError("--dx must be positive");
        config.geometry.dx = *options.dx;
        if (config.confinement) config.confinement->reach.dx = *options.dx;
    }
    if (options.end_time) {
        if (!(*options.end_time >= 0.0)) throw ConfigError("--end-time must be non-negative");
        config.scheme.end_time = *options.end_time;
        if (config.confinement) config.confinement->reach.end_time = *options.end_time;
    }
    if (!config.populations.empty()) validate(config);
}

bool BraessReport::variant_faster() const {
    return baseline.exit_time && variant.exit_time && *variant.exit_time < *baseline.exit_time;
}

EvacuationRun run_evacuation(const ScenarioConfig& config, double fraction) {
    ScenarioConfig c = config;
    c.stop_on_evacuation = true;
    c.evacuation_fraction = fraction;
    const RunResult run = run_scenario(c);
    EvacuationRun r;
    r.name = c.name;
    r.exit_time = evacuation_time(run, fraction);
    r.steps = run.steps;
    r.rho_min = run.rho_min;
    r.rho_max = run.rho_max;
    r.initial_mass = run.metrics.total_mass.front();
    r.final_mass = run.metrics.total_mass.back();
    return r;
}

BraessReport run_braess(const ScenarioConfig& baseline, const ScenarioConfig& variant, double fraction) {
    BraessReport rep;
    rep.fraction = fraction;
    rep.baseline = run_evacuation(baseline, fraction);
    rep.variant = run_evacuation(variant, fraction);
    return rep;
}

int run_command(const std::string& command, const std::filesystem::path& config_path, const CliOptions& options,
                std::ostream& out, std::ostream& err) {
    try {
        if (command == "simulate") return cmd_simulate(config_path, options, out);
        if (command == "braess") return cmd_braess(config_path, options, out);
        if (command == "gateaux") return cmd_gateaux(config_path, options, out);
        if (command == "confine") return cmd_confine(config_path, options, out);
        err << "unknown command '" << command << "'\n";
        return 2;
    } catch (const ConfigError& e) {
        err << "invalid configuration: " << e.what() << "\n";
        return 2;
    } catch (const NumericalError& e) {
        err << "numerical failure: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
}

int run_cli(int argc, char** argv) {
    CLI::App app{"Macroscopic crowd dynamics simulator"};
    app.set_version_flag("--version", std::string(CROWD_VERSION));
    app.require_subcommand(1);

    CliOptions options;
    std::string config_path;
    std::string out_dir = ".";
    double dx = 0.0;
    double end_time = 0.0;

    const std::pair<const char*, const char*> commands[] = {
        {"simulate", "Run a scenario and write snapshots and metrics"},
        {"braess", "Run a baseline/variant pair and compare exit times"},
        {"gateaux", "Finite-difference check of the linearized model-S solution"},
        {"confine", "Evolve the reachable set and check the confinement and dispersal conditions"},
    };
    std::vector<CLI::App*> subs;
    for (const auto& [name, help] : commands) {
        CLI::App* sub = app.add_subcommand(name, help);
        sub->add_option("config", config_path, "Scenario file")->required()->check(CLI::ExistingFile);
        sub->add_option("--out", out_dir, "Output directory");
        sub->add_option("--dx", dx, "Override the grid spacing");
        sub->add_option("--end-time", end_time, "Override the final time");
        sub->add_flag("--seedless", options.seedless, "Accepted for compatibility; runs are deterministic");
        subs.push_back(sub);
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    for (CLI::App* sub : subs) {
        if (!sub->parsed()) continue;
        if (sub->count("--dx") > 0) options.dx = dx;
        if (sub->count("--end-time") > 0) options.end_time = end_time;
        options.out = out_dir;
        return run_command(sub->get_name(), config_path, options, std::cout, std::cerr);
    }
    return 2;
}

}  // namespace crowd
