// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "crowd/cli.hpp"
#include "crowd/config.hpp"
#include "crowd/confinement.hpp"
#include "crowd/functionals.hpp"
#include "crowd/geometry.hpp"
#include "crowd/scenario.hpp"
#include "crowd/solver.hpp"
#include "oracles.hpp"

using namespace crowd;
namespace fs = std::filesystem;

namespace {

const fs::path kScenarios = CROWD_SCENARIO_DIR;
constexpr double kPi = std::numbers::pi;

struct Outcome {
    bool pass = true;
    std::string detail;

    void check(bool ok, const std::string& what) {
        pass = pass && ok;
        if (!detail.empty()) detail += "; ";
        detail += what + (ok ? "" : " [violated]");
    }
};

std::string num(double v, int digits = 4) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*g", digits, v);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

// 1: mass drift over 1000 steps in the closed room, for every density model.
Outcome conservation() {
    Outcome o;
    const ScenarioConfig base = load_config(kScenarios / "walled.cfg");
    for (ModelKind kind : {ModelKind::R, ModelKind::S, ModelKind::Local}) {
        ScenarioConfig cfg = base;
        cfg.model.kind = kind;
        const auto start = std::chrono::steady_clock::now();
        const Simulation sim(make_setup(cfg));
        SimState state = make_initial_state(cfg, sim.setup());
        const double m0 = total_mass(state.densities[0]);
        for (int n = 0; n < 1000; ++n) {
            const auto tr = sim.transports(state);
            sim.advance(state, sim.stable_dt(tr, cfg.scheme), tr);
        }
        const double drift = std::abs(total_mass(state.densities[0]) - m0) / m0;
        const double secs = seconds_since(start);
        const Grid2D& g = sim.setup().geometry.grid();
        const char* name = kind == ModelKind::R ? "R" : kind == ModelKind::S ? "S" : "local";
        o.check(drift <= 1e-10, std::string(name) + " drift " + num(drift, 3));
        o.check(secs < 30.0, std::string(name) + " " + std::to_string(g.nx() - 2) + "x" + std::to_string(g.ny() - 2) +
                                 " in " + num(secs, 3) + " s");
    }
    return o;
}

struct BraessRuns {
    std::vector<double> dx;
    std::vector<BraessReport> reports;
    std::vector<double> seconds;  // baseline, variant per dx
};

BraessRuns braess_runs() {
    BraessRuns out;
    const fs::path pair = kScenarios / "braess_pair.cfg";
    const ScenarioConfig spec = load_config(pair);
    for (double dx : {0.05, 0.025}) {
        CliOptions opt;
        opt.dx = dx;
        ScenarioConfig baseline = load_config(kScenarios / spec.braess->baseline);
        ScenarioConfig variant = load_config(kScenarios / spec.braess->variant);
        apply_overrides(baseline, opt);
        apply_overrides(variant, opt);
        BraessReport r;
        r.fraction = spec.braess->fraction;
        auto start = std::chrono::steady_clock::now();
        r.baseline = run_evacuation(baseline, r.fraction);
        out.seconds.push_back(seconds_since(start));
        start = std::chrono::steady_clock::now();
        r.variant = run_evacuation(variant, r.fraction);
        out.seconds.push_back(seconds_since(start));
        out.dx.push_back(dx);
        out.reports.push_back(r);
    }
    return out;
}

// 2: density stays in [0, R + 1e-3] in every Braess run.
Outcome max_principle(const BraessRuns& runs) {
    Outcome o;
    for (std::size_t k = 0; k < runs.reports.size(); ++k) {
        for (const EvacuationRun* r : {&runs.reports[k].baseline, &runs.reports[k].variant}) {
            o.check(r->rho_min >= 0.0 && r->rho_max <= 1.0 + 1e-3,
                    r->name + " dx=" + num(runs.dx[k]) + " rho in [" + num(r->rho_min, 3) + ", " + num(r->rho_max, 8) +
                        "]");
        }
    }
    return o;
}

// 3: the column room empties first at both resolutions, each run under 5 min.
Outcome braess_ordering(const BraessRuns& runs) {
    Outcome o;
    for (std::size_t k = 0; k < runs.reports.size(); ++k) {
        const BraessReport& r = runs.reports[k];
        const auto t = [](const EvacuationRun& e) { return e.exit_time ? num(*e.exit_time, 6) : std::string("never"); };
        o.check(r.variant_faster(), "dx=" + num(runs.dx[k]) + " open " + t(r.baseline) + " s vs columns " +
                                        t(r.variant) + " s");
        const double worst = std::max(runs.seconds[2 * k], runs.seconds[2 * k + 1]);
        o.check(worst < 300.0, "slowest run " + num(worst, 3) + " s");
    }
    return o;
}

// 4: bump translated at constant velocity; L1 error rate per halving of dx.
Outcome transport_accuracy() {
    Outcome o;
    const Vec2 dir{0.8, 0.6};
    const Vec2 c0{0.6, 0.6};
    const double T = 0.5;
    const Bump bump{c0, 0.4, 1.0};
    std::vector<double> errs;
    for (double dx : {0.04, 0.02, 0.01}) {
        SimulationSetup setup;
        setup.model.kind = ModelKind::Local;
        setup.model.speed = SpeedLaw::constant(1.0);
        setup.geometry = rasterize_geometry({0, 2, 0, 2}, {}, {}, dx);
        const Grid2D& g = setup.geometry.grid();
        VectorField nu(g);
        DensityField rho(g, 0.0);
        for (std::size_t k = 0; k < g.size(); ++k) {
            if (setup.geometry.classes()[k] != CellClass::Free) continue;
            nu[k] = dir;
            rho[k] = bump(g.center(g.col(k), g.row(k)));
        }
        setup.directions.push_back(nu);
        const Simulation sim(setup);
        SimState s;
        s.densities = {rho};
        RunControl control;
        control.scheme = {0.45, 1.0, T, T};
        const DensityField out = run(sim, s, control).snapshots.back().densities.front();
        const Bump moved{c0 + dir * T, 0.4, 1.0};
        double err = 0.0;
        for (std::size_t k = 0; k < g.size(); ++k) err += std::abs(out[k] - moved(g.center(g.col(k), g.row(k))));
        errs.push_back(err * g.cell_area());
    }
    for (std::size_t k = 1; k < errs.size(); ++k) {
        const double rate = std::log2(errs[k - 1] / errs[k]);
        o.check(rate >= 0.7, "rate " + num(rate, 3));
    }
    return o;
}

// 5: finite differences against the linearized solution.
Outcome gateaux() {
    Outcome o;
    const auto start = std::chrono::steady_clock::now();
    for (const char* file : {"gateaux.cfg", "gateaux_linear.cfg"}) {
        const ScenarioConfig cfg = load_config(kScenarios / file);
        const SimulationSetup setup = make_setup(cfg);
        const DensityField rho0 = population_datum(cfg.populations.front(), setup.geometry);
        const DensityField r0 = bump_field(cfg.gateaux->direction, setup.geometry);
        const GateauxResult r = gateaux_check(setup, rho0, r0, cfg.gateaux->h, cfg.scheme.end_time, cfg.scheme);
        std::string errs;
        for (double e : r.error) errs += (errs.empty() ? "" : ",") + num(e, 3);
        if (cfg.model.speed.family() == SpeedLaw::Family::Constant) {
            const double worst = *std::max_element(r.error.begin(), r.error.end());
            o.check(worst <= 1e-10, "linear e(h) = " + errs);
        } else {
            o.check(r.nonincreasing, "e(h) = " + errs);
            o.check(r.slope >= 0.9, "slope " + num(r.slope, 3));
        }
    }
    const double secs = seconds_since(start);
    o.check(secs < 120.0, num(secs, 3) + " s");
    return o;
}

// 6: attracting orbit keeps the reachable set inside B(0, 2 + 2 dx).
Outcome confinement_positive() {
    Outcome o;
    const ScenarioConfig cfg = load_config(kScenarios / "confine_positive.cfg");
    const ConfinementSpec& c = *cfg.confinement;
    const ConfinementVerdict v = confinement_condition(c.psi, c.c, c.orbit_radius, c.r_minus, c.r_plus, c.samples);
    o.check(v.holds && std::abs(v.margin - 0.1) <= 1e-6, "margin " + num(v.margin, 10));
    ReachParams p = c.reach;
    p.snapshot_interval = 0.05;
    const ReachResult r = reach_evolve(c.initial_set, c.tracks, c.psi, c.c, p);
    double radius = 0.0;
    for (const OccupancyField& occ : r.snapshots) {
        const Grid2D& g = occ.u.grid();
        for (int j = 0; j < g.ny(); ++j) {
            for (int i = 0; i < g.nx(); ++i) {
                if (occ.inside(i, j)) radius = std::max(radius, norm(g.center(i, j)));
            }
        }
    }
    o.check(radius <= 2.0 + 2.0 * p.dx && r.snapshots.back().t >= 20.0,
            "max radius " + num(radius) + " up to t = " + num(r.snapshots.back().t));
    return o;
}

// 7: free motion disperses the crowd; the zero-drift ball grows as pi (1 + t)^2.
Outcome dispersal() {
    Outcome o;
    for (const char* file : {"confine_dispersal.cfg", "confine_repulsive.cfg"}) {
        const ScenarioConfig cfg = load_config(kScenarios / file);
        const ConfinementSpec& c = *cfg.confinement;
        const double r0 = std::get<Disc>(c.initial_set.front()).radius;
        const double area0 = kPi * r0 * r0;
        const DispersalVerdict d = dispersal_condition(c.psi, c.c, area0, 20.0 * area0);
        o.check(d.holds, std::string(file) + " condition margin " + num(d.margin));
        const ReachResult r = reach_evolve(c.initial_set, c.tracks, c.psi, c.c, c.reach);
        const double growth = r.area.back() / r.area.front();
        o.check(growth > 2.0, "area x" + num(growth, 3));
        if (c.psi.family() == PsiProfile::Family::Constant && c.psi(1.0) == 0.0 && c.tracks.empty()) {
            bool monotone = true;
            for (std::size_t k = 1; k < r.area.size(); ++k) monotone = monotone && r.area[k] >= r.area[k - 1];
            o.check(monotone, "monotone");
            double worst = 0.0;
            for (const OccupancyField& occ : r.snapshots) {
                const double exact = kPi * (r0 + c.c * occ.t) * (r0 + c.c * occ.t);
                worst = std::max(worst, std::abs(occ.area() / exact - 1.0));
            }
            o.check(worst <= 0.05, "ball error " + num(100.0 * worst, 3) + "%");
        }
    }
    return o;
}

// 8: independent references.
Outcome oracles() {
    Outcome o;
    {
        const Grid2D g({0.0, 0.0}, 0.05, 0.05, 60, 50);
        std::mt19937 gen(42);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        ScalarField rho(g);
        for (double& v : rho.values()) v = u(gen);
        const Kernel k = build_kernel({KernelProfile::Poly3, 0.6, false, {}}, g);
        const ScalarField ref = oracle::direct_sum(rho, k.weights(), k.half_width());
        const ScalarField ref_x = oracle::direct_sum(rho, k.grad_x(), k.half_width());
        const ScalarField ref_y = oracle::direct_sum(rho, k.grad_y(), k.half_width());
        const ScalarField got = convolve(rho, k);
        const VectorField grad = convolve_grad(rho, k);
        double worst = 0.0;
        for (std::size_t n = 0; n < g.size(); ++n) {
            worst = std::max(worst, std::abs(got[n] - ref[n]) / std::max(1.0, std::abs(ref[n])));
            worst = std::max(worst, std::abs(grad[n].x - ref_x[n]) / std::max(1.0, std::abs(ref_x[n])));
            worst = std::max(worst, std::abs(grad[n].y - ref_y[n]) / std::max(1.0, std::abs(ref_y[n])));
        }
        o.check(worst <= 1e-12, "convolution rel. diff " + num(worst, 3));
    }
    {
        const ScenarioConfig cfg = load_config(kScenarios / "braess_columns.cfg");
        const RoomGeometry geom = rasterize_geometry(cfg.geometry.domain, cfg.geometry.obstacles, cfg.geometry.exits,
                                                     cfg.geometry.dx);
        const DistanceField fm = solve_eikonal(geom);
        const ScalarField dj = oracle::dijkstra(geom);
        double excess = -1e300;
        for (std::size_t k = 0; k < fm.size(); ++k) {
            if (geom.classes()[k] != CellClass::Free) continue;
            excess = std::max(excess, std::abs(fm[k] - dj[k]) - (2.0 * cfg.geometry.dx + 0.05 * dj[k]));
        }
        o.check(excess <= 0.0, "eikonal worst slack " + num(-excess, 3) + " m");
    }
    {
        const PsiProfile psi = PsiProfile::constant(-1.0);
        const std::vector<AgentTrack> tracks{orbit_strategy(1.0, 1.0, 0.0)};
        ReachParams p;
        p.domain = {-3.0, 3.0, -3.0, 3.0};
        p.dx = 0.1;
        p.end_time = 1.0;
        p.snapshot_interval = 1.0;
        const Disc k0{{0.0, 0.0}, 0.6};
        const std::vector<Obstacle> shapes{k0};
        const ReachResult r = reach_evolve(shapes, tracks, psi, 0.5, p);
        const auto f = [&](Vec2 x, double t) { return drift(psi, x, tracks[0].position(t)); };
        const auto cloud = oracle::particle_cloud(r.snapshots.back().u.grid(), k0, f, 0.5, 1.0, 20, 32);
        const int h = oracle::hausdorff_cells(oracle::inside_cells(r.snapshots.back()), cloud);
        o.check(h <= 1, "reach Hausdorff " + std::to_string(h) + " cell");
    }
    {
        std::mt19937 gen(9);
        std::normal_distribution<double> n(0.0, 1.0);
        std::vector<double> xs(5000);
        for (double& x : xs) x = n(gen);
        std::vector<double> sorted = xs;
        std::sort(sorted.begin(), sorted.end());
        o.check(rearrange(xs) == sorted, "rearrange == sort");
    }
    return o;
}

std::string command_for(const ScenarioConfig& c) {
    if (c.braess) return "braess";
    if (c.confinement) return "confine";
    if (c.gateaux) return "gateaux";
    return "simulate";
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// 9: every bundled scenario, run twice, writes identical bytes.
Outcome determinism() {
    Outcome o;
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(kScenarios)) {
        if (e.path().extension() == ".cfg") files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    const fs::path root = fs::temp_directory_path() / "crowd_acceptance";
    std::size_t compared = 0;
    for (const fs::path& f : files) {
        const std::string cmd = command_for(load_config(f));
        bool same = true;
        for (int rep = 0; rep < 2; ++rep) {
            const fs::path dir = root / f.stem() / std::to_string(rep);
            fs::remove_all(dir);
            CliOptions opt;
            opt.out = dir;
            std::ostringstream so, se;
            const int code = run_command(cmd, f, opt, so, se);
            if (code != 0) {
                same = false;
                o.check(false, f.filename().string() + " exit " + std::to_string(code) + ": " + se.str());
            }
        }
        const fs::path a = root / f.stem() / "0";
        const fs::path b = root / f.stem() / "1";
        std::size_t n = 0;
        if (fs::exists(a)) {
            for (const auto& e : fs::directory_iterator(a)) {
                same = same && fs::exists(b / e.path().filename()) && slurp(e.path()) == slurp(b / e.path().filename());
                ++n;
            }
        }
        same = same && n > 0;
        compared += n;
        if (!same) o.check(false, f.filename().string() + " differs");
    }
    o.check(o.pass, std::to_string(files.size()) + " scenarios, " + std::to_string(compared) + " files identical");
    return o;
}

void report(int id, const char* name, const std::function<Outcome()>& body, bool& all) {
    Outcome o;
    try {
        o = body();
    } catch (const std::exception& e) {
        o.pass = false;
        o.detail = std::string("exception: ") + e.what();
    }
    all = all && o.pass;
    std::printf("%s %d %s: %s\n", o.pass ? "PASS" : "FAIL", id, name, o.detail.c_str());
    std::fflush(stdout);
}

}  // namespace

int main() {
    bool all = true;
    report(1, "conservation", conservation, all);
    BraessRuns braess;
    std::string braess_error;
    try {
        braess = braess_runs();
    } catch (const std::exception& e) {
        braess_error = e.what();
    }
    auto with_braess = [&](Outcome (*f)(const BraessRuns&)) {
        return [&braess, &braess_error, f] {
            if (!braess_error.empty()) throw std::runtime_error(braess_error);
            return f(braess);
        };
    };
    report(2, "positivity and maximum principle", with_braess(max_principle), all);
    report(3, "Braess ordering", with_braess(braess_ordering), all);
    report(4, "transport accuracy", transport_accuracy, all);
    report(5, "Gateaux check", gateaux, all);
    report(6, "confinement", confinement_positive, all);
    report(7, "dispersal", dispersal, all);
    report(8, "oracle equivalences", oracles, all);
    report(9, "determinism", determinism, all);
    return all ? 0 : 1;
}
