#include "crowd/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <vector>

#include "crowd/errors.hpp"

namespace crowd {

std::uint64_t fnv1a64(std::string_view text) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : text) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    return h;
}

namespace {

struct Entry {
    std::string key;
    std::string value;
    int line = 0;
};

struct Section {
    std::string name;
    int line = 0;
    std::vector<Entry> entries;
};

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

std::vector<Section> tokenize(std::string_view text) {
    std::vector<Section> sections;
    int line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const std::size_t end = std::min(text.find('\n', pos), text.size());
        std::string_view line = text.substr(pos, end - pos);
        pos = end + 1;
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) {
            if (end == text.size()) break;
            continue;
        }
        if (line.front() == '[') {
            if (line.back() != ']') throw ConfigError("malformed section header", line_no);
            const std::string_view name = trim(line.substr(1, line.size() - 2));
            if (name.empty()) throw ConfigError("empty section name", line_no);
            sections.push_back({std::string(name), line_no, {}});
        } else {
            const auto eq = line.find('=');
            if (eq == std::string_view::npos) throw ConfigError("expected 'key = value'", line_no);
            const std::string_view key = trim(line.substr(0, eq));
            const std::string_view value = trim(line.substr(eq + 1));
            if (key.empty()) throw ConfigError("missing key before '='", line_no);
            if (value.empty()) throw ConfigError("missing value for '" + std::string(key) + "'", line_no);
            if (sections.empty()) throw ConfigError("key '" + std::string(key) + "' outside any section", line_no);
            sections.back().entries.push_back({std::string(key), std::string(value), line_no});
        }
        if (end == text.size()) break;
    }
    return sections;
}

std::vector<std::string_view> split_ws(std::string_view s) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < s.size()) {
        while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
        std::size_t j = i;
        while (j < s.size() && s[j] != ' ' && s[j] != '\t') ++j;
        if (j > i) out.push_back(s.substr(i, j - i));
        i = j;
    }
    return out;
}

std::vector<std::string_view> split_commas(std::string_view s) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = s.find(',', start);
        out.push_back(trim(s.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start)));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return out;
}

double to_number(std::string_view token, int line) {
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
    if (ec != std::errc() || ptr != token.data() + token.size() || !std::isfinite(v)) {
        throw ConfigError("expected a number, got '" + std::string(token) + "'", line);
    }
    return v;
}

std::vector<double> numbers(std::string_view s, int line) {
    std::vector<double> out;
    for (std::string_view t : split_ws(s)) out.push_back(to_number(t, line));
    return out;
}

std::vector<double> numbers(const Entry& e, std::size_t min_count, std::size_t max_count) {
    std::vector<double> v = numbers(e.value, e.line);
    if (v.size() < min_count || v.size() > max_count) {
        const std::string want = min_count == max_count ? std::to_string(min_count)
                                                        : std::to_string(min_count) + "-" + std::to_string(max_count);
        throw ConfigError("'" + e.key + "' expects " + want + " numbers", e.line);
    }
    return v;
}

double number(const Entry& e) { return numbers(e, 1, 1).front(); }

bool boolean(const Entry& e) {
    const std::string& v = e.value;
    if (v == "true" || v == "yes" || v == "1" || v == "on") return true;
    if (v == "false" || v == "no" || v == "0" || v == "off") return false;
    throw ConfigError("'" + e.key + "' expects true or false", e.line);
}

int integer(const Entry& e) {
    int v = 0;
    const auto [ptr, ec] = std::from_chars(e.value.data(), e.value.data() + e.value.size(), v);
    if (ec != std::errc() || ptr != e.value.data() + e.value.size()) {
        throw ConfigError("'" + e.key + "' expects an integer", e.line);
    }
    return v;
}

Rect rect_of(const Entry& e) {
    const auto v = numbers(e, 4, 4);
    if (!(v[1] > v[0]) || !(v[3] > v[2])) throw ConfigError("rectangle needs x0 < x1 and y0 < y1", e.line);
    return {v[0], v[1], v[2], v[3]};
}

Disc disc_of(const Entry& e) {
    const auto v = numbers(e, 3, 3);
    if (!(v[2] > 0.0)) throw ConfigError("disc radius must be positive", e.line);
    return {{v[0], v[1]}, v[2]};
}

Bump bump_of(const Entry& e) {
    const auto v = numbers(e, 4, 4);
    if (!(v[2] > 0.0)) throw ConfigError("bump radius must be positive", e.line);
    if (!(v[3] >= 0.0)) throw ConfigError("bump amplitude must be non-negative", e.line);
    return {{v[0], v[1]}, v[2], v[3]};
}

std::vector<std::vector<double>> tuples(const Entry& e, std::size_t min_width, std::size_t max_width) {
    std::vector<std::vector<double>> out;
    for (std::string_view part : split_commas(e.value)) {
        std::vector<double> row = numbers(part, e.line);
        if (row.size() < min_width || row.size() > max_width) {
            throw ConfigError("'" + e.key + "' has a malformed entry '" + std::string(part) + "'", e.line);
        }
        out.push_back(std::move(row));
    }
    return out;
}

// Key lookup with unknown/duplicate detection.
class Reader {
public:
    Reader(const Section& s, std::set<std::string> keys, std::set<std::string> repeatable = {})
        : section_(s), repeatable_(std::move(repeatable)) {
        keys.insert(repeatable_.begin(), repeatable_.end());
        std::map<std::string, int> seen;
        for (const Entry& e : s.entries) {
            if (!keys.contains(e.key)) {
                throw ConfigError("unknown key '" + e.key + "' in [" + s.name + "]", e.line);
            }
            if (!repeatable_.contains(e.key) && seen[e.key]++ > 0) {
                throw ConfigError("duplicate key '" + e.key + "' in [" + s.name + "]", e.line);
            }
        }
    }

    const Entry* find(const std::string& key) const {
        for (const Entry& e : section_.entries) {
            if (e.key == key) return &e;
        }
        return nullptr;
    }

    std::vector<const Entry*> all(const std::string& key) const {
        std::vector<const Entry*> out;
        for (const Entry& e : section_.entries) {
            if (e.key == key) out.push_back(&e);
        }
        return out;
    }

    const Entry& require(const std::string& key) const {
        if (const Entry* e = find(key)) return *e;
        throw ConfigError("[" + section_.name + "] needs '" + key + "'", section_.line);
    }

    double number_or(const std::string& key, double fallback) const {
        const Entry* e = find(key);
        return e ? number(*e) : fallback;
    }

private:
    const Section& section_;
    std::set<std::string> repeatable_;
};

void read_scenario(const Section& s, ScenarioConfig& c) {
    const Reader r(s, {"name"});
    if (const Entry* e = r.find("name")) c.name = e->value;
}

void read_geometry(const Section& s, ScenarioConfig& c) {
    const Reader r(s, {"domain", "dx"}, {"exit", "rect", "disc"});
    c.geometry.domain = rect_of(r.require("domain"));
    const Entry& dx = r.require("dx");
    c.geometry.dx = number(dx);
    if (!(c.geometry.dx > 0.0)) throw ConfigError("dx must be positive", dx.line);
    for (const Entry* e : r.all("exit")) c.geometry.exits.push_back(rect_of(*e));
    for (const Entry& e : s.entries) {
        if (e.key == "rect") c.geometry.obstacles.emplace_back(rect_of(e));
        if (e.key == "disc") c.geometry.obstacles.emplace_back(disc_of(e));
    }
}

void read_model(const Section& s, ScenarioConfig& c) {
    const Reader r(s, {"type", "speed", "vmax", "rho_max", "speed_table", "kernel", "kernel_table", "kernel_radius",
                       "kernel_normalized", "epsilon", "perp_sign", "direction"});
    const Entry& type = r.require("type");
    static const std::map<std::string, ModelKind> kinds{{"local", ModelKind::Local},
                                                        {"S", ModelKind::S},
                                                        {"R", ModelKind::R},
                                                        {"piper", ModelKind::Piper},
                                                        {"shepherd", ModelKind::Shepherd}};
    const auto kind = kinds.find(type.value);
    if (kind == kinds.end()) throw ConfigError("unknown model type '" + type.value + "'", type.line);
    c.model.kind = kind->second;

    const Entry* speed = r.find("speed");
    const std::string family = speed ? speed->value : "linear";
    const int speed_line = speed ? speed->line : s.line;
    try {
        if (family == "linear") {
            c.model.speed = SpeedLaw::linear(r.number_or("vmax", 1.0), r.number_or("rho_max", 1.0));
        } else if (family == "constant") {
            c.model.speed = SpeedLaw::constant(r.number_or("vmax", 1.0));
        } else if (family == "table") {
            const Entry& t = r.require("speed_table");
            std::vector<std::pair<double, double>> nodes;
            for (const auto& row : tuples(t, 2, 2)) nodes.emplace_back(row[0], row[1]);
            try {
                c.model.speed = SpeedLaw::tabulated(std::move(nodes));
            } catch (const ConfigError& err) {
                if (err.line() > 0) throw;
                throw ConfigError(err.what(), t.line);
            }
        } else {
            throw ConfigError("unknown speed family '" + family + "'", speed_line);
        }
    } catch (const ConfigError& err) {
        if (err.line() > 0) throw;
        throw ConfigError(err.what(), speed_line);
    }

    const Entry* kernel = r.find("kernel");
    if (kernel || r.find("kernel_radius")) {
        KernelSpec k;
        const std::string profile = kernel ? kernel->value : "poly3";
        if (profile == "poly3") {
            k.profile = KernelProfile::Poly3;
        } else if (profile == "table") {
            k.profile = KernelProfile::Tabulated;
            k.table = numbers(r.require("kernel_table"), 2, 100000);
        } else {
            throw ConfigError("unknown kernel profile '" + profile + "'", kernel->line);
        }
        if (const Entry* e = r.find("kernel_radius")) {
            k.radius = number(*e);
            if (!(k.radius > 0.0)) throw ConfigError("kernel_radius must be positive", e->line);
        }
        if (const Entry* e = r.find("kernel_normalized")) {
            k.normalized = boolean(*e);
        } else {
            const int line = kernel ? kernel->line : r.require("kernel_radius").line;
            throw ConfigError("kernel needs an explicit kernel_normalized = true|false", line);
        }
        c.model.kernel = k;
    }
    if (const Entry* e = r.find("epsilon")) {
        c.model.epsilon = number(*e);
        if (!(c.model.epsilon >= 0.0)) throw ConfigError("epsilon must be non-negative", e->line);
    }
    if (const Entry* e = r.find("perp_sign")) {
        c.model.perp_sign = integer(*e);
        if (c.model.perp_sign != 1 && c.model.perp_sign != -1) throw ConfigError("perp_sign must be 1 or -1", e->line);
    }
    if (const Entry* e = r.find("direction")) {
        const auto words = split_ws(e->value);
        if (words.size() == 1 && words[0] == "geodesic") {
            c.direction.kind = DirectionSpec::Kind::Geodesic;
        } else if (words.size() == 3 && words[0] == "uniform") {
            c.direction.kind = DirectionSpec::Kind::Uniform;
            c.direction.uniform = {to_number(words[1], e->line), to_number(words[2], e->line)};
            if (norm(c.direction.uniform) == 0.0) throw ConfigError("uniform direction must be non-zero", e->line);
        } else {
            throw ConfigError("direction must be 'geodesic' or 'uniform ax ay'", e->line);
        }
    }
    if (c.model.kind != ModelKind::Local && !c.model.kernel) {
        throw ConfigError("model " + type.value + " needs a kernel", type.line);
    }
}

void read_population(const Section& s, ScenarioConfig& c) {
    const Reader r(s, {"exits"}, {"rect", "bump"});
    PopulationSpec p;
    for (const Entry& e : s.entries) {
        if (e.key == "rect") {
            const auto v = numbers(e, 5, 5);
            if (!(v[1] > v[0]) || !(v[3] > v[2])) throw ConfigError("rectangle needs x0 < x1 and y0 < y1", e.line);
            if (!(v[4] >= 0.0)) throw ConfigError("density level must be non-negative", e.line);
            p.rects.push_back({{v[0], v[1], v[2], v[3]}, v[4]});
        } else if (e.key == "bump") {
            p.bumps.push_back(bump_of(e));
        }
    }
    if (const Entry* e = r.find("exits")) {
        for (double v : numbers(*e, 1, 1000)) {
            if (v != std::floor(v) || v < 0.0) throw ConfigError("exit indices must be non-negative integers", e->line);
            p.exits.push_back(static_cast<int>(v));
        }
    }
    c.populations.push_back(std::move(p));
}

void read_agent(const Section& s, ScenarioConfig& c) {
    const Reader r(s, {"role", "position", "waypoints"});
    const Entry& role = r.require("role");
    AgentSpec a;
    if (role.value == "leader") {
        a.role = AgentRole::Leader;
    } else if (role.value == "dog") {
        a.role = AgentRole::Dog;
    } else {
        throw ConfigError("agent role must be leader or dog", role.line);
    }
    const auto p = numbers(r.require("position"), 2, 2);
    a.position = {p[0], p[1]};
    if (const Entry* e = r.find("waypoints")) {
        if (a.role != AgentRole::Leader) throw ConfigError("only the leader follows waypoints", e->line);
        for (const auto& row : tuples(*e, 2, 2)) c.track.waypoints.push_back({row[0], row[1]});
    }
    c.agents.push_back(a);
}

void read_scheme(const Section& s, ScenarioConfig& c) {
    const Reader r(s, {"cfl", "dt_max", "end_time", "snapshot_interval", "evacuation_fraction", "stop_on_evacuation"});
    auto set = [&](const char* key, double& field) {
        if (const Entry* e = r.find(key)) field = number(*e);
    };
    set("cfl", c.scheme.cfl);
    set("dt_max", c.scheme.dt_max);
    set("end_time", c.scheme.end_time);
    set("snapshot_interval", c.scheme.snapshot_interval);
    if (const Entry* e = r.find("evacuation_fraction")) c.evacuation_fraction = number(*e);
    if (const Entry* e = r.find("stop_on_evacuation")) c.stop_on_evacuation = boolean(*e);
    try {
        validate(c.scheme);
    } catch (const ConfigError& err) {
        throw ConfigError(err.what(), s.line);
    }
}

void read_output(const Section& s, ScenarioConfig& c) {
    const Reader r(s, {"csv", "pgm", "pgm_max"});
    if (const Entry* e = r.find("csv")) c.output.csv = boolean(*e);
    if (const Entry* e = r.find("pgm")) c.output.pgm = boolean(*e);
    if (const Entry* e = r.find("pgm_max")) {
        c.output.pgm_max = number(*e);
        if (!(c.output.pgm_max > 0.0)) throw ConfigError("pgm_max must be positive", e->line);
    }
}

void read_cost(const Section& s, ScenarioConfig& c) {
    const Reader r(s, {"horizon", "penalty"}, {"region"});
    CostSpec cost;
    for (const Entry* e : r.all("region")) cost.region.push_back(rect_of(*e));
    cost.horizon = number(r.require("horizon"));
    const Entry& pen = r.require("penalty");
    const auto words = split_ws(pen.value);
    if (words.size() == 2 && words[0] == "excess") {
        cost.penalty.kind = Penalty::Kind::QuadraticExcess;
        cost.penalty.threshold = to_number(words[1], pen.line);
    } else if (!words.empty() && words[0] == "table") {
        cost.penalty.kind = Penalty::Kind::Tabulated;
        Entry rest = pen;
        rest.value = std::string(trim(std::string_view(pen.value).substr(5)));
        for (const auto& row : tuples(rest, 2, 2)) cost.penalty.table.emplace_back(row[0], row[1]);
    } else {
        throw ConfigError("penalty must be 'excess rho_hat' or 'table rho f, ...'", pen.line);
    }
    try {
        validate(cost);
    } catch (const ConfigError& err) {
        throw ConfigError(err.what(), s.line);
    }
    c.cost = std::move(cost);
}

void read_gateaux(const Section& s, ScenarioConfig& c) {
    const Reader r(s, {"h", "direction"});
    GateauxSpec g;
    if (const Entry* e = r.find("h")) g.h = numbers(*e, 1, 64);
    g.direction = bump_of(r.require("direction"));
    c.gateaux = std::move(g);
}

PsiProfile psi_of(const Entry& e) {
    const auto words = split_ws(e.value);
    if (words.empty()) throw ConfigError("psi is empty", e.line);
    try {
        if (words[0] == "constant" && words.size() == 2) return PsiProfile::constant(to_number(words[1], e.line));
        if (words[0] == "exp" && words.size() == 2) return PsiProfile::exponential(to_number(words[1], e.line));
        if (words[0] == "affine" && words.size() == 3) {
            return PsiProfile::affine(to_number(words[1], e.line), to_number(words[2], e.line));
        }
        if (words[0] == "table") {
            Entry rest = e;
            rest.value = std::string(trim(std::string_view(e.value).substr(5)));
            std::vector<double> r, psi, dpsi;
            const auto rows = tuples(rest, 2, 3);
            for (const auto& row : rows) {
                if (row.size() != rows.front().size()) throw ConfigError("psi table rows differ in width", e.line);
                r.push_back(row[0]);
                psi.push_back(row[1]);
                if (row.size() == 3) dpsi.push_back(row[2]);
            }
            return PsiProfile::tabulated(std::move(r), std::move(psi), std::move(dpsi));
        }
    } catch (const ConfigError& err) {
        if (err.line() > 0) throw;
        throw ConfigError(err.what(), e.line);
    }
    throw ConfigError("psi must be 'constant a', 'exp a', 'affine a b' or 'table r psi [dpsi], ...'", e.line);
}

void read_confinement(const Section& s, ScenarioConfig& c) {
    const Reader r(s,
                   {"psi", "c", "domain", "dx", "end_time", "cfl", "reinit", "snapshot_interval", "radius", "r_minus",
                    "r_plus", "sigma_max", "samples"},
                   {"initial_disc", "initial_rect", "orbit"});
    ConfinementSpec spec;
    spec.psi = psi_of(r.require("psi"));
    const Entry& ce = r.require("c");
    spec.c = number(ce);
    if (!(spec.c >= 0.0)) throw ConfigError("c must be non-negative", ce.line);
    for (const Entry& e : s.entries) {
        if (e.key == "initial_disc") spec.initial_set.emplace_back(disc_of(e));
        if (e.key == "initial_rect") spec.initial_set.emplace_back(rect_of(e));
        if (e.key == "orbit") {
            const auto v = numbers(e, 3, 5);
            if (v.size() == 4) throw ConfigError("orbit center needs both coordinates", e.line);
            if (!(v[0] > 0.0)) throw ConfigError("orbit radius must be positive", e.line);
            const Vec2 center = v.size() == 5 ? Vec2{v[3], v[4]} : Vec2{};
            spec.tracks.push_back(orbit_strategy(v[0], v[1], v[2], center));
        }
    }
    if (spec.initial_set.empty()) throw ConfigError("[confinement] needs initial_disc or initial_rect", s.line);
    if (const Entry* e = r.find("domain")) spec.reach.domain = rect_of(*e);
    spec.reach.dx = r.number_or("dx", spec.reach.dx);
    spec.reach.end_time = r.number_or("end_time", spec.reach.end_time);
    spec.reach.cfl = r.number_or("cfl", spec.reach.cfl);
    spec.reach.snapshot_interval = r.number_or("snapshot_interval", spec.reach.snapshot_interval);
    if (const Entry* e = r.find("reinit")) spec.reach.reinit_every = integer(*e);
    if (!(spec.reach.dx > 0.0)) throw ConfigError("confinement dx must be positive", s.line);
    spec.orbit_radius = spec.tracks.empty() ? 1.0 : spec.tracks.front().radius;
    spec.orbit_radius = r.number_or("radius", spec.orbit_radius);
    spec.r_minus = r.number_or("r_minus", 0.0);
    spec.r_plus = r.number_or("r_plus", 0.0);
    spec.sigma_max = r.number_or("sigma_max", 0.0);
    if (const Entry* e = r.find("samples")) spec.samples = integer(*e);
    c.confinement = std::move(spec);
}

void read_braess(const Section& s, ScenarioConfig& c) {
    const Reader r(s, {"baseline", "variant", "fraction"});
    BraessSpec b;
    b.baseline = r.require("baseline").value;
    b.variant = r.require("variant").value;
    b.fraction = r.number_or("fraction", b.fraction);
    c.braess = std::move(b);
}

}  // namespace

ScenarioConfig parse_config(std::string_view text) {
    ScenarioConfig c;
    c.source = std::string(text);
    c.hash = fnv1a64(text);
    const std::vector<Section> sections = tokenize(text);

    static const std::set<std::string> repeatable{"population", "agent"};
    std::set<std::string> seen;
    bool has_model = false;
    for (const Section& s : sections) {
        if (!repeatable.contains(s.name) && !seen.insert(s.name).second) {
            throw ConfigError("duplicate section [" + s.name + "]", s.line);
        }
        if (s.name == "scenario") read_scenario(s, c);
        else if (s.name == "geometry") read_geometry(s, c);
        else if (s.name == "model") {
            read_model(s, c);
            has_model = true;
        } else if (s.name == "population") read_population(s, c);
        else if (s.name == "agent") read_agent(s, c);
        else if (s.name == "scheme") read_scheme(s, c);
        else if (s.name == "output") read_output(s, c);
        else if (s.name == "cost") read_cost(s, c);
        else if (s.name == "gateaux") read_gateaux(s, c);
        else if (s.name == "confinement") read_confinement(s, c);
        else if (s.name == "braess") read_braess(s, c);
        else throw ConfigError("unknown section [" + s.name + "]", s.line);
    }

    // Pair files and pure confinement studies carry no crowd model.
    if (!has_model && (c.braess || c.confinement)) return c;
    if (!has_model) throw ConfigError("missing model");
    if (!seen.contains("geometry")) throw ConfigError("missing [geometry]");
    validate(c);
    return c;
}

ScenarioConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot read " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    ScenarioConfig c = parse_config(buf.str());
    if (c.braess) {
        const std::filesystem::path dir = path.parent_path();
        auto resolve = [&](std::string& p) {
            const std::filesystem::path q(p);
            if (q.is_relative()) p = (dir / q).lexically_normal().string();
        };
        resolve(c.braess->baseline);
        resolve(c.braess->variant);
    }
    return c;
}

}  // namespace crowd
