#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>
#include <sstream>
#include <string>

#include "crowd/cli.hpp"
#include "crowd/config.hpp"
#include "crowd/confinement.hpp"
#include "crowd/errors.hpp"
#include "crowd/nonlocal.hpp"

namespace py = pybind11;
using namespace crowd;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

ScalarField to_field(const Array& a, double dx) {
    if (a.ndim() != 2) throw py::value_error("expected a 2D array indexed [j, i]");
    const int ny = static_cast<int>(a.shape(0));
    const int nx = static_cast<int>(a.shape(1));
    ScalarField f(Grid2D({0.0, 0.0}, dx, dx, nx, ny));
    auto r = a.unchecked<2>();
    for (int j = 0; j < ny; ++j) {
        for (int i = 0; i < nx; ++i) f(i, j) = r(j, i);
    }
    return f;
}

Array to_array(const ScalarField& f) {
    const Grid2D& g = f.grid();
    Array out({g.ny(), g.nx()});
    auto w = out.mutable_unchecked<2>();
    for (int j = 0; j < g.ny(); ++j) {
        for (int i = 0; i < g.nx(); ++i) w(j, i) = f(i, j);
    }
    return out;
}

KernelSpec poly3(double radius, bool normalized) {
    KernelSpec spec;
    spec.radius = radius;
    spec.normalized = normalized;
    return spec;
}

PsiProfile psi_from(const std::string& family, double a, double b) {
    if (family == "constant") return PsiProfile::constant(a);
    if (family == "exp") return PsiProfile::exponential(a);
    if (family == "affine") return PsiProfile::affine(a, b);
    throw py::value_error("unknown psi family: " + family);
}

py::dict evacuation_dict(const EvacuationRun& r) {
    py::dict d;
    d["name"] = r.name;
    d["exit_time"] = r.exit_time;
    d["steps"] = r.steps;
    d["rho_min"] = r.rho_min;
    d["rho_max"] = r.rho_max;
    d["initial_mass"] = r.initial_mass;
    d["final_mass"] = r.final_mass;
    return d;
}

}  // namespace

PYBIND11_MODULE(crowd, m) {
    m.doc() = "Macroscopic crowd dynamics: nonlocal conservation laws, agents and reachable sets";

    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);

    m.def(
        "run",
        [](const std::string& command, const std::string& config, const std::string& out, std::optional<double> dx,
           std::optional<double> end_time) {
            CliOptions options;
            options.out = out;
            options.dx = dx;
            options.end_time = end_time;
            std::ostringstream o, e;
            int code = 0;
            {
                py::gil_scoped_release release;
                code = run_command(command, config, options, o, e);
            }
            return py::make_tuple(code, o.str(), e.str());
        },
        py::arg("command"), py::arg("config"), py::arg("out") = ".", py::arg("dx") = py::none(),
        py::arg("end_time") = py::none(), "Run a CLI subcommand; returns (exit code, stdout, stderr).");

    m.def(
        "config_hash",
        [](const std::string& text) {
            std::ostringstream s;
            s << std::hex << fnv1a64(text);
            return s.str();
        },
        py::arg("text"));

    m.def(
        "evacuate",
        [](const std::string& config, double fraction, std::optional<double> dx) {
            ScenarioConfig c = load_config(config);
            CliOptions options;
            options.dx = dx;
            apply_overrides(c, options);
            EvacuationRun r;
            {
                py::gil_scoped_release release;
                r = run_evacuation(c, fraction);
            }
            return evacuation_dict(r);
        },
        py::arg("config"), py::arg("fraction") = 0.999, py::arg("dx") = py::none(),
        "Run a scenario until the given fraction has left.");

    m.def(
        "convolve",
        [](const Array& rho, double dx, double radius, bool normalized) {
            const ScalarField f = to_field(rho, dx);
            return to_array(convolve(f, build_kernel(poly3(radius, normalized), f.grid())));
        },
        py::arg("rho"), py::arg("dx"), py::arg("radius"), py::arg("normalized") = false,
        "Poly3 mollification of a [j, i] array of cell values.");

    m.def(
        "averaged_radial_drift",
        [](const std::string& family, double a, double b, double R, double s) {
            return averaged_radial_drift(psi_from(family, a, b), R, s);
        },
        py::arg("family"), py::arg("a"), py::arg("b") = 0.0, py::arg("R"), py::arg("s"));

    m.def(
        "confinement_condition",
        [](const std::string& family, double a, double b, double c, double R, double r_minus, double r_plus) {
            const ConfinementVerdict v = confinement_condition(psi_from(family, a, b), c, R, r_minus, r_plus);
            return py::make_tuple(v.holds, v.margin, v.worst_radius);
        },
        py::arg("family"), py::arg("a"), py::arg("b") = 0.0, py::arg("c"), py::arg("R"), py::arg("r_minus"),
        py::arg("r_plus"), "Returns (holds, margin, worst radius).");
}
