#include "visco/certify.hpp"
#include "visco/cli.hpp"

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

namespace py = pybind11;
using namespace visco;

namespace {

SymMatrix matrix_from(const std::vector<std::vector<double>>& m)
{
    if (m.size() == 1 && m[0].size() == 1) return SymMatrix(m[0][0]);
    if (m.size() == 2 && m[0].size() == 2 && m[1].size() == 2) {
        if (m[0][1] != m[1][0]) throw InvalidArgument("matrix must be symmetric");
        return SymMatrix(m[0][0], m[0][1], m[1][1]);
    }
    throw InvalidArgument("matrix must be 1x1 or 2x2");
}

py::dict report_dict(const SolveReport& r)
{
    py::dict d;
    d["iterations"] = r.iterations;
    d["final_residual"] = r.final_residual;
    d["converged"] = r.converged;
    d["bracket_source"] = r.bracket_source;
    d["bracket_certified"] = r.bracket_certified;
    d["bracket_preserved"] = r.bracket_preserved;
    d["eps_history"] = r.eps_history;
    d["residual_history"] = r.residual_history;
    return d;
}

/// Node coordinates as an (n, dim) array; radial grids report the radius.
py::array_t<double> nodes(const Grid& g)
{
    const bool two = g.kind() == GridKind::tensor;
    py::array_t<double> out({static_cast<py::ssize_t>(g.size()), static_cast<py::ssize_t>(two ? 2 : 1)});
    auto w = out.mutable_unchecked<2>();
    for (std::size_t k = 0; k < g.size(); ++k) {
        const auto i = static_cast<py::ssize_t>(k);
        if (g.kind() == GridKind::radial) {
            w(i, 0) = g.radius(k);
        } else {
            w(i, 0) = g.node(k).x;
            if (two) w(i, 1) = g.node(k).y;
        }
    }
    return out;
}

py::array_t<double> values(const GridFunction& u) { return py::array_t<double>(u.values.size(), u.values.data()); }

} // namespace

PYBIND11_MODULE(_visco, m)
{
    m.doc() = "Monotone finite differences and certificates for singular/degenerate fully nonlinear equations";

    auto error = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
    py::register_exception<cli::ConfigError>(m, "ConfigError", error.ptr());
    py::register_exception<ParseError>(m, "ParseError", error.ptr());
    py::register_exception<ExponentOutOfRange>(m, "ExponentOutOfRange", error.ptr());
    py::register_exception<MaxItersExceeded>(m, "MaxItersExceeded", error.ptr());
    py::register_exception<BracketViolated>(m, "BracketViolated", error.ptr());

    py::class_<Expr>(m, "Expr")
        .def(py::init(&parse_expression), py::arg("text"))
        .def("__call__", [](const Expr& e, double x, double y) { return e.eval(Vec2{x, y}); }, py::arg("x"),
             py::arg("y") = 0.0)
        .def("derivative", [](const Expr& e, const std::string& var) {
            if (var != "x" && var != "y") throw InvalidArgument("variable must be x or y");
            return differentiate(e, var == "x" ? Var::x : Var::y).expr;
        })
        .def("has_kinks", &Expr::has_kinks)
        .def("__str__", &Expr::str)
        .def("__repr__", [](const Expr& e) { return "Expr('" + e.str() + "')"; })
        .def("__eq__", [](const Expr& a, const Expr& b) { return a == b; });

    m.def("pucci_plus", [](const std::vector<std::vector<double>>& mat, double a, double A) {
        return pucci_plus(matrix_from(mat), EllipticityPair(a, A));
    }, py::arg("matrix"), py::arg("a"), py::arg("A"));
    m.def("pucci_minus", [](const std::vector<std::vector<double>>& mat, double a, double A) {
        return pucci_minus(matrix_from(mat), EllipticityPair(a, A));
    }, py::arg("matrix"), py::arg("a"), py::arg("A"));

    py::class_<cli::RunConfig>(m, "Config")
        .def_static("from_yaml", &cli::parse_config, py::arg("text"))
        .def_static("load", &cli::load_config, py::arg("path"))
        .def("echo", &cli::config_echo)
        .def("instance_hash", &cli::instance_hash)
        .def_property_readonly("h", [](const cli::RunConfig& c) { return c.h; })
        .def_property_readonly("alpha", [](const cli::RunConfig& c) { return c.problem.exponents.alpha; })
        .def_property_readonly("beta", [](const cli::RunConfig& c) { return c.problem.exponents.beta; })
        .def_property_readonly("lam", [](const cli::RunConfig& c) { return c.problem.exponents.lambda; })
        .def_property_readonly("f", [](const cli::RunConfig& c) { return c.problem.f; })
        .def("__repr__", [](const cli::RunConfig& c) { return "Config(" + cli::instance_hash(c) + ")"; });

    m.def("solve", [](const cli::RunConfig& c, std::optional<double> h) {
        const double step = h.value_or(c.h.front());
        const auto grid = std::make_shared<const Grid>(build_grid(c.problem.domain, step));
        SolveResult res;
        {
            py::gil_scoped_release release;
            res = solve(c.problem, grid, c.solver);
        }
        py::dict d;
        d["x"] = nodes(*grid);
        d["u"] = values(res.u);
        d["residual"] = values(discrete_residual(res.u, c.problem, c.solver));
        d["report"] = report_dict(res.report);
        if (c.exact) d["error"] = max_abs_diff(res.u, GridFunction::sample(grid, *c.exact));
        return d;
    }, py::arg("config"), py::arg("h") = py::none());

    m.def("manufacture", [](const std::string& u, const cli::RunConfig& c) {
        const ManufacturedRhs r = manufacture_rhs(parse_expression(u), c.problem);
        py::dict d;
        d["f"] = r.f;
        std::vector<std::pair<double, double>> pts;
        for (const Vec2& x : r.singular_points) pts.emplace_back(x.x, x.y);
        d["singular_points"] = pts;
        d["kink_warning"] = r.kink_warning;
        return d;
    }, py::arg("u"), py::arg("config"));

    m.def("comparison_suite", [](std::uint64_t seed, int count, bool monotone_gradient) {
        SchemeParams p;
        p.monotone_gradient = monotone_gradient;
        ComparisonSuiteReport r;
        {
            py::gil_scoped_release release;
            r = comparison_suite(seed, count, p);
        }
        py::dict d;
        d["violations"] = r.violations;
        d["unsolved"] = r.unsolved;
        d["passed"] = r.passed;
        std::vector<double> margins;
        for (const auto& o : r.outcomes) margins.push_back(o.margin);
        d["margins"] = margins;
        return d;
    }, py::arg("seed") = 7, py::arg("count") = 50, py::arg("monotone_gradient") = true);

    m.def("run_cli", [](std::vector<std::string> args) {
        args.insert(args.begin(), "visco");
        std::vector<const char*> argv;
        for (const auto& a : args) argv.push_back(a.c_str());
        std::ostringstream out, err;
        const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
        return py::make_tuple(code, out.str(), err.str());
    }, py::arg("args"), "Runs the command-line front end in process; returns (exit_code, stdout, stderr).");
}
