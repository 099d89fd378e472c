#include "doctest.h"

#include "visco/barriers.hpp"
#include "visco/errors.hpp"
#include "visco/scheme.hpp"

#include <cmath>
#include <random>

using namespace visco;

namespace {

using GridPtr = std::shared_ptr<const Grid>;

GridPtr grid_of(const Domain& dom, double h) { return std::make_shared<const Grid>(build_grid(dom, h)); }

ProblemSpec make_problem(Domain dom, double alpha, double beta, double lambda, const char* b, const char* f,
                         const char* phi, double a = 1.0, double A = 1.0)
{
    ProblemSpec p;
    p.domain = std::move(dom);
    p.exponents = {alpha, beta, lambda};
    p.ellipticity = EllipticityPair(a, A);
    p.b = parse_expression(b);
    p.f = parse_expression(f);
    p.phi = parse_expression(phi);
    return validate_problem(p);
}

/// Problem whose exact solution is u, with f built symbolically.
ProblemSpec manufactured(Domain dom, double alpha, double beta, const Expr& u, const char* b = "1", double a = 1.0,
                         double A = 2.0)
{
    ProblemSpec p = make_problem(std::move(dom), alpha, beta, 1.0, b, "0", "0", a, A);
    p.f = manufacture_rhs(u, p).f;
    p.phi = u;
    return validate_problem(p);
}

struct Smooth {
    double alpha, beta;
    const char* u;
    double lo, hi;
};

/// cos(pi x/2) has a critical point at 0, where f is singular for alpha < 0; that case uses a
/// monotone profile instead.
const Smooth kSmooth[] = {{0.0, 1.0, "cos(pi*x/2)", -1.0, 1.0},
                          {1.0, 2.0, "cos(pi*x/2)", -1.0, 1.0},
                          {-0.5, 1.0, "sin(pi*x/3)", -0.5, 1.0}};

double uniform(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

} // namespace

TEST_CASE("centered gradient examples")
{
    const auto g = grid_of(Domain::interval(-1.0, 1.0), 0.25);
    const auto lin = GridFunction::sample(g, parse_expression("2*x"));
    for (std::size_t k : g->interior()) CHECK(discrete_gradient(lin, k).p.x == doctest::Approx(2.0).epsilon(1e-15));
    const GridFunction flat(g, 3.5);
    for (std::size_t k : g->interior()) CHECK(discrete_gradient(flat, k).p.x == 0.0);

    const auto g2 = grid_of(Domain::interval(-1.0, 1.0), 0.5);
    const auto sq = GridFunction::sample(g2, parse_expression("x^2"));
    CHECK(discrete_gradient(sq, 2).p.x == 0.0);
    CHECK(discrete_gradient(sq, 2, 0.5).eps == 0.5);
}

TEST_CASE("upwind gradient picks the differences pointing against the drift")
{
    const auto g = grid_of(Domain::interval(-1.0, 1.0), 0.5);
    // Values at -1, -0.5, 0, 0.5, 1: a V with its tip at 0.
    const GridFunction v(g, {2.0, 1.0, 0.0, 1.0, 2.0});
    // b > 0: max(D-, 0) = 0, min(D+, 0) = 0 at the minimum.
    CHECK(monotone_gradient_magnitude(v, 2, 1.0) == 0.0);
    // b < 0: min(D-, 0)^2 + max(D+, 0)^2 = 4 + 4.
    CHECK(monotone_gradient_magnitude(v, 2, -1.0) == doctest::Approx(std::sqrt(8.0)));
    // On the descending flank only the forward difference counts for b > 0, the backward one for b < 0.
    CHECK(monotone_gradient_magnitude(v, 1, 1.0) == doctest::Approx(2.0));
    CHECK(monotone_gradient_magnitude(v, 1, -1.0) == doctest::Approx(2.0));
    const GridFunction ramp(g, {0.0, 0.0, 1.0, 3.0, 6.0});
    CHECK(monotone_gradient_magnitude(ramp, 2, 1.0) == doctest::Approx(2.0));
    CHECK(monotone_gradient_magnitude(ramp, 2, -1.0) == doctest::Approx(4.0));
}

TEST_CASE("second differences are exact on quadratics")
{
    for (double h : {0.5, 0.25, 0.125}) {
        const auto g = grid_of(Domain::interval(-1.0, 1.0), h);
        const auto u = GridFunction::sample(g, parse_expression("x^2"));
        for (std::size_t k : g->interior()) {
            const auto e = discrete_hessian_extremes(u, k);
            CHECK(e.directional.size() == 1);
            CHECK(e.lambda_min == doctest::Approx(2.0).epsilon(1e-12));
            CHECK(e.lambda_max == doctest::Approx(2.0).epsilon(1e-12));
        }
    }
    const auto g = grid_of(Domain::rectangle({-1.0, -1.0}, {1.0, 1.0}), 0.25);
    const auto saddle = GridFunction::sample(g, parse_expression("x^2 - y^2"));
    const auto mixed = GridFunction::sample(g, parse_expression("x*y"));
    for (std::size_t k : g->interior()) {
        const auto e = discrete_hessian_extremes(saddle, k, Stencil::axis_only);
        CHECK(e.directional.size() == 2);
        CHECK(e.lambda_min == doctest::Approx(-2.0).epsilon(1e-12));
        CHECK(e.lambda_max == doctest::Approx(2.0).epsilon(1e-12));
        const auto w = discrete_hessian_extremes(mixed, k, Stencil::wide);
        CHECK(w.directional.size() == 4);
        CHECK(w.lambda_min == doctest::Approx(-1.0).epsilon(1e-12));
        CHECK(w.lambda_max == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("residual of boundary nodes is the Dirichlet mismatch")
{
    const auto prob = make_problem(Domain::interval(-1.0, 1.0), 0.0, 1.0, 1.0, "1", "1", "x");
    const auto g = grid_of(prob.domain, 0.25);
    const GridFunction u(g, 0.5);
    const auto r = discrete_residual(u, prob);
    CHECK(r[0] == doctest::Approx(1.5));
    CHECK(r[g->size() - 1] == doctest::Approx(-0.5));
    // Constant interior: only lambda u - f survives.
    CHECK(r[3] == doctest::Approx(-0.5));
}

TEST_CASE("discrete residual is consistent at first order")
{
    // |u'| >= e^-1 everywhere, so the regularization is not singular anywhere.
    const Expr u = parse_expression("exp(x)");
    for (auto [alpha, beta] : {std::pair{0.0, 1.0}, {0.5, 1.5}, {-0.5, 1.0}}) {
        const auto prob = manufactured(Domain::interval(-1.0, 1.0), alpha, beta, u, "1 + 0.5*sin(3*x)");
        double prev = 0.0;
        // The upwind first-order term makes the error exactly O(h); rates approach 1 from below.
        for (int k = 5; k <= 10; ++k) {
            const auto g = grid_of(prob.domain, std::ldexp(1.0, -k));
            const double err = discrete_residual(GridFunction::sample(g, u), prob).max_abs();
            if (k > 5) {
                CAPTURE(alpha);
                CAPTURE(k);
                CHECK(std::log2(prev / err) >= 0.98);
            }
            prev = err;
        }
    }
}

TEST_CASE("the scheme is monotone under random perturbations")
{
    std::mt19937_64 rng(11);
    struct Case {
        ProblemSpec prob;
        double h;
    };
    std::vector<Case> cases;
    cases.push_back({make_problem(Domain::interval(-1.0, 1.0), -0.5, 1.0, 1.0, "2*sin(4*x)", "1", "0", 0.5, 2.0),
                     2.0 / 1024});
    cases.push_back({make_problem(Domain::interval(-1.0, 1.0), 1.0, 2.5, 0.3, "-1 + x", "1", "0", 1.0, 3.0),
                     2.0 / 1024});
    cases.push_back({make_problem(Domain::ball({0.0, 0.0}, 1.0), 0.5, 1.5, 1.0, "1", "1", "0", 1.0, 2.0),
                     1.0 / 1024});
    cases.push_back({make_problem(Domain::rectangle({0.0, 0.0}, {1.0, 1.0}), 0.0, 1.0, 1.0, "cos(3*x) - y", "1", "0",
                                  1.0, 2.0),
                     1.0 / 32});
    for (const auto& c : cases) {
        const auto g = grid_of(c.prob.domain, c.h);
        GridFunction u(g);
        for (auto& v : u.values) v = 2.0 * uniform(rng) - 1.0;
        SchemeParams params;
        const double eps = params.eps_rule(c.h);
        const auto base = discrete_residual(u, c.prob, params, eps);
        const auto interior = g->interior();
        for (int trial = 0; trial < 1000; ++trial) {
            const std::size_t k = interior[static_cast<std::size_t>(uniform(rng) * interior.size())];
            const double bump = 1e-3 * (0.1 + uniform(rng));
            GridFunction self = u;
            self[k] += bump;
            CHECK(discrete_residual(self, c.prob, params, eps)[k] > base[k]);
            // Neighbour within the widest stencil.
            std::size_t j = k;
            if (g->kind() == GridKind::tensor) {
                const int di = static_cast<int>(uniform(rng) * 3) - 1;
                const int dj = di == 0 ? (uniform(rng) < 0.5 ? -1 : 1) : static_cast<int>(uniform(rng) * 3) - 1;
                j = static_cast<std::size_t>(static_cast<long>(k) + di + dj * g->nx());
            } else {
                j = (k == 0 || uniform(rng) < 0.5) ? k + 1 : k - 1;
            }
            GridFunction other = u;
            other[j] += bump;
            const double after = discrete_residual(other, c.prob, params, eps)[k];
            CHECK(after <= base[k] + 1e-12 * (1.0 + std::abs(base[k])));
        }
    }
}

TEST_CASE("zero data give the zero solution and a zero bracket")
{
    for (double alpha : {-0.5, 0.0, 1.0}) {
        const auto prob = make_problem(Domain::interval(-1.0, 1.0), alpha, 1.0 + 0.5 * (alpha + 1.0), 1.0, "3", "0", "0");
        const auto g = grid_of(prob.domain, 1.0 / 32);
        const auto br = bracket_from_barriers(prob, g);
        CHECK(br.source == "zero");
        CHECK(br.minus.max_abs() == 0.0);
        CHECK(br.plus.max_abs() == 0.0);
        const auto res = solve(prob, g);
        CHECK(res.report.converged);
        CHECK(res.u.max_abs() == 0.0);
    }
}

TEST_CASE("brackets from barriers")
{
    const auto prob = make_problem(Domain::interval(-1.0, 1.0), 0.0, 1.0, 1.0, "1", "1", "0");
    const auto g = grid_of(prob.domain, 1.0 / 64);
    const auto br = bracket_from_barriers(prob, g);
    CHECK(br.source == "barrier");
    CHECK(br.certified);
    CHECK(br.minus.max_abs() == 0.0);
    const auto psi = global_barrier(prob, 1.0);
    const double cap = std::log1p(psi.constants.kappa);
    for (std::size_t k = 0; k < g->size(); ++k) {
        CHECK(br.minus[k] <= br.plus[k]);
        CHECK(br.plus[k] <= psi.value(g->node(k)) + 1e-15);
        CHECK(br.plus[k] - br.minus[k] <= cap);
    }
    CHECK(br.minus_max_residual <= 0.0);
    CHECK(br.plus_min_residual >= 0.0);
}

TEST_CASE("barrier samples are discrete supersolutions on the log branch")
{
    const auto prob = make_problem(Domain::interval(-1.0, 1.0), 0.0, 1.0, 1.0, "-1", "0", "0", 1.0, 2.0);
    const auto psi = global_barrier(prob, 1.0);
    const double h = 1.0 / 1024;
    const auto g = grid_of(prob.domain, h);
    const auto w = GridFunction::sample(g, [&](Vec2 x) { return psi.value(x); });
    const auto r = discrete_residual(w, prob);
    const double d_switch = psi.constants.kappa / psi.constants.C;
    int checked = 0;
    for (std::size_t k : g->interior()) {
        if (prob.domain.distance(g->node(k)) > d_switch - 2.0 * h) continue;
        // Consistency error of the log profile is O(C^2 h).
        CHECK(r[k] >= 1.0 - 2.0 * psi.constants.C * psi.constants.C * h);
        ++checked;
    }
    CHECK(checked > 10);
}

TEST_CASE("manufactured solutions converge at least at rate 1.7 per halving")
{
    for (const Smooth& c : kSmooth) {
        const Expr u = parse_expression(c.u);
        const auto prob = manufactured(Domain::interval(c.lo, c.hi), c.alpha, c.beta, u);
        double prev = 0.0;
        for (int k = 4; k <= 7; ++k) {
            const auto g = grid_of(prob.domain, std::ldexp(1.0, -k));
            const auto res = solve(prob, g);
            REQUIRE(res.report.converged);
            CHECK(res.report.final_residual <= 1e-10);
            const double err = max_abs_diff(res.u, GridFunction::sample(g, u));
            if (k > 4) {
                CAPTURE(c.alpha);
                CAPTURE(k);
                CHECK(prev / err >= 1.7);
            }
            prev = err;
        }
    }
}

TEST_CASE("solves from either end of the bracket agree")
{
    for (const Smooth& c : kSmooth) {
        const Expr u = parse_expression(c.u);
        const auto prob = manufactured(Domain::interval(c.lo, c.hi), c.alpha, c.beta, u);
        const auto g = grid_of(prob.domain, 1.0 / 64);
        SchemeParams lo, hi;
        lo.start = StartFrom::minus;
        hi.start = StartFrom::plus;
        const auto a = solve(prob, g, lo);
        const auto b = solve(prob, g, hi);
        CHECK(max_abs_diff(a.u, b.u) <= 1e-6);
    }
}

TEST_CASE("fixed-point iteration stays inside the bracket")
{
    const auto prob = make_problem(Domain::interval(-1.0, 1.0), 0.0, 1.0, 1.0, "1", "1", "0");
    const auto g = grid_of(prob.domain, 1.0 / 16);
    SchemeParams params;
    params.method = SolveMethod::fixed_point;
    params.tol = 1e-8;
    params.max_iters = 200000;
    const auto fp = solve(prob, g, params);
    CHECK(fp.report.converged);
    CHECK(fp.report.bracket_certified);
    CHECK(fp.report.bracket_preserved);
    const auto& w = fp.report.bracket_width_history;
    REQUIRE(w.size() > 2);
    for (std::size_t k = 1; k < w.size(); ++k) CHECK(w[k] <= w[k - 1] + 1e-14);
    const auto nt = solve(prob, g);
    CHECK(max_abs_diff(fp.u, nt.u) <= 1e-6);
}

TEST_CASE("the solution is the unique fixed point: residual vanishes, boundary carries phi")
{
    const auto prob = make_problem(Domain::interval(-1.0, 1.0), 0.5, 1.5, 1.0, "x", "1 + x^2", "0.3*x");
    const auto g = grid_of(prob.domain, 1.0 / 32);
    const auto res = solve(prob, g);
    CHECK(discrete_residual(res.u, prob).max_abs() <= 1e-10);
    CHECK(res.u[0] == -0.3);
    CHECK(res.u[g->size() - 1] == 0.3);
}

TEST_CASE("symmetric data give symmetric solutions")
{
    {
        const auto prob = make_problem(Domain::interval(-1.0, 1.0), -0.5, 1.2, 1.0, "2", "1 + x^2", "0");
        const auto g = grid_of(prob.domain, 1.0 / 64);
        const auto u = solve(prob, g).u;
        const std::size_t n = g->size();
        for (std::size_t k = 0; k < n; ++k) CHECK(std::abs(u[k] - u[n - 1 - k]) <= 1e-12);
    }
    {
        const auto prob = make_problem(Domain::rectangle({-1.0, -1.0}, {1.0, 1.0}), 0.0, 1.0, 1.0, "1",
                                       "1 + x^2*y^2", "0");
        const auto g = grid_of(prob.domain, 1.0 / 8);
        const auto u = solve(prob, g).u;
        const int n = g->nx();
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < n; ++j) {
                const double v = u[g->index(i, j)];
                CHECK(std::abs(v - u[g->index(j, i)]) <= 1e-12);
                CHECK(std::abs(v - u[g->index(n - 1 - i, j)]) <= 1e-12);
            }
        }
    }
}

TEST_CASE("ordered right-hand sides give ordered solutions")
{
    const auto sup = make_problem(Domain::interval(-1.0, 1.0), 0.3, 1.5, 0.5, "4*sin(2*x)", "1 + cos(3*x)", "0.2");
    ProblemSpec sub = sup;
    sub.f = parse_expression("0.9 + cos(3*x) - abs(x)");
    sub = validate_problem(sub);
    const auto g = grid_of(sup.domain, 1.0 / 32);
    const auto v = solve(sup, g).u;
    const auto u = solve(sub, g).u;
    for (std::size_t k = 0; k < g->size(); ++k) CHECK(u[k] <= v[k] + 1e-9);
}

TEST_CASE("radial solves match the manufactured profile")
{
    const Expr u = parse_expression("cos(pi*(x^2 + y^2)/2)");
    const auto prob = manufactured(Domain::ball({0.0, 0.0}, 1.0), 0.0, 1.0, u);
    double prev = 0.0;
    for (int k = 4; k <= 6; ++k) {
        const auto g = grid_of(prob.domain, std::ldexp(1.0, -k));
        const auto res = solve(prob, g);
        REQUIRE(res.report.converged);
        const double err = max_abs_diff(res.u, GridFunction::sample(g, u));
        if (k > 4) CHECK(prev / err >= 1.7);
        prev = err;
    }
}

TEST_CASE("iteration budget and parameter checks")
{
    const auto prob = make_problem(Domain::interval(-1.0, 1.0), 0.0, 1.0, 1.0, "1", "1", "0");
    const auto g = grid_of(prob.domain, 1.0 / 64);
    SchemeParams params;
    params.method = SolveMethod::fixed_point;
    params.max_iters = 3;
    try {
        solve(prob, g, params);
        FAIL("expected MaxItersExceeded");
    } catch (const MaxItersExceeded& e) {
        CHECK(e.iterations() >= 3);
        CHECK(e.residual() > 0.0);
    }
    SchemeParams bad;
    bad.dt_factor = 1.5;
    CHECK_THROWS_AS(solve(prob, g, bad), InvalidArgument);
}

TEST_CASE("solution csv")
{
    const auto prob = make_problem(Domain::interval(-1.0, 1.0), 0.0, 1.0, 1.0, "1", "1", "0");
    const auto g = grid_of(prob.domain, 0.5);
    const auto res = solve(prob, g);
    const std::string csv = solution_csv(res.u, discrete_residual(res.u, prob));
    CHECK(csv.rfind("x,u,residual\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 6);
}
