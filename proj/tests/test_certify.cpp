#include "doctest.h"

#include "visco/certify.hpp"
#include "visco/errors.hpp"

#include <cmath>

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

std::vector<Vec2> line_samples(double lo, double hi, int n)
{
    std::vector<Vec2> out;
    for (int k = 0; k < n; ++k) out.push_back({lo + (hi - lo) * (k + 0.5) / n, 0.0});
    return out;
}

/// f = 1, phi = 0, alpha = 0, beta = 1, b = 1, lambda = 1 on (-1, 1).
ProblemSpec positive_instance() { return make_problem(Domain::interval(-1.0, 1.0), 0.0, 1.0, 1.0, "1", "1", "0"); }

} // namespace

TEST_CASE("barriers pass the pointwise check on every branch")
{
    const auto interval = make_problem(Domain::interval(-1.0, 1.0), 0.3, 1.5, 1.0, "2*sin(x)", "1", "0", 0.5, 2.0);
    const auto rect = make_problem(Domain::rectangle({0.0, 0.0}, {2.0, 1.0}), -0.4, 1.2, 0.7, "x - y", "1", "0");
    const auto ball = make_problem(Domain::ball({0.0, 0.0}, 1.0), 1.0, 2.0, 2.0, "1", "1", "0", 1.0, 3.0);
    for (const ProblemSpec* p : {&interval, &rect, &ball}) {
        for (double M : {0.5, 3.0}) {
            for (BarrierSide side : {BarrierSide::super, BarrierSide::sub}) {
                const auto w = global_barrier(*p, M, side);
                const auto rep = classical_check(w, *p, 1000);
                CHECK(rep.passed);
                CHECK(rep.records.size() == 2000);
                CHECK(rep.min_margin >= M);
                for (const auto& r : rep.records) {
                    if (r.classification == PointClass::classical) CHECK(r.margin >= 0.9 * M);
                    CHECK(std::isfinite(r.margin));
                }
                // The cap is constant, so its samples are judged by the locally constant rule.
                CHECK(std::any_of(rep.records.begin(), rep.records.end(), [](const ViscosityRecord& r) {
                    return r.classification == PointClass::locally_constant;
                }));
            }
        }
    }
    // Critical beta goes through the rescaled construction.
    const auto crit = make_problem(Domain::interval(-1.0, 1.0), 0.0, 2.0, 1.0, "1.5", "1", "0");
    CHECK(classical_check(barrier_for(crit, 1.0), crit, 1000).passed);
    // Flat boundary piece of the unit ball.
    const auto flat = make_problem(Domain::ball({0.0, 0.0}, 1.0), 0.0, 1.0, 1.0, "0.5", "1", "0.2*x");
    const double delta = admissible_boundary_delta(flat, 0.5);
    CHECK(classical_check(boundary_barrier(flat, 0.5, delta), flat, 500).passed);
}

TEST_CASE("the annulus barrier is a classical subsolution")
{
    const auto prob = make_problem(Domain::rectangle({-1.0, -1.0}, {1.0, 1.0}), -0.5, 1.0, 1.0, "2", "1", "0", 1.0, 2.0);
    const HopfBarrier hb = hopf_barrier(prob, 0.3);
    ProblemSpec worst = prob;
    worst.b = Expr::constant(prob.bounds.b_sup);
    worst.f = Expr::constant(0.0);
    worst.variant = OperatorVariant::pucci_minus;
    const Candidate v = [&](Vec2 x) {
        const Vec2 d = x - hb.center;
        const double r = norm(d);
        const Vec2 n = (1.0 / r) * d;
        const double v1 = hb.d1(r);
        const SymMatrix nn = SymMatrix::outer(n, 2);
        return CandidateJet{hb.value(r), v1 * n, hb.d2(r) * nn + (v1 / r) * (SymMatrix::identity(2) - nn), false};
    };
    std::vector<Vec2> samples;
    for (int k = 0; k < 400; ++k) {
        const double r = hb.r_min() + (hb.r_max() - hb.r_min()) * (k + 0.5) / 400;
        const double t = 0.1 * k;
        samples.push_back(hb.center + r * Vec2{std::cos(t), std::sin(t)});
    }
    const auto rep = classical_check(v, worst, samples, CheckSide::sub, 0.0, 1e-4, false);
    CHECK(rep.passed);
    CHECK(rep.min_margin > 0.0);
}

TEST_CASE("locally constant candidates follow the sign rule")
{
    const std::vector<Vec2> pts = line_samples(-0.9, 0.9, 7);
    const auto neg = make_problem(Domain::interval(-1.0, 1.0), 0.0, 1.0, 1.0, "1", "-1", "0.5");
    auto rep = classical_check(parse_expression("0.5"), neg, pts, CheckSide::super);
    CHECK(rep.passed);
    CHECK(rep.min_margin == doctest::Approx(1.5));
    for (const auto& r : rep.records) CHECK(r.classification == PointClass::locally_constant);
    // The same constant is not a supersolution when f exceeds lambda u.
    const auto pos = make_problem(Domain::interval(-1.0, 1.0), 0.0, 1.0, 1.0, "1", "2", "0.5");
    rep = classical_check(parse_expression("0.5"), pos, pts, CheckSide::super);
    CHECK_FALSE(rep.passed);
    CHECK(rep.min_margin == doctest::Approx(-1.5));
    CHECK(classical_check(parse_expression("0.5"), pos, pts, CheckSide::sub).passed);
}

TEST_CASE("exact solutions have vanishing margins on both sides")
{
    ProblemSpec p = make_problem(Domain::interval(-1.0, 1.0), 0.5, 1.5, 1.0, "1 + x^2", "0", "0", 1.0, 2.0);
    const Expr u = parse_expression("x");
    p.f = manufacture_rhs(u, p).f;
    const auto pts = line_samples(-0.95, 0.95, 50);
    for (CheckSide side : {CheckSide::sub, CheckSide::super}) {
        const auto rep = classical_check(u, p, pts, side, -1e-12);
        CHECK(rep.passed);
        CHECK(std::abs(rep.min_margin) <= 1e-12);
    }
}

TEST_CASE("critical points are classified and kinks flagged")
{
    const auto singular = make_problem(Domain::interval(-1.0, 1.0), -0.5, 1.0, 1.0, "0", "0", "0");
    const std::vector<Vec2> origin{{0.0, 0.0}};
    auto rep = classical_check(parse_expression("x^3"), singular, origin, CheckSide::super);
    CHECK(rep.records[0].classification == PointClass::zero_gradient);
    CHECK(rep.passed); // no test at a critical point when alpha < 0

    const auto degenerate = make_problem(Domain::interval(-1.0, 1.0), 0.0, 1.0, 1.0, "0", "1", "0");
    rep = classical_check(parse_expression("x^3 + 1"), degenerate, origin, CheckSide::super);
    CHECK(rep.records[0].classification == PointClass::zero_gradient);
    CHECK(rep.records[0].margin == doctest::Approx(0.0));

    rep = classical_check(parse_expression("abs(x)"), degenerate, origin, CheckSide::super);
    CHECK(rep.kink_warning);
    rep = classical_check(parse_expression("abs(x)"), degenerate, line_samples(0.1, 0.9, 5), CheckSide::super);
    CHECK_FALSE(rep.kink_warning);
}

TEST_CASE("zero-gradient test at a strict minimum")
{
    CHECK(zero_gradient_q_min(-0.5) == 3.0);
    const auto minus1 = make_problem(Domain::interval(-1.0, 1.0), -0.5, 1.0, 1.0, "0", "-1", "0");
    const Expr v = parse_expression("x^4");
    const auto ok = zero_gradient_check(v, minus1, {0.0, 0.0}, 3.0, 1.0);
    CHECK(ok.passed);
    CHECK(ok.margin == doctest::Approx(1.0));
    CHECK(ok.q_min == 3.0);

    const auto plus1 = make_problem(Domain::interval(-1.0, 1.0), -0.5, 1.0, 1.0, "0", "1", "0");
    const auto bad = zero_gradient_check(v, plus1, {0.0, 0.0}, 4.0, 1.0);
    CHECK_FALSE(bad.passed);
    CHECK(bad.margin == doctest::Approx(-1.0));

    try {
        zero_gradient_check(v, minus1, {0.0, 0.0}, std::nextafter(3.0, 0.0), 1.0);
        FAIL("expected QTooSmall");
    } catch (const QTooSmall& e) {
        CHECK(e.q_min() == 3.0);
    }
    for (double alpha : {-0.9, -0.2}) {
        const auto p = make_problem(Domain::interval(-1.0, 1.0), alpha, 1.0, 1.0, "0", "0", "0");
        const double q_min = (alpha + 2.0) / (alpha + 1.0);
        CHECK_THROWS_AS(zero_gradient_check(v, p, {0.0, 0.0}, 0.99 * q_min, 1.0), QTooSmall);
        CHECK_NOTHROW(zero_gradient_check(v, p, {0.0, 0.0}, q_min, 1.0));
    }
    CHECK_THROWS_AS(zero_gradient_check(parse_expression("-x^2"), minus1, {0.0, 0.0}, 3.0, 1.0), NotStrictMinimum);
    const auto regular = make_problem(Domain::interval(-1.0, 1.0), 0.5, 1.0, 1.0, "0", "0", "0");
    CHECK_THROWS_AS(zero_gradient_check(v, regular, {0.0, 0.0}, 3.0, 1.0), InvalidArgument);
}

TEST_CASE("comparison probe")
{
    const auto g = grid_of(Domain::interval(-1.0, 1.0), 1.0 / 32);
    const auto u = GridFunction::sample(g, parse_expression("sin(3*x)"));
    const auto same = comparison_probe(u, u);
    CHECK(same.margin == 0.0);
    CHECK(same.passed);
    const auto v = GridFunction::sample(g, parse_expression("sin(3*x) + 1 - abs(x)"));
    const auto lifted = comparison_probe(u, v);
    CHECK(lifted.margin <= 0.0);
    CHECK(lifted.passed);
    CHECK_THROWS_AS(comparison_probe(v, GridFunction::sample(g, parse_expression("sin(3*x) - 0.1"))),
                    BoundaryOrderViolated);
    const auto bump = GridFunction::sample(g, parse_expression("sin(3*x) + 0.2*(1 - x^2)"));
    const auto crossed = comparison_probe(bump, u);
    CHECK_FALSE(crossed.passed);
    CHECK(crossed.margin == doctest::Approx(0.2));
    CHECK(crossed.point.x == 0.0);
}

TEST_CASE("random comparison suite")
{
    const auto a = random_comparison_instances(7, 5);
    const auto b = random_comparison_instances(7, 5);
    for (std::size_t k = 0; k < a.size(); ++k) {
        CHECK(a[k].label == b[k].label);
        CHECK(a[k].sub.f.str() == b[k].sub.f.str());
        // g <= f - 0.1 pointwise.
        for (double x = -1.0; x <= 1.0; x += 1.0 / 64) CHECK(a[k].sub.f.eval(x) <= a[k].super.f.eval(x) - 0.1 + 1e-14);
    }
    const auto rep = comparison_suite(7, 50);
    CHECK(rep.passed);
    CHECK(rep.violations == 0);
    CHECK(rep.unsolved == 0);
    for (const auto& o : rep.outcomes) CHECK(o.margin <= 1e-9);

    SchemeParams centered;
    centered.monotone_gradient = false;
    const auto control = comparison_suite(7, 50, centered);
    CHECK_FALSE(control.passed);
    CHECK(control.violations >= 1);
}

TEST_CASE("modulus fits")
{
    const auto g = grid_of(Domain::interval(-1.0, 1.0), 1.0 / 64);
    CHECK(modulus_fit(GridFunction(g, 2.0), 1.0, ModulusForm::lipschitz).constant == 0.0);
    const auto lin = modulus_fit(GridFunction::sample(g, parse_expression("2*x")), 1.0, ModulusForm::lipschitz);
    CHECK(lin.constant == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(lin.exhaustive);
    CHECK(lin.pairs == 129u * 128u / 2u);
    CHECK(lin.max_violation <= 1e-14);

    const auto g2 = grid_of(Domain::interval(-1.0, 1.0), 1.0 / 1024);
    const auto root = modulus_fit(GridFunction::sample(g2, parse_expression("abs(x)^0.5")), 1.0, ModulusForm::holder, 0.5);
    CHECK(std::abs(root.constant - 1.0) <= 0.05);

    const auto wave = GridFunction::sample(g, parse_expression("sin(2*x) + x^2"));
    double prev = 0.0;
    for (double r : {0.25, 0.5, 0.75, 1.0}) {
        const auto fit = modulus_fit(wave, r, ModulusForm::lipschitz);
        CHECK(fit.constant >= prev);
        prev = fit.constant;
    }
    const auto om = modulus_fit(wave, 1.0, ModulusForm::concave_omega, 0.5);
    CHECK(om.constant > 0.0);
    CHECK(om.max_violation <= 1e-14);
    CHECK_THROWS_AS(modulus_fit(wave, 1.0, ModulusForm::concave_omega, 2.0), InvalidArgument);
}

TEST_CASE("large grids fall back to sampled pairs")
{
    const auto g = grid_of(Domain::rectangle({0.0, 0.0}, {1.0, 1.0}), 1.0 / 128);
    const auto u = GridFunction::sample(g, parse_expression("3*x - 4*y"));
    const auto fit = modulus_fit(u, 1.0, ModulusForm::lipschitz, 1.0, 5);
    CHECK_FALSE(fit.exhaustive);
    CHECK(fit.pairs <= 1000000u);
    CHECK(fit.constant <= 5.0 + 1e-12);
    CHECK(fit.constant >= 4.5);
    CHECK(modulus_fit(u, 1.0, ModulusForm::lipschitz, 1.0, 5).constant == fit.constant);
}

TEST_CASE("the omega modulus is capped at its maximum")
{
    for (double tau : {0.1, 0.25, 0.45, 1.0}) {
        const double s0 = std::pow(1.0 + tau, 1.0 / tau);
        CHECK(concave_omega(s0, tau) == doctest::Approx(0.5 * s0));
        CHECK(concave_omega(2.0 * s0, tau) == concave_omega(s0, tau));
        CHECK(concave_omega(1e-6, tau) == doctest::Approx(1e-6).epsilon(1e-6));
        double prev = 0.0;
        for (int k = 1; k <= 100; ++k) {
            const double w = concave_omega(s0 * k / 100.0, tau);
            CHECK(w > prev);
            prev = w;
        }
    }
}

TEST_CASE("sandwich bounds")
{
    const Domain dom = Domain::interval(-1.0, 1.0);
    const auto g = grid_of(dom, 1.0 / 32);
    const auto d = GridFunction::sample(g, [&](Vec2 x) { return dom.distance(x); });
    const auto s = sandwich_check(d, dom);
    CHECK(s.c == doctest::Approx(1.0));
    CHECK(s.C == doctest::Approx(1.0));
    CHECK(s.passed);

    const auto prob = positive_instance();
    const auto psi = global_barrier(prob, 1.0);
    const auto w = GridFunction::sample(g, [&](Vec2 x) { return psi.value(x); });
    const auto sw = sandwich_check(w, dom);
    CHECK(sw.C <= psi.constants.C);
    CHECK(sw.passed);

    auto neg = d;
    neg[5] = -1e-3;
    CHECK_THROWS_AS(sandwich_check(neg, dom), SignViolation);
}

TEST_CASE("sandwich of the positive solution is stable under refinement")
{
    const auto prob = positive_instance();
    std::vector<Sandwich> fits;
    for (int k = 6; k <= 8; ++k) {
        const auto res = solve(prob, grid_of(prob.domain, std::ldexp(1.0, -k)));
        fits.push_back(sandwich_check(res.u, prob.domain));
        CHECK(fits.back().passed);
    }
    const auto& a = fits[fits.size() - 2];
    const auto& b = fits.back();
    CHECK(std::abs(a.c - b.c) <= 0.1 * b.c);
    CHECK(std::abs(a.C - b.C) <= 0.1 * b.C);
}

TEST_CASE("strong maximum principle probes")
{
    for (const Domain& dom : {Domain::interval(-1.0, 1.0), Domain::rectangle({0.0, 0.0}, {2.0, 1.0}),
                              Domain::ball({0.0, 0.0}, 1.0)}) {
        const auto g = grid_of(dom, 1.0 / 16);
        const auto d = GridFunction::sample(g, [&](Vec2 x) { return dom.distance(x); });
        const auto rep = strong_max_probe(d, dom);
        CHECK(rep.passed);
        CHECK(rep.interior_min > 0.0);
        CHECK_FALSE(rep.quotients.empty());
        for (const auto& q : rep.quotients) CHECK(q.quotient == doctest::Approx(1.0));
        if (dom.kind() == Domain::Kind::rectangle) CHECK(rep.quotients.size() == g->boundary().size() - 4);

        const auto zero = strong_max_probe(GridFunction(g, 0.0), dom);
        CHECK(zero.identically_zero);
        CHECK(zero.passed);
        CHECK(zero.interior_min == 0.0);
    }
    const Domain dom = Domain::interval(-1.0, 1.0);
    const auto g = grid_of(dom, 1.0 / 16);
    const auto touching = GridFunction::sample(g, parse_expression("x^2"));
    CHECK_FALSE(strong_max_probe(touching, dom, 0.0, 0.0).passed);
}

TEST_CASE("Hopf quotients of the positive solution")
{
    const auto prob = positive_instance();
    std::vector<double> q;
    for (int k = 6; k <= 8; ++k) {
        const auto res = solve(prob, grid_of(prob.domain, std::ldexp(1.0, -k)));
        const auto preds = hopf_predictions(prob, res.u);
        REQUIRE(preds.size() == 2);
        for (const auto& p : preds) {
            CHECK(p.prediction > 0.0);
            CHECK(p.barrier.max_residual < 0.0);
            CHECK(p.prediction == doctest::Approx(p.barrier.delta * p.barrier.c * p.barrier.R
                                                  * std::exp(-p.barrier.c * p.barrier.R)));
        }
        const auto rep = strong_max_with_hopf(prob, res.u);
        CHECK(rep.passed);
        CHECK(rep.interior_min > 0.0);
        for (const auto& h : rep.quotients) CHECK(h.quotient >= h.threshold);
        q.push_back(rep.quotients.front().quotient);
    }
    CHECK(std::abs(q[2] - q[1]) <= 0.1 * q[2]);
}
