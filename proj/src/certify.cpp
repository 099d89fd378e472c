#include "visco/certify.hpp"

#include "visco/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <random>

namespace visco {

namespace {

constexpr double kFlat = 1e-12;

ProblemSpec validated(const ProblemSpec& prob) { return prob.validated ? prob : validate_problem(prob); }

std::string fmt(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

double field(const Expr& e, Vec2 x, const char* name)
{
    const double v = e.eval(x);
    if (!std::isfinite(v)) throw FieldEvalError(std::string(name) + " is undefined at (" + fmt(x.x) + ", " + fmt(x.y) + ")");
    return v;
}

double grad_norm(Vec2 g, int dim) { return dim == 1 ? std::abs(g.x) : norm(g); }

/// Uniform on [0, 1) from the top 53 bits, identical on every platform.
double uniform(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

std::vector<Vec2> ring(Vec2 x, double rho, int dim)
{
    if (dim == 1) return {{x.x - rho, x.y}, {x.x + rho, x.y}};
    std::vector<Vec2> out;
    for (int k = 0; k < 8; ++k) {
        const double t = std::numbers::pi * k / 4.0;
        out.push_back({x.x + rho * std::cos(t), x.y + rho * std::sin(t)});
    }
    return out;
}

bool same_grid(const GridFunction& u, const GridFunction& v)
{
    if (u.grid == v.grid) return true;
    return u.grid && v.grid && u.grid->size() == v.grid->size() && u.grid->h() == v.grid->h()
           && u.grid->domain() == v.grid->domain();
}

/// Inward neighbour and unit inward normal of a boundary node, or nullopt at rectangle corners.
struct Inward {
    std::size_t node;
    Vec2 normal;
};

std::optional<Inward> inward(const Grid& g, std::size_t k)
{
    switch (g.kind()) {
    case GridKind::line:
        return k == 0 ? Inward{1, {1.0, 0.0}} : Inward{k - 1, {-1.0, 0.0}};
    case GridKind::radial:
        return Inward{k - 1, {-1.0, 0.0}};
    case GridKind::tensor: {
        if (g.is_corner(k)) return std::nullopt;
        const int i = static_cast<int>(k % static_cast<std::size_t>(g.nx()));
        const int j = static_cast<int>(k / static_cast<std::size_t>(g.nx()));
        if (i == 0) return Inward{g.index(1, j), {1.0, 0.0}};
        if (i == g.nx() - 1) return Inward{g.index(i - 1, j), {-1.0, 0.0}};
        if (j == 0) return Inward{g.index(i, 1), {0.0, 1.0}};
        return Inward{g.index(i, j - 1), {0.0, -1.0}};
    }
    }
    return std::nullopt;
}

double zero_tolerance(const GridFunction& u) { return kFlat * (1.0 + u.max_abs()); }

} // namespace

std::string_view to_string(PointClass c)
{
    switch (c) {
    case PointClass::classical: return "classical";
    case PointClass::zero_gradient: return "zero_gradient";
    case PointClass::locally_constant: return "locally_constant";
    }
    return "?";
}

std::string_view to_string(CheckSide s) { return s == CheckSide::sub ? "sub" : "super"; }

ViscosityReport classical_check(const Candidate& u, const ProblemSpec& raw, std::span<const Vec2> samples,
                                CheckSide side, double required_margin, double h, bool zero_order)
{
    const ProblemSpec prob = validated(raw);
    const int dim = prob.dim();
    ExponentProfile ex = prob.exponents;
    if (!zero_order) ex.lambda = 0.0;
    const double sign = side == CheckSide::super ? 1.0 : -1.0;

    ViscosityReport rep;
    rep.min_margin = std::numeric_limits<double>::infinity();
    bool any_condition = false;
    for (const Vec2& x : samples) {
        const CandidateJet j = u(x);
        rep.kink_warning = rep.kink_warning || j.kink;
        const double b = field(prob.b, x, "b");
        const double f = field(prob.f, x, "f");
        ViscosityRecord rec{x, PointClass::classical, 0.0, side};
        bool tested = true;
        double residual = 0.0;
        if (grad_norm(j.grad, dim) > kFlat) {
            residual = pointwise_residual(j.value, GradientVector{j.grad, dim, 0.0}, j.hess, b, f, prob.variant,
                                          prob.ellipticity, ex);
        } else {
            bool flat = true;
            for (const Vec2& y : ring(x, 3.0 * h, dim)) {
                if (!prob.domain.contains(y)) continue;
                const CandidateJet jy = u(y);
                if (grad_norm(jy.grad, dim) > kFlat || std::abs(jy.value - j.value) > kFlat * (1.0 + std::abs(j.value))) {
                    flat = false;
                    break;
                }
            }
            if (flat) {
                rec.classification = PointClass::locally_constant;
                residual = zero_order_term(j.value, ex.lambda, ex.alpha) - f;
            } else {
                rec.classification = PointClass::zero_gradient;
                // Test functions with vanishing gradient are not tested when alpha < 0.
                tested = ex.alpha >= 0.0;
                if (tested) {
                    residual = pointwise_residual(j.value, GradientVector{{0.0, 0.0}, dim, 0.0}, j.hess, b, f,
                                                  prob.variant, prob.ellipticity, ex);
                }
            }
        }
        rec.margin = sign * residual;
        if (tested) {
            any_condition = true;
            rep.min_margin = std::min(rep.min_margin, rec.margin);
        }
        rep.records.push_back(rec);
    }
    if (!any_condition) rep.min_margin = 0.0;
    rep.passed = rep.min_margin >= required_margin;
    return rep;
}

ViscosityReport classical_check(const Expr& u, const ProblemSpec& prob, std::span<const Vec2> samples,
                                CheckSide side, double required_margin, double h)
{
    const int dim = prob.dim();
    const ExprJet jet = expr_jet(u, dim);
    const Candidate cand = [&](Vec2 x) {
        EvalFlags flags;
        CandidateJet j;
        j.value = jet.value.eval(x, &flags);
        j.grad = {jet.dx.eval(x, &flags), dim == 2 ? jet.dy.eval(x, &flags) : 0.0};
        j.hess = dim == 1 ? SymMatrix(jet.dxx.eval(x, &flags))
                          : SymMatrix(jet.dxx.eval(x, &flags), jet.dxy.eval(x, &flags), jet.dyy.eval(x, &flags));
        j.kink = flags.kink_hit;
        return j;
    };
    return classical_check(cand, prob, samples, side, required_margin, h);
}

ViscosityReport classical_check(const BarrierSpec& barrier, const ProblemSpec& raw, int per_branch)
{
    // Worst admissible drift and extremal operator, homogeneous right-hand side.
    ProblemSpec prob = validated(raw);
    const bool super = barrier.side == BarrierSide::super;
    prob.b = Expr::constant(super ? -prob.bounds.b_sup : prob.bounds.b_sup);
    prob.f = Expr::constant(0.0);
    prob.variant = super ? OperatorVariant::pucci_plus : OperatorVariant::pucci_minus;

    std::vector<Vec2> samples;
    for (int branch = 0; branch < 2; ++branch) {
        const auto pts = barrier.branch_samples(branch, per_branch);
        samples.insert(samples.end(), pts.begin(), pts.end());
    }
    const Candidate cand = [&](Vec2 x) {
        const BarrierJet bj = barrier.jet(x);
        return CandidateJet{bj.value, bj.grad, bj.hess, false};
    };
    const double h = 1e-3 * prob.domain.inradius();
    return classical_check(cand, prob, samples, super ? CheckSide::super : CheckSide::sub, barrier.level, h,
                           barrier.kind == BarrierSpec::Kind::global);
}

double zero_gradient_q_min(double alpha) { return (alpha + 2.0) / (alpha + 1.0); }

ZeroGradientResult zero_gradient_check(const Expr& v, const ProblemSpec& raw, Vec2 x_bar, double q, double C)
{
    const ProblemSpec prob = validated(raw);
    const double alpha = prob.exponents.alpha;
    if (!(alpha > -1.0 && alpha < 0.0)) throw InvalidArgument("zero_gradient_check needs alpha in (-1, 0), got " + fmt(alpha));
    ZeroGradientResult out;
    out.q_min = zero_gradient_q_min(alpha);
    if (q < out.q_min) throw QTooSmall(q, out.q_min);

    const int dim = prob.dim();
    auto w = [&](Vec2 x) { return v.eval(x) + C * std::pow(norm(x - x_bar), q); };
    const double w0 = w(x_bar);
    double rho = 0.25 * prob.domain.inradius();
    for (int level = 0; level < 12; ++level, rho *= 0.5) {
        const int count = dim == 1 ? 2 : 16;
        for (int k = 0; k < count; ++k) {
            const double t = 2.0 * std::numbers::pi * k / count;
            const Vec2 y = dim == 1 ? Vec2{x_bar.x + (k == 0 ? -rho : rho), x_bar.y}
                                    : Vec2{x_bar.x + rho * std::cos(t), x_bar.y + rho * std::sin(t)};
            if (!prob.domain.contains(y)) continue;
            if (!(w(y) > w0)) {
                throw NotStrictMinimum("v + C|x - x_bar|^q is not above its value at x_bar near (" + fmt(y.x) + ", "
                                       + fmt(y.y) + ")");
            }
        }
    }
    const double vb = v.eval(x_bar);
    out.margin = zero_order_term(vb, prob.exponents.lambda, alpha) - field(prob.f, x_bar, "f");
    out.passed = out.margin >= 0.0;
    return out;
}

ComparisonMargin comparison_probe(const GridFunction& u, const GridFunction& v, double tol)
{
    if (!same_grid(u, v)) throw InvalidArgument("comparison_probe needs both functions on the same grid");
    const Grid& g = *u.grid;
    for (std::size_t k : g.boundary()) {
        if (u[k] > v[k] + tol) {
            throw BoundaryOrderViolated("u - v = " + fmt(u[k] - v[k]) + " > 0 at boundary node " + std::to_string(k));
        }
    }
    ComparisonMargin out;
    out.margin = -std::numeric_limits<double>::infinity();
    for (std::size_t k : g.interior()) {
        if (u[k] - v[k] > out.margin) {
            out.margin = u[k] - v[k];
            out.node = k;
        }
    }
    if (g.interior().empty()) out.margin = 0.0;
    out.point = g.node(out.node);
    out.passed = out.margin <= tol;
    return out;
}

double concave_omega(double s, double tau)
{
    const double s0 = std::pow(1.0 + tau, 1.0 / tau);
    const double t = std::min(s, s0);
    return t - std::pow(t, 1.0 + tau) / (2.0 * (1.0 + tau));
}

ModulusFit modulus_fit(const GridFunction& u, double r, ModulusForm form, double exponent, std::uint64_t seed)
{
    if (form != ModulusForm::lipschitz && !(exponent > 0.0)) throw InvalidArgument("modulus exponent must be positive");
    // Beyond tau = 1 the profile decreases before its cap and is no modulus.
    if (form == ModulusForm::concave_omega && exponent > 1.0) throw InvalidArgument("omega needs tau in (0, 1]");
    const Grid& g = *u.grid;
    std::vector<std::size_t> nodes;
    for (std::size_t k = 0; k < g.size(); ++k) {
        if (g.domain().in_subregion(g.node(k), r)) nodes.push_back(k);
    }
    ModulusFit fit;
    fit.form = form;
    fit.r = r;
    fit.exponent = form == ModulusForm::lipschitz ? 1.0 : exponent;
    auto modulus = [&](double s) {
        switch (form) {
        case ModulusForm::lipschitz: return s;
        case ModulusForm::holder: return std::pow(s, exponent);
        case ModulusForm::concave_omega: return concave_omega(s, exponent);
        }
        return s;
    };
    // Radial profiles: |u(x) - u(y)| only depends on the radii, and ||x| - |y|| <= |x - y|.
    auto dist = [&](std::size_t i, std::size_t j) { return norm(g.node(i) - g.node(j)); };

    auto visit = [&](std::size_t i, std::size_t j) {
        const double s = dist(i, j);
        if (!(s > 0.0)) return;
        const double q = std::abs(u[i] - u[j]) / modulus(s);
        if (q > fit.constant) {
            fit.constant = q;
            fit.pair_i = i;
            fit.pair_j = j;
        }
        ++fit.pairs;
    };
    const std::size_t n = nodes.size();
    fit.exhaustive = n <= 10000;
    if (fit.exhaustive) {
        for (std::size_t a = 0; a < n; ++a)
            for (std::size_t b = a + 1; b < n; ++b) visit(nodes[a], nodes[b]);
    } else {
        std::mt19937_64 rng(seed);
        for (int k = 0; k < 1000000; ++k) {
            const auto a = static_cast<std::size_t>(uniform(rng) * static_cast<double>(n));
            const auto b = static_cast<std::size_t>(uniform(rng) * static_cast<double>(n));
            visit(nodes[a], nodes[b]);
        }
    }
    fit.max_violation = fit.pairs == 0 ? 0.0 : -std::numeric_limits<double>::infinity();
    auto check = [&](std::size_t i, std::size_t j) {
        const double s = dist(i, j);
        if (s > 0.0) fit.max_violation = std::max(fit.max_violation, std::abs(u[i] - u[j]) - fit.constant * modulus(s));
    };
    if (fit.pairs > 0) check(fit.pair_i, fit.pair_j);
    return fit;
}

Sandwich sandwich_check(const GridFunction& u, const Domain& dom)
{
    const Grid& g = *u.grid;
    const double tol = zero_tolerance(u);
    Sandwich out;
    out.c = std::numeric_limits<double>::infinity();
    out.C = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < g.size(); ++k) {
        if (u[k] < -tol) throw SignViolation("u = " + fmt(u[k]) + " < 0 at node " + std::to_string(k));
    }
    for (std::size_t k : g.interior()) {
        const double d = dom.distance(g.node(k));
        if (!(d > 0.0)) continue;
        const double ratio = u[k] / d;
        if (ratio < out.c) {
            out.c = ratio;
            out.c_node = k;
        }
        if (ratio > out.C) {
            out.C = ratio;
            out.C_node = k;
        }
    }
    out.passed = out.c > 0.0 && out.c <= out.C && std::isfinite(out.C);
    return out;
}

StrongMaxReport strong_max_probe(const GridFunction& u, const Domain& dom, double threshold, double margin)
{
    const Grid& g = *u.grid;
    const double tol = zero_tolerance(u);
    if (margin < 0.0) margin = dom.collar_width();
    StrongMaxReport out;
    out.identically_zero = u.max_abs() <= tol;

    out.interior_min = std::numeric_limits<double>::infinity();
    auto scan = [&](double m) {
        for (std::size_t k : g.interior()) {
            if (dom.distance(g.node(k)) >= m && u[k] < out.interior_min) {
                out.interior_min = u[k];
                out.interior_min_node = k;
            }
        }
    };
    scan(margin);
    if (!std::isfinite(out.interior_min)) scan(0.0);

    for (std::size_t k : g.boundary()) {
        if (std::abs(u[k]) > tol) continue;
        const auto in = inward(g, k);
        if (!in) continue;
        HopfQuotient q;
        q.node = k;
        q.quotient = (u[in->node] - u[k]) / g.h();
        q.threshold = threshold;
        q.passed = q.quotient > 0.0 && q.quotient >= threshold;
        out.quotients.push_back(q);
    }
    if (out.identically_zero) {
        out.interior_min = 0.0;
        out.passed = true;
        return out;
    }
    out.passed = out.interior_min > 0.0
                 && std::all_of(out.quotients.begin(), out.quotients.end(), [](const HopfQuotient& q) { return q.passed; });
    return out;
}

std::vector<HopfPrediction> hopf_predictions(const ProblemSpec& raw, const GridFunction& u, double safety)
{
    const ProblemSpec prob = validated(raw);
    const Grid& g = *u.grid;
    const Domain& dom = g.domain();
    const double tol = zero_tolerance(u);
    std::vector<HopfPrediction> out;
    for (std::size_t k : g.boundary()) {
        if (std::abs(u[k]) > tol) continue;
        const auto in = inward(g, k);
        if (!in) continue;
        const Vec2 xb = g.node(k);
        double R = 0.5 * dom.inradius();
        if (dom.kind() == Domain::Kind::rectangle) {
            const auto& rect = dom.as_rectangle();
            const bool vertical_side = in->normal.x != 0.0;
            const double along = vertical_side ? std::min(xb.y - rect.lo.y, rect.hi.y - xb.y)
                                               : std::min(xb.x - rect.lo.x, rect.hi.x - xb.x);
            R = std::min(R, along);
        }
        const Vec2 x0 = xb + R * in->normal;

        // Smallest nodal value in the inner ball B(x0, R/2).
        double inner_min = std::numeric_limits<double>::infinity();
        const double rho0 = g.kind() == GridKind::radial ? norm(x0 - dom.center()) : 0.0;
        for (std::size_t j = 0; j < g.size(); ++j) {
            const bool inside = g.kind() == GridKind::radial ? std::abs(g.radius(j) - rho0) <= 0.5 * R
                                                             : norm(g.node(j) - x0) <= 0.5 * R;
            if (inside) inner_min = std::min(inner_min, u[j]);
        }
        HopfPrediction p;
        p.node = k;
        if (!(inner_min > 0.0) || !std::isfinite(inner_min)) {
            out.push_back(p);
            continue;
        }
        p.barrier = hopf_barrier(prob, std::min(1.0, 0.99 * inner_min), x0, R, HopfPlacement::boundary_annulus, safety);
        p.prediction = p.barrier.hopf_prediction();
        out.push_back(p);
    }
    return out;
}

StrongMaxReport strong_max_with_hopf(const ProblemSpec& prob, const GridFunction& u)
{
    StrongMaxReport rep = strong_max_probe(u, u.grid->domain());
    const auto preds = hopf_predictions(prob, u);
    for (HopfQuotient& q : rep.quotients) {
        const auto it = std::find_if(preds.begin(), preds.end(), [&](const HopfPrediction& p) { return p.node == q.node; });
        q.threshold = it == preds.end() ? 0.0 : 0.5 * it->prediction;
        q.passed = q.threshold > 0.0 && q.quotient >= q.threshold;
    }
    if (!rep.identically_zero) {
        rep.passed = rep.interior_min > 0.0
                     && std::all_of(rep.quotients.begin(), rep.quotients.end(), [](const HopfQuotient& q) { return q.passed; });
    }
    return rep;
}

std::vector<ComparisonInstance> random_comparison_instances(std::uint64_t seed, int count)
{
    std::mt19937_64 rng(seed);
    auto U = [&] { return uniform(rng); };
    std::vector<ComparisonInstance> out;
    char buf[512];
    for (int i = 0; i < count; ++i) {
        ProblemSpec p;
        p.domain = Domain::interval(-1.0, 1.0);
        const double alpha = -0.5 + 1.5 * U();
        const double beta = 1.0 + U() * std::min(1.0, alpha + 1.0);
        const double lambda = 0.1 + 0.9 * U();
        const double a = 0.2 + 0.3 * U();
        p.exponents = {alpha, beta, lambda};
        p.ellipticity = EllipticityPair(a, a * (1.0 + 2.0 * U()));
        // Strong drift makes the first-order term dominate on h = 1/16.
        const double b0 = 5.0 * (U() - 0.5), b1 = 5.0 * (0.5 + U()), bk = 1.0 + 3.0 * U(), bs = 6.28 * U();
        std::snprintf(buf, sizeof buf, "%.17g + %.17g*sin(%.17g*x + %.17g)", b0, b1, bk, bs);
        p.b = parse_expression(buf);
        const double f0 = 2.0 * (U() - 0.5), f1 = 1.0 + 2.0 * U(), fk = 1.0 + 4.0 * U(), fs = 6.28 * U();
        std::snprintf(buf, sizeof buf, "%.17g + %.17g*cos(%.17g*x + %.17g)", f0, f1, fk, fs);
        const Expr f = parse_expression(buf);
        const double g0 = 2.0 * U(), gk = 2.0 + 6.0 * U(), gs = 6.28 * U();
        std::snprintf(buf, sizeof buf, "%.17g*(1 + sin(%.17g*x + %.17g))", g0, gk, gs);
        const Expr bump = parse_expression(buf);
        const double p0 = U() - 0.5, p1 = U() - 0.5;
        std::snprintf(buf, sizeof buf, "%.17g + %.17g*x", p0, p1);
        p.phi = parse_expression(buf);

        ComparisonInstance inst;
        inst.super = p;
        inst.super.f = f;
        inst.sub = p;
        inst.sub.f = Expr::sub(Expr::sub(f, Expr::constant(0.1)), bump);
        std::snprintf(buf, sizeof buf, "#%d alpha=%.4g beta=%.4g lambda=%.4g a=%.4g A=%.4g", i, alpha, beta, lambda, a,
                      p.ellipticity.upper());
        inst.label = buf;
        out.push_back(std::move(inst));
    }
    return out;
}

ComparisonSuiteReport comparison_suite(std::uint64_t seed, int count, const SchemeParams& params, double h)
{
    ComparisonSuiteReport rep;
    const auto instances = random_comparison_instances(seed, count);
    const auto grid = std::make_shared<const Grid>(build_grid(instances.empty() ? Domain::interval(-1, 1)
                                                                                 : instances.front().super.domain,
                                                              h));
    SchemeParams sp = params;
    sp.max_iters = std::max(sp.max_iters, 400);
    for (int i = 0; i < count; ++i) {
        const auto& inst = instances[static_cast<std::size_t>(i)];
        ComparisonOutcome o;
        o.index = i;
        try {
            const SolveResult v = solve(inst.super, grid, sp);
            const SolveResult u = solve(inst.sub, grid, sp);
            o.solved = v.report.converged && u.report.converged;
            const ComparisonMargin m = comparison_probe(u.u, v.u, 10.0 * sp.tol);
            o.margin = m.margin;
            o.passed = o.solved && m.passed;
            if (o.solved && !m.passed) ++rep.violations;
        } catch (const Error& e) {
            o.error = e.what();
        }
        if (!o.solved) ++rep.unsolved;
        rep.outcomes.push_back(o);
    }
    rep.passed = std::all_of(rep.outcomes.begin(), rep.outcomes.end(), [](const ComparisonOutcome& o) { return o.passed; });
    return rep;
}

} // namespace visco
