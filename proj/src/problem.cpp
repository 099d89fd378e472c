#include "visco/problem.hpp"

#include "visco/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

namespace visco {

namespace {

constexpr std::size_t kMaxSamples1d = 100000;
constexpr std::size_t kMaxSamplesPerAxis = 301;

int steps_for(double length, double spacing, std::size_t cap)
{
    const double n = std::ceil(length / spacing);
    return static_cast<int>(std::clamp(n, 1.0, static_cast<double>(cap)));
}

std::string fmt(double v) { return std::to_string(v); }

void check_dimension(const Expr& e, int dim, const char* name)
{
    if (dim == 1 && e.depends_on(Var::y)) {
        throw InvalidArgument(std::string("field ") + name + " depends on y but the domain is one-dimensional");
    }
}

} // namespace

std::vector<Vec2> sample_closure(const Domain& dom, double spacing)
{
    std::vector<Vec2> out;
    switch (dom.kind()) {
    case Domain::Kind::interval: {
        const auto& iv = dom.as_interval();
        const int n = steps_for(iv.hi - iv.lo, spacing, kMaxSamples1d);
        for (int i = 0; i <= n; ++i) out.push_back({i == n ? iv.hi : iv.lo + (iv.hi - iv.lo) * i / n, 0.0});
        break;
    }
    case Domain::Kind::rectangle: {
        const auto& r = dom.as_rectangle();
        const int nx = steps_for(r.hi.x - r.lo.x, spacing, kMaxSamplesPerAxis);
        const int ny = steps_for(r.hi.y - r.lo.y, spacing, kMaxSamplesPerAxis);
        for (int j = 0; j <= ny; ++j) {
            for (int i = 0; i <= nx; ++i) {
                out.push_back({i == nx ? r.hi.x : r.lo.x + (r.hi.x - r.lo.x) * i / nx,
                               j == ny ? r.hi.y : r.lo.y + (r.hi.y - r.lo.y) * j / ny});
            }
        }
        break;
    }
    case Domain::Kind::ball: {
        const auto& b = dom.as_ball();
        const int n = steps_for(2.0 * b.radius, spacing, kMaxSamplesPerAxis);
        for (int j = 0; j <= n; ++j) {
            for (int i = 0; i <= n; ++i) {
                const Vec2 x{b.center.x - b.radius + 2.0 * b.radius * i / n,
                             b.center.y - b.radius + 2.0 * b.radius * j / n};
                if (norm(x - b.center) < b.radius) out.push_back(x);
            }
        }
        const auto rim = sample_boundary(dom, spacing);
        out.insert(out.end(), rim.begin(), rim.end());
        break;
    }
    }
    return out;
}

std::vector<Vec2> sample_boundary(const Domain& dom, double spacing)
{
    std::vector<Vec2> out;
    switch (dom.kind()) {
    case Domain::Kind::interval:
        out = {{dom.as_interval().lo, 0.0}, {dom.as_interval().hi, 0.0}};
        break;
    case Domain::Kind::rectangle: {
        const auto& r = dom.as_rectangle();
        const int nx = steps_for(r.hi.x - r.lo.x, spacing, kMaxSamples1d);
        const int ny = steps_for(r.hi.y - r.lo.y, spacing, kMaxSamples1d);
        for (int i = 0; i <= nx; ++i) {
            const double x = r.lo.x + (r.hi.x - r.lo.x) * i / nx;
            out.push_back({x, r.lo.y});
            out.push_back({x, r.hi.y});
        }
        for (int j = 1; j < ny; ++j) {
            const double y = r.lo.y + (r.hi.y - r.lo.y) * j / ny;
            out.push_back({r.lo.x, y});
            out.push_back({r.hi.x, y});
        }
        break;
    }
    case Domain::Kind::ball: {
        const auto& b = dom.as_ball();
        const int n = std::max(8, steps_for(2.0 * std::numbers::pi * b.radius, spacing, kMaxSamples1d));
        for (int k = 0; k < n; ++k) {
            const double t = 2.0 * std::numbers::pi * k / n;
            out.push_back({b.center.x + b.radius * std::cos(t), b.center.y + b.radius * std::sin(t)});
        }
        break;
    }
    }
    return out;
}

ProblemSpec validate_problem(ProblemSpec prob, double solver_h)
{
    const auto& ex = prob.exponents;
    if (!(ex.alpha > -1.0) || !std::isfinite(ex.alpha)) {
        throw ExponentOutOfRange("alpha", ex.alpha, "alpha ∈ (-1, inf)");
    }
    if (!(ex.beta > 0.0) || !(ex.beta <= ex.alpha + 2.0)) {
        throw ExponentOutOfRange("beta", ex.beta, "beta ∈ (0, alpha+2] with alpha+2 = " + fmt(ex.alpha + 2.0));
    }
    if (!(ex.lambda > 0.0) || !std::isfinite(ex.lambda)) {
        throw ExponentOutOfRange("lambda", ex.lambda, "lambda ∈ (0, inf)");
    }
    if (prob.variant == OperatorVariant::trace
        && !(prob.ellipticity.lower() <= 1.0 && 1.0 <= prob.ellipticity.upper())) {
        // The barrier constants bound the trace operator between the Pucci pair.
        throw InvalidArgument("the trace variant requires a <= 1 <= A, got a = " + fmt(prob.ellipticity.lower())
                              + ", A = " + fmt(prob.ellipticity.upper()));
    }
    const int dim = prob.dim();
    check_dimension(prob.b, dim, "b");
    check_dimension(prob.f, dim, "f");
    check_dimension(prob.phi, dim, "phi");

    const double spacing = solver_h > 0.0 ? solver_h / 10.0 : prob.domain.inradius() / 500.0;
    const auto pts = sample_closure(prob.domain, spacing);

    FieldBounds fb;
    fb.f_min = std::numeric_limits<double>::infinity();
    fb.f_max = -std::numeric_limits<double>::infinity();
    const bool need_lip = !prob.b_lipschitz_bound.has_value() && !prob.b.is_constant();
    Expr bx, by;
    if (need_lip) {
        bx = differentiate(prob.b, Var::x).expr;
        if (dim == 2) by = differentiate(prob.b, Var::y).expr;
    }
    double lip = 0.0;
    for (const Vec2& x : pts) {
        const double bv = prob.b.eval(x);
        const double fv = prob.f.eval(x);
        if (!std::isfinite(bv)) {
            throw UnboundedCoefficient("b is not finite at (" + fmt(x.x) + ", " + fmt(x.y) + ")");
        }
        if (!std::isfinite(fv)) {
            throw UnboundedCoefficient("f is not finite at (" + fmt(x.x) + ", " + fmt(x.y) + ")");
        }
        fb.b_sup = std::max(fb.b_sup, std::abs(bv));
        fb.f_sup = std::max(fb.f_sup, std::abs(fv));
        fb.f_min = std::min(fb.f_min, fv);
        fb.f_max = std::max(fb.f_max, fv);
        if (need_lip) {
            const double gx = bx.eval(x);
            const double gy = dim == 2 ? by.eval(x) : 0.0;
            const double g = std::hypot(gx, gy);
            if (std::isfinite(g)) lip = std::max(lip, g);
        }
    }
    if (!std::isfinite(fb.b_sup) || fb.b_sup > 1e12) throw UnboundedCoefficient("b is unbounded on the domain");
    if (fb.f_sup > 1e12) throw UnboundedCoefficient("f is unbounded on the domain");
    fb.b_lipschitz = prob.b_lipschitz_bound.value_or(lip);

    fb.phi_min = std::numeric_limits<double>::infinity();
    fb.phi_max = -std::numeric_limits<double>::infinity();
    for (const Vec2& x : sample_boundary(prob.domain, spacing)) {
        const double v = prob.phi.eval(x);
        if (!std::isfinite(v)) {
            throw UnboundedCoefficient("phi is not finite at (" + fmt(x.x) + ", " + fmt(x.y) + ")");
        }
        fb.phi_min = std::min(fb.phi_min, v);
        fb.phi_max = std::max(fb.phi_max, v);
    }
    prob.bounds = fb;
    prob.validated = true;
    return prob;
}

namespace {

Expr num(double v) { return Expr::constant(v); }

/// A max(l, 0) + a min(l, 0) style combination of one eigenvalue expression.
Expr extremal_part(const Expr& l, OperatorVariant variant, const EllipticityPair& pair)
{
    const double up = variant == OperatorVariant::pucci_plus ? pair.upper() : pair.lower();
    const double down = variant == OperatorVariant::pucci_plus ? pair.lower() : pair.upper();
    const Expr pos = Expr::call(Expr::Func::max_, l, num(0.0));
    const Expr neg = Expr::call(Expr::Func::min_, l, num(0.0));
    return Expr::add(Expr::mul(num(up), pos), Expr::mul(num(down), neg));
}

void find_gradient_zeros_1d(const ExprJet& jet, const Domain& dom, std::vector<Vec2>& out)
{
    const auto& iv = dom.as_interval();
    const int n = 4000;
    auto g = [&](double x) { return jet.dx.eval(Vec2{x, 0.0}); };
    double x_prev = iv.lo;
    double g_prev = g(x_prev);
    for (int i = 0; i <= n; ++i) {
        const double x = i == n ? iv.hi : iv.lo + (iv.hi - iv.lo) * i / n;
        const double gx = g(x);
        if (gx == 0.0) {
            out.push_back({x, 0.0});
        } else if (i > 0 && g_prev != 0.0 && std::signbit(gx) != std::signbit(g_prev)) {
            double lo = x_prev;
            double hi = x;
            double glo = g_prev;
            for (int it = 0; it < 200 && hi - lo > 1e-15 * (1.0 + std::abs(lo)); ++it) {
                const double mid = 0.5 * (lo + hi);
                const double gm = g(mid);
                if (gm == 0.0) {
                    lo = hi = mid;
                    break;
                }
                if (std::signbit(gm) == std::signbit(glo)) {
                    lo = mid;
                    glo = gm;
                } else {
                    hi = mid;
                }
            }
            const double root = 0.5 * (lo + hi);
            // A jump of u' (kink) also changes sign; keep only genuine zeros.
            const double scale = std::max({1.0, std::abs(g_prev), std::abs(gx)});
            if (std::abs(g(root)) <= 1e-8 * scale) out.push_back({root, 0.0});
        }
        x_prev = x;
        g_prev = gx;
    }
}

void find_gradient_zeros_2d(const ExprJet& jet, const Domain& dom, std::vector<Vec2>& out)
{
    const auto pts = sample_closure(dom, dom.inradius() / 100.0);
    for (const Vec2& x0 : pts) {
        Vec2 x = x0;
        // Newton on Du = 0 from every lattice point, then deduplicate.
        bool ok = false;
        for (int it = 0; it < 30; ++it) {
            const double gx = jet.dx.eval(x);
            const double gy = jet.dy.eval(x);
            if (std::hypot(gx, gy) <= 1e-12) {
                ok = true;
                break;
            }
            const double hxx = jet.dxx.eval(x);
            const double hxy = jet.dxy.eval(x);
            const double hyy = jet.dyy.eval(x);
            const double det = hxx * hyy - hxy * hxy;
            if (!(std::abs(det) > 1e-14)) break;
            const Vec2 step{(hyy * gx - hxy * gy) / det, (hxx * gy - hxy * gx) / det};
            x = x - step;
            if (!dom.contains(x) || norm(step) > dom.inradius()) break;
        }
        if (!ok || !dom.contains(x)) continue;
        const bool seen = std::any_of(out.begin(), out.end(), [&](Vec2 q) { return norm(q - x) < 1e-8; });
        if (!seen) out.push_back(x);
        if (out.size() > 64) return;
    }
}

} // namespace

ManufacturedRhs manufacture_rhs(const Expr& u, const ProblemSpec& prob)
{
    const int dim = prob.dim();
    check_dimension(u, dim, "u");
    const ExprJet jet = expr_jet(u, dim);
    const auto& ex = prob.exponents;
    const auto& pair = prob.ellipticity;

    const Expr grad_sq =
        dim == 1 ? Expr::mul(jet.dx, jet.dx) : Expr::add(Expr::mul(jet.dx, jet.dx), Expr::mul(jet.dy, jet.dy));
    auto grad_power = [&](double q) {
        if (q == 0.0) return num(1.0);
        if (dim == 1) return Expr::pow(Expr::call(Expr::Func::abs_, jet.dx), num(q));
        return Expr::pow(grad_sq, num(0.5 * q));
    };

    Expr second_order;
    if (prob.variant == OperatorVariant::trace) {
        second_order = dim == 1 ? jet.dxx : Expr::add(jet.dxx, jet.dyy);
    } else if (dim == 1) {
        second_order = extremal_part(jet.dxx, prob.variant, pair);
    } else {
        const Expr mean = Expr::mul(num(0.5), Expr::add(jet.dxx, jet.dyy));
        const Expr half_diff = Expr::mul(num(0.5), Expr::sub(jet.dxx, jet.dyy));
        const Expr radius = Expr::call(
            Expr::Func::sqrt_, Expr::add(Expr::mul(half_diff, half_diff), Expr::mul(jet.dxy, jet.dxy)));
        second_order = Expr::add(extremal_part(Expr::sub(mean, radius), prob.variant, pair),
                                 extremal_part(Expr::add(mean, radius), prob.variant, pair));
    }

    const Expr principal = Expr::mul(grad_power(ex.alpha), second_order);
    const Expr first_order = Expr::mul(prob.b, grad_power(ex.beta));
    // sign(u)|u|^{1+alpha} rather than |u|^alpha u, which is 0 * inf at u = 0 for alpha < 0.
    const Expr gamma = ex.alpha == 0.0
                           ? u
                           : Expr::mul(Expr::call(Expr::Func::sign_, u),
                                       Expr::pow(Expr::call(Expr::Func::abs_, u), num(1.0 + ex.alpha)));
    const Expr zero_order = Expr::mul(num(ex.lambda), gamma);

    ManufacturedRhs out;
    out.f = Expr::add(Expr::sub(first_order, principal), zero_order);
    out.kink_warning = jet.kink_warning || u.has_kinks();
    if (ex.alpha < 0.0) {
        if (dim == 1) {
            find_gradient_zeros_1d(jet, prob.domain, out.singular_points);
        } else {
            find_gradient_zeros_2d(jet, prob.domain, out.singular_points);
        }
        std::sort(out.singular_points.begin(), out.singular_points.end(),
                  [](Vec2 p, Vec2 q) { return p.x < q.x || (p.x == q.x && p.y < q.y); });
        out.singular = !out.singular_points.empty();
    }
    return out;
}

} // namespace visco
