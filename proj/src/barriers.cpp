#include "visco/barriers.hpp"

#include "visco/errors.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numbers>
#include <sstream>

namespace visco {

namespace {

constexpr int kSweepPerBranch = 400;

ProblemSpec validated(const ProblemSpec& prob) { return prob.validated ? prob : validate_problem(prob); }

Expr x_var() { return Expr::variable(Var::x); }
Expr num(double v) { return Expr::constant(v); }

double powabs(double v, double e) { return e == 0.0 ? 1.0 : std::pow(std::abs(v), e); }

bool is_critical(const ExponentProfile& ex) { return ex.beta == ex.alpha + 2.0; }

std::string fmt(double v)
{
    std::ostringstream os;
    os << std::setprecision(6) << v;
    return os.str();
}

} // namespace

double minimal_kappa(double lambda, double alpha, double M_level)
{
    if (!(lambda > 0.0) || !(M_level > 0.0) || !(alpha > -1.0)) {
        throw InvalidArgument("minimal kappa needs lambda > 0, M > 0 and alpha > -1");
    }
    auto g = [&](double k) { return lambda * std::pow(std::log1p(k), 1.0 + alpha) - M_level; };
    double lo = 0.0;
    double hi = 1.0;
    while (g(hi) < 0.0) {
        hi *= 2.0;
        if (!std::isfinite(hi) || hi > 1e300) throw InvalidArgument("level " + fmt(M_level) + " is too large");
    }
    while (hi - lo > 1e-12 * std::max(1.0, hi)) {
        const double mid = 0.5 * (lo + hi);
        (g(mid) < 0.0 ? lo : hi) = mid;
    }
    return hi;
}

BarrierConstants constants_from(const BarrierInputs& in)
{
    if (!(in.safety >= 1.0)) throw InvalidArgument("safety factor must be >= 1");
    if (!(in.delta0 > 0.0)) throw InvalidArgument("collar width must be positive");
    BarrierConstants out;
    out.safety = in.safety;
    out.M_level = in.M_level;
    out.delta0_eff = in.delta0;
    out.kappa_min = minimal_kappa(in.lambda, in.alpha, in.M_level);
    out.kappa = in.kappa.value_or(in.safety * out.kappa_min);
    if (!(in.lambda * std::pow(std::log1p(out.kappa), 1.0 + in.alpha) > in.M_level)) {
        throw InvalidArgument("kappa = " + fmt(out.kappa) + " does not exceed the level " + fmt(in.M_level));
    }
    const double k2 = 1.0 + 2.0 * out.kappa;
    const double e = 2.0 + in.alpha - in.beta;
    out.C_bounds[0] = 2.0 * out.kappa / in.delta0;
    out.C_bounds[1] = 2.0 * k2 * in.A * in.dim * in.C1 / in.a;
    if (in.b_sup > 0.0) {
        if (e > 0.0) {
            out.C_bounds[2] = k2 * std::pow(4.0 * in.b_sup / in.a, 1.0 / e);
        } else if (in.b_sup > 0.25 * in.a) {
            throw CriticalBeta("beta = alpha + 2 needs |b|_inf <= a/4 here (|b|_inf = " + fmt(in.b_sup)
                               + "); use the rescaled barrier");
        }
    }
    out.C_bounds[3] = k2 * std::pow(4.0 * in.M_level / in.a, 1.0 / (2.0 + in.alpha));
    out.C = in.safety * *std::max_element(out.C_bounds.begin(), out.C_bounds.end());
    return out;
}

namespace {

BarrierInputs inputs_for(const ProblemSpec& prob, double M_level, double safety)
{
    BarrierInputs in;
    in.alpha = prob.exponents.alpha;
    in.beta = prob.exponents.beta;
    in.lambda = prob.exponents.lambda;
    in.a = prob.ellipticity.lower();
    in.A = prob.ellipticity.upper();
    in.dim = prob.dim();
    in.C1 = prob.domain.hess_dist_bound();
    in.delta0 = prob.domain.collar_width();
    in.b_sup = prob.bounds.b_sup;
    in.M_level = M_level;
    in.safety = safety;
    return in;
}

} // namespace

BarrierConstants barrier_constants(const ProblemSpec& raw, double M_level, double safety)
{
    const ProblemSpec prob = validated(raw);
    if (is_critical(prob.exponents) && prob.bounds.b_sup > 0.0) {
        throw CriticalBeta("beta = alpha + 2 with nonzero b requires the rescaled barrier");
    }
    return constants_from(inputs_for(prob, M_level, safety));
}

BarrierJet BarrierSpec::jet(Vec2 x) const
{
    BarrierJet j;
    const double sign = side == BarrierSide::sub ? -1.0 : 1.0;
    const double scale = sign / rescale_eps.value_or(1.0);
    j.hess = SymMatrix::zero(dim);
    if (kind == Kind::global) {
        const auto dp = distance_profile(*domain, x);
        const double s = dp.extended.value;
        const Vec2 at{s, 0.0};
        const double g = log_branch.eval(at);
        const double cap = cap_value.eval(at);
        if (g < cap) {
            const double g1 = log_d1.eval(at);
            const double g2 = log_d2.eval(at);
            j.value = g;
            j.grad = g1 * dp.extended.grad;
            j.hess = g1 * dp.extended.hess + g2 * SymMatrix::outer(dp.extended.grad, dim);
            j.branch = 0;
        } else {
            j.value = cap;
            j.branch = 1;
        }
    } else {
        const double xn = dim == 1 ? x.x : x.y;
        const Vec2 en = dim == 1 ? Vec2{1.0, 0.0} : Vec2{0.0, 1.0};
        const Vec2 at{xn, 0.0};
        const double g1 = log_d1.eval(at);
        j.value = log_branch.eval(at) + affine_part.eval(x);
        j.grad = g1 * en + affine_grad;
        j.hess = log_d2.eval(at) * SymMatrix::outer(en, dim);
        const double t = dim == 1 ? std::abs(x.x) : norm(x);
        j.branch = t < r_inner ? 0 : 1;
        if (j.branch == 1) {
            const Vec2 tt{t, 0.0};
            const double k1 = cubic_d1.eval(tt);
            const double k2 = cubic_d2.eval(tt);
            const Vec2 n = dim == 1 ? Vec2{x.x >= 0.0 ? 1.0 : -1.0, 0.0} : (1.0 / t) * x;
            j.value += cubic_term.eval(tt);
            j.grad = j.grad + k1 * n;
            SymMatrix h = k2 * SymMatrix::outer(n, dim);
            if (dim == 2) h = h + (k1 / t) * (SymMatrix::identity(2) - SymMatrix::outer(n, 2));
            j.hess = j.hess + h;
        }
    }
    j.value *= scale;
    j.grad = scale * j.grad;
    j.hess = scale * j.hess;
    return j;
}

std::vector<Vec2> BarrierSpec::branch_samples(int branch, int count) const
{
    std::vector<Vec2> out;
    if (count <= 0) return out;
    if (kind == Kind::global) {
        const Domain& dom = *domain;
        const double d_switch = constants.kappa / constants.C;
        const double d_lo = branch == 0 ? 0.0 : d_switch;
        const double d_hi = branch == 0 ? d_switch : dom.inradius();
        // Anchors on the boundary with inward normals along which d is exact.
        std::vector<std::pair<Vec2, Vec2>> anchors;
        switch (dom.kind()) {
        case Domain::Kind::interval:
            anchors = {{{dom.as_interval().lo, 0.0}, {1.0, 0.0}}, {{dom.as_interval().hi, 0.0}, {-1.0, 0.0}}};
            break;
        case Domain::Kind::rectangle: {
            const auto& r = dom.as_rectangle();
            const Vec2 c = dom.center();
            if (r.hi.x - r.lo.x >= r.hi.y - r.lo.y) {
                anchors = {{{c.x, r.lo.y}, {0.0, 1.0}}, {{c.x, r.hi.y}, {0.0, -1.0}}};
            } else {
                anchors = {{{r.lo.x, c.y}, {1.0, 0.0}}, {{r.hi.x, c.y}, {-1.0, 0.0}}};
            }
            break;
        }
        case Domain::Kind::ball: {
            const auto& b = dom.as_ball();
            for (int k = 0; k < 16; ++k) {
                const double t = 2.0 * std::numbers::pi * k / 16.0;
                const Vec2 n{std::cos(t), std::sin(t)};
                anchors.push_back({b.center + b.radius * n, -1.0 * n});
            }
            break;
        }
        }
        for (int k = 0; k < count; ++k) {
            const double d = d_lo + (d_hi - d_lo) * (k + 0.5) / count;
            const auto& [x0, n] = anchors[static_cast<std::size_t>(k) % anchors.size()];
            out.push_back(x0 + d * n);
        }
        return out;
    }
    // Boundary barrier: lattice of the collar {0 < x_N < delta, |x| < 1}.
    std::vector<Vec2> cand;
    const int nn = 40;
    const int nt = dim == 1 ? 1 : 4 * count / nn + 50;
    for (int i = 1; i <= nn; ++i) {
        const double xn = delta * i / (nn + 0.5);
        for (int k = 0; k < nt; ++k) {
            Vec2 x;
            if (dim == 1) {
                x = {xn, 0.0};
            } else {
                const double half = std::sqrt(std::max(0.0, 1.0 - xn * xn));
                x = {-half + 2.0 * half * (k + 0.5) / nt, xn};
            }
            const double t = dim == 1 ? std::abs(x.x) : norm(x);
            if (t >= 1.0) continue;
            if ((t < r_inner ? 0 : 1) == branch) cand.push_back(x);
        }
    }
    if (static_cast<int>(cand.size()) <= count) return cand;
    for (int k = 0; k < count; ++k) {
        out.push_back(cand[static_cast<std::size_t>(k) * cand.size() / static_cast<std::size_t>(count)]);
    }
    return out;
}

double barrier_residual(const BarrierSpec& spec, const ProblemSpec& prob, Vec2 x)
{
    const BarrierJet j = spec.jet(x);
    const auto& ex = prob.exponents;
    const auto& pair = prob.ellipticity;
    const double b = prob.bounds.b_sup;
    const GradientVector p{j.grad, spec.dim, 0.0};
    const double gnorm = p.magnitude();
    const bool flat = spec.kind == BarrierSpec::Kind::global && j.branch == 1;
    const bool with_zero_order = spec.kind == BarrierSpec::Kind::global;
    if (spec.side == BarrierSide::super) {
        const double principal = flat ? 0.0 : gradient_weight(p, ex.alpha) * pucci_plus(j.hess, pair);
        return -principal - b * powabs(gnorm, ex.beta)
               + (with_zero_order ? zero_order_term(j.value, ex.lambda, ex.alpha) : 0.0);
    }
    const double principal = flat ? 0.0 : gradient_weight(p, ex.alpha) * pucci_minus(j.hess, pair);
    return -(-principal + b * powabs(gnorm, ex.beta)
             + (with_zero_order ? zero_order_term(j.value, ex.lambda, ex.alpha) : 0.0));
}

namespace {

void certify_sweep(BarrierSpec& spec, const ProblemSpec& prob, int per_branch)
{
    for (int branch = 0; branch < 2; ++branch) {
        double worst = std::numeric_limits<double>::infinity();
        const auto pts = spec.branch_samples(branch, per_branch);
        for (const Vec2& x : pts) worst = std::min(worst, barrier_residual(spec, prob, x) - spec.level);
        spec.min_margin[static_cast<std::size_t>(branch)] = pts.empty() ? 0.0 : worst;
        spec.samples_checked[static_cast<std::size_t>(branch)] = static_cast<int>(pts.size());
    }
}

BarrierSpec make_global(const ProblemSpec& prob, const BarrierConstants& k, BarrierSide side,
                        std::optional<double> rescale_eps, double level)
{
    BarrierSpec spec;
    spec.kind = BarrierSpec::Kind::global;
    spec.side = side;
    spec.constants = k;
    spec.rescale_eps = rescale_eps;
    spec.level = level;
    spec.dim = prob.dim();
    spec.domain = prob.domain;
    spec.log_branch = Expr::call(Expr::Func::log_, Expr::add(num(1.0), Expr::mul(num(k.C), x_var())));
    spec.cap_value = num(std::log1p(k.kappa));
    spec.log_d1 = differentiate(spec.log_branch, Var::x).expr;
    spec.log_d2 = differentiate(spec.log_d1, Var::x).expr;
    spec.affine_part = num(0.0);
    certify_sweep(spec, prob, kSweepPerBranch);
    if (!(spec.min_margin[0] >= 0.0 && spec.min_margin[1] >= 0.0)) {
        throw Error("global barrier failed its residual sweep (margins " + fmt(spec.min_margin[0]) + ", "
                    + fmt(spec.min_margin[1]) + ")");
    }
    return spec;
}

} // namespace

BarrierSpec global_barrier(const ProblemSpec& raw, double M_level, BarrierSide side)
{
    const ProblemSpec prob = validated(raw);
    const BarrierConstants k = barrier_constants(prob, M_level);
    return make_global(prob, k, side, std::nullopt, M_level);
}

RescaledBarrier critical_beta_rescale(const ProblemSpec& raw, double M_level, BarrierSide side)
{
    const ProblemSpec prob = validated(raw);
    if (!is_critical(prob.exponents)) {
        throw InvalidArgument("the rescaled barrier is only needed for beta = alpha + 2");
    }
    const double b = prob.bounds.b_sup;
    if (b == 0.0) return {1.0, global_barrier(prob, M_level, side)};
    const double a = prob.ellipticity.lower();
    const double eps = 4.0 * b / a;
    BarrierInputs in = inputs_for(prob, M_level * std::pow(eps, 1.0 + prob.exponents.alpha), 1.1);
    in.b_sup = 0.25 * a;
    const BarrierConstants k = constants_from(in);
    return {eps, make_global(prob, k, side, eps, M_level)};
}

BarrierSpec barrier_for(const ProblemSpec& raw, double M_level, BarrierSide side)
{
    const ProblemSpec prob = validated(raw);
    if (is_critical(prob.exponents) && prob.bounds.b_sup > 0.0) {
        return critical_beta_rescale(prob, M_level, side).barrier;
    }
    return global_barrier(prob, M_level, side);
}

double HopfBarrier::value(double r) const { return delta * (std::exp(-c * r) - std::exp(-c * R)); }
double HopfBarrier::d1(double r) const { return -delta * c * std::exp(-c * r); }
double HopfBarrier::d2(double r) const { return delta * c * c * std::exp(-c * r); }
double HopfBarrier::hopf_prediction() const { return delta * c * R * std::exp(-c * R); }

double hopf_residual(const HopfBarrier& hb, const ProblemSpec& prob, double r)
{
    const ExponentProfile no_zero_order{prob.exponents.alpha, prob.exponents.beta, 0.0};
    return radial_operator_value(r, hb.value(r), hb.d1(r), hb.d2(r), hb.dim, OperatorVariant::pucci_minus,
                                 prob.ellipticity, no_zero_order, prob.bounds.b_sup, 0.0);
}

HopfBarrier hopf_barrier(const ProblemSpec& raw, double delta_cap, Vec2 x0, double R, HopfPlacement placement,
                         double safety)
{
    const ProblemSpec prob = validated(raw);
    if (!(delta_cap > 0.0) || !(R > 0.0)) throw InvalidArgument("Hopf barrier needs delta > 0 and R > 0");
    const double needed = placement == HopfPlacement::interior_crown ? 2.0 * R : R;
    if (!prob.domain.contains(x0) || prob.domain.distance(x0) < needed - 1e-12) {
        throw CrownOutsideDomain("ball of radius " + fmt(needed) + " around (" + fmt(x0.x) + ", " + fmt(x0.y)
                                 + ") is not inside the domain");
    }
    const auto& ex = prob.exponents;
    const double a = prob.ellipticity.lower();
    const double A = prob.ellipticity.upper();
    const double b = prob.bounds.b_sup;
    HopfBarrier hb;
    hb.center = x0;
    hb.R = R;
    hb.placement = placement;
    hb.dim = prob.dim();
    hb.delta = delta_cap;
    if (is_critical(ex) && b > 0.0) hb.delta = std::min(delta_cap, a / (2.0 * b) / safety);

    double bound = 2.0 * (hb.dim - 1) * A / (R * a);
    if (!is_critical(ex) && b > 0.0) bound = std::max(bound, std::pow(2.0 * b / a, 1.0 / (2.0 + ex.alpha - ex.beta)));
    if (bound == 0.0) bound = 1.0 / R;
    hb.c_formula = safety * bound;
    hb.c = hb.c_formula;

    const int samples = 2000;
    for (int attempt = 0; attempt < 80; ++attempt) {
        double worst = -std::numeric_limits<double>::infinity();
        for (int k = 0; k <= samples; ++k) {
            const double r = hb.r_min() + (hb.r_max() - hb.r_min()) * k / samples;
            worst = std::max(worst, hopf_residual(hb, prob, r));
        }
        hb.max_residual = worst;
        if (worst < 0.0) return hb;
        hb.c *= 1.25;
    }
    throw Error("no certified Hopf barrier found for delta = " + fmt(hb.delta));
}

HopfBarrier hopf_barrier(const ProblemSpec& prob, double delta_cap, double safety)
{
    return hopf_barrier(prob, delta_cap, prob.domain.center(), 0.5 * prob.domain.inradius(),
                        HopfPlacement::interior_crown, safety);
}

namespace {

void require_affine(const Expr& phi, int dim)
{
    const ExprJet j = expr_jet(phi, dim);
    const Expr* second[] = {&j.dxx, &j.dxy, &j.dyy};
    for (int k = 0; k < (dim == 1 ? 1 : 3); ++k) {
        const Expr& e = *second[k];
        if (e.is_constant(0.0)) continue;
        // Not structurally zero: accept only if it vanishes at sample points.
        for (double s : {-0.9, -0.3, 0.1, 0.7}) {
            for (double t : {-0.5, 0.2, 0.8}) {
                const double v = e.eval(Vec2{s, t});
                if (!(std::abs(v) <= 1e-12)) {
                    throw NonAffineBoundaryDatum("boundary datum " + phi.str() + " is not affine");
                }
            }
        }
    }
}

} // namespace

double boundary_barrier_margin(const BarrierSpec& w, const ProblemSpec& prob, Vec2 x)
{
    return barrier_residual(w, prob, x) - w.level;
}

BoundaryChecks boundary_barrier_checks(const BarrierSpec& w, double u_bound)
{
    BoundaryChecks out;
    out.inner_level = std::numeric_limits<double>::infinity();
    out.outer_sphere = std::numeric_limits<double>::infinity();
    out.flat_piece = std::numeric_limits<double>::infinity();
    out.min_gradient = std::numeric_limits<double>::infinity();
    auto lifted = [&](Vec2 x) { return w.value(x) - w.affine_part.eval(x); };
    const int n = 400;
    if (w.dim == 1) {
        out.inner_level = lifted({w.delta, 0.0}) - u_bound;
        out.flat_piece = lifted({0.0, 0.0});
        // {|x| = 1} meets the collar only if delta > 1, which the hypothesis excludes.
    } else {
        for (int k = 0; k <= n; ++k) {
            const double s = -1.0 + 2.0 * k / n;
            const double half = std::sqrt(std::max(0.0, 1.0 - w.delta * w.delta));
            out.inner_level = std::min(out.inner_level, lifted({s * half, w.delta}) - u_bound);
            out.flat_piece = std::min(out.flat_piece, lifted({s, 0.0}));
            // Arc of the unit circle with 0 <= y < delta.
            const double theta = std::asin(std::min(1.0, w.delta)) * k / n;
            for (double sx : {-1.0, 1.0}) {
                out.outer_sphere =
                    std::min(out.outer_sphere, lifted({sx * std::cos(theta), std::sin(theta)}) - u_bound);
            }
        }
    }
    for (int branch = 0; branch < 2; ++branch) {
        for (const Vec2& x : w.branch_samples(branch, 1000)) {
            out.min_gradient = std::min(out.min_gradient, norm(w.jet(x).grad));
        }
    }
    const double flat_tol = 1e-12;
    out.passed = out.inner_level >= 0.0 && (w.dim == 1 || out.outer_sphere >= 0.0) && out.flat_piece >= -flat_tol
                 && out.min_gradient >= 1.0 / (3.0 * w.delta);
    if (w.dim == 1) out.outer_sphere = 0.0;
    return out;
}

BarrierSpec boundary_barrier(const ProblemSpec& raw, double r, double delta, double u_bound)
{
    const ProblemSpec prob = validated(raw);
    if (!(r > 0.0 && r < 1.0)) throw InvalidArgument("r must lie in (0, 1)");
    if (!(delta > 0.0) || !(delta < (1.0 - r) / 9.0)) {
        throw DeltaTooLarge("delta = " + fmt(delta) + " must lie in (0, (1-r)/9) = (0, " + fmt((1.0 - r) / 9.0)
                            + ")");
    }
    const int dim = prob.dim();
    require_affine(prob.phi, dim);
    const Vec2 affine_grad{differentiate(prob.phi, Var::x).expr.eval(Vec2{}),
                           dim == 2 ? differentiate(prob.phi, Var::y).expr.eval(Vec2{}) : 0.0};
    const double phi_grad = norm(affine_grad);
    if (!(1.0 / (3.0 * delta) > 2.0 * phi_grad)) {
        throw DeltaTooLarge("delta = " + fmt(delta) + " violates 1/(3 delta) > 2 |D phi| = " + fmt(2.0 * phi_grad));
    }

    BarrierSpec w;
    w.kind = BarrierSpec::Kind::boundary;
    w.side = BarrierSide::super;
    w.dim = dim;
    w.delta = delta;
    w.r_inner = r;
    w.level = prob.bounds.f_sup;
    w.constants.C = 2.0 / delta;
    w.constants.delta0_eff = delta;
    w.constants.M_level = w.level;
    w.constants.safety = 1.0;
    w.log_branch = Expr::call(Expr::Func::log_, Expr::add(num(1.0), Expr::mul(num(w.constants.C), x_var())));
    w.log_d1 = differentiate(w.log_branch, Var::x).expr;
    w.log_d2 = differentiate(w.log_d1, Var::x).expr;
    const double inv = 1.0 / std::pow(1.0 - r, 3.0);
    w.cubic_term = Expr::mul(num(inv), Expr::pow(Expr::sub(x_var(), num(r)), num(3.0)));
    w.cubic_d1 = differentiate(w.cubic_term, Var::x).expr;
    w.cubic_d2 = differentiate(w.cubic_d1, Var::x).expr;
    w.affine_part = prob.phi;
    w.affine_grad = affine_grad;

    certify_sweep(w, prob, 1000);
    const BoundaryChecks checks = boundary_barrier_checks(w, u_bound);
    const bool swept = w.min_margin[0] >= 0.0 && w.min_margin[1] >= 0.0;
    if (!swept || !(checks.min_gradient >= 1.0 / (3.0 * delta))) {
        throw DeltaTooLarge("delta = " + fmt(delta) + " is too large for a certified boundary barrier (margins "
                            + fmt(w.min_margin[0]) + ", " + fmt(w.min_margin[1]) + ")");
    }
    return w;
}

double admissible_boundary_delta(const ProblemSpec& prob, double r, double u_bound)
{
    double delta = (1.0 - r) / 9.0;
    for (int k = 0; k < 60; ++k) {
        delta *= 0.5;
        try {
            boundary_barrier(prob, r, delta, u_bound);
            return delta;
        } catch (const DeltaTooLarge&) {
        }
    }
    throw DeltaTooLarge("no admissible delta found for r = " + fmt(r));
}

std::string barrier_dump_csv(const BarrierSpec& spec, const ProblemSpec& raw, int per_branch)
{
    const ProblemSpec prob = validated(raw);
    std::ostringstream os;
    os << std::setprecision(17);
    os << "x,y,value,residual,branch\n";
    for (int branch = 0; branch < 2; ++branch) {
        for (const Vec2& x : spec.branch_samples(branch, per_branch)) {
            const BarrierJet j = spec.jet(x);
            os << x.x << ',' << x.y << ',' << j.value << ',' << barrier_residual(spec, prob, x) << ',' << j.branch
               << '\n';
        }
    }
    return os.str();
}

} // namespace visco
