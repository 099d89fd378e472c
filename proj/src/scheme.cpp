#include "visco/scheme.hpp"

#include "visco/barriers.hpp"
#include "visco/errors.hpp"

#include <Eigen/SparseCore>
#include <Eigen/SparseLU>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

namespace visco {

GridFunction::GridFunction(std::shared_ptr<const Grid> g, double fill)
    : grid(std::move(g))
    , values(grid ? grid->size() : 0, fill)
{
}

GridFunction::GridFunction(std::shared_ptr<const Grid> g, std::vector<double> v)
    : grid(std::move(g))
    , values(std::move(v))
{
    if (!grid || values.size() != grid->size()) throw InvalidArgument("grid function size does not match its grid");
}

GridFunction GridFunction::sample(std::shared_ptr<const Grid> g, const Expr& e)
{
    return sample(std::move(g), [&e](Vec2 x) { return e.eval(x); });
}

GridFunction GridFunction::sample(std::shared_ptr<const Grid> g, const std::function<double(Vec2)>& fn)
{
    GridFunction out(std::move(g));
    for (std::size_t k = 0; k < out.size(); ++k) out.values[k] = fn(out.grid->node(k));
    return out;
}

double GridFunction::max_abs() const
{
    double m = 0.0;
    for (double v : values) m = std::max(m, std::abs(v));
    return m;
}

double max_abs_diff(const GridFunction& u, const GridFunction& v)
{
    if (u.size() != v.size()) throw InvalidArgument("grid functions live on different grids");
    double m = 0.0;
    for (std::size_t k = 0; k < u.size(); ++k) m = std::max(m, std::abs(u[k] - v[k]));
    return m;
}

namespace {

ProblemSpec validated(const ProblemSpec& prob) { return prob.validated ? prob : validate_problem(prob); }

double sq(double v) { return v * v; }

void require_interior(const Grid& g, std::size_t node)
{
    if (node >= g.size() || g.is_boundary(node)) throw InvalidArgument("node " + std::to_string(node) + " is not interior");
}

/// Upwind gradient magnitude from one-sided differences per axis.
double godunov(double dm, double dp, double b_value)
{
    return b_value >= 0.0 ? sq(std::max(dm, 0.0)) + sq(std::min(dp, 0.0))
                          : sq(std::min(dm, 0.0)) + sq(std::max(dp, 0.0));
}

/// Discrete operator with coefficients frozen at the nodes.
class Evaluator {
public:
    Evaluator(const ProblemSpec& prob, const Grid& grid, const SchemeParams& params, double eps)
        : g_(grid)
        , pair_(prob.ellipticity)
        , variant_(prob.variant)
        , alpha_(prob.exponents.alpha)
        , beta_(prob.exponents.beta)
        , lambda_(prob.exponents.lambda)
        , eps_(eps)
        , h_(grid.h())
        , wide_(params.stencil == Stencil::wide)
        , upwind_(params.monotone_gradient)
        , b_(grid.size(), 0.0)
        , f_(grid.size(), 0.0)
        , phi_(grid.size(), 0.0)
    {
        for (std::size_t k = 0; k < grid.size(); ++k) {
            const Vec2 x = grid.node(k);
            if (grid.is_boundary(k)) {
                phi_[k] = prob.phi.eval(x);
                if (!std::isfinite(phi_[k])) throw FieldEvalError("phi is undefined at a boundary node");
                continue;
            }
            b_[k] = prob.b.eval(x);
            f_[k] = prob.f.eval(x);
            if (!std::isfinite(b_[k]) || !std::isfinite(f_[k])) throw FieldEvalError("b or f is undefined at a grid node");
        }
        beta_eps_ = eps_ > 0.0 ? std::pow(eps_, beta_) : 0.0;
    }

    const Grid& grid() const { return g_; }
    double eps() const { return eps_; }
    double phi(std::size_t k) const { return phi_[k]; }
    double b(std::size_t k) const { return b_[k]; }
    double f(std::size_t k) const { return f_[k]; }

    double zero_order(double u) const { return zero_order_term(u, lambda_, alpha_); }

    double flux_derivative(double p) const
    {
        if (alpha_ == 0.0) return 1.0;
        const double s = p * p + eps_ * eps_;
        if (s == 0.0) return alpha_ > 0.0 ? 0.0 : std::numeric_limits<double>::max();
        return std::pow(s, 0.5 * alpha_ - 1.0) * ((1.0 + alpha_) * p * p + eps_ * eps_);
    }

    /// d P / d e for one eigenvalue surrogate.
    double pucci_slope(double e) const
    {
        switch (variant_) {
        case OperatorVariant::pucci_plus: return e > 0.0 ? pair_.upper() : pair_.lower();
        case OperatorVariant::pucci_minus: return e > 0.0 ? pair_.lower() : pair_.upper();
        case OperatorVariant::trace: return 1.0;
        }
        return 1.0;
    }

    /// d g / d(G^2) of the first-order profile.
    double first_order_slope(double G2) const
    {
        if (beta_ == 2.0) return 1.0;
        if (beta_ >= 1.0 || eps_ == 0.0) return G2 > 0.0 ? 0.5 * beta_ * std::pow(G2, 0.5 * beta_ - 1.0) : 0.0;
        return 0.5 * beta_ * std::pow(G2 + eps_ * eps_, 0.5 * beta_ - 1.0);
    }

    double flux(double p) const
    {
        if (alpha_ == 0.0) return p;
        const double s = p * p + eps_ * eps_;
        if (s == 0.0) return 0.0;
        return std::pow(s, 0.5 * alpha_) * p;
    }

    double first_order(double G2, std::size_t k) const
    {
        if (b_[k] == 0.0) return 0.0;
        double g;
        if (beta_ == 2.0) g = G2;
        else if (beta_ == 1.0) g = std::sqrt(G2);
        else if (beta_ > 1.0 || eps_ == 0.0) g = std::pow(G2, 0.5 * beta_);
        else g = std::pow(G2 + eps_ * eps_, 0.5 * beta_) - beta_eps_;
        return b_[k] * g;
    }

    /// Principal and first-order parts minus f at an interior node (no zero-order term).
    double spatial(const std::vector<double>& u, std::size_t k) const
    {
        switch (g_.kind()) {
        case GridKind::line: return spatial_line(u, k);
        case GridKind::radial: return spatial_radial(u, k);
        case GridKind::tensor: return spatial_tensor(u, k);
        }
        return 0.0;
    }

    double residual(const std::vector<double>& u, std::size_t k) const
    {
        if (g_.is_boundary(k)) return u[k] - phi_[k];
        return spatial(u, k) + zero_order(u[k]);
    }

    void residual_all(const std::vector<double>& u, std::vector<double>& out) const
    {
        out.resize(u.size());
        for (std::size_t k = 0; k < u.size(); ++k) out[k] = residual(u, k);
    }

    /// Generalized derivative of the spatial part at interior node k with respect to the nodal
    /// values it reads; kinks resolve to the branch taken by the residual itself.
    template <class Emit>
    void spatial_row(const std::vector<double>& u, std::size_t k, Emit&& emit) const
    {
        switch (g_.kind()) {
        case GridKind::line: row_line(u, k, emit); break;
        case GridKind::radial: row_radial(u, k, emit); break;
        case GridKind::tensor: row_tensor(u, k, emit); break;
        }
    }

    double zero_order_derivative(double u) const
    {
        if (alpha_ == 0.0) return lambda_;
        return lambda_ * (1.0 + alpha_) * std::pow(std::max(std::abs(u), 1e-12), alpha_);
    }

    /// Upper bound on the diagonal sensitivity of the residual over functions whose one-sided
    /// differences are bounded by P and values by U.
    double diagonal_bound(double P, double U) const
    {
        const double A = std::max(pair_.upper(), 1.0);
        const int dim = g_.kind() == GridKind::line ? 1 : 2;
        const double bsup = max_abs(b_);
        double principal;
        if (g_.kind() == GridKind::tensor) {
            const double w = alpha_ >= 0.0 ? std::pow(2.0 * P * P + eps_ * eps_, 0.5 * alpha_) : std::pow(eps_, alpha_);
            principal = 4.0 * A * w / (h_ * h_);
        } else {
            const double dphi =
                alpha_ >= 0.0 ? (1.0 + alpha_) * std::pow(P * P + eps_ * eps_, 0.5 * alpha_) : std::pow(eps_, alpha_);
            const double second = 2.0 * dphi / (h_ * h_ * (1.0 + alpha_));
            principal = g_.kind() == GridKind::line ? A * second : A * (dim * second + (dim - 1) * dphi / (h_ * h_));
        }
        double gslope;
        if (beta_ >= 1.0) gslope = beta_ * std::pow(std::sqrt(dim) * P, beta_ - 1.0);
        else gslope = beta_ * std::pow(eps_, beta_ - 1.0);
        const double first = bsup * gslope * std::sqrt(dim) / h_;
        const double zero =
            lambda_ * (1.0 + alpha_) * (alpha_ >= 0.0 ? std::pow(std::max(U, 0.0), alpha_) : std::pow(eps_, alpha_));
        return principal + first + zero;
    }

    /// Largest one-sided difference of u over the grid.
    double max_difference(const std::vector<double>& u) const
    {
        double m = 0.0;
        if (g_.kind() == GridKind::tensor) {
            const int nx = g_.nx();
            for (int j = 0; j < g_.ny(); ++j) {
                for (int i = 0; i < nx; ++i) {
                    const double v = u[g_.index(i, j)];
                    if (i + 1 < nx) m = std::max(m, std::abs(u[g_.index(i + 1, j)] - v));
                    if (j + 1 < g_.ny()) m = std::max(m, std::abs(u[g_.index(i, j + 1)] - v));
                }
            }
        } else {
            for (std::size_t k = 0; k + 1 < u.size(); ++k) m = std::max(m, std::abs(u[k + 1] - u[k]));
        }
        return m / h_;
    }

    std::array<double, 4> directional(const std::vector<double>& u, std::size_t k) const
    {
        const int nx = g_.nx();
        const int i = static_cast<int>(k) % nx;
        const int j = static_cast<int>(k) / nx;
        auto at = [&](int di, int dj) { return u[g_.index(i + di, j + dj)]; };
        const double c = u[k];
        const double h2 = h_ * h_;
        return {(at(1, 0) - 2.0 * c + at(-1, 0)) / h2, (at(0, 1) - 2.0 * c + at(0, -1)) / h2,
                (at(1, 1) - 2.0 * c + at(-1, -1)) / (2.0 * h2), (at(1, -1) - 2.0 * c + at(-1, 1)) / (2.0 * h2)};
    }

private:
    static double max_abs(const std::vector<double>& v)
    {
        double m = 0.0;
        for (double x : v) m = std::max(m, std::abs(x));
        return m;
    }

    double spatial_line(const std::vector<double>& u, std::size_t k) const
    {
        const double dp = (u[k + 1] - u[k]) / h_;
        const double dm = (u[k] - u[k - 1]) / h_;
        const double e1 = (flux(dp) - flux(dm)) / (h_ * (1.0 + alpha_));
        const double principal = pucci_from_spectrum(std::span<const double>(&e1, 1), variant_, pair_);
        const double G2 = upwind_ ? godunov(dm, dp, b_[k]) : sq(0.5 * (dp + dm));
        return -principal + first_order(G2, k) - f_[k];
    }

    double spatial_radial(const std::vector<double>& u, std::size_t k) const
    {
        const double dp = (u[k + 1] - u[k]) / h_;
        std::array<double, 2> eig{};
        double G2 = 0.0;
        if (k == 0) {
            // v'(0) = 0: the one-sided quotient v'/r tends to v'' and the gradient vanishes.
            const double e1 = 2.0 * flux(dp) / (h_ * (1.0 + alpha_));
            eig = {e1, e1};
        } else {
            const double dm = (u[k] - u[k - 1]) / h_;
            eig = {(flux(dp) - flux(dm)) / (h_ * (1.0 + alpha_)), flux(dp) / g_.radius(k)};
            G2 = upwind_ ? godunov(dm, dp, b_[k]) : sq(0.5 * (dp + dm));
        }
        const double principal = pucci_from_spectrum(eig, variant_, pair_);
        return -principal + first_order(G2, k) - f_[k];
    }

    double spatial_tensor(const std::vector<double>& u, std::size_t k) const
    {
        const int nx = g_.nx();
        const double c = u[k];
        const double ue = u[k + 1];
        const double uw = u[k - 1];
        const double un = u[k + static_cast<std::size_t>(nx)];
        const double us = u[k - static_cast<std::size_t>(nx)];
        const GradientVector p{{0.5 * (ue - uw) / h_, 0.5 * (un - us) / h_}, 2, eps_};
        const double w = gradient_weight(p, alpha_);
        const auto d = directional(u, k);
        double principal;
        if (variant_ == OperatorVariant::trace) {
            principal = d[0] + d[1];
        } else {
            const std::array<double, 2> axes{d[0], d[1]};
            principal = pucci_from_spectrum(axes, variant_, pair_);
            if (wide_) {
                const std::array<double, 2> diag{d[2], d[3]};
                const double alt = pucci_from_spectrum(diag, variant_, pair_);
                principal = variant_ == OperatorVariant::pucci_plus ? std::max(principal, alt) : std::min(principal, alt);
            }
        }
        double G2;
        if (upwind_) {
            G2 = godunov((c - uw) / h_, (ue - c) / h_, b_[k]) + godunov((c - us) / h_, (un - c) / h_, b_[k]);
        } else {
            G2 = p.magnitude_squared();
        }
        return -w * principal + first_order(G2, k) - f_[k];
    }

    /// Derivatives of the upwind (or centered) G^2 with respect to Dm and Dp.
    std::array<double, 2> g2_slopes(double dm, double dp, double b_value) const
    {
        if (!upwind_) {
            const double c = 0.5 * (dm + dp);
            return {c, c};
        }
        if (b_value >= 0.0) return {2.0 * std::max(dm, 0.0), 2.0 * std::min(dp, 0.0)};
        return {2.0 * std::min(dm, 0.0), 2.0 * std::max(dp, 0.0)};
    }

    template <class Emit>
    void row_line(const std::vector<double>& u, std::size_t k, Emit& emit) const
    {
        const double dp = (u[k + 1] - u[k]) / h_;
        const double dm = (u[k] - u[k - 1]) / h_;
        const double e1 = (flux(dp) - flux(dm)) / (h_ * (1.0 + alpha_));
        const double c = pucci_slope(e1) / (h_ * h_ * (1.0 + alpha_));
        const double fp = c * flux_derivative(dp);
        const double fm = c * flux_derivative(dm);
        double bp = 0.0;
        double bm = 0.0;
        if (b_[k] != 0.0) {
            const double G2 = upwind_ ? godunov(dm, dp, b_[k]) : sq(0.5 * (dp + dm));
            const double s = b_[k] * first_order_slope(G2) / h_;
            const auto sl = g2_slopes(dm, dp, b_[k]);
            bm = s * sl[0];
            bp = s * sl[1];
        }
        emit(k - 1, -fm - bm);
        emit(k, fp + fm + bm - bp);
        emit(k + 1, -fp + bp);
    }

    template <class Emit>
    void row_radial(const std::vector<double>& u, std::size_t k, Emit& emit) const
    {
        const double dp = (u[k + 1] - u[k]) / h_;
        const int N = g_.equation_dim();
        if (k == 0) {
            const double e1 = 2.0 * flux(dp) / (h_ * (1.0 + alpha_));
            const double d = N * pucci_slope(e1) * 2.0 * flux_derivative(dp) / (h_ * h_ * (1.0 + alpha_));
            emit(0, d);
            emit(1, -d);
            return;
        }
        const double dm = (u[k] - u[k - 1]) / h_;
        const double e1 = (flux(dp) - flux(dm)) / (h_ * (1.0 + alpha_));
        const double e2 = flux(dp) / g_.radius(k);
        const double c1 = pucci_slope(e1) / (h_ * h_ * (1.0 + alpha_));
        const double fp = c1 * flux_derivative(dp);
        const double fm = c1 * flux_derivative(dm);
        const double f2 = (N - 1) * pucci_slope(e2) * flux_derivative(dp) / (h_ * g_.radius(k));
        double bp = 0.0;
        double bm = 0.0;
        if (b_[k] != 0.0) {
            const double G2 = upwind_ ? godunov(dm, dp, b_[k]) : sq(0.5 * (dp + dm));
            const double s = b_[k] * first_order_slope(G2) / h_;
            const auto sl = g2_slopes(dm, dp, b_[k]);
            bm = s * sl[0];
            bp = s * sl[1];
        }
        emit(k - 1, -fm - bm);
        emit(k, fp + fm + f2 + bm - bp);
        emit(k + 1, -fp - f2 + bp);
    }

    template <class Emit>
    void row_tensor(const std::vector<double>& u, std::size_t k, Emit& emit) const
    {
        const auto nx = static_cast<std::size_t>(g_.nx());
        const std::size_t E = k + 1, W = k - 1, Nn = k + nx, S = k - nx;
        const double c = u[k];
        const GradientVector p{{0.5 * (u[E] - u[W]) / h_, 0.5 * (u[Nn] - u[S]) / h_}, 2, eps_};
        const double w = gradient_weight(p, alpha_);
        const auto d = directional(u, k);
        const double h2 = h_ * h_;

        // Principal part: value and frame selection.
        bool diag_frame = false;
        double principal;
        if (variant_ == OperatorVariant::trace) {
            principal = d[0] + d[1];
        } else {
            const std::array<double, 2> axes{d[0], d[1]};
            principal = pucci_from_spectrum(axes, variant_, pair_);
            if (wide_) {
                const std::array<double, 2> dg{d[2], d[3]};
                const double alt = pucci_from_spectrum(dg, variant_, pair_);
                diag_frame = variant_ == OperatorVariant::pucci_plus ? alt > principal : alt < principal;
                if (diag_frame) principal = alt;
            }
        }
        if (diag_frame) {
            const double c1 = -w * pucci_slope(d[2]) / (2.0 * h2);
            const double c2 = -w * pucci_slope(d[3]) / (2.0 * h2);
            emit(E + nx, c1);
            emit(W - nx, c1);
            emit(E - nx, c2);
            emit(W + nx, c2);
            emit(k, -2.0 * (c1 + c2));
        } else {
            const double cx = -w * pucci_slope(d[0]) / h2;
            const double cy = -w * pucci_slope(d[1]) / h2;
            emit(E, cx);
            emit(W, cx);
            emit(Nn, cy);
            emit(S, cy);
            emit(k, -2.0 * (cx + cy));
        }
        if (alpha_ != 0.0) {
            // Weight (|p|^2 + eps^2)^{alpha/2} through the centered gradient.
            const double s = p.magnitude_squared() + eps_ * eps_;
            const double dw = s > 0.0 ? alpha_ * std::pow(s, 0.5 * alpha_ - 1.0) : 0.0;
            const double gx = -principal * dw * p.p.x * 0.5 / h_;
            const double gy = -principal * dw * p.p.y * 0.5 / h_;
            emit(E, gx);
            emit(W, -gx);
            emit(Nn, gy);
            emit(S, -gy);
        }
        if (b_[k] != 0.0) {
            const double dmx = (c - u[W]) / h_, dpx = (u[E] - c) / h_;
            const double dmy = (c - u[S]) / h_, dpy = (u[Nn] - c) / h_;
            double G2;
            std::array<double, 2> sx, sy;
            if (upwind_) {
                G2 = godunov(dmx, dpx, b_[k]) + godunov(dmy, dpy, b_[k]);
                sx = g2_slopes(dmx, dpx, b_[k]);
                sy = g2_slopes(dmy, dpy, b_[k]);
            } else {
                G2 = p.magnitude_squared();
                // G^2 = px^2 + py^2 with px = (Dm + Dp) / 2 per axis.
                sx = {p.p.x, p.p.x};
                sy = {p.p.y, p.p.y};
            }
            const double s = b_[k] * first_order_slope(G2) / h_;
            emit(W, -s * sx[0]);
            emit(E, s * sx[1]);
            emit(S, -s * sy[0]);
            emit(Nn, s * sy[1]);
            emit(k, s * (sx[0] - sx[1] + sy[0] - sy[1]));
        }
    }

    const Grid& g_;
    EllipticityPair pair_;
    OperatorVariant variant_;
    double alpha_;
    double beta_;
    double lambda_;
    double eps_;
    double h_;
    bool wide_;
    bool upwind_;
    double beta_eps_ = 0.0;
    std::vector<double> b_;
    std::vector<double> f_;
    std::vector<double> phi_;
};

double two_norm(const std::vector<double>& v)
{
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

double inf_norm(const std::vector<double>& v)
{
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

double interior_max(const Grid& g, const std::vector<double>& r)
{
    double m = -std::numeric_limits<double>::infinity();
    for (auto k : g.interior()) m = std::max(m, r[k]);
    return m;
}

double interior_min(const Grid& g, const std::vector<double>& r)
{
    double m = std::numeric_limits<double>::infinity();
    for (auto k : g.interior()) m = std::min(m, r[k]);
    return m;
}

/// Inverse of c -> lambda |c|^alpha c.
double zero_order_inverse(double y, double lambda, double alpha)
{
    if (y == 0.0) return 0.0;
    return std::copysign(std::pow(std::abs(y) / lambda, 1.0 / (1.0 + alpha)), y);
}

std::vector<double> eps_schedule(double h, const SchemeParams& params)
{
    const double final_eps = params.eps_rule(h);
    if (!(final_eps >= 0.0) || !std::isfinite(final_eps)) throw InvalidArgument("eps rule must give a finite eps >= 0");
    const int steps = std::max(1, params.continuation_steps);
    const double start = std::sqrt(h);
    std::vector<double> out;
    if (steps == 1 || final_eps <= 0.0 || final_eps >= start) {
        out.push_back(final_eps);
        return out;
    }
    for (int s = 0; s < steps; ++s) {
        const double t = static_cast<double>(s) / (steps - 1);
        out.push_back(start * std::pow(final_eps / start, t));
    }
    out.back() = final_eps;
    return out;
}

void check_params(const SchemeParams& params)
{
    if (!(params.tol > 0.0)) throw InvalidArgument("tol must be positive");
    if (params.max_iters < 1) throw InvalidArgument("max_iters must be at least 1");
    if (!(params.dt_factor > 0.0 && params.dt_factor <= 1.0)) throw InvalidArgument("dt_factor must lie in (0, 1]");
    if (!params.eps_rule) throw InvalidArgument("eps rule is empty");
}

/// Damped monotone step u <- u - dt R(u) on interior nodes.
double pseudo_time_step(const Evaluator& ev, std::vector<double>& u, std::vector<double>& r, double dt_factor)
{
    ev.residual_all(u, r);
    const double L = ev.diagonal_bound(ev.max_difference(u), inf_norm(u));
    const double dt = dt_factor / L;
    for (auto k : ev.grid().interior()) u[k] -= dt * r[k];
    return dt;
}

struct NewtonState {
    std::vector<double> r;
    std::vector<double> trial;
    std::vector<double> r_trial;
    std::vector<Eigen::Triplet<double>> triplets;
};

/// Semismooth Newton on one eps level.  Returns the final residual norm.
double newton_stage(const Evaluator& ev, std::vector<double>& u, double stage_tol, const SchemeParams& params,
                    SolveReport& report)
{
    const Grid& g = ev.grid();
    const std::size_t n = g.size();
    NewtonState st;
    ev.residual_all(u, st.r);
    double norm = inf_norm(st.r);
    // Line search on the Euclidean residual: kinks of the start iterate dominate the max norm
    // and would otherwise force tiny steps.
    double merit = two_norm(st.r);

    using SpMat = Eigen::SparseMatrix<double>;
    SpMat J(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    Eigen::SparseLU<SpMat> lu;
    bool analyzed = false;

    while (norm > stage_tol) {
        if (report.iterations >= params.max_iters) throw MaxItersExceeded(report.iterations, norm);
        ++report.iterations;

        st.triplets.clear();
        for (std::size_t m = 0; m < n; ++m) {
            if (g.is_boundary(m)) {
                st.triplets.emplace_back(static_cast<int>(m), static_cast<int>(m), 1.0);
                continue;
            }
            ev.spatial_row(u, m, [&](std::size_t col, double v) {
                st.triplets.emplace_back(static_cast<int>(m), static_cast<int>(col), v);
            });
            st.triplets.emplace_back(static_cast<int>(m), static_cast<int>(m), ev.zero_order_derivative(u[m]));
        }
        J.setFromTriplets(st.triplets.begin(), st.triplets.end());
        J.makeCompressed();
        if (!analyzed) {
            lu.analyzePattern(J);
            analyzed = true;
        }
        lu.factorize(J);

        bool accepted = false;
        if (lu.info() == Eigen::Success) {
            Eigen::VectorXd rhs(static_cast<Eigen::Index>(n));
            for (std::size_t k = 0; k < n; ++k) rhs[static_cast<Eigen::Index>(k)] = -st.r[k];
            const Eigen::VectorXd du = lu.solve(rhs);
            if (lu.info() == Eigen::Success && du.allFinite()) {
                double t = 1.0;
                for (int ls = 0; ls < 30; ++ls, t *= 0.5) {
                    st.trial = u;
                    for (std::size_t k = 0; k < n; ++k) st.trial[k] += t * du[static_cast<Eigen::Index>(k)];
                    ev.residual_all(st.trial, st.r_trial);
                    const double trial_merit = two_norm(st.r_trial);
                    if (std::isfinite(trial_merit) && trial_merit <= (1.0 - 1e-4 * t) * merit) {
                        u.swap(st.trial);
                        st.r.swap(st.r_trial);
                        norm = inf_norm(st.r);
                        merit = trial_merit;
                        report.dt_history.push_back(t);
                        accepted = true;
                        break;
                    }
                }
            }
        }
        if (!accepted) {
            // Monotone pseudo-time steps always make progress on a proper scheme.
            double dt = 0.0;
            for (int s = 0; s < 50; ++s) dt = pseudo_time_step(ev, u, st.r, params.dt_factor);
            ev.residual_all(u, st.r);
            norm = inf_norm(st.r);
            merit = two_norm(st.r);
            report.dt_history.push_back(-dt);
        }
        report.residual_history.push_back(norm);
    }
    return norm;
}

/// Monotone iteration from both bracket ends on one eps level.
double fixed_point_stage(const Evaluator& ev, std::vector<double>& lo, std::vector<double>& hi, bool certified,
                         double stage_tol, const SchemeParams& params, SolveReport& report, std::vector<double>& mid)
{
    const Grid& g = ev.grid();
    std::vector<double> rlo;
    std::vector<double> rhi;
    std::vector<double> rmid;
    double last_dt = 0.0;
    mid.resize(lo.size());
    for (;;) {
        for (std::size_t k = 0; k < lo.size(); ++k) mid[k] = 0.5 * (lo[k] + hi[k]);
        ev.residual_all(mid, rmid);
        const double norm = inf_norm(rmid);
        report.residual_history.push_back(norm);
        if (norm <= stage_tol) return norm;
        if (report.iterations >= params.max_iters) throw MaxItersExceeded(report.iterations, norm);

        for (int s = 0; s < 10; ++s) {
            ++report.iterations;
            ev.residual_all(lo, rlo);
            ev.residual_all(hi, rhi);
            const double P = std::max(ev.max_difference(lo), ev.max_difference(hi));
            const double U = std::max(inf_norm(lo), inf_norm(hi));
            const double dt = params.dt_factor / ev.diagonal_bound(P, U);
            if (std::abs(dt - last_dt) > 0.01 * dt) {
                report.dt_history.push_back(dt);
                last_dt = dt;
            }
            double width = 0.0;
            for (auto k : g.interior()) {
                lo[k] -= dt * rlo[k];
                hi[k] -= dt * rhi[k];
                width = std::max(width, hi[k] - lo[k]);
                if (certified && lo[k] > hi[k] + 1e-12 * (1.0 + std::abs(hi[k]))) {
                    throw BracketViolated("monotone iteration lost the bracket ordering at node " + std::to_string(k));
                }
            }
            report.bracket_width_history.push_back(width);
        }
    }
}

void reset_boundary(const Evaluator& ev, std::vector<double>& u)
{
    for (auto k : ev.grid().boundary()) u[k] = ev.phi(k);
}

} // namespace

GradientVector discrete_gradient(const GridFunction& u, std::size_t node, double eps)
{
    const Grid& g = *u.grid;
    require_interior(g, node);
    const double h = g.h();
    switch (g.kind()) {
    case GridKind::line: return {{0.5 * (u[node + 1] - u[node - 1]) / h, 0.0}, 1, eps};
    case GridKind::radial:
        if (node == 0) return {{0.0, 0.0}, 1, eps};
        return {{0.5 * (u[node + 1] - u[node - 1]) / h, 0.0}, 1, eps};
    case GridKind::tensor: {
        const auto nx = static_cast<std::size_t>(g.nx());
        return {{0.5 * (u[node + 1] - u[node - 1]) / h, 0.5 * (u[node + nx] - u[node - nx]) / h}, 2, eps};
    }
    }
    return {};
}

double monotone_gradient_magnitude(const GridFunction& u, std::size_t node, double b_value)
{
    const Grid& g = *u.grid;
    require_interior(g, node);
    const double h = g.h();
    if (g.kind() == GridKind::radial && node == 0) return 0.0;
    double G2 = godunov((u[node] - u[node - 1]) / h, (u[node + 1] - u[node]) / h, b_value);
    if (g.kind() == GridKind::tensor) {
        const auto nx = static_cast<std::size_t>(g.nx());
        G2 += godunov((u[node] - u[node - nx]) / h, (u[node + nx] - u[node]) / h, b_value);
    }
    return std::sqrt(G2);
}

HessianExtremes discrete_hessian_extremes(const GridFunction& u, std::size_t node, Stencil stencil)
{
    const Grid& g = *u.grid;
    require_interior(g, node);
    const double h = g.h();
    HessianExtremes out;
    switch (g.kind()) {
    case GridKind::line:
        out.directional = {(u[node + 1] - 2.0 * u[node] + u[node - 1]) / (h * h)};
        break;
    case GridKind::radial:
        if (node == 0) {
            const double d = 2.0 * (u[1] - u[0]) / (h * h);
            out.directional = {d, d};
        } else {
            out.directional = {(u[node + 1] - 2.0 * u[node] + u[node - 1]) / (h * h),
                               (u[node + 1] - u[node]) / (h * g.radius(node))};
        }
        break;
    case GridKind::tensor: {
        const int nx = g.nx();
        const int i = static_cast<int>(node) % nx;
        const int j = static_cast<int>(node) / nx;
        auto at = [&](int di, int dj) { return u[g.index(i + di, j + dj)]; };
        const double c = u[node];
        out.directional = {(at(1, 0) - 2.0 * c + at(-1, 0)) / (h * h), (at(0, 1) - 2.0 * c + at(0, -1)) / (h * h)};
        if (stencil == Stencil::wide) {
            out.directional.push_back((at(1, 1) - 2.0 * c + at(-1, -1)) / (2.0 * h * h));
            out.directional.push_back((at(1, -1) - 2.0 * c + at(-1, 1)) / (2.0 * h * h));
        }
        break;
    }
    }
    const auto [mn, mx] = std::minmax_element(out.directional.begin(), out.directional.end());
    out.lambda_min = *mn;
    out.lambda_max = *mx;
    return out;
}

GridFunction discrete_residual(const GridFunction& u, const ProblemSpec& prob, const SchemeParams& params)
{
    return discrete_residual(u, prob, params, params.eps_rule(u.grid->h()));
}

GridFunction discrete_residual(const GridFunction& u, const ProblemSpec& raw, const SchemeParams& params, double eps)
{
    const ProblemSpec prob = validated(raw);
    const Evaluator ev(prob, *u.grid, params, eps);
    GridFunction out(u.grid);
    ev.residual_all(u.values, out.values);
    return out;
}

Bracket bracket_from_barriers(const ProblemSpec& raw, std::shared_ptr<const Grid> grid, const SchemeParams& params)
{
    const ProblemSpec prob = validated(raw);
    const auto& bd = prob.bounds;
    const double lambda = prob.exponents.lambda;
    const double alpha = prob.exponents.alpha;
    const double M = bd.f_sup;

    // Constants c with lambda |c|^alpha c bounding f are exact discrete sub/supersolutions.
    const double c_plus = std::max(bd.phi_max, zero_order_inverse(bd.f_max, lambda, alpha));
    const double c_minus = std::min(bd.phi_min, zero_order_inverse(bd.f_min, lambda, alpha));

    Bracket out;
    out.minus = GridFunction(grid, c_minus);
    out.plus = GridFunction(grid, c_plus);
    out.source = "constant";
    if (M == 0.0 && bd.phi_min == 0.0 && bd.phi_max == 0.0) {
        out.minus = GridFunction(grid, 0.0);
        out.plus = GridFunction(grid, 0.0);
        out.source = "zero";
    } else {
        try {
            const double lift_plus = std::max(bd.phi_max, 0.0);
            const double lift_minus = std::min(bd.phi_min, 0.0);
            std::vector<double> psi(grid->size(), 0.0);
            if (M > 0.0) {
                const BarrierSpec spec = barrier_for(prob, M);
                for (std::size_t k = 0; k < grid->size(); ++k) psi[k] = spec.value(grid->node(k));
            }
            for (std::size_t k = 0; k < grid->size(); ++k) {
                out.plus[k] = std::min(lift_plus + psi[k], c_plus);
                out.minus[k] = std::max(lift_minus - psi[k], c_minus);
            }
            out.source = "barrier";
        } catch (const Error&) {
            // No certified barrier for these data; the constant pair stays.
        }
    }

    const GridFunction rm = discrete_residual(out.minus, prob, params);
    const GridFunction rp = discrete_residual(out.plus, prob, params);
    out.minus_max_residual = grid->interior().empty() ? 0.0 : interior_max(*grid, rm.values);
    out.plus_min_residual = grid->interior().empty() ? 0.0 : interior_min(*grid, rp.values);
    bool ordered = true;
    const Evaluator ev(prob, *grid, params, params.eps_rule(grid->h()));
    for (auto k : grid->boundary()) ordered = ordered && out.minus[k] <= ev.phi(k) && ev.phi(k) <= out.plus[k];
    out.certified = ordered && out.minus_max_residual <= 0.0 && out.plus_min_residual >= 0.0;
    return out;
}

namespace {

SolveResult run_solve(const ProblemSpec& prob, const Bracket& bracket, std::vector<double> u, const SchemeParams& params)
{
    check_params(params);
    const auto& grid = bracket.plus.grid;
    const double h = grid->h();
    SolveResult out;
    SolveReport& rep = out.report;
    rep.bracket_certified = bracket.certified;
    rep.bracket_source = bracket.source;
    rep.bracket_width_history.push_back(max_abs_diff(bracket.plus, bracket.minus));

    const auto schedule = eps_schedule(h, params);
    std::vector<double> lo = bracket.minus.values;
    std::vector<double> hi = bracket.plus.values;
    double norm = 0.0;
    for (std::size_t s = 0; s < schedule.size(); ++s) {
        const double eps = schedule[s];
        rep.eps_history.push_back(eps);
        const bool last = s + 1 == schedule.size();
        const double stage_tol = last ? params.tol : std::max(params.tol, 1e-6);
        const Evaluator ev(prob, *grid, params, eps);
        if (params.method == SolveMethod::newton) {
            reset_boundary(ev, u);
            norm = newton_stage(ev, u, stage_tol, params, rep);
        } else {
            reset_boundary(ev, lo);
            reset_boundary(ev, hi);
            norm = fixed_point_stage(ev, lo, hi, bracket.certified && s == 0, stage_tol, params, rep, u);
        }
    }
    rep.final_residual = norm;
    rep.converged = norm <= params.tol;

    double slack = 0.0;
    for (std::size_t k = 0; k < u.size(); ++k) {
        slack = std::max({slack, bracket.minus[k] - u[k], u[k] - bracket.plus[k]});
    }
    const double scale = 1e-6 * (1.0 + inf_norm(u));
    rep.bracket_preserved = slack <= scale;
    // Exact monotonicity holds for 1D, radial and alpha = 0 schemes: then leaving a certified
    // bracket contradicts discrete comparison.
    const bool exact_monotone = grid->kind() != GridKind::tensor || prob.exponents.alpha == 0.0;
    if (!rep.bracket_preserved && bracket.certified && params.monotone_gradient && exact_monotone) {
        throw BracketViolated("discrete solution leaves a certified bracket by " + std::to_string(slack));
    }
    out.u = GridFunction(grid, std::move(u));
    return out;
}

} // namespace

SolveResult solve(const ProblemSpec& raw, std::shared_ptr<const Grid> grid, const SchemeParams& params)
{
    const ProblemSpec prob = validated(raw);
    const Bracket bracket = bracket_from_barriers(prob, grid, params);
    std::vector<double> start;
    switch (params.start) {
    case StartFrom::minus: start = bracket.minus.values; break;
    case StartFrom::plus: start = bracket.plus.values; break;
    case StartFrom::zero: start.assign(grid->size(), 0.0); break;
    }
    return run_solve(prob, bracket, std::move(start), params);
}

SolveResult solve_from(const ProblemSpec& raw, const GridFunction& start, const SchemeParams& params)
{
    const ProblemSpec prob = validated(raw);
    const Bracket bracket = bracket_from_barriers(prob, start.grid, params);
    return run_solve(prob, bracket, start.values, params);
}

std::string solution_csv(const GridFunction& u, const GridFunction& residual)
{
    const Grid& g = *u.grid;
    const bool two = g.kind() == GridKind::tensor;
    std::ostringstream os;
    os << (two ? "x,y,u,residual\n" : "x,u,residual\n");
    char buf[160];
    for (std::size_t k = 0; k < g.size(); ++k) {
        const Vec2 x = g.node(k);
        if (two) std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g\n", x.x, x.y, u[k], residual[k]);
        else std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", x.x, u[k], residual[k]);
        os << buf;
    }
    return os.str();
}

} // namespace visco
