#include "visco/operator_core.hpp"

#include "visco/errors.hpp"
#include "visco/problem.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

namespace visco {

double norm(Vec2 a) { return std::hypot(a.x, a.y); }

EllipticityPair::EllipticityPair(double lower, double upper)
    : a_(lower)
    , A_(upper)
{
    if (!(lower > 0.0) || !(upper >= lower) || !std::isfinite(upper)) {
        throw InvalidArgument("ellipticity pair requires 0 < a <= A, got a = " + std::to_string(lower)
                              + ", A = " + std::to_string(upper));
    }
}

SymMatrix::SymMatrix(double m11)
    : dim_(1)
    , xx_(m11)
{
}

SymMatrix::SymMatrix(double m11, double m12, double m22)
    : dim_(2)
    , xx_(m11)
    , xy_(m12)
    , yy_(m22)
{
}

SymMatrix SymMatrix::zero(int dim) { return dim == 1 ? SymMatrix(0.0) : SymMatrix(0.0, 0.0, 0.0); }

SymMatrix SymMatrix::identity(int dim) { return dim == 1 ? SymMatrix(1.0) : SymMatrix(1.0, 0.0, 1.0); }

SymMatrix SymMatrix::diag(double d1, double d2) { return {d1, 0.0, d2}; }

SymMatrix SymMatrix::outer(Vec2 v, int dim)
{
    if (dim == 1) return SymMatrix(v.x * v.x);
    return {v.x * v.x, v.x * v.y, v.y * v.y};
}

std::array<double, 2> SymMatrix::eigenvalues() const
{
    if (dim_ == 1) return {xx_, xx_};
    const double mean = 0.5 * (xx_ + yy_);
    const double radius = std::hypot(0.5 * (xx_ - yy_), xy_);
    return {mean - radius, mean + radius};
}

double SymMatrix::spectral_norm() const
{
    const auto ev = eigenvalues();
    if (dim_ == 1) return std::abs(ev[0]);
    return std::max(std::abs(ev[0]), std::abs(ev[1]));
}

double SymMatrix::quadratic_form(Vec2 v) const
{
    if (dim_ == 1) return xx_ * v.x * v.x;
    return xx_ * v.x * v.x + 2.0 * xy_ * v.x * v.y + yy_ * v.y * v.y;
}

SymMatrix SymMatrix::operator+(const SymMatrix& o) const
{
    SymMatrix r = *this;
    r.xx_ += o.xx_;
    r.xy_ += o.xy_;
    r.yy_ += o.yy_;
    r.dim_ = std::max(dim_, o.dim_);
    return r;
}

SymMatrix SymMatrix::operator-(const SymMatrix& o) const { return *this + (-o); }

SymMatrix SymMatrix::operator-() const { return -1.0 * *this; }

SymMatrix operator*(double s, const SymMatrix& m)
{
    SymMatrix r = m;
    r.xx_ *= s;
    r.xy_ *= s;
    r.yy_ *= s;
    return r;
}

double GradientVector::magnitude() const { return std::sqrt(magnitude_squared()); }

double GradientVector::regularized_magnitude() const { return std::sqrt(magnitude_squared() + eps * eps); }

std::string_view to_string(OperatorVariant v)
{
    switch (v) {
    case OperatorVariant::pucci_plus:
        return "pucci_plus";
    case OperatorVariant::pucci_minus:
        return "pucci_minus";
    case OperatorVariant::trace:
        return "trace";
    }
    return "?";
}

OperatorVariant operator_variant_from_string(std::string_view name)
{
    if (name == "pucci_plus" || name == "plus") return OperatorVariant::pucci_plus;
    if (name == "pucci_minus" || name == "minus") return OperatorVariant::pucci_minus;
    if (name == "trace") return OperatorVariant::trace;
    throw InvalidArgument("unknown operator variant '" + std::string(name)
                          + "' (expected pucci_plus, pucci_minus or trace)");
}

double pucci_from_spectrum(std::span<const double> eigenvalues, OperatorVariant variant,
                           const EllipticityPair& pair)
{
    double pos = 0.0;
    double neg = 0.0;
    for (double ev : eigenvalues) {
        if (ev > 0.0) pos += ev;
        else neg += ev;
    }
    switch (variant) {
    case OperatorVariant::pucci_plus:
        return pair.upper() * pos + pair.lower() * neg;
    case OperatorVariant::pucci_minus:
        return pair.lower() * pos + pair.upper() * neg;
    case OperatorVariant::trace:
        return pos + neg;
    }
    return 0.0;
}

namespace {

double spectral_combination(const SymMatrix& m, OperatorVariant variant, const EllipticityPair& pair)
{
    if (variant == OperatorVariant::trace) return m.trace();
    const auto ev = m.eigenvalues();
    return pucci_from_spectrum(std::span<const double>(ev.data(), static_cast<std::size_t>(m.dim())), variant,
                               pair);
}

} // namespace

double pucci_plus(const SymMatrix& m, const EllipticityPair& pair)
{
    return spectral_combination(m, OperatorVariant::pucci_plus, pair);
}

double pucci_minus(const SymMatrix& m, const EllipticityPair& pair)
{
    return spectral_combination(m, OperatorVariant::pucci_minus, pair);
}

double gradient_weight(const GradientVector& p, double alpha)
{
    if (alpha == 0.0) return 1.0;
    const double s = p.magnitude_squared() + p.eps * p.eps;
    if (s == 0.0) {
        if (alpha < 0.0) throw SingularGradient("gradient weight |p|^alpha is singular at p = 0 for alpha < 0");
        return 0.0;
    }
    return std::pow(s, 0.5 * alpha);
}

double operator_value(const GradientVector& p, const SymMatrix& m, OperatorVariant variant,
                      const EllipticityPair& pair, double alpha)
{
    return gradient_weight(p, alpha) * spectral_combination(m, variant, pair);
}

double zero_order_term(double u, double lambda, double alpha)
{
    if (u == 0.0) return 0.0;
    return lambda * std::pow(std::abs(u), alpha) * u;
}

double pointwise_residual(double u_val, const GradientVector& p, const SymMatrix& m, double b_val,
                          double f_val, OperatorVariant variant, const EllipticityPair& pair,
                          const ExponentProfile& profile)
{
    const double principal = operator_value(p, m, variant, pair, profile.alpha);
    const double s = p.magnitude_squared() + p.eps * p.eps;
    const double first_order = b_val == 0.0 ? 0.0 : b_val * std::pow(s, 0.5 * profile.beta);
    return -principal + first_order + zero_order_term(u_val, profile.lambda, profile.alpha) - f_val;
}

double equation_residual_at_point(Vec2 x, double u_val, const GradientVector& p, const SymMatrix& m,
                                  const ProblemSpec& prob)
{
    const double b_val = prob.b.eval(x);
    const double f_val = prob.f.eval(x);
    if (!std::isfinite(b_val) || !std::isfinite(f_val)) {
        throw FieldEvalError("coefficient b or f is undefined at (" + std::to_string(x.x) + ", "
                             + std::to_string(x.y) + ")");
    }
    return pointwise_residual(u_val, p, m, b_val, f_val, prob.variant, prob.ellipticity, prob.exponents);
}

double radial_pucci(double r, double v1, double v2, int dim, OperatorVariant variant, const EllipticityPair& pair)
{
    if (!(r > 0.0)) throw InvalidArgument("radial reduction requires r > 0");
    std::vector<double> spectrum;
    spectrum.reserve(static_cast<std::size_t>(dim));
    spectrum.push_back(v2);
    for (int k = 1; k < dim; ++k) spectrum.push_back(v1 / r);
    return pucci_from_spectrum(spectrum, variant, pair);
}

double radial_operator_value(double r, double v, double v1, double v2, int dim, OperatorVariant variant,
                             const EllipticityPair& pair, const ExponentProfile& profile, double b_value,
                             double f_value, double eps)
{
    const GradientVector p{{v1, 0.0}, 1, eps};
    const double principal = gradient_weight(p, profile.alpha) * radial_pucci(r, v1, v2, dim, variant, pair);
    const double s = v1 * v1 + eps * eps;
    const double first_order = b_value == 0.0 ? 0.0 : b_value * std::pow(s, 0.5 * profile.beta);
    return -principal + first_order + zero_order_term(v, profile.lambda, profile.alpha) - f_value;
}

} // namespace visco
