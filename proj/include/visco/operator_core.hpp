#pragma once

#include <array>
#include <span>
#include <string>
#include <string_view>

namespace visco {

struct ProblemSpec;

struct Vec2 {
    double x = 0.0;
    double y = 0.0;
};

inline Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
inline Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
inline Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }
inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
double norm(Vec2 a);

/// Lower/upper ellipticity constants, 0 < a <= A.
class EllipticityPair {
public:
    EllipticityPair(double lower, double upper);

    double lower() const noexcept { return a_; }
    double upper() const noexcept { return A_; }

    friend bool operator==(const EllipticityPair&, const EllipticityPair&) = default;

private:
    double a_;
    double A_;
};

/// Exponents of the equation: gradient power alpha, first-order power beta,
/// zero-order coefficient lambda.  Range checks live in validate_problem.
struct ExponentProfile {
    double alpha = 0.0;
    double beta = 1.0;
    double lambda = 1.0;

    friend bool operator==(const ExponentProfile&, const ExponentProfile&) = default;
};

/// Symmetric matrix of dimension 1 or 2; only the upper triangle is stored.
class SymMatrix {
public:
    SymMatrix() = default;
    explicit SymMatrix(double m11);
    SymMatrix(double m11, double m12, double m22);

    static SymMatrix zero(int dim);
    static SymMatrix identity(int dim);
    static SymMatrix diag(double d1, double d2);
    /// v ⊗ v restricted to `dim`.
    static SymMatrix outer(Vec2 v, int dim);

    int dim() const noexcept { return dim_; }
    double xx() const noexcept { return xx_; }
    double xy() const noexcept { return xy_; }
    double yy() const noexcept { return yy_; }

    double trace() const noexcept { return dim_ == 1 ? xx_ : xx_ + yy_; }
    /// Ascending eigenvalues; only the first dim() entries are meaningful.
    std::array<double, 2> eigenvalues() const;
    double spectral_norm() const;
    double quadratic_form(Vec2 v) const;

    SymMatrix operator+(const SymMatrix& o) const;
    SymMatrix operator-(const SymMatrix& o) const;
    SymMatrix operator-() const;
    friend SymMatrix operator*(double s, const SymMatrix& m);

private:
    int dim_ = 1;
    double xx_ = 0.0;
    double xy_ = 0.0;
    double yy_ = 0.0;
};

/// Gradient with the regularization used to evaluate the weight |p|^alpha.
struct GradientVector {
    Vec2 p;
    int dim = 1;
    double eps = 0.0;

    double magnitude_squared() const noexcept
    {
        return dim == 1 ? p.x * p.x : p.x * p.x + p.y * p.y;
    }
    double magnitude() const;
    double regularized_magnitude() const;
};

enum class OperatorVariant { pucci_plus, pucci_minus, trace };

std::string_view to_string(OperatorVariant v);
OperatorVariant operator_variant_from_string(std::string_view name);

double pucci_plus(const SymMatrix& m, const EllipticityPair& pair);
double pucci_minus(const SymMatrix& m, const EllipticityPair& pair);

/// Extremal combination of an explicit spectrum (any length).
double pucci_from_spectrum(std::span<const double> eigenvalues, OperatorVariant variant,
                           const EllipticityPair& pair);

/// (|p|^2 + eps^2)^{alpha/2}; throws SingularGradient for p = 0, eps = 0, alpha < 0.
double gradient_weight(const GradientVector& p, double alpha);

double operator_value(const GradientVector& p, const SymMatrix& m, OperatorVariant variant,
                      const EllipticityPair& pair, double alpha);

/// lambda |u|^alpha u, taken as 0 at u = 0.
double zero_order_term(double u, double lambda, double alpha);

/// -F(p, M) + b (|p|^2 + eps^2)^{beta/2} + lambda |u|^alpha u - f from already evaluated
/// coefficients.  Sign convention: <= 0 subsolution, >= 0 supersolution.
double pointwise_residual(double u_val, const GradientVector& p, const SymMatrix& m, double b_val,
                          double f_val, OperatorVariant variant, const EllipticityPair& pair,
                          const ExponentProfile& profile);

/// Same as pointwise_residual with b and f evaluated from the problem at x.
/// Throws FieldEvalError when b or f is undefined at x.
double equation_residual_at_point(Vec2 x, double u_val, const GradientVector& p, const SymMatrix& m,
                                  const ProblemSpec& prob);

/// Extremal combination for a radial profile: eigenvalue v2 once and v1/r with
/// multiplicity N-1.
double radial_pucci(double r, double v1, double v2, int dim, OperatorVariant variant,
                    const EllipticityPair& pair);

/// Full residual of the radial reduction at radius r with b, f already evaluated.
double radial_operator_value(double r, double v, double v1, double v2, int dim, OperatorVariant variant,
                             const EllipticityPair& pair, const ExponentProfile& profile, double b_value,
                             double f_value, double eps = 0.0);

} // namespace visco
