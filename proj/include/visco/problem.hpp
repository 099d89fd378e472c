#pragma once

#include "visco/expr.hpp"
#include "visco/geometry.hpp"
#include "visco/operator_core.hpp"

#include <optional>
#include <vector>

namespace visco {

/// Sampled magnitudes of the data, filled in by validate_problem.
struct FieldBounds {
    double b_sup = 0.0;      ///< |b|_inf
    double b_lipschitz = 0.0;
    double f_sup = 0.0;      ///< |f|_inf
    double f_min = 0.0;
    double f_max = 0.0;
    double phi_min = 0.0;    ///< over the boundary
    double phi_max = 0.0;
};

/// Dirichlet problem -F(Du, D^2u) + b|Du|^beta + lambda|u|^alpha u = f, u = phi on the boundary.
struct ProblemSpec {
    Domain domain = Domain::interval(-1.0, 1.0);
    ExponentProfile exponents;
    EllipticityPair ellipticity{1.0, 1.0};
    OperatorVariant variant = OperatorVariant::pucci_plus;
    Expr b;
    Expr f;
    Expr phi;
    std::optional<double> b_lipschitz_bound;
    FieldBounds bounds;
    bool validated = false;

    int dim() const noexcept { return domain.dim(); }
};

/// Points of the closure on a lattice of the given spacing (boundary points included).
std::vector<Vec2> sample_closure(const Domain& dom, double spacing);
/// Points on the boundary at roughly the given arclength spacing.
std::vector<Vec2> sample_boundary(const Domain& dom, double spacing);

/// Checks the admissible ranges and samples the data.  Sampling uses spacing
/// solver_h / 10 when solver_h > 0, otherwise inradius / 500.
ProblemSpec validate_problem(ProblemSpec prob, double solver_h = 0.0);

struct ManufacturedRhs {
    Expr f;
    /// Zeros of the gradient of u; f is singular there when alpha < 0.
    std::vector<Vec2> singular_points;
    bool singular = false;
    /// u contains abs/min/max/sign, so f is only exact away from their kinks.
    bool kink_warning = false;
};

/// f := -F(Du, D^2u) + b|Du|^beta + lambda|u|^alpha u built symbolically, so (u, f)
/// solves the equation exactly.
ManufacturedRhs manufacture_rhs(const Expr& u, const ProblemSpec& prob);

} // namespace visco
