#pragma once

#include "visco/geometry.hpp"
#include "visco/operator_core.hpp"
#include "visco/problem.hpp"

#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace visco {

/// Nodal values on a shared, immutable grid.
struct GridFunction {
    std::shared_ptr<const Grid> grid;
    std::vector<double> values;

    GridFunction() = default;
    explicit GridFunction(std::shared_ptr<const Grid> g, double fill = 0.0);
    GridFunction(std::shared_ptr<const Grid> g, std::vector<double> v);

    /// Samples an expression (or any callable) at the nodes.
    static GridFunction sample(std::shared_ptr<const Grid> g, const Expr& e);
    static GridFunction sample(std::shared_ptr<const Grid> g, const std::function<double(Vec2)>& fn);

    std::size_t size() const noexcept { return values.size(); }
    double operator[](std::size_t k) const { return values[k]; }
    double& operator[](std::size_t k) { return values[k]; }
    double max_abs() const;
};

/// Largest |u - v| over all nodes; the grids must agree.
double max_abs_diff(const GridFunction& u, const GridFunction& v);

enum class Stencil { axis_only, wide };
enum class SolveMethod { newton, fixed_point };
enum class StartFrom { minus, plus, zero };

struct SchemeParams {
    /// Final regularization as a function of h (default eps = h).
    std::function<double(double)> eps_rule = [](double h) { return h; };
    Stencil stencil = Stencil::wide;
    double dt_factor = 0.9;
    double tol = 1e-10;
    int max_iters = 200;
    /// Number of eps levels from sqrt(h) down to eps_rule(h), geometric.
    int continuation_steps = 4;
    SolveMethod method = SolveMethod::newton;
    StartFrom start = StartFrom::minus;
    /// false replaces the upwind first-order term by centered differences (not monotone).
    bool monotone_gradient = true;
};

/// Centered gradient at an interior node (zero at the centre of a radial grid).
GradientVector discrete_gradient(const GridFunction& u, std::size_t node, double eps = 0.0);

/// Upwind magnitude used in the first-order term: for b >= 0
/// sqrt(sum max(D-u, 0)^2 + min(D+u, 0)^2), mirrored for b < 0.
double monotone_gradient_magnitude(const GridFunction& u, std::size_t node, double b_value);

struct HessianExtremes {
    /// Second differences per direction: x (1D); x, y (axis); x, y, (1,1), (1,-1) (wide).
    /// Radial grids report v'' and the one-sided v'/r.
    std::vector<double> directional;
    double lambda_min = 0.0;
    double lambda_max = 0.0;
};

HessianExtremes discrete_hessian_extremes(const GridFunction& u, std::size_t node, Stencil stencil = Stencil::wide);

/// Per node: -F_h + b G_h^beta + lambda |u|^alpha u - f on interior nodes, u - phi on the boundary.
/// Uses eps = params.eps_rule(h) unless given.
GridFunction discrete_residual(const GridFunction& u, const ProblemSpec& prob, const SchemeParams& params = {});
GridFunction discrete_residual(const GridFunction& u, const ProblemSpec& prob, const SchemeParams& params,
                               double eps);

struct Bracket {
    GridFunction minus;
    GridFunction plus;
    /// "barrier", "constant" or "zero".
    std::string source;
    double minus_max_residual = 0.0; ///< max interior residual of minus (<= 0 ideally)
    double plus_min_residual = 0.0;  ///< min interior residual of plus (>= 0 ideally)
    /// Both discrete signs hold and the boundary ordering is satisfied.
    bool certified = false;
};

/// max(phi_max, 0) + psi and min(phi_min, 0) - psi with psi the global barrier at level |f|_inf;
/// falls back to the constant pair solving lambda |c|^alpha c = f_min / f_max when no barrier exists.
Bracket bracket_from_barriers(const ProblemSpec& prob, std::shared_ptr<const Grid> grid,
                              const SchemeParams& params = {});

struct SolveReport {
    int iterations = 0;
    double final_residual = 0.0;
    std::vector<double> dt_history;
    std::vector<double> eps_history;
    std::vector<double> bracket_width_history;
    std::vector<double> residual_history;
    bool converged = false;
    bool bracket_preserved = true;
    bool bracket_certified = false;
    std::string bracket_source;
};

struct SolveResult {
    GridFunction u;
    SolveReport report;
};

/// Solves the discrete problem.  Newton (default) runs a semismooth Newton iteration with the
/// generalized Jacobian and a residual line search, falling back to monotone
/// pseudo-time steps; fixed_point runs the monotone iteration from both bracket ends and
/// returns their midpoint.  Throws MaxItersExceeded, BracketViolated.
SolveResult solve(const ProblemSpec& prob, std::shared_ptr<const Grid> grid, const SchemeParams& params = {});

/// Same with a caller-provided initial iterate (boundary values are reset to phi).
SolveResult solve_from(const ProblemSpec& prob, const GridFunction& start, const SchemeParams& params = {});

/// CSV with columns x[,y],u,residual.
std::string solution_csv(const GridFunction& u, const GridFunction& residual);

} // namespace visco
