#pragma once

#include "visco/expr.hpp"
#include "visco/geometry.hpp"
#include "visco/problem.hpp"

#include <array>
#include <optional>
#include <string>
#include <vector>

namespace visco {

/// Raw inputs of the global barrier construction.
struct BarrierInputs {
    double alpha = 0.0;
    double beta = 1.0;
    double lambda = 1.0;
    double a = 1.0;
    double A = 1.0;
    int dim = 1;
    double C1 = 0.0;     ///< bound on |D^2 d| in the collar
    double delta0 = 1.0; ///< collar width
    double b_sup = 0.0;  ///< |b|_inf
    double M_level = 1.0;
    double safety = 1.1;
    /// Use this kappa instead of safety * (minimal kappa).
    std::optional<double> kappa;
};

struct BarrierConstants {
    double kappa = 0.0;
    double kappa_min = 0.0; ///< root of lambda log(1+k)^{1+alpha} = M_level
    double C = 0.0;
    double delta0_eff = 0.0;
    double M_level = 0.0;
    double safety = 1.1;
    /// Lower bounds on C: collar 2k/delta0, curvature, first order, level.
    std::array<double, 4> C_bounds{};
};

/// Smallest kappa with lambda log(1+kappa)^{1+alpha} = M (bisection to 1e-12).
double minimal_kappa(double lambda, double alpha, double M_level);

BarrierConstants constants_from(const BarrierInputs& in);
/// Requires beta < alpha + 2 unless b = 0 (CriticalBeta otherwise).
BarrierConstants barrier_constants(const ProblemSpec& prob, double M_level, double safety = 1.1);

enum class BarrierSide { super, sub };

/// Value and exact derivatives of a barrier at a point, with the active branch.
struct BarrierJet {
    double value = 0.0;
    Vec2 grad;
    SymMatrix hess;
    int branch = 0;
};

/// Certified explicit super- or subsolution.
///
/// Global barriers are min(g(d~), log(1+kappa)) with g(s) = log(1 + C s) in terms of the
/// extended distance d~ (branch 0 = log, 1 = cap), optionally divided by rescale_eps.
/// Boundary barriers (flat boundary piece x_N = 0 inside the unit ball) are
/// g(x_N) + [|x| >= r] (|x| - r)^3 / (1 - r)^3 + phi (branch 0 for |x| < r, 1 otherwise).
class BarrierSpec {
public:
    enum class Kind { global, boundary };

    Kind kind = Kind::global;
    BarrierSide side = BarrierSide::super;
    BarrierConstants constants;
    std::optional<double> rescale_eps;
    /// Level certified for the original equation.
    double level = 0.0;
    int dim = 1;
    std::optional<Domain> domain; // global barriers only

    Expr log_branch; ///< profile in the variable x standing for the distance
    Expr cap_value;  ///< constant log(1+kappa)
    Expr cubic_term; ///< profile in x standing for |x|, boundary barriers only
    Expr affine_part;
    /// First and second derivatives of the profiles above.
    Expr log_d1, log_d2, cubic_d1, cubic_d2;
    Vec2 affine_grad;
    double r_inner = 0.0;
    double delta = 0.0;

    /// Smallest certification margin found per branch at construction.
    std::array<double, 2> min_margin{};
    std::array<int, 2> samples_checked{};

    BarrierJet jet(Vec2 x) const;
    double value(Vec2 x) const { return jet(x).value; }
    /// Sample points of one branch, equally spaced in the distance variable.
    std::vector<Vec2> branch_samples(int branch, int count) const;
};

/// Worst-case residual over all admissible b with |b| <= |b|_inf and the
/// extremal operator: for super barriers
///   -|Dw|^alpha M+(D^2w) - |b|_inf |Dw|^beta + lambda |w|^alpha w,
/// for sub barriers the negative of the mirrored expression, so certification
/// means residual >= level in both cases.  Locally constant points (cap branch)
/// drop the principal term.
double barrier_residual(const BarrierSpec& spec, const ProblemSpec& prob, Vec2 x);

/// Supersolution min(log(1 + C d), log(1 + kappa)) at level M_level, or its negative.
/// Certified by a residual sweep before returning.
BarrierSpec global_barrier(const ProblemSpec& prob, double M_level, BarrierSide side = BarrierSide::super);

struct RescaledBarrier {
    double eps = 0.0;
    BarrierSpec barrier;
};

/// beta = alpha + 2 with b != 0: builds phi for first-order bound a/4 at level
/// M eps^{1+alpha} with eps = 4 |b|_inf / a and returns psi = phi / eps.
RescaledBarrier critical_beta_rescale(const ProblemSpec& prob, double M_level,
                                      BarrierSide side = BarrierSide::super);

/// global_barrier or critical_beta_rescale depending on the exponents.
BarrierSpec barrier_for(const ProblemSpec& prob, double M_level, BarrierSide side = BarrierSide::super);

enum class HopfPlacement {
    interior_crown,    ///< B(x0, 2R) \ B(x0, R/2), needs B(x0, 2R) inside the domain
    boundary_annulus,  ///< B(x0, R) \ B(x0, R/2), needs B(x0, R) inside the closure
};

struct HopfBarrier {
    Vec2 center;
    double R = 0.0;
    double delta = 0.0;
    double c = 0.0;
    double c_formula = 0.0; ///< safety * max of the closed-form lower bounds
    HopfPlacement placement = HopfPlacement::interior_crown;
    int dim = 1;
    /// max over sampled radii of the subsolution residual (negative when certified).
    double max_residual = 0.0;

    double r_min() const { return 0.5 * R; }
    double r_max() const { return placement == HopfPlacement::interior_crown ? 2.0 * R : R; }
    double value(double r) const;
    double d1(double r) const;
    double d2(double r) const;
    /// Lower bound delta c R e^{-cR} on inward difference quotients at the touching point.
    double hopf_prediction() const;
};

/// Radial subsolution residual -|v'|^alpha (a v'' + A (N-1) v'/r) + |b|_inf |v'|^beta.
double hopf_residual(const HopfBarrier& hb, const ProblemSpec& prob, double r);

/// delta = min(delta_cap, a / (2 |b|_inf) / safety when beta = alpha + 2); c starts at the
/// closed-form bound and grows until the sampled residual is negative on the whole shell.
HopfBarrier hopf_barrier(const ProblemSpec& prob, double delta_cap, Vec2 x0, double R,
                         HopfPlacement placement = HopfPlacement::interior_crown, double safety = 1.1);
/// Crown centred at the domain centre with R = inradius / 2.
HopfBarrier hopf_barrier(const ProblemSpec& prob, double delta_cap, double safety = 1.1);

/// Comparison margins of the boundary barrier against a subsolution u with u - phi <= u_bound.
struct BoundaryChecks {
    double inner_level = 0.0;  ///< min of w - phi on {d = delta} minus u_bound
    double outer_sphere = 0.0; ///< min of w - phi on {|x| = 1, d < delta} minus u_bound
    double flat_piece = 0.0;   ///< min of w - phi on {x_N = 0}
    double min_gradient = 0.0; ///< min |Dw| over the collar samples
    bool passed = false;
};

/// Barrier near a flat boundary piece {x_N = 0} in the unit ball (N = prob dimension):
/// w = log(1 + C x_N) + [|x| >= r](|x| - r)^3/(1 - r)^3 + phi with C = 2/delta.
/// Certified against -|Dw|^alpha M+(D^2w) - |b|_inf |Dw|^beta >= |f|_inf on {0 < x_N < delta}.
/// Throws DeltaTooLarge (delta >= (1-r)/9 or certification fails) and
/// NonAffineBoundaryDatum.
BarrierSpec boundary_barrier(const ProblemSpec& prob, double r, double delta, double u_bound = 1.0);
BoundaryChecks boundary_barrier_checks(const BarrierSpec& w, double u_bound = 1.0);
/// Largest delta = (1-r)/9 * 2^-k, k = 1, 2, ..., accepted by boundary_barrier.
double admissible_boundary_delta(const ProblemSpec& prob, double r, double u_bound = 1.0);
/// Boundary barrier residual minus |f|_inf (>= 0 when certified).
double boundary_barrier_margin(const BarrierSpec& w, const ProblemSpec& prob, Vec2 x);

/// CSV table x,y,value,residual,branch over `per_branch` samples of each branch.
std::string barrier_dump_csv(const BarrierSpec& spec, const ProblemSpec& prob, int per_branch = 200);

} // namespace visco
