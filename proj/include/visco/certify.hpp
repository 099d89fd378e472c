#pragma once

#include "visco/barriers.hpp"
#include "visco/expr.hpp"
#include "visco/problem.hpp"
#include "visco/scheme.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace visco {

enum class PointClass { classical, zero_gradient, locally_constant };
enum class CheckSide { sub, super };

std::string_view to_string(PointClass c);
std::string_view to_string(CheckSide s);

struct ViscosityRecord {
    Vec2 point;
    PointClass classification = PointClass::classical;
    /// Residual for supersolutions, its negative for subsolutions; >= 0 means the inequality holds.
    double margin = 0.0;
    CheckSide side = CheckSide::super;
};

struct ViscosityReport {
    std::vector<ViscosityRecord> records;
    double min_margin = 0.0;
    bool kink_warning = false;
    bool passed = false;
};

/// Value and derivatives of a candidate at a point.
struct CandidateJet {
    double value = 0.0;
    Vec2 grad;
    SymMatrix hess;
    bool kink = false;
};

using Candidate = std::function<CandidateJet(Vec2)>;

/// Pointwise viscosity inequality for a C^2 candidate.  Points with |Du| > 1e-12 are checked
/// classically; otherwise the candidate is locally constant when value and gradient are
/// unchanged on a ring of radius 3 h around the point (the constant rule
/// lambda |u|^alpha u - f >= 0 resp. <= 0 applies), else the point is a zero-gradient point:
/// no condition for alpha < 0, the degenerate inequality for alpha >= 0.
/// pass iff every margin >= required_margin.
ViscosityReport classical_check(const Candidate& u, const ProblemSpec& prob, std::span<const Vec2> samples,
                                CheckSide side, double required_margin = 0.0, double h = 1e-3,
                                bool zero_order = true);
ViscosityReport classical_check(const Expr& u, const ProblemSpec& prob, std::span<const Vec2> samples,
                                CheckSide side, double required_margin = 0.0, double h = 1e-3);
/// Checks a barrier against the homogeneous equation (f = 0) at `per_branch` samples of each branch,
/// requiring margin >= the certified level.
ViscosityReport classical_check(const BarrierSpec& barrier, const ProblemSpec& prob, int per_branch = 1000);

struct ZeroGradientResult {
    double q_min = 0.0;
    /// lambda |v(x)|^alpha v(x) - f(x) at x_bar.
    double margin = 0.0;
    bool passed = false;
};

/// Necessary condition at a strict minimum x_bar of v + C |x - x_bar|^q for supersolutions
/// with alpha in (-1, 0).  Throws QTooSmall when q < (alpha+2)/(alpha+1) and
/// NotStrictMinimum when sampling finds a point at least as low.
ZeroGradientResult zero_gradient_check(const Expr& v, const ProblemSpec& prob, Vec2 x_bar, double q, double C);

double zero_gradient_q_min(double alpha);

struct ComparisonMargin {
    double margin = 0.0; ///< max over interior of u - v
    std::size_t node = 0;
    Vec2 point;
    bool passed = false;
};

/// Throws BoundaryOrderViolated when u > v + tol at a boundary node.
ComparisonMargin comparison_probe(const GridFunction& u, const GridFunction& v, double tol = 1e-9);

enum class ModulusForm { lipschitz, holder, concave_omega };

struct ModulusFit {
    ModulusForm form = ModulusForm::lipschitz;
    double r = 1.0;
    double exponent = 1.0; ///< gamma for holder, tau for concave_omega
    double constant = 0.0;
    /// max over sampled pairs of |u(x) - u(y)| - constant * modulus(|x - y|) (<= 0 up to rounding).
    double max_violation = 0.0;
    std::size_t pair_i = 0;
    std::size_t pair_j = 0;
    std::size_t pairs = 0;
    bool exhaustive = true;
};

/// omega(s) = s - s^{1+tau} / (2(1+tau)) up to s0 = (1+tau)^{1/tau}, constant beyond; increasing
/// for tau in (0, 1].
double concave_omega(double s, double tau);

/// Least constant of the modulus over node pairs inside the subregion of relative size r
/// (exhaustive up to 1e4 nodes, else 1e6 pairs drawn with `seed`).
ModulusFit modulus_fit(const GridFunction& u, double r, ModulusForm form, double exponent = 1.0,
                       std::uint64_t seed = 1);

struct Sandwich {
    double c = 0.0;
    double C = 0.0;
    std::size_t c_node = 0;
    std::size_t C_node = 0;
    bool passed = false;
};

/// Largest c and smallest C with c d <= u <= C d on interior nodes.  Throws SignViolation when
/// u < 0 somewhere.
Sandwich sandwich_check(const GridFunction& u, const Domain& dom);

struct HopfQuotient {
    std::size_t node = 0;
    double quotient = 0.0;  ///< (u(x_b + h n) - u(x_b)) / h
    double threshold = 0.0;
    bool passed = false;
};

struct StrongMaxReport {
    double interior_min = 0.0;
    std::size_t interior_min_node = 0;
    bool identically_zero = false;
    std::vector<HopfQuotient> quotients;
    bool passed = false;
};

/// interior_min over nodes with d >= margin (default: collar width); inward difference quotients
/// at boundary nodes where u = 0, skipping rectangle corners.  Passes when u > 0 inside and every
/// quotient >= threshold (> 0), or when u vanishes identically.
StrongMaxReport strong_max_probe(const GridFunction& u, const Domain& dom, double threshold = 0.0,
                                 double margin = -1.0);

struct HopfPrediction {
    std::size_t node = 0;
    HopfBarrier barrier;
    double prediction = 0.0; ///< delta c R e^{-cR}
};

/// Annulus barrier in the interior ball of radius min(inradius / 2, distance to a corner) touching
/// each zero boundary node, with delta below min u_h on the inner ball.
std::vector<HopfPrediction> hopf_predictions(const ProblemSpec& prob, const GridFunction& u, double safety = 1.1);

/// strong_max_probe with per-node thresholds of half the Hopf prediction.
StrongMaxReport strong_max_with_hopf(const ProblemSpec& prob, const GridFunction& u);

struct ComparisonInstance {
    ProblemSpec sub;   ///< right-hand side g
    ProblemSpec super; ///< right-hand side f >= g + 0.1
    std::string label;
};

/// Convection-dominated 1D instances on (-1, 1) with g <= f - 0.1; deterministic in the seed.
std::vector<ComparisonInstance> random_comparison_instances(std::uint64_t seed, int count);

struct ComparisonOutcome {
    int index = 0;
    bool solved = false;
    double margin = 0.0;
    std::string error;
    bool passed = false;
};

struct ComparisonSuiteReport {
    std::vector<ComparisonOutcome> outcomes;
    int violations = 0; ///< solved pairs with margin > 10 tol
    int unsolved = 0;
    bool passed = false; ///< every pair solved and ordered
};

ComparisonSuiteReport comparison_suite(std::uint64_t seed, int count, const SchemeParams& params = {},
                                       double h = 1.0 / 16.0);

} // namespace visco
