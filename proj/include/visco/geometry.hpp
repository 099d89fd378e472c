#pragma once

#include "visco/operator_core.hpp"

#include <cstddef>
#include <memory>
#include <optional>
#include <span>
#include <variant>
#include <vector>

namespace visco {

struct Interval {
    double lo = -1.0;
    double hi = 1.0;
    friend bool operator==(const Interval&, const Interval&) = default;
};

struct Rectangle {
    Vec2 lo{0.0, 0.0};
    Vec2 hi{1.0, 1.0};
    friend bool operator==(const Rectangle& a, const Rectangle& b)
    {
        return a.lo.x == b.lo.x && a.lo.y == b.lo.y && a.hi.x == b.hi.x && a.hi.y == b.hi.y;
    }
};

/// Disk in the plane.
struct Ball {
    Vec2 center{0.0, 0.0};
    double radius = 1.0;
    friend bool operator==(const Ball& a, const Ball& b)
    {
        return a.center.x == b.center.x && a.center.y == b.center.y && a.radius == b.radius;
    }
};

/// Bounded domain with the collar {d < delta0} on which the distance is C^2
/// and the bound C1 on |D^2 d| there.
class Domain {
public:
    enum class Kind { interval, rectangle, ball };

    /// The collar defaults to 3/4 of the inradius (half the radius for balls,
    /// which keeps C1 = 1/(R - delta0) moderate).
    static Domain interval(double lo, double hi, std::optional<double> collar = std::nullopt);
    static Domain rectangle(Vec2 lo, Vec2 hi, std::optional<double> collar = std::nullopt);
    static Domain ball(Vec2 center, double radius, std::optional<double> collar = std::nullopt);

    Kind kind() const noexcept;
    int dim() const noexcept { return kind() == Kind::interval ? 1 : 2; }
    double inradius() const;
    Vec2 center() const;
    double collar_width() const noexcept { return collar_; }
    double hess_dist_bound() const noexcept { return c1_; }

    const Interval& as_interval() const { return std::get<Interval>(shape_); }
    const Rectangle& as_rectangle() const { return std::get<Rectangle>(shape_); }
    const Ball& as_ball() const { return std::get<Ball>(shape_); }

    bool contains(Vec2 x, double tol = 1e-12) const;
    /// Distance to the boundary for points of the closure.
    double distance(Vec2 x) const;
    /// x lies in the copy of the domain shrunk by the factor r about its centre.
    bool in_subregion(Vec2 x, double r) const;

    friend bool operator==(const Domain&, const Domain&) = default;

private:
    Domain(std::variant<Interval, Rectangle, Ball> shape, std::optional<double> collar);

    std::variant<Interval, Rectangle, Ball> shape_;
    double collar_ = 0.0;
    double c1_ = 0.0;
};

struct DistanceJet {
    double value = 0.0;
    Vec2 grad;
    SymMatrix hess;
};

/// Distance to the boundary plus the C^2 capped extension used away from it.
struct DistanceProfile {
    double d = 0.0;
    Vec2 grad;
    SymMatrix hess;
    bool in_collar = false;
    /// delta0 * S(d / delta0) with S(t) = t on [0, 1], a C^2 monotone quartic on
    /// [1, 2] and the constant 1.5 beyond, so the extension equals d in the
    /// collar and is >= delta0 outside of it.
    DistanceJet extended;
};

/// Throws OutsideDomain for points outside the closure.
DistanceProfile distance_profile(const Domain& dom, Vec2 x);

/// The cap S and its first two derivatives.
struct CapValue {
    double s = 0.0;
    double ds = 0.0;
    double dds = 0.0;
};
CapValue distance_cap(double t);

enum class GridKind { line, tensor, radial };

class Grid {
public:
    const Domain& domain() const noexcept { return domain_; }
    double h() const noexcept { return h_; }
    GridKind kind() const noexcept { return kind_; }
    std::size_t size() const noexcept { return nodes_.size(); }
    /// Number of nodes along x (and y for tensor grids).
    int nx() const noexcept { return nx_; }
    int ny() const noexcept { return ny_; }
    std::size_t index(int i, int j = 0) const { return static_cast<std::size_t>(i + j * nx_); }

    /// Physical position; for radial grids this is centre + (r, 0).
    Vec2 node(std::size_t k) const { return nodes_[k]; }
    /// Distance from the ball centre (radial grids only).
    double radius(std::size_t k) const { return static_cast<double>(k) * h_; }

    std::span<const std::size_t> interior() const { return interior_; }
    std::span<const std::size_t> boundary() const { return boundary_; }
    bool is_boundary(std::size_t k) const { return on_boundary_[k]; }
    bool is_corner(std::size_t k) const;

    /// Dimension of the equation solved on the grid (2 for radial grids).
    int equation_dim() const noexcept { return domain_.dim(); }

private:
    friend Grid build_grid(const Domain& dom, double h);
    explicit Grid(Domain dom)
        : domain_(std::move(dom))
    {
    }

    Domain domain_;
    double h_ = 0.0;
    GridKind kind_ = GridKind::line;
    int nx_ = 0;
    int ny_ = 1;
    std::vector<Vec2> nodes_;
    std::vector<std::size_t> interior_;
    std::vector<std::size_t> boundary_;
    std::vector<bool> on_boundary_;
};

/// Uniform grid: nodes lo + i h on intervals, a tensor grid on rectangles and a
/// radial grid r = i h on balls.  Requires h < collar width (SpacingTooCoarse)
/// and h dividing the side lengths / radius.
Grid build_grid(const Domain& dom, double h);

} // namespace visco
