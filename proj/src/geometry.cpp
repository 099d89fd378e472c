#include "visco/geometry.hpp"

#include "visco/errors.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace visco {

namespace {

double shape_inradius(const std::variant<Interval, Rectangle, Ball>& shape)
{
    if (const auto* iv = std::get_if<Interval>(&shape)) return 0.5 * (iv->hi - iv->lo);
    if (const auto* r = std::get_if<Rectangle>(&shape)) return 0.5 * std::min(r->hi.x - r->lo.x, r->hi.y - r->lo.y);
    return std::get<Ball>(shape).radius;
}

} // namespace

Domain::Domain(std::variant<Interval, Rectangle, Ball> shape, std::optional<double> collar)
    : shape_(std::move(shape))
{
    const double rin = shape_inradius(shape_);
    if (!(rin > 0.0) || !std::isfinite(rin)) throw InvalidArgument("domain must have a nonempty interior");
    const bool is_ball = std::holds_alternative<Ball>(shape_);
    collar_ = collar.value_or((is_ball ? 0.5 : 0.75) * rin);
    if (!(collar_ > 0.0) || !(collar_ < rin)) {
        throw InvalidArgument("collar width must lie in (0, inradius) = (0, " + std::to_string(rin) + "), got "
                              + std::to_string(collar_));
    }
    c1_ = is_ball ? 1.0 / (rin - collar_) : 0.0;
}

Domain Domain::interval(double lo, double hi, std::optional<double> collar)
{
    return Domain(Interval{lo, hi}, collar);
}

Domain Domain::rectangle(Vec2 lo, Vec2 hi, std::optional<double> collar)
{
    return Domain(Rectangle{lo, hi}, collar);
}

Domain Domain::ball(Vec2 center, double radius, std::optional<double> collar)
{
    return Domain(Ball{center, radius}, collar);
}

Domain::Kind Domain::kind() const noexcept
{
    switch (shape_.index()) {
    case 0:
        return Kind::interval;
    case 1:
        return Kind::rectangle;
    default:
        return Kind::ball;
    }
}

double Domain::inradius() const { return shape_inradius(shape_); }

Vec2 Domain::center() const
{
    switch (kind()) {
    case Kind::interval:
        return {0.5 * (as_interval().lo + as_interval().hi), 0.0};
    case Kind::rectangle:
        return 0.5 * (as_rectangle().lo + as_rectangle().hi);
    case Kind::ball:
        return as_ball().center;
    }
    return {};
}

bool Domain::contains(Vec2 x, double tol) const
{
    switch (kind()) {
    case Kind::interval:
        return x.x >= as_interval().lo - tol && x.x <= as_interval().hi + tol;
    case Kind::rectangle: {
        const auto& r = as_rectangle();
        return x.x >= r.lo.x - tol && x.x <= r.hi.x + tol && x.y >= r.lo.y - tol && x.y <= r.hi.y + tol;
    }
    case Kind::ball:
        return norm(x - as_ball().center) <= as_ball().radius + tol;
    }
    return false;
}

double Domain::distance(Vec2 x) const { return distance_profile(*this, x).d; }

bool Domain::in_subregion(Vec2 x, double r) const
{
    const Vec2 c = center();
    switch (kind()) {
    case Kind::interval:
        return std::abs(x.x - c.x) <= r * inradius() + 1e-12;
    case Kind::rectangle: {
        const auto& rect = as_rectangle();
        return std::abs(x.x - c.x) <= r * 0.5 * (rect.hi.x - rect.lo.x) + 1e-12
               && std::abs(x.y - c.y) <= r * 0.5 * (rect.hi.y - rect.lo.y) + 1e-12;
    }
    case Kind::ball:
        return norm(x - c) <= r * inradius() + 1e-12;
    }
    return false;
}

CapValue distance_cap(double t)
{
    if (t <= 1.0) return {t, 1.0, 0.0};
    if (t >= 2.0) return {1.5, 0.0, 0.0};
    const double s = t - 1.0;
    // S' = (1-s)^2 (1+2s) >= 0, S'' = 6 s (s - 1).
    return {1.0 + s - s * s * s + 0.5 * s * s * s * s, (1.0 - s) * (1.0 - s) * (1.0 + 2.0 * s), 6.0 * s * (s - 1.0)};
}

DistanceProfile distance_profile(const Domain& dom, Vec2 x)
{
    if (!dom.contains(x, 1e-12)) {
        throw OutsideDomain("point (" + std::to_string(x.x) + ", " + std::to_string(x.y) + ") is outside the domain");
    }
    DistanceProfile out;
    const int dim = dom.dim();
    out.hess = SymMatrix::zero(dim);
    switch (dom.kind()) {
    case Domain::Kind::interval: {
        const auto& iv = dom.as_interval();
        const double dl = x.x - iv.lo;
        const double dr = iv.hi - x.x;
        if (dl <= dr) {
            out.d = std::max(dl, 0.0);
            out.grad = {1.0, 0.0};
        } else {
            out.d = std::max(dr, 0.0);
            out.grad = {-1.0, 0.0};
        }
        break;
    }
    case Domain::Kind::rectangle: {
        const auto& r = dom.as_rectangle();
        const double cand[4] = {x.x - r.lo.x, r.hi.x - x.x, x.y - r.lo.y, r.hi.y - x.y};
        const Vec2 grads[4] = {{1.0, 0.0}, {-1.0, 0.0}, {0.0, 1.0}, {0.0, -1.0}};
        int best = 0;
        for (int k = 1; k < 4; ++k) {
            if (cand[k] < cand[best]) best = k;
        }
        out.d = std::max(cand[best], 0.0);
        out.grad = grads[best];
        break;
    }
    case Domain::Kind::ball: {
        const auto& b = dom.as_ball();
        const Vec2 rel = x - b.center;
        const double rho = norm(rel);
        out.d = std::max(b.radius - rho, 0.0);
        if (rho > 0.0) {
            const Vec2 n = (1.0 / rho) * rel;
            out.grad = -1.0 * n;
            out.hess = (-1.0 / rho) * (SymMatrix::identity(2) - SymMatrix::outer(n, 2));
        } else {
            // Centre: the distance is not differentiable; report the radial limit
            // along +x.
            out.grad = {-1.0, 0.0};
            out.hess = SymMatrix::zero(2);
        }
        break;
    }
    }
    out.in_collar = out.d < dom.collar_width();

    const double delta0 = dom.collar_width();
    const CapValue cap = distance_cap(out.d / delta0);
    out.extended.value = out.d <= delta0 ? out.d : delta0 * cap.s;
    out.extended.grad = cap.ds * out.grad;
    if (cap.ds == 0.0) {
        out.extended.hess = SymMatrix::zero(dim);
    } else {
        out.extended.hess = cap.ds * out.hess + (cap.dds / delta0) * SymMatrix::outer(out.grad, dim);
    }
    return out;
}

bool Grid::is_corner(std::size_t k) const
{
    if (kind_ != GridKind::tensor) return false;
    const int i = static_cast<int>(k) % nx_;
    const int j = static_cast<int>(k) / nx_;
    return (i == 0 || i == nx_ - 1) && (j == 0 || j == ny_ - 1);
}

namespace {

int divisions(double length, double h, const char* what)
{
    const double n = length / h;
    const double rounded = std::round(n);
    if (rounded < 2.0 || std::abs(n - rounded) > 1e-9 * std::max(1.0, n)) {
        throw InvalidArgument(std::string("grid spacing h = ") + std::to_string(h) + " must divide the " + what
                              + " " + std::to_string(length) + " into at least two cells");
    }
    return static_cast<int>(rounded);
}

} // namespace

Grid build_grid(const Domain& dom, double h)
{
    if (!(h > 0.0)) throw InvalidArgument("grid spacing must be positive");
    if (!(h < dom.collar_width())) {
        throw SpacingTooCoarse("grid spacing h = " + std::to_string(h) + " is not below the collar width "
                               + std::to_string(dom.collar_width()));
    }
    Grid g(dom);
    g.h_ = h;
    switch (dom.kind()) {
    case Domain::Kind::interval: {
        const auto& iv = dom.as_interval();
        const int n = divisions(iv.hi - iv.lo, h, "interval length");
        g.kind_ = GridKind::line;
        g.nx_ = n + 1;
        g.ny_ = 1;
        for (int i = 0; i <= n; ++i) {
            const double x = i == n ? iv.hi : iv.lo + i * h;
            g.nodes_.push_back({x, 0.0});
            const bool b = i == 0 || i == n;
            g.on_boundary_.push_back(b);
            (b ? g.boundary_ : g.interior_).push_back(static_cast<std::size_t>(i));
        }
        break;
    }
    case Domain::Kind::rectangle: {
        const auto& r = dom.as_rectangle();
        const int nx = divisions(r.hi.x - r.lo.x, h, "rectangle width");
        const int ny = divisions(r.hi.y - r.lo.y, h, "rectangle height");
        g.kind_ = GridKind::tensor;
        g.nx_ = nx + 1;
        g.ny_ = ny + 1;
        for (int j = 0; j <= ny; ++j) {
            for (int i = 0; i <= nx; ++i) {
                const double x = i == nx ? r.hi.x : r.lo.x + i * h;
                const double y = j == ny ? r.hi.y : r.lo.y + j * h;
                g.nodes_.push_back({x, y});
                const bool b = i == 0 || i == nx || j == 0 || j == ny;
                g.on_boundary_.push_back(b);
                (b ? g.boundary_ : g.interior_).push_back(g.index(i, j));
            }
        }
        break;
    }
    case Domain::Kind::ball: {
        const auto& b = dom.as_ball();
        const int n = divisions(b.radius, h, "ball radius");
        g.kind_ = GridKind::radial;
        g.nx_ = n + 1;
        g.ny_ = 1;
        for (int i = 0; i <= n; ++i) {
            const double r = i == n ? b.radius : i * h;
            g.nodes_.push_back({b.center.x + r, b.center.y});
            const bool bd = i == n;
            g.on_boundary_.push_back(bd);
            (bd ? g.boundary_ : g.interior_).push_back(static_cast<std::size_t>(i));
        }
        break;
    }
    }
    return g;
}

} // namespace visco
