#include "visco/expr.hpp"

#include "visco/errors.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <numbers>
#include <system_error>

namespace visco {

struct Expr::Node {
    Kind kind = Kind::constant;
    double value = 0.0;
    Var var = Var::x;
    Func func = Func::abs_;
    std::shared_ptr<const Node> a;
    std::shared_ptr<const Node> b;
};

namespace {

const std::shared_ptr<const Expr::Node>& zero_node()
{
    static const std::shared_ptr<const Expr::Node> zero = std::make_shared<const Expr::Node>();
    return zero;
}

} // namespace

Expr::Expr()
    : node_(zero_node())
{
}

Expr::Expr(std::shared_ptr<const Node> node)
    : node_(std::move(node))
{
}

Expr Expr::raw(Kind kind, const Expr& a, const Expr& b, Func f)
{
    auto n = std::make_shared<Node>();
    n->kind = kind;
    n->a = a.node_;
    n->b = b.node_;
    n->func = f;
    return Expr(std::move(n));
}

Expr::Kind Expr::kind() const { return node_->kind; }
double Expr::constant_value() const { return node_->value; }
Var Expr::variable() const { return node_->var; }
Expr::Func Expr::func() const { return node_->func; }

Expr Expr::lhs() const { return node_->a ? Expr(node_->a) : Expr(); }

Expr Expr::rhs() const { return node_->b ? Expr(node_->b) : Expr(); }

Expr Expr::constant(double v)
{
    auto n = std::make_shared<Node>();
    n->kind = Kind::constant;
    n->value = v;
    return Expr(std::move(n));
}

Expr Expr::pi()
{
    auto n = std::make_shared<Node>();
    n->kind = Kind::pi;
    return Expr(std::move(n));
}

Expr Expr::variable(Var v)
{
    auto n = std::make_shared<Node>();
    n->kind = Kind::variable;
    n->var = v;
    return Expr(std::move(n));
}

Expr Expr::negate(const Expr& a)
{
    if (a.is_constant()) return constant(-a.constant_value());
    if (a.kind() == Kind::negate) return a.lhs();
    if (a.kind() == Kind::mul && a.lhs().is_constant()) return mul(constant(-a.lhs().constant_value()), a.rhs());
    return raw(Kind::negate, a, Expr());
}

Expr Expr::add(const Expr& a, const Expr& b)
{
    if (a.is_constant() && b.is_constant()) return constant(a.constant_value() + b.constant_value());
    if (a.is_constant(0.0)) return b;
    if (b.is_constant(0.0)) return a;
    return raw(Kind::add, a, b);
}

Expr Expr::sub(const Expr& a, const Expr& b)
{
    if (a.is_constant() && b.is_constant()) return constant(a.constant_value() - b.constant_value());
    if (b.is_constant(0.0)) return a;
    if (a.is_constant(0.0)) return negate(b);
    return raw(Kind::sub, a, b);
}

Expr Expr::mul(const Expr& a, const Expr& b)
{
    if (a.is_constant() && b.is_constant()) return constant(a.constant_value() * b.constant_value());
    if (a.is_constant(0.0) || b.is_constant(0.0)) return constant(0.0);
    if (a.is_constant(1.0)) return b;
    if (b.is_constant(1.0)) return a;
    if (a.is_constant(-1.0)) return negate(b);
    if (b.is_constant(-1.0)) return negate(a);
    return raw(Kind::mul, a, b);
}

Expr Expr::div(const Expr& a, const Expr& b)
{
    if (a.is_constant() && b.is_constant() && b.constant_value() != 0.0)
        return constant(a.constant_value() / b.constant_value());
    if (a.is_constant(0.0) && !b.is_constant(0.0)) return constant(0.0);
    if (b.is_constant(1.0)) return a;
    return raw(Kind::div, a, b);
}

Expr Expr::pow(const Expr& a, const Expr& b)
{
    if (b.is_constant(0.0)) return constant(1.0);
    if (b.is_constant(1.0)) return a;
    if (a.is_constant() && b.is_constant()) {
        const double v = std::pow(a.constant_value(), b.constant_value());
        if (std::isfinite(v)) return constant(v);
    }
    return raw(Kind::pow, a, b);
}

Expr Expr::call(Func f, const Expr& a)
{
    if (f == Func::min_ || f == Func::max_) throw InvalidArgument("min/max take two arguments");
    Expr e = raw(Kind::call1, a, Expr(), f);
    if (a.is_constant()) {
        const double v = e.eval(Vec2{});
        if (std::isfinite(v)) return constant(v);
    }
    return e;
}

Expr Expr::call(Func f, const Expr& a, const Expr& b)
{
    if (f != Func::min_ && f != Func::max_) throw InvalidArgument("only min/max take two arguments");
    if (a.is_constant() && b.is_constant()) {
        return constant(f == Func::min_ ? std::min(a.constant_value(), b.constant_value())
                                        : std::max(a.constant_value(), b.constant_value()));
    }
    return raw(Kind::call2, a, b, f);
}

namespace {

std::string_view func_name(Expr::Func f)
{
    switch (f) {
    case Expr::Func::abs_:
        return "abs";
    case Expr::Func::exp_:
        return "exp";
    case Expr::Func::log_:
        return "log";
    case Expr::Func::sin_:
        return "sin";
    case Expr::Func::cos_:
        return "cos";
    case Expr::Func::sqrt_:
        return "sqrt";
    case Expr::Func::sign_:
        return "sign";
    case Expr::Func::min_:
        return "min";
    case Expr::Func::max_:
        return "max";
    }
    return "?";
}

double eval_node(const Expr::Node& n, Vec2 at, EvalFlags* flags)
{
    using K = Expr::Kind;
    using F = Expr::Func;
    switch (n.kind) {
    case K::constant:
        return n.value;
    case K::pi:
        return std::numbers::pi;
    case K::variable:
        return n.var == Var::x ? at.x : at.y;
    case K::negate:
        return -eval_node(*n.a, at, flags);
    case K::add:
        return eval_node(*n.a, at, flags) + eval_node(*n.b, at, flags);
    case K::sub:
        return eval_node(*n.a, at, flags) - eval_node(*n.b, at, flags);
    case K::mul:
        return eval_node(*n.a, at, flags) * eval_node(*n.b, at, flags);
    case K::div:
        return eval_node(*n.a, at, flags) / eval_node(*n.b, at, flags);
    case K::pow:
        return std::pow(eval_node(*n.a, at, flags), eval_node(*n.b, at, flags));
    case K::call1: {
        const double v = eval_node(*n.a, at, flags);
        switch (n.func) {
        case F::abs_:
            if (v == 0.0 && flags) flags->kink_hit = true;
            return std::abs(v);
        case F::sign_:
            if (v == 0.0 && flags) flags->kink_hit = true;
            return v >= 0.0 ? 1.0 : -1.0;
        case F::exp_:
            return std::exp(v);
        case F::log_:
            return std::log(v);
        case F::sin_:
            return std::sin(v);
        case F::cos_:
            return std::cos(v);
        case F::sqrt_:
            return std::sqrt(v);
        default:
            break;
        }
        break;
    }
    case K::call2: {
        const double u = eval_node(*n.a, at, flags);
        const double v = eval_node(*n.b, at, flags);
        if (u == v && flags) flags->kink_hit = true;
        return n.func == F::min_ ? std::min(u, v) : std::max(u, v);
    }
    }
    return std::nan("");
}

// Binding strength used by the printer; mirrors the grammar levels.
int precedence(const Expr& e)
{
    using K = Expr::Kind;
    switch (e.kind()) {
    case K::add:
    case K::sub:
        return 1;
    case K::mul:
    case K::div:
        return 2;
    case K::negate:
        return 3;
    case K::pow:
        return 4;
    case K::constant:
        return e.constant_value() < 0.0 || std::signbit(e.constant_value()) ? 3 : 5;
    default:
        return 5;
    }
}

std::string format_number(double v)
{
    std::array<char, 64> buf{};
    auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    if (ec != std::errc()) return "nan";
    return std::string(buf.data(), ptr);
}

void print_node(const Expr& e, std::string& out);

void print_child(const Expr& child, int min_prec, bool right_operand, std::string& out)
{
    const int p = precedence(child);
    const bool wrap = p < min_prec || (right_operand && p == 3);
    if (wrap) out += '(';
    print_node(child, out);
    if (wrap) out += ')';
}

void print_node(const Expr& e, std::string& out)
{
    using K = Expr::Kind;
    switch (e.kind()) {
    case K::constant:
        out += format_number(e.constant_value());
        return;
    case K::pi:
        out += "pi";
        return;
    case K::variable:
        out += var_name(e.variable());
        return;
    case K::negate:
        out += '-';
        print_child(e.lhs(), 3, false, out);
        return;
    case K::add:
    case K::sub:
        print_child(e.lhs(), 1, false, out);
        out += e.kind() == K::add ? " + " : " - ";
        print_child(e.rhs(), 2, true, out);
        return;
    case K::mul:
    case K::div:
        print_child(e.lhs(), 2, false, out);
        out += e.kind() == K::mul ? '*' : '/';
        print_child(e.rhs(), 3, true, out);
        return;
    case K::pow:
        print_child(e.lhs(), 5, false, out);
        out += '^';
        print_child(e.rhs(), 3, true, out);
        return;
    case K::call1:
        out += func_name(e.func());
        out += '(';
        print_node(e.lhs(), out);
        out += ')';
        return;
    case K::call2:
        out += func_name(e.func());
        out += '(';
        print_node(e.lhs(), out);
        out += ", ";
        print_node(e.rhs(), out);
        out += ')';
        return;
    }
}

bool node_equal(const Expr& a, const Expr& b)
{
    using K = Expr::Kind;
    if (a.kind() != b.kind()) return false;
    switch (a.kind()) {
    case K::constant:
        return a.constant_value() == b.constant_value();
    case K::pi:
        return true;
    case K::variable:
        return a.variable() == b.variable();
    case K::negate:
        return node_equal(a.lhs(), b.lhs());
    case K::call1:
        return a.func() == b.func() && node_equal(a.lhs(), b.lhs());
    case K::call2:
        return a.func() == b.func() && node_equal(a.lhs(), b.lhs()) && node_equal(a.rhs(), b.rhs());
    default:
        return node_equal(a.lhs(), b.lhs()) && node_equal(a.rhs(), b.rhs());
    }
}

} // namespace

double Expr::eval(Vec2 at, EvalFlags* flags) const { return eval_node(*node_, at, flags); }

std::string Expr::str() const
{
    std::string out;
    print_node(*this, out);
    return out;
}

bool Expr::depends_on(Var v) const
{
    switch (kind()) {
    case Kind::constant:
    case Kind::pi:
        return false;
    case Kind::variable:
        return variable() == v;
    case Kind::negate:
    case Kind::call1:
        return lhs().depends_on(v);
    default:
        return lhs().depends_on(v) || rhs().depends_on(v);
    }
}

bool Expr::has_kinks() const
{
    switch (kind()) {
    case Kind::constant:
    case Kind::pi:
    case Kind::variable:
        return false;
    case Kind::negate:
        return lhs().has_kinks();
    case Kind::call1:
        return func() == Func::abs_ || func() == Func::sign_ || lhs().has_kinks();
    case Kind::call2:
        return true;
    default:
        return lhs().has_kinks() || rhs().has_kinks();
    }
}

bool operator==(const Expr& a, const Expr& b) { return node_equal(a, b); }

std::string_view var_name(Var v) { return v == Var::x ? "x" : "y"; }

namespace {

Expr d(const Expr& e, Var var);

Expr half(const Expr& e) { return Expr::div(e, Expr::constant(2.0)); }

Expr d(const Expr& e, Var var)
{
    using K = Expr::Kind;
    using F = Expr::Func;
    if (!e.depends_on(var)) return Expr::constant(0.0);
    const Expr zero = Expr::constant(0.0);
    switch (e.kind()) {
    case K::variable:
        return Expr::constant(e.variable() == var ? 1.0 : 0.0);
    case K::negate:
        return Expr::negate(d(e.lhs(), var));
    case K::add:
        return Expr::add(d(e.lhs(), var), d(e.rhs(), var));
    case K::sub:
        return Expr::sub(d(e.lhs(), var), d(e.rhs(), var));
    case K::mul:
        return Expr::add(Expr::mul(d(e.lhs(), var), e.rhs()), Expr::mul(e.lhs(), d(e.rhs(), var)));
    case K::div: {
        const Expr& num = e.lhs();
        const Expr& den = e.rhs();
        if (!den.depends_on(var)) return Expr::div(d(num, var), den);
        return Expr::div(Expr::sub(Expr::mul(d(num, var), den), Expr::mul(num, d(den, var))),
                         Expr::pow(den, Expr::constant(2.0)));
    }
    case K::pow: {
        const Expr& base = e.lhs();
        const Expr& ex = e.rhs();
        if (!ex.depends_on(var)) {
            return Expr::mul(Expr::mul(ex, Expr::pow(base, Expr::sub(ex, Expr::constant(1.0)))), d(base, var));
        }
        const Expr log_base = Expr::call(F::log_, base);
        if (!base.depends_on(var)) return Expr::mul(Expr::mul(e, log_base), d(ex, var));
        return Expr::mul(e, Expr::add(Expr::mul(d(ex, var), log_base),
                                      Expr::div(Expr::mul(ex, d(base, var)), base)));
    }
    case K::call1: {
        const Expr& a = e.lhs();
        const Expr da = d(a, var);
        switch (e.func()) {
        case F::abs_:
            return Expr::mul(Expr::call(F::sign_, a), da);
        case F::sign_:
            return zero;
        case F::exp_:
            return Expr::mul(e, da);
        case F::log_:
            return Expr::div(da, a);
        case F::sin_:
            return Expr::mul(Expr::call(F::cos_, a), da);
        case F::cos_:
            return Expr::negate(Expr::mul(Expr::call(F::sin_, a), da));
        case F::sqrt_:
            return Expr::div(da, Expr::mul(Expr::constant(2.0), e));
        default:
            break;
        }
        break;
    }
    case K::call2: {
        // min(a,b) = (a+b)/2 - |a-b|/2, max(a,b) = (a+b)/2 + |a-b|/2.
        const Expr& a = e.lhs();
        const Expr& b = e.rhs();
        const Expr da = d(a, var);
        const Expr db = d(b, var);
        const Expr mean = half(Expr::add(da, db));
        const Expr jump = Expr::mul(Expr::call(F::sign_, Expr::sub(a, b)), half(Expr::sub(da, db)));
        return e.func() == F::min_ ? Expr::sub(mean, jump) : Expr::add(mean, jump);
    }
    default:
        break;
    }
    return zero;
}

} // namespace

Derivative differentiate(const Expr& e, Var var) { return {d(e, var), e.has_kinks()}; }

ExprJet expr_jet(const Expr& e, int dim)
{
    ExprJet j;
    j.dim = dim;
    j.value = e;
    j.kink_warning = e.has_kinks();
    j.dx = d(e, Var::x);
    j.dxx = d(j.dx, Var::x);
    if (dim >= 2) {
        j.dy = d(e, Var::y);
        j.dxy = d(j.dx, Var::y);
        j.dyy = d(j.dy, Var::y);
    }
    return j;
}

} // namespace visco
