#pragma once

// Closed-form scalar fields in the variables x and y.
//
// Grammar (whitespace insignificant):
//
//   expr    = term { ("+" | "-") term } ;
//   term    = unary { ("*" | "/") unary } ;
//   unary   = ("-" | "+") unary | power ;
//   power   = primary [ "^" unary ] ;                  (* right associative *)
//   primary = number | "pi" | "x" | "y"
//           | func1 "(" expr ")" | func2 "(" expr "," expr ")"
//           | "(" expr ")" ;
//   func1   = "abs" | "exp" | "log" | "sin" | "cos" | "sqrt" | "sign" ;
//   func2   = "min" | "max" ;
//   number  = digits [ "." digits ] [ ("e" | "E") [ "+" | "-" ] digits ] ;
//
// Unary minus binds tighter than "*" but looser than "^", so -x^2 = -(x^2).
// sign(0) = +1, which fixes the derivative convention of abs/min/max at kinks.

#include "visco/operator_core.hpp"

#include <memory>
#include <string>
#include <string_view>

namespace visco {

enum class Var { x = 0, y = 1 };

struct EvalFlags {
    /// Some abs/min/max/sign was evaluated exactly at its kink.
    bool kink_hit = false;
};

class Expr {
public:
    enum class Kind { constant, pi, variable, negate, add, sub, mul, div, pow, call1, call2 };
    enum class Func { abs_, exp_, log_, sin_, cos_, sqrt_, sign_, min_, max_ };

    Expr();

    static Expr constant(double v);
    static Expr pi();
    static Expr variable(Var v);
    static Expr negate(const Expr& a);
    static Expr add(const Expr& a, const Expr& b);
    static Expr sub(const Expr& a, const Expr& b);
    static Expr mul(const Expr& a, const Expr& b);
    static Expr div(const Expr& a, const Expr& b);
    static Expr pow(const Expr& a, const Expr& b);
    static Expr call(Func f, const Expr& a);
    static Expr call(Func f, const Expr& a, const Expr& b);

    Kind kind() const;
    double constant_value() const;
    Var variable() const;
    Func func() const;
    Expr lhs() const;
    Expr rhs() const;

    bool is_constant() const { return kind() == Kind::constant; }
    bool is_constant(double v) const { return is_constant() && constant_value() == v; }

    double eval(Vec2 at, EvalFlags* flags = nullptr) const;
    double eval(double x) const { return eval(Vec2{x, 0.0}); }

    /// Canonical printer; parse(str()) reproduces the same tree.
    std::string str() const;

    bool depends_on(Var v) const;
    /// Contains abs, min, max or sign.
    bool has_kinks() const;

    friend bool operator==(const Expr& a, const Expr& b);

    struct Node;

private:
    explicit Expr(std::shared_ptr<const Node> node);
    static Expr raw(Kind kind, const Expr& a, const Expr& b, Func f = Func::abs_);

    std::shared_ptr<const Node> node_;
};

Expr parse_expression(std::string_view src);

struct Derivative {
    Expr expr;
    /// The source contained abs/min/max: the derivative is only valid away from kinks.
    bool kink_warning = false;
};

Derivative differentiate(const Expr& e, Var var);

/// Values and exact derivatives of an expression up to second order.
struct ExprJet {
    Expr value;
    Expr dx, dy;
    Expr dxx, dxy, dyy;
    int dim = 1;
    bool kink_warning = false;
};

ExprJet expr_jet(const Expr& e, int dim);

std::string_view var_name(Var v);

} // namespace visco
