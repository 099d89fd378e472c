#include "doctest.h"

#include "visco/errors.hpp"
#include "visco/expr.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <string>
#include <vector>

using namespace visco;

TEST_CASE("evaluation with standard precedence")
{
    CHECK(parse_expression("1 - x^2").eval(0.5) == doctest::Approx(0.75));
    CHECK(parse_expression("sin(pi*x/2)").eval(1.0) == doctest::Approx(1.0));
    CHECK(parse_expression("-x^2").eval(3.0) == doctest::Approx(-9.0));
    CHECK(parse_expression("2^3^2").eval(0.0) == doctest::Approx(512.0));
    CHECK(parse_expression("2*-x").eval(1.5) == doctest::Approx(-3.0));
    CHECK(parse_expression("8/2/2").eval(0.0) == doctest::Approx(2.0));
    CHECK(parse_expression("x*y + max(x, y)").eval({2.0, 3.0}) == doctest::Approx(9.0));
    CHECK(parse_expression("1.5e-1 + 2E2").eval(0.0) == doctest::Approx(200.15));
    CHECK(parse_expression("sign(0)").eval(0.0) == 1.0);
}

TEST_CASE("parse errors carry a position")
{
    try {
        parse_expression("x +");
        FAIL("expected a parse error");
    } catch (const ParseError& e) {
        CHECK(e.position() == 3);
        CHECK_FALSE(e.expected().empty());
    }
    const std::vector<std::pair<std::string, std::size_t>> bad = {
        {"", 0}, {"(x", 2}, {"foo(x)", 0}, {"min(x)", 5}, {"x $ 2", 2}, {"x y", 2}, {"sin x", 4}};
    for (const auto& [src, pos] : bad) {
        CAPTURE(src);
        try {
            parse_expression(src);
            FAIL("expected a parse error");
        } catch (const ParseError& e) {
            CHECK(e.position() == pos);
        }
    }
}

TEST_CASE("derivatives of simple expressions")
{
    const auto d = differentiate(parse_expression("1 - x^2"), Var::x);
    CHECK(d.expr.eval(0.5) == doctest::Approx(-1.0));
    CHECK_FALSE(d.kink_warning);
    CHECK(d.expr == parse_expression("-2*x"));

    const auto c = differentiate(parse_expression("cos(pi*x/2)"), Var::x);
    CHECK(c.expr.eval(0.5) == doctest::Approx(-(std::numbers::pi / 2.0) * std::sin(std::numbers::pi / 4.0)));
    CHECK(c.expr.eval(0.5) == doctest::Approx(-1.110721).epsilon(1e-6));

    const auto a = differentiate(parse_expression("abs(x)"), Var::x);
    CHECK(a.kink_warning);
    CHECK(a.expr.eval(0.3) == doctest::Approx(1.0));
    CHECK(a.expr.eval(-0.3) == doctest::Approx(-1.0));
    // Right-continuous convention at the kink.
    CHECK(a.expr.eval(0.0) == doctest::Approx(1.0));

    CHECK(differentiate(parse_expression("y^2 + 3"), Var::x).expr.is_constant(0.0));
}

TEST_CASE("kink hits are flagged during evaluation")
{
    const Expr e = parse_expression("abs(x) + max(x, 1)");
    EvalFlags flags;
    e.eval({0.0, 0.0}, &flags);
    CHECK(flags.kink_hit);
    flags = {};
    e.eval({0.5, 0.0}, &flags);
    CHECK_FALSE(flags.kink_hit);
    flags = {};
    e.eval({1.0, 0.0}, &flags);
    CHECK(flags.kink_hit);
}

namespace {

// Random smooth expressions in x and y; log/sqrt act on positive arguments only.
std::string random_smooth(std::mt19937_64& rng, int depth)
{
    std::uniform_int_distribution<int> pick(0, depth <= 0 ? 2 : 10);
    std::uniform_real_distribution<double> coef(0.5, 2.0);
    const auto c = std::to_string(coef(rng));
    switch (pick(rng)) {
    case 0:
        return "x";
    case 1:
        return "y";
    case 2:
        return c;
    case 3:
        return "(" + random_smooth(rng, depth - 1) + " + " + random_smooth(rng, depth - 1) + ")";
    case 4:
        return "(" + random_smooth(rng, depth - 1) + " - " + random_smooth(rng, depth - 1) + ")";
    case 5:
        return "(" + random_smooth(rng, depth - 1) + " * " + random_smooth(rng, depth - 1) + ")";
    case 6:
        return "(" + random_smooth(rng, depth - 1) + ") / (" + c + " + (" + random_smooth(rng, depth - 1) + ")^2)";
    case 7:
        return "sin(" + random_smooth(rng, depth - 1) + ")";
    case 8:
        return "exp(" + c + " * cos(" + random_smooth(rng, depth - 1) + "))";
    case 9:
        return "log(" + c + " + (" + random_smooth(rng, depth - 1) + ")^2)";
    default:
        return "sqrt(" + c + " + (" + random_smooth(rng, depth - 1) + ")^2)^" + c;
    }
}

} // namespace

TEST_CASE("symbolic derivatives agree with central differences")
{
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> pt(-1.0, 1.0);
    const double h = 1e-5;
    for (int k = 0; k < 100; ++k) {
        const std::string src = random_smooth(rng, 3);
        CAPTURE(src);
        const Expr e = parse_expression(src);
        const Vec2 x{pt(rng), pt(rng)};
        for (Var v : {Var::x, Var::y}) {
            const Expr d = differentiate(e, v).expr;
            const Vec2 step = v == Var::x ? Vec2{h, 0.0} : Vec2{0.0, h};
            const double fd = (e.eval(x + step) - e.eval(x - step)) / (2.0 * h);
            CHECK(std::abs(d.eval(x) - fd) <= 1e-6 * (1.0 + std::abs(e.eval(x))));
        }
    }
}

TEST_CASE("printer round trip")
{
    std::mt19937_64 rng(99);
    const std::vector<std::string> fixed = {"1 - x^2",        "-x^2",           "(-x)^2",     "2^-x",
                                            "x - (y - 1)",    "x / (y * 2)",    "-(x + y)",   "min(x, -y)",
                                            "sign(x)*abs(y)", "-2*x",           "x^(1/2)",    "(x^2)^3",
                                            "pi*x",           "exp(-x^2/0.1)",  "0.1 + 1e-7", "-(-x)"};
    std::vector<std::string> all = fixed;
    for (int k = 0; k < 200; ++k) all.push_back(random_smooth(rng, 4));
    for (const auto& src : all) {
        CAPTURE(src);
        const Expr e = parse_expression(src);
        const std::string printed = e.str();
        CAPTURE(printed);
        CHECK(parse_expression(printed) == e);
        CHECK(parse_expression(printed).str() == printed);
    }
}

TEST_CASE("second-order jet")
{
    const ExprJet j = expr_jet(parse_expression("x^2*y + sin(y)"), 2);
    const Vec2 p{0.3, -0.4};
    CHECK(j.dx.eval(p) == doctest::Approx(2.0 * 0.3 * -0.4));
    CHECK(j.dy.eval(p) == doctest::Approx(0.09 + std::cos(-0.4)));
    CHECK(j.dxx.eval(p) == doctest::Approx(-0.8));
    CHECK(j.dxy.eval(p) == doctest::Approx(0.6));
    CHECK(j.dyy.eval(p) == doctest::Approx(-std::sin(-0.4)));
    CHECK_FALSE(j.kink_warning);
    CHECK(expr_jet(parse_expression("abs(x)^3"), 1).kink_warning);
}

TEST_CASE("structural queries")
{
    const Expr e = parse_expression("x + 2*y");
    CHECK(e.depends_on(Var::x));
    CHECK(e.depends_on(Var::y));
    CHECK_FALSE(parse_expression("cos(x)").depends_on(Var::y));
    CHECK(parse_expression("max(x, 0)").has_kinks());
    CHECK_FALSE(parse_expression("exp(x)").has_kinks());
    CHECK(parse_expression("3*2").is_constant(6.0));
}
