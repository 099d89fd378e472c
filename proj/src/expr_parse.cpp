#include "visco/errors.hpp"
#include "visco/expr.hpp"

#include <cctype>
#include <charconv>
#include <optional>
#include <string>
#include <vector>

namespace visco {

namespace {

enum class Tok { number, ident, plus, minus, star, slash, caret, lparen, rparen, comma, end };

struct Token {
    Tok kind = Tok::end;
    std::size_t pos = 0;
    std::string_view text;
    double number = 0.0;
};

std::string describe(const Token& t)
{
    switch (t.kind) {
    case Tok::end:
        return "end of input";
    case Tok::number:
    case Tok::ident:
        return "'" + std::string(t.text) + "'";
    default:
        return "'" + std::string(t.text) + "'";
    }
}

const std::vector<std::string> kOperandStart{"number", "identifier", "'('", "'-'", "'+'"};

std::vector<Token> tokenize(std::string_view src)
{
    std::vector<Token> out;
    std::size_t i = 0;
    while (i < src.size()) {
        const char c = src[i];
        if (std::isspace(static_cast<unsigned char>(c))) {
            ++i;
            continue;
        }
        Token t;
        t.pos = i;
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
            std::size_t j = i;
            while (j < src.size() && (std::isdigit(static_cast<unsigned char>(src[j])) || src[j] == '.')) ++j;
            if (j < src.size() && (src[j] == 'e' || src[j] == 'E')) {
                std::size_t k = j + 1;
                if (k < src.size() && (src[k] == '+' || src[k] == '-')) ++k;
                if (k < src.size() && std::isdigit(static_cast<unsigned char>(src[k]))) {
                    while (k < src.size() && std::isdigit(static_cast<unsigned char>(src[k]))) ++k;
                    j = k;
                }
            }
            t.kind = Tok::number;
            t.text = src.substr(i, j - i);
            auto [ptr, ec] = std::from_chars(src.data() + i, src.data() + j, t.number);
            if (ec != std::errc() || ptr != src.data() + j) {
                throw ParseError(i, {"number"}, "malformed number '" + std::string(t.text) + "'");
            }
            i = j;
        } else if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            std::size_t j = i;
            while (j < src.size() && (std::isalnum(static_cast<unsigned char>(src[j])) || src[j] == '_')) ++j;
            t.kind = Tok::ident;
            t.text = src.substr(i, j - i);
            i = j;
        } else {
            switch (c) {
            case '+':
                t.kind = Tok::plus;
                break;
            case '-':
                t.kind = Tok::minus;
                break;
            case '*':
                t.kind = Tok::star;
                break;
            case '/':
                t.kind = Tok::slash;
                break;
            case '^':
                t.kind = Tok::caret;
                break;
            case '(':
                t.kind = Tok::lparen;
                break;
            case ')':
                t.kind = Tok::rparen;
                break;
            case ',':
                t.kind = Tok::comma;
                break;
            default:
                throw ParseError(i, kOperandStart, std::string("unexpected character '") + c + "'");
            }
            t.text = src.substr(i, 1);
            ++i;
        }
        out.push_back(t);
    }
    Token end;
    end.kind = Tok::end;
    end.pos = src.size();
    out.push_back(end);
    return out;
}

std::optional<Expr::Func> lookup_function(std::string_view name)
{
    using F = Expr::Func;
    if (name == "abs") return F::abs_;
    if (name == "exp") return F::exp_;
    if (name == "log") return F::log_;
    if (name == "sin") return F::sin_;
    if (name == "cos") return F::cos_;
    if (name == "sqrt") return F::sqrt_;
    if (name == "sign") return F::sign_;
    if (name == "min") return F::min_;
    if (name == "max") return F::max_;
    return std::nullopt;
}

class Parser {
public:
    explicit Parser(std::string_view src)
        : tokens_(tokenize(src))
    {
    }

    Expr parse_all()
    {
        Expr e = expr();
        if (peek().kind != Tok::end) {
            throw ParseError(peek().pos, {"operator", "end of input"}, "unexpected " + describe(peek()));
        }
        return e;
    }

private:
    const Token& peek() const { return tokens_[cur_]; }
    const Token& take() { return tokens_[cur_++]; }

    void expect(Tok kind, const std::string& what)
    {
        if (peek().kind != kind) throw ParseError(peek().pos, {what}, "unexpected " + describe(peek()));
        ++cur_;
    }

    Expr expr()
    {
        Expr lhs = term();
        while (peek().kind == Tok::plus || peek().kind == Tok::minus) {
            const bool plus = take().kind == Tok::plus;
            Expr rhs = term();
            lhs = plus ? Expr::add(lhs, rhs) : Expr::sub(lhs, rhs);
        }
        return lhs;
    }

    Expr term()
    {
        Expr lhs = unary();
        while (peek().kind == Tok::star || peek().kind == Tok::slash) {
            const bool times = take().kind == Tok::star;
            Expr rhs = unary();
            lhs = times ? Expr::mul(lhs, rhs) : Expr::div(lhs, rhs);
        }
        return lhs;
    }

    Expr unary()
    {
        if (peek().kind == Tok::minus) {
            take();
            return Expr::negate(unary());
        }
        if (peek().kind == Tok::plus) {
            take();
            return unary();
        }
        return power();
    }

    Expr power()
    {
        Expr base = primary();
        if (peek().kind == Tok::caret) {
            take();
            return Expr::pow(base, unary());
        }
        return base;
    }

    Expr primary()
    {
        const Token& t = peek();
        switch (t.kind) {
        case Tok::number:
            take();
            return Expr::constant(t.number);
        case Tok::lparen: {
            take();
            Expr inner = expr();
            expect(Tok::rparen, "')'");
            return inner;
        }
        case Tok::ident: {
            take();
            if (t.text == "pi") return Expr::pi();
            if (t.text == "x") return Expr::variable(Var::x);
            if (t.text == "y") return Expr::variable(Var::y);
            const auto f = lookup_function(t.text);
            if (!f) {
                throw ParseError(t.pos, {"x", "y", "pi", "function name"},
                                 "unknown identifier '" + std::string(t.text) + "'");
            }
            expect(Tok::lparen, "'('");
            Expr a = expr();
            if (*f == Expr::Func::min_ || *f == Expr::Func::max_) {
                expect(Tok::comma, "','");
                Expr b = expr();
                expect(Tok::rparen, "')'");
                return Expr::call(*f, a, b);
            }
            expect(Tok::rparen, "')'");
            return Expr::call(*f, a);
        }
        default:
            throw ParseError(t.pos, kOperandStart, "unexpected " + describe(t));
        }
    }

    std::vector<Token> tokens_;
    std::size_t cur_ = 0;
};

} // namespace

Expr parse_expression(std::string_view src)
{
    Parser p(src);
    return p.parse_all();
}

} // namespace visco
