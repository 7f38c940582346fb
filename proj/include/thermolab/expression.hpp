#pragma once

#include <cctype>
#include <cmath>
#include <complex>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "thermolab/spectral.hpp"

// Expressions for scenario member fields.
//
//   expr    := term (('+' | '-') term)*
//   term    := unary (('*' | '/') unary)*
//   unary   := ('+' | '-') unary | power
//   power   := primary ('^' unary)?
//   primary := number | name | name '(' expr (',' expr)* ')' | '(' expr ')'
//
// Names: x, y, z (= x + i y), phi (fibre angle, bundle fields only), pi, e, i.
// Functions: sin, cos, exp, log, sqrt, pow(a, b). Arithmetic is complex.

namespace thermolab::expr {

class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& msg, std::size_t column)
        : std::runtime_error(msg + " at column " + std::to_string(column)), column_(column) {}
    std::size_t column() const { return column_; }

private:
    std::size_t column_;
};

struct Point {
    double x = 0.0, y = 0.0, phi = 0.0;
};

class Expression {
public:
    cplx operator()(const Point& p) const { return eval(*root_, p); }
    cplx operator()(double x, double y, double phi = 0.0) const { return eval(*root_, {x, y, phi}); }
    const std::string& source() const { return source_; }
    bool uses_phi() const { return uses_phi_; }

    friend Expression parse(const std::string& text);

private:
    enum class Op { Const, X, Y, Z, Phi, Add, Sub, Mul, Div, Neg, Pow, Sin, Cos, Exp, Log, Sqrt };
    struct Node {
        Op op;
        cplx value{};
        std::vector<std::unique_ptr<Node>> args;
    };

    static cplx eval(const Node& n, const Point& p) {
        auto a = [&](int k) { return eval(*n.args[k], p); };
        switch (n.op) {
            case Op::Const: return n.value;
            case Op::X: return p.x;
            case Op::Y: return p.y;
            case Op::Z: return cplx(p.x, p.y);
            case Op::Phi: return p.phi;
            case Op::Add: return a(0) + a(1);
            case Op::Sub: return a(0) - a(1);
            case Op::Mul: return a(0) * a(1);
            case Op::Div: return a(0) / a(1);
            case Op::Neg: return -a(0);
            case Op::Pow: {
                const cplx b = a(0), e = a(1);
                // keep real powers of real bases real, including negative bases with integer exponents
                if (b.imag() == 0.0 && e.imag() == 0.0 && (b.real() >= 0.0 || e.real() == std::round(e.real())))
                    return std::pow(b.real(), e.real());
                return std::pow(b, e);
            }
            case Op::Sin: return std::sin(a(0));
            case Op::Cos: return std::cos(a(0));
            case Op::Exp: return std::exp(a(0));
            case Op::Log: return std::log(a(0));
            case Op::Sqrt: return std::sqrt(a(0));
        }
        return 0.0;
    }

    class Parser {
    public:
        explicit Parser(const std::string& s) : s_(s) {}

        std::unique_ptr<Node> parse_all(bool& uses_phi) {
            auto n = expr();
            skip();
            if (pos_ != s_.size()) fail(std::string("unexpected '") + s_[pos_] + "'");
            uses_phi = uses_phi_;
            return n;
        }

    private:
        [[noreturn]] void fail(const std::string& msg) const { throw ParseError(msg, pos_ + 1); }

        void skip() {
            while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
        }

        bool accept(char c) {
            skip();
            if (pos_ < s_.size() && s_[pos_] == c) {
                ++pos_;
                return true;
            }
            return false;
        }

        static std::unique_ptr<Node> make(Op op, std::unique_ptr<Node> a = nullptr, std::unique_ptr<Node> b = nullptr) {
            auto n = std::make_unique<Node>();
            n->op = op;
            if (a) n->args.push_back(std::move(a));
            if (b) n->args.push_back(std::move(b));
            return n;
        }

        static std::unique_ptr<Node> constant(cplx v) {
            auto n = make(Op::Const);
            n->value = v;
            return n;
        }

        std::unique_ptr<Node> expr() {
            auto lhs = term();
            for (;;) {
                if (accept('+')) lhs = make(Op::Add, std::move(lhs), term());
                else if (accept('-')) lhs = make(Op::Sub, std::move(lhs), term());
                else return lhs;
            }
        }

        std::unique_ptr<Node> term() {
            auto lhs = unary();
            for (;;) {
                if (accept('*')) lhs = make(Op::Mul, std::move(lhs), unary());
                else if (accept('/')) lhs = make(Op::Div, std::move(lhs), unary());
                else return lhs;
            }
        }

        std::unique_ptr<Node> unary() {
            if (accept('-')) return make(Op::Neg, unary());
            if (accept('+')) return unary();
            return power();
        }

        std::unique_ptr<Node> power() {
            auto base = primary();
            if (accept('^')) return make(Op::Pow, std::move(base), unary());
            return base;
        }

        std::unique_ptr<Node> primary() {
            skip();
            if (pos_ >= s_.size()) fail("unexpected end of expression");
            const char c = s_[pos_];
            if (c == '(') {
                ++pos_;
                auto n = expr();
                if (!accept(')')) fail("expected ')'");
                return n;
            }
            if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
            if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return name();
            fail(std::string("unexpected '") + c + "'");
        }

        std::unique_ptr<Node> number() {
            const std::size_t start = pos_;
            std::size_t used = 0;
            double v = 0.0;
            try {
                v = std::stod(s_.substr(pos_), &used);
            } catch (const std::exception&) {
                fail("malformed number");
            }
            pos_ = start + used;
            return constant(v);
        }

        std::unique_ptr<Node> name() {
            const std::size_t start = pos_;
            while (pos_ < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_')) ++pos_;
            const std::string id = s_.substr(start, pos_ - start);
            skip();
            if (pos_ < s_.size() && s_[pos_] == '(') {
                ++pos_;
                std::vector<std::unique_ptr<Node>> args;
                args.push_back(expr());
                while (accept(',')) args.push_back(expr());
                if (!accept(')')) fail("expected ')' after arguments of " + id);
                auto want = [&](std::size_t n) {
                    if (args.size() != n) {
                        pos_ = start;
                        fail(id + " takes " + std::to_string(n) + " argument(s)");
                    }
                };
                Op op;
                if (id == "sin") op = Op::Sin;
                else if (id == "cos") op = Op::Cos;
                else if (id == "exp") op = Op::Exp;
                else if (id == "log") op = Op::Log;
                else if (id == "sqrt") op = Op::Sqrt;
                else if (id == "pow") op = Op::Pow;
                else {
                    pos_ = start;
                    fail("unknown function '" + id + "'");
                }
                want(op == Op::Pow ? 2 : 1);
                auto n = make(op);
                n->args = std::move(args);
                return n;
            }
            if (id == "x") return make(Op::X);
            if (id == "y") return make(Op::Y);
            if (id == "z") return make(Op::Z);
            if (id == "phi") {
                uses_phi_ = true;
                return make(Op::Phi);
            }
            if (id == "pi") return constant(std::numbers::pi);
            if (id == "e") return constant(std::numbers::e);
            if (id == "i") return constant(cplx(0.0, 1.0));
            pos_ = start;
            fail("unknown name '" + id + "'");
        }

        const std::string& s_;
        std::size_t pos_ = 0;
        bool uses_phi_ = false;
    };

    std::shared_ptr<const Node> root_;
    std::string source_;
    bool uses_phi_ = false;
};

inline Expression parse(const std::string& text) {
    Expression e;
    e.source_ = text;
    Expression::Parser p(e.source_);
    bool phi = false;
    e.root_ = p.parse_all(phi);
    e.uses_phi_ = phi;
    return e;
}

}  // namespace thermolab::expr
