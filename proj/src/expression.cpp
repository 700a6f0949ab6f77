#include "cuspfem/expression.hpp"

#include <cctype>
#include <cmath>
#include <numbers>
#include <vector>

#include <fmt/format.h>

#include "cuspfem/errors.hpp"

namespace cuspfem {

enum class Op { Const, Var, Add, Sub, Mul, Div, Pow, Neg, Sin, Cos, Exp, Sqrt, Log };
enum class Var { X1, X2, Phi, DPhi, D2Phi, N1, N2 };

struct Expr::Node {
    Op op;
    double value = 0;
    Var var = Var::X1;
    std::shared_ptr<const Node> a;
    std::shared_ptr<const Node> b;
};

namespace {

using NodePtr = std::shared_ptr<const Expr::Node>;

NodePtr make_const(double v) { return std::make_shared<Expr::Node>(Expr::Node{Op::Const, v, Var::X1, nullptr, nullptr}); }
NodePtr make_var(Var v) { return std::make_shared<Expr::Node>(Expr::Node{Op::Var, 0, v, nullptr, nullptr}); }

bool is_const(const NodePtr& n, double v) { return n->op == Op::Const && n->value == v; }

NodePtr make(Op op, NodePtr a, NodePtr b = nullptr) {
    // constant folding and the trivial identities
    const bool ca = a->op == Op::Const;
    const bool cb = b && b->op == Op::Const;
    switch (op) {
        case Op::Add:
            if (ca && cb) return make_const(a->value + b->value);
            if (is_const(a, 0)) return b;
            if (is_const(b, 0)) return a;
            break;
        case Op::Sub:
            if (ca && cb) return make_const(a->value - b->value);
            if (is_const(b, 0)) return a;
            if (is_const(a, 0)) return make(Op::Neg, b);
            break;
        case Op::Mul:
            if (ca && cb) return make_const(a->value * b->value);
            if (is_const(a, 0) || is_const(b, 0)) return make_const(0);
            if (is_const(a, 1)) return b;
            if (is_const(b, 1)) return a;
            break;
        case Op::Div:
            if (ca && cb) return make_const(a->value / b->value);
            if (is_const(a, 0)) return make_const(0);
            if (is_const(b, 1)) return a;
            break;
        case Op::Pow:
            if (ca && cb) return make_const(std::pow(a->value, b->value));
            if (is_const(b, 0)) return make_const(1);
            if (is_const(b, 1)) return a;
            break;
        case Op::Neg:
            if (ca) return make_const(-a->value);
            if (a->op == Op::Neg) return a->a;
            break;
        default:
            if (ca) {
                const double x = a->value;
                switch (op) {
                    case Op::Sin: return make_const(std::sin(x));
                    case Op::Cos: return make_const(std::cos(x));
                    case Op::Exp: return make_const(std::exp(x));
                    case Op::Sqrt: return make_const(std::sqrt(x));
                    case Op::Log: return make_const(std::log(x));
                    default: break;
                }
            }
    }
    return std::make_shared<Expr::Node>(Expr::Node{op, 0, Var::X1, std::move(a), std::move(b)});
}

double eval_node(const Expr::Node& n, const ExprVars& v) {
    switch (n.op) {
        case Op::Const: return n.value;
        case Op::Var:
            switch (n.var) {
                case Var::X1: return v.x1;
                case Var::X2: return v.x2;
                case Var::Phi: return v.phi;
                case Var::DPhi: return v.dphi;
                case Var::D2Phi: return v.d2phi;
                case Var::N1: return v.n1;
                case Var::N2: return v.n2;
            }
            return 0;
        case Op::Add: return eval_node(*n.a, v) + eval_node(*n.b, v);
        case Op::Sub: return eval_node(*n.a, v) - eval_node(*n.b, v);
        case Op::Mul: return eval_node(*n.a, v) * eval_node(*n.b, v);
        case Op::Div: return eval_node(*n.a, v) / eval_node(*n.b, v);
        case Op::Pow: return std::pow(eval_node(*n.a, v), eval_node(*n.b, v));
        case Op::Neg: return -eval_node(*n.a, v);
        case Op::Sin: return std::sin(eval_node(*n.a, v));
        case Op::Cos: return std::cos(eval_node(*n.a, v));
        case Op::Exp: return std::exp(eval_node(*n.a, v));
        case Op::Sqrt: return std::sqrt(eval_node(*n.a, v));
        case Op::Log: return std::log(eval_node(*n.a, v));
    }
    return 0;
}

NodePtr diff_node(const NodePtr& n, int coord) {
    const auto& a = n->a;
    const auto& b = n->b;
    switch (n->op) {
        case Op::Const: return make_const(0);
        case Op::Var:
            switch (n->var) {
                case Var::X1: return make_const(coord == 1 ? 1 : 0);
                case Var::X2: return make_const(coord == 2 ? 1 : 0);
                case Var::Phi: return coord == 2 ? make_var(Var::DPhi) : make_const(0);
                case Var::DPhi: return coord == 2 ? make_var(Var::D2Phi) : make_const(0);
                case Var::D2Phi:
                    if (coord == 2) throw InvalidArgument("expression: third derivative of phi is not available");
                    return make_const(0);
                case Var::N1:
                case Var::N2: return make_const(0);
            }
            return make_const(0);
        case Op::Add: return make(Op::Add, diff_node(a, coord), diff_node(b, coord));
        case Op::Sub: return make(Op::Sub, diff_node(a, coord), diff_node(b, coord));
        case Op::Mul:
            return make(Op::Add, make(Op::Mul, diff_node(a, coord), b), make(Op::Mul, a, diff_node(b, coord)));
        case Op::Div: {
            const NodePtr num = make(Op::Sub, make(Op::Mul, diff_node(a, coord), b), make(Op::Mul, a, diff_node(b, coord)));
            return make(Op::Div, num, make(Op::Mul, b, b));
        }
        case Op::Pow: {
            const NodePtr da = diff_node(a, coord);
            const NodePtr db = diff_node(b, coord);
            if (is_const(db, 0)) {
                // b * a^(b-1) * a'
                return make(Op::Mul, make(Op::Mul, b, make(Op::Pow, a, make(Op::Sub, b, make_const(1)))), da);
            }
            // a^b * (b' log a + b a' / a)
            const NodePtr inner =
                make(Op::Add, make(Op::Mul, db, make(Op::Log, a)), make(Op::Div, make(Op::Mul, b, da), a));
            return make(Op::Mul, n, inner);
        }
        case Op::Neg: return make(Op::Neg, diff_node(a, coord));
        case Op::Sin: return make(Op::Mul, make(Op::Cos, a), diff_node(a, coord));
        case Op::Cos: return make(Op::Neg, make(Op::Mul, make(Op::Sin, a), diff_node(a, coord)));
        case Op::Exp: return make(Op::Mul, n, diff_node(a, coord));
        case Op::Sqrt: return make(Op::Div, diff_node(a, coord), make(Op::Mul, make_const(2), n));
        case Op::Log: return make(Op::Div, diff_node(a, coord), a);
    }
    return make_const(0);
}

std::string_view var_name(Var v) {
    switch (v) {
        case Var::X1: return "x1";
        case Var::X2: return "x2";
        case Var::Phi: return "phi";
        case Var::DPhi: return "dphi";
        case Var::D2Phi: return "d2phi";
        case Var::N1: return "n1";
        case Var::N2: return "n2";
    }
    return "?";
}

std::string str_node(const Expr::Node& n) {
    auto bin = [&](const char* op) { return "(" + str_node(*n.a) + " " + op + " " + str_node(*n.b) + ")"; };
    auto fn = [&](const char* name) { return std::string(name) + "(" + str_node(*n.a) + ")"; };
    switch (n.op) {
        case Op::Const: return fmt::format("{:.17g}", n.value);
        case Op::Var: return std::string(var_name(n.var));
        case Op::Add: return bin("+");
        case Op::Sub: return bin("-");
        case Op::Mul: return bin("*");
        case Op::Div: return bin("/");
        case Op::Pow: return bin("^");
        case Op::Neg: return "(-" + str_node(*n.a) + ")";
        case Op::Sin: return fn("sin");
        case Op::Cos: return fn("cos");
        case Op::Exp: return fn("exp");
        case Op::Sqrt: return fn("sqrt");
        case Op::Log: return fn("log");
    }
    return "?";
}

bool depends_node(const Expr::Node& n, Var v) {
    if (n.op == Op::Var) return n.var == v;
    return (n.a && depends_node(*n.a, v)) || (n.b && depends_node(*n.b, v));
}

class Parser {
public:
    explicit Parser(std::string_view text) : text_(text) {}

    NodePtr parse() {
        NodePtr e = expr();
        skip();
        if (pos_ != text_.size()) fail("unexpected character");
        return e;
    }

private:
    [[noreturn]] void fail(const std::string& why) const {
        throw InvalidArgument(fmt::format("expression '{}': {} at position {}", text_, why, pos_));
    }
    void skip() {
        while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    }
    bool accept(char c) {
        skip();
        if (pos_ < text_.size() && text_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    NodePtr expr() {
        NodePtr lhs = term();
        for (;;) {
            if (accept('+')) lhs = make(Op::Add, lhs, term());
            else if (accept('-')) lhs = make(Op::Sub, lhs, term());
            else return lhs;
        }
    }
    NodePtr term() {
        NodePtr lhs = unary();
        for (;;) {
            if (accept('*')) lhs = make(Op::Mul, lhs, unary());
            else if (accept('/')) lhs = make(Op::Div, lhs, unary());
            else return lhs;
        }
    }
    NodePtr unary() {
        if (accept('-')) return make(Op::Neg, unary());
        if (accept('+')) return unary();
        return power();
    }
    NodePtr power() {
        NodePtr base = primary();
        if (accept('^')) return make(Op::Pow, base, unary());
        return base;
    }
    NodePtr primary() {
        skip();
        if (pos_ >= text_.size()) fail("unexpected end of input");
        const char c = text_[pos_];
        if (accept('(')) {
            NodePtr inner = expr();
            if (!accept(')')) fail("expected ')'");
            return inner;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
            const std::string rest(text_.substr(pos_));
            std::size_t used = 0;
            double v = 0;
            try {
                v = std::stod(rest, &used);
            } catch (const std::exception&) {
                fail("malformed number");
            }
            pos_ += used;
            return make_const(v);
        }
        if (std::isalpha(static_cast<unsigned char>(c))) {
            const std::size_t start = pos_;
            while (pos_ < text_.size() && (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_')) {
                ++pos_;
            }
            const std::string_view name = text_.substr(start, pos_ - start);
            static const std::pair<std::string_view, Op> functions[] = {
                {"sin", Op::Sin}, {"cos", Op::Cos}, {"exp", Op::Exp}, {"sqrt", Op::Sqrt}, {"log", Op::Log}};
            for (const auto& [fname, op] : functions) {
                if (name == fname) {
                    if (!accept('(')) fail("expected '(' after " + std::string(name));
                    NodePtr arg = expr();
                    if (!accept(')')) fail("expected ')'");
                    return make(op, arg);
                }
            }
            if (name == "pi") return make_const(std::numbers::pi);
            if (name == "x1") return make_var(Var::X1);
            if (name == "x2") return make_var(Var::X2);
            if (name == "phi" || name == "weight") return make_var(Var::Phi);
            if (name == "dphi") return make_var(Var::DPhi);
            if (name == "d2phi") return make_var(Var::D2Phi);
            if (name == "n1") return make_var(Var::N1);
            if (name == "n2") return make_var(Var::N2);
            pos_ = start;
            fail("unknown name '" + std::string(name) + "'");
        }
        fail("unexpected character");
    }

    std::string_view text_;
    std::size_t pos_ = 0;
};

Var lookup_var(std::string_view name) {
    if (name == "x1") return Var::X1;
    if (name == "x2") return Var::X2;
    if (name == "phi" || name == "weight") return Var::Phi;
    if (name == "dphi") return Var::DPhi;
    if (name == "d2phi") return Var::D2Phi;
    if (name == "n1") return Var::N1;
    if (name == "n2") return Var::N2;
    throw InvalidArgument(fmt::format("unknown expression variable '{}'", name));
}

}  // namespace

ExprVars expr_vars(const CuspDomain& domain, const Vec2& x, const Vec2& normal) {
    ExprVars v;
    v.x1 = x.x();
    v.x2 = x.y();
    v.phi = domain.weight_at_height(x.y());
    v.dphi = domain.weight_derivative_at_height(x.y());
    const auto& p = domain.profile();
    v.d2phi = (x.y() > 0.0 && x.y() < 1.0 && p.has_second_derivative()) ? p.second_deriv(x.y()) : 0.0;
    v.n1 = normal.x();
    v.n2 = normal.y();
    return v;
}

Expr::Expr() : node_(make_const(0)) {}

Expr Expr::parse(std::string_view text) { return Expr(Parser(text).parse()); }
Expr Expr::constant(double value) { return Expr(make_const(value)); }
Expr Expr::variable(std::string_view name) { return Expr(make_var(lookup_var(name))); }

double Expr::eval(const ExprVars& vars) const { return eval_node(*node_, vars); }

Expr Expr::diff(int coordinate) const {
    if (coordinate != 1 && coordinate != 2) throw InvalidArgument("Expr::diff: coordinate must be 1 or 2");
    return Expr(diff_node(node_, coordinate));
}

bool Expr::depends_on(std::string_view name) const { return depends_node(*node_, lookup_var(name)); }
bool Expr::is_constant() const { return node_->op == Op::Const; }
std::string Expr::str() const { return str_node(*node_); }

Expr operator+(const Expr& a, const Expr& b) { return Expr(make(Op::Add, a.node_, b.node_)); }
Expr operator-(const Expr& a, const Expr& b) { return Expr(make(Op::Sub, a.node_, b.node_)); }
Expr operator*(const Expr& a, const Expr& b) { return Expr(make(Op::Mul, a.node_, b.node_)); }
Expr operator/(const Expr& a, const Expr& b) { return Expr(make(Op::Div, a.node_, b.node_)); }
Expr operator-(const Expr& a) { return Expr(make(Op::Neg, a.node_)); }

}  // namespace cuspfem
