#pragma once

#include <memory>
#include <string>
#include <string_view>

#include "cuspfem/geometry.hpp"

namespace cuspfem {

/// Values bound to the variables of an expression.
///   x1, x2      coordinates
///   phi         boundary weight xi(x2) (phi(x2) on the peak, phi(1) above)
///   dphi, d2phi its first and second x2-derivatives
///   n1, n2      outward unit normal (boundary data only, 0 elsewhere)
struct ExprVars {
    double x1 = 0;
    double x2 = 0;
    double phi = 0;
    double dphi = 0;
    double d2phi = 0;
    double n1 = 0;
    double n2 = 0;
};

ExprVars expr_vars(const CuspDomain& domain, const Vec2& x, const Vec2& normal = Vec2::Zero());

/// Tiny arithmetic language used by configuration files.
///
///   expr    := term (('+' | '-') term)*
///   term    := unary (('*' | '/') unary)*
///   unary   := ('-' | '+') unary | power
///   power   := primary ('^' unary)?
///   primary := number | name | func '(' expr ')' | '(' expr ')'
///   func    := sin | cos | exp | sqrt | log
///   name    := x1 | x2 | phi | weight | dphi | d2phi | n1 | n2 | pi
///
/// `weight` is an alias of `phi`.  Expressions differentiate symbolically in x1 and x2.
class Expr {
public:
    struct Node;

    Expr();  // the constant 0
    static Expr parse(std::string_view text);
    static Expr constant(double value);
    static Expr variable(std::string_view name);

    double eval(const ExprVars& vars) const;
    /// Symbolic partial derivative; `coordinate` is 1 (x1) or 2 (x2).
    Expr diff(int coordinate) const;
    bool depends_on(std::string_view name) const;
    bool is_constant() const;
    std::string str() const;

    friend Expr operator+(const Expr& a, const Expr& b);
    friend Expr operator-(const Expr& a, const Expr& b);
    friend Expr operator*(const Expr& a, const Expr& b);
    friend Expr operator/(const Expr& a, const Expr& b);
    friend Expr operator-(const Expr& a);

private:
    explicit Expr(std::shared_ptr<const Node> node) : node_(std::move(node)) {}
    std::shared_ptr<const Node> node_;
};

}  // namespace cuspfem
