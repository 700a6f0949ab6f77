#include <cmath>

#include <gtest/gtest.h>

#include "cuspfem/errors.hpp"
#include "cuspfem/expression.hpp"
#include "test_support.hpp"

using namespace cuspfem;

namespace {

double eval_at(const std::string& text, double x1, double x2) {
    const CuspDomain d = fixtures::quadratic_domain();
    return Expr::parse(text).eval(expr_vars(d, Vec2(x1, x2)));
}

}  // namespace

TEST(Expr, ArithmeticAndPrecedence) {
    EXPECT_DOUBLE_EQ(eval_at("1 + 2 * 3", 0, 0), 7.0);
    EXPECT_DOUBLE_EQ(eval_at("(1 + 2) * 3", 0, 0), 9.0);
    EXPECT_DOUBLE_EQ(eval_at("2 ^ 3 ^ 2", 0, 0), 512.0);
    EXPECT_DOUBLE_EQ(eval_at("-2 ^ 2", 0, 0), -4.0);
    EXPECT_DOUBLE_EQ(eval_at("8 / 4 / 2", 0, 0), 1.0);
    EXPECT_DOUBLE_EQ(eval_at("1e-3 * 2", 0, 0), 2e-3);
}

TEST(Expr, VariablesAndFunctions) {
    EXPECT_DOUBLE_EQ(eval_at("x1 + 10 * x2", 0.25, 0.5), 5.25);
    EXPECT_DOUBLE_EQ(eval_at("phi", 0.0, 0.5), 0.125);
    EXPECT_DOUBLE_EQ(eval_at("weight", 0.0, 1.5), 0.5);
    EXPECT_DOUBLE_EQ(eval_at("dphi", 0.0, 0.5), 0.5);
    EXPECT_NEAR(eval_at("sin(pi * x2) + cos(0) + exp(0) + sqrt(4) + log(1)", 0, 0.5), 5.0, 1e-15);
}

TEST(Expr, SymbolicDerivativesMatchFiniteDifferences) {
    const CuspDomain d = fixtures::quadratic_domain();
    for (const char* text : {"x1^2 * x2", "sin(pi*x2)*cos(pi*x1/2)", "x2 * phi", "exp(x1) / (1 + x2^2)", "sqrt(x2)"}) {
        const Expr e = Expr::parse(text);
        const Vec2 x(0.03, 0.6);
        const double h = 1e-6;
        const double fd1 = (e.eval(expr_vars(d, x + Vec2(h, 0))) - e.eval(expr_vars(d, x - Vec2(h, 0)))) / (2 * h);
        const double fd2 = (e.eval(expr_vars(d, x + Vec2(0, h))) - e.eval(expr_vars(d, x - Vec2(0, h)))) / (2 * h);
        EXPECT_NEAR(e.diff(1).eval(expr_vars(d, x)), fd1, 1e-7) << text;
        EXPECT_NEAR(e.diff(2).eval(expr_vars(d, x)), fd2, 1e-7) << text;
    }
}

TEST(Expr, ConstantsFold) {
    EXPECT_TRUE(Expr::parse("2 * 3 + 1").is_constant());
    EXPECT_TRUE(Expr::parse("x1").diff(2).is_constant());
    EXPECT_FALSE(Expr::parse("x1 * 0 + x2").is_constant());
    EXPECT_TRUE(Expr::parse("phi").depends_on("phi"));
    EXPECT_FALSE(Expr::parse("x1").depends_on("x2"));
}

TEST(Expr, ParseErrorsReportPosition) {
    for (const char* bad : {"1 +", "foo(x1)", "x3", "(1 + 2", "1 2", ""}) {
        EXPECT_THROW(Expr::parse(bad), InvalidArgument) << bad;
    }
    try {
        Expr::parse("1 + $");
        FAIL();
    } catch (const InvalidArgument& e) {
        EXPECT_NE(std::string(e.what()).find("4"), std::string::npos) << e.what();
    }
}

TEST(Expr, NormalComponents) {
    const CuspDomain d = fixtures::quadratic_domain();
    const Expr e = Expr::parse("n1 * 2 + n2");
    EXPECT_DOUBLE_EQ(e.eval(expr_vars(d, Vec2(0, 0.5), Vec2(0.6, 0.8))), 2.0);
}
