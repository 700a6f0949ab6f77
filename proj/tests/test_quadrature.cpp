#include <cmath>

#include <gtest/gtest.h>

#include "cuspfem/errors.hpp"
#include "cuspfem/quadrature.hpp"
#include "test_support.hpp"

using namespace cuspfem;

TEST(GaussLegendre, WeightsSumToTwo) {
    for (int n : {1, 2, 5, 16, 32, 64}) {
        const Rule1D& r = gauss_legendre(n);
        double s = 0;
        for (double w : r.weights) s += w;
        EXPECT_NEAR(s, 2.0, 1e-13) << n;
        EXPECT_EQ(static_cast<int>(r.nodes.size()), n);
    }
}

TEST(GaussLegendre, ExactForDegree2nMinus1) {
    for (int n : {2, 3, 8, 16}) {
        const Rule1D& r = gauss_legendre(n);
        for (int k = 0; k <= 2 * n - 1; ++k) {
            double s = 0;
            for (std::size_t i = 0; i < r.nodes.size(); ++i) s += r.weights[i] * std::pow(r.nodes[i], k);
            const double exact = k % 2 ? 0.0 : 2.0 / (k + 1);
            EXPECT_NEAR(s, exact, 1e-13) << "n=" << n << " k=" << k;
        }
    }
}

TEST(GaussLegendre, RejectsBadOrder) {
    EXPECT_THROW(gauss_legendre(0), InvalidArgument);
    EXPECT_THROW(gauss_legendre(1000), InvalidArgument);
}

TEST(CompositeGauss, IntegratesSmoothFunction) {
    const Rule1D r = composite_gauss(0.0, 2.0, 8, 4);
    double s = 0;
    for (std::size_t i = 0; i < r.nodes.size(); ++i) s += r.weights[i] * std::exp(r.nodes[i]);
    EXPECT_NEAR(s, std::exp(2.0) - 1.0, 1e-13);
}

TEST(TriangleRule, WeightsSumToHalf) {
    for (int d = 1; d <= 5; ++d) {
        double s = 0;
        for (const auto& q : triangle_rule(d)) s += q.weight;
        EXPECT_NEAR(s, 0.5, 1e-15) << d;
    }
}

TEST(TriangleRule, ExactForMonomials) {
    // int_T r^a s^b = a! b! / (a + b + 2)!
    auto fact = [](int n) {
        double f = 1;
        for (int i = 2; i <= n; ++i) f *= i;
        return f;
    };
    for (int d = 1; d <= 5; ++d) {
        for (int a = 0; a <= d; ++a) {
            for (int b = 0; a + b <= d; ++b) {
                double s = 0;
                for (const auto& q : triangle_rule(d)) s += q.weight * std::pow(q.r, a) * std::pow(q.s, b);
                EXPECT_NEAR(s, fact(a) * fact(b) / fact(a + b + 2), 1e-14) << d << " " << a << " " << b;
            }
        }
    }
}

TEST(AdaptiveIntegral, MatchesIndependentOracle) {
    auto f = [](double t) { return std::sqrt(1.0 + t * t) * std::exp(-t); };
    EXPECT_NEAR(adaptive_integral(f, 0.0, 3.0), fixtures::reference_integral(f, 0.0, 3.0), 1e-13);
}
