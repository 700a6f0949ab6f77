#include <algorithm>
#include <cmath>
#include <map>

#include <gtest/gtest.h>

#include "cuspfem/errors.hpp"
#include "cuspfem/geometry.hpp"
#include "test_support.hpp"

using namespace cuspfem;
using cuspfem::fixtures::reference_integral;

TEST(PowerProfile, DirectEvaluation) {
    const PeakProfile p = make_power_profile(2.0, 0.5);
    EXPECT_DOUBLE_EQ(p(0.5), 0.125);
    EXPECT_DOUBLE_EQ(p.deriv(0.5), 0.5);
    EXPECT_NEAR(p(0.0), 0.0, 1e-12);
    EXPECT_NEAR(p.deriv(0.0), 0.0, 1e-12);
    EXPECT_DOUBLE_EQ(p.second_deriv(0.3), 1.0);
}

TEST(PowerProfile, RejectsNonCusp) {
    try {
        make_power_profile(1.0, 0.5);
        FAIL() << "lambda = 1 accepted";
    } catch (const InvalidArgument& e) {
        EXPECT_NE(std::string(e.what()).find("not a cusp"), std::string::npos);
    }
    EXPECT_THROW(make_power_profile(0.5, 0.5), InvalidArgument);
}

TEST(PowerProfile, RejectsSteepProfile) {
    EXPECT_THROW(make_power_profile(2.0, 0.6), InvalidArgument);
    EXPECT_THROW(make_power_profile(2.0, -0.1), InvalidArgument);
    EXPECT_NO_THROW(make_power_profile(3.0, 1.0 / 3.0));
}

TEST(PowerProfile, DerivativeInUnitInterval) {
    for (double lambda : {1.5, 2.0, 3.0, 4.0}) {
        const PeakProfile p = make_power_profile(lambda, 1.0 / lambda);
        for (int i = 1; i <= 100; ++i) {
            const double t = i / 100.0;
            EXPECT_GT(p.deriv(t), 0.0);
            EXPECT_LE(p.deriv(t), 1.0 + 1e-12);
        }
    }
}

TEST(CuspDomain, RegionMembership) {
    const CuspDomain d = fixtures::quadratic_domain();
    EXPECT_TRUE(d.contains({0.0, 0.5}));
    EXPECT_FALSE(d.contains({0.2, 0.5}));
    EXPECT_FALSE(d.contains({0.0, -0.1}));
    EXPECT_TRUE(d.contains({0.0, 1.2}));
    EXPECT_FALSE(d.contains({0.0, d.top_height() + 1e-9}));
}

TEST(CuspDomain, RejectsLargeTipCutoff) {
    EXPECT_THROW(build_cusp_domain(make_power_profile(2.0, 0.5), 0.1), InvalidArgument);
    EXPECT_THROW(build_cusp_domain(make_power_profile(2.0, 0.5), -0.01), InvalidArgument);
}

TEST(CuspDomain, CapJoinsPeakWithMatchingTangent) {
    for (const CuspDomain& d : {fixtures::quadratic_domain(), fixtures::cubic_domain()}) {
        const auto& p = d.profile();
        const Vec2 start = d.cap_point(d.cap_start_angle());
        EXPECT_NEAR((start - Vec2(p(1.0), 1.0)).norm(), 0.0, 1e-12);
        const Vec2 end = d.cap_point(d.cap_start_angle() + d.cap_sweep());
        EXPECT_NEAR((end - Vec2(-p(1.0), 1.0)).norm(), 0.0, 1e-12);
        // peak tangent (phi', 1) must be orthogonal to the cap radius at the junction
        const Vec2 tangent = Vec2(p.deriv(1.0), 1.0).normalized();
        EXPECT_NEAR(tangent.dot((start - d.cap_center()).normalized()), 0.0, 1e-12);
    }
}

TEST(CuspDomain, WeightContinuousAtJunction) {
    const CuspDomain d = fixtures::quadratic_domain();
    EXPECT_NEAR(d.weight_at_height(1.0 - 1e-12), d.weight_at_height(1.0 + 1e-12), 1e-11);
    EXPECT_DOUBLE_EQ(d.weight_at_height(1.3), d.profile()(1.0));
    EXPECT_DOUBLE_EQ(d.weight_at_height(0.4), d.profile()(0.4));
}

TEST(BoundaryQuadrature, TotalArcLengthMatchesOracle) {
    const CuspDomain d = fixtures::quadratic_domain();
    const auto& p = d.profile();
    const double side = reference_integral([&](double t) { return std::sqrt(1 + p.deriv(t) * p.deriv(t)); }, 0.0, 1.0);
    const double expected = 2.0 * side + d.cap_radius() * d.cap_sweep();
    for (int density : {4, 16, 32}) {
        double sum = 0;
        for (const auto& n : boundary_quadrature(d, density)) sum += n.quad_weight;
        EXPECT_NEAR(sum, expected, 1e-6) << density;
    }
    EXPECT_NEAR(d.boundary_length(), expected, 1e-6);
}

TEST(BoundaryQuadrature, WeightIntegralOverPeakMatchesOracle) {
    const CuspDomain d = fixtures::quadratic_domain();
    const auto& p = d.profile();
    const double expected =
        2.0 * reference_integral([&](double t) { return p(t) * std::sqrt(1 + p.deriv(t) * p.deriv(t)); }, 0.0, 1.0);
    // midpoint values: second-order in the density
    std::vector<double> errors;
    double zero = 0;
    for (int density : {32, 64, 128}) {
        double sum = 0;
        for (const auto& n : boundary_quadrature(d, density)) {
            if (n.point.segment != SegmentTag::Cap) sum += n.quad_weight * n.point.weight;
            zero += n.quad_weight * 0.0;
        }
        errors.push_back(std::abs(sum - expected));
    }
    EXPECT_LT(errors.back(), 1e-6);
    EXPECT_GT(errors[0] / errors[1], 3.5);
    EXPECT_GT(errors[1] / errors[2], 3.5);
    EXPECT_EQ(zero, 0.0);
}

TEST(BoundaryQuadrature, NodesLieOnBoundary) {
    for (const CuspDomain& d : {fixtures::quadratic_domain(), fixtures::cubic_domain(0.0)}) {
        for (const auto& n : boundary_quadrature(d, 16)) {
            EXPECT_NEAR(d.boundary_residual(n.point.position, n.point.segment), 0.0, 1e-10);
            if (n.point.segment != SegmentTag::Cap) {
                EXPECT_NEAR(std::abs(n.point.position.x()) - d.profile()(n.point.position.y()), 0.0, 1e-10);
                EXPECT_DOUBLE_EQ(n.point.weight, d.profile()(n.point.position.y()));
            } else {
                EXPECT_DOUBLE_EQ(n.point.weight, d.profile()(1.0));
            }
            EXPECT_GT(n.point.weight, 0.0);
        }
    }
}

TEST(BoundaryQuadrature, ArcParameterIncreases) {
    const auto nodes = boundary_quadrature(fixtures::quadratic_domain(), 8);
    for (std::size_t i = 1; i < nodes.size(); ++i) EXPECT_GT(nodes[i].point.arc_param, nodes[i - 1].point.arc_param);
    EXPECT_GE(nodes.front().point.arc_param, 0.0);
    EXPECT_LT(nodes.back().point.arc_param, fixtures::quadratic_domain().boundary_length());
}

TEST(BoundaryQuadrature, GradedTowardTip) {
    const auto nodes = boundary_quadrature(fixtures::quadratic_domain(), 16);
    std::vector<std::pair<double, double>> right;  // (x2, cell length)
    for (const auto& n : nodes) {
        if (n.point.segment == SegmentTag::PeakRight) right.emplace_back(n.point.position.y(), n.quad_weight);
    }
    std::sort(right.begin(), right.end());
    ASSERT_GT(right.size(), 10u);
    for (std::size_t i = 1; i < right.size(); ++i) {
        EXPECT_GE(right[i].second, right[i - 1].second * (1 - 1e-6)) << right[i].first;
    }
    EXPECT_LT(right.front().second, right.back().second / 10);
}

TEST(BoundaryQuadrature, RespectsTipCutoff) {
    const CuspDomain d = fixtures::cubic_domain(0.05);
    double sum = 0;
    for (const auto& n : boundary_quadrature(d, 8)) {
        EXPECT_GE(n.point.position.y(), 0.05);
        sum += n.quad_weight;
    }
    EXPECT_NEAR(sum, d.boundary_length(), 1e-9);
    EXPECT_THROW(boundary_quadrature(d, 3), InvalidArgument);
}

TEST(ChartSurfaceFactor, BoundedOnHalfChart) {
    for (double lambda : {2.0, 3.0}) {
        const PeakProfile p = make_power_profile(lambda, 1.0 / lambda);
        for (int i = 1; i <= 50; ++i) {
            const double t = i / 50.0;
            for (double frac : {0.0, 0.25, 0.5}) {
                const double f = chart_surface_factor(p, t, frac * p(t));
                EXPECT_GE(f, 1.0 - 1e-12);
                EXPECT_LE(f, 2.0);
            }
        }
    }
}

TEST(DomainJson, RoundTripAndFieldNames) {
    const CuspDomain d = fixtures::cubic_domain(0.05);
    const CuspDomain e = domain_from_json(domain_to_json(d));
    EXPECT_EQ(e.profile().lambda(), 3.0);
    EXPECT_EQ(e.tip_cutoff(), 0.05);
    try {
        domain_from_json(nlohmann::json::parse(R"({"profile": {"family": "power", "scale": 0.5}})"));
        FAIL();
    } catch (const InvalidArgument& err) {
        EXPECT_NE(std::string(err.what()).find("domain.profile.lambda"), std::string::npos);
    }
}

TEST(BoundaryQuadrature, CsvHeaderAndRows) {
    const auto nodes = boundary_quadrature(fixtures::quadratic_domain(), 4);
    const std::string csv = boundary_quadrature_csv(nodes);
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "arc_param,x1,x2,segment_tag,weight,quad_weight");
    EXPECT_EQ(static_cast<std::size_t>(std::count(csv.begin(), csv.end(), '\n')), nodes.size() + 1);
    EXPECT_NE(csv.find("peak_right"), std::string::npos);
    EXPECT_NE(csv.find(",cap,"), std::string::npos);
}
