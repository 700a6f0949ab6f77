#include <cmath>
#include <random>

#include <Eigen/Dense>
#include <gtest/gtest.h>

#include "cuspfem/errors.hpp"
#include "cuspfem/spectral.hpp"
#include "cuspfem/trace_spaces.hpp"
#include "test_support.hpp"

using namespace cuspfem;

namespace {

double identity_x2(const Vec2& x) { return x.y(); }

BoundaryField subset(const BoundaryField& f, const std::function<bool(const Vec2&)>& keep) {
    BoundaryField out;
    for (int i = 0; i < f.size(); ++i) {
        if (!keep(f.nodes[i].point.position)) continue;
        out.nodes.push_back(f.nodes[i]);
        out.values.push_back(f.values[i]);
    }
    return out;
}

}  // namespace

TEST(TraceSeminorm, ConstantsHaveZeroSeminorm) {
    const CuspDomain d = fixtures::quadratic_domain();
    for (double p : {1.5, 2.0, 3.0}) {
        EXPECT_EQ(trace_seminorm(sample_boundary(d, 16, [](const Vec2&) { return 4.2; }), p), 0.0);
    }
}

TEST(TraceSeminorm, PairsBeyondCutoffContributeNothing) {
    const CuspDomain d = fixtures::quadratic_domain();
    const BoundaryField f = sample_boundary(d, 16, identity_x2);
    int far = 0, near = 0;
    for (int i = 0; i < f.size(); i += 3) {
        for (int j = 0; j < f.size(); j += 5) {
            const double dist = (f.nodes[i].point.position - f.nodes[j].point.position).norm();
            const double c = pair_contribution(f, i, j, 2.0);
            if (dist > cutoff_radius(f.nodes[i], f.nodes[j])) {
                ++far;
                EXPECT_EQ(c, 0.0);
            } else if (dist >= kDiagonalSeparation && f.values[i] != f.values[j]) {
                ++near;
                EXPECT_GT(c, 0.0);
            }
        }
    }
    EXPECT_GT(far, 0);
    EXPECT_GT(near, 0);
}

TEST(TraceSeminorm, CutoffRadiusIsLargerWeight) {
    BoundaryNode a, b;
    a.point.weight = 0.1;
    b.point.weight = 0.4;
    EXPECT_EQ(cutoff_radius(a, b), 0.4);
    EXPECT_EQ(cutoff_radius(b, a), 0.4);
}

TEST(TraceSeminorm, StepAcrossDistantArcsIsInvisible) {
    const CuspDomain d = fixtures::quadratic_domain();
    const double top = d.top_height();
    BoundaryField f = subset(sample_boundary(d, 32, identity_x2),
                             [&](const Vec2& x) { return x.y() < 0.3 || x.y() > top - 0.2; });
    for (int i = 0; i < f.size(); ++i) f.values[i] = f.nodes[i].point.position.y() < 0.3 ? 0.0 : 1.0;
    EXPECT_EQ(trace_seminorm(f, 2.0), 0.0);
    EXPECT_GT(weighted_boundary_norm(f, 2.0), 0.0);
}

TEST(TraceSeminorm, SummationOrderDoesNotMatter) {
    const CuspDomain d = fixtures::quadratic_domain();
    const BoundaryField f = sample_boundary(d, 16, [](const Vec2& x) { return std::sin(3 * x.x()) + x.y() * x.y(); });
    for (double p : {1.5, 2.0, 3.0}) {
        const double a = trace_seminorm(f, p, 1, PairOrder::RowMajor);
        const double b = trace_seminorm(f, p, 1, PairOrder::ColumnMajor);
        EXPECT_NEAR(a, b, 1e-12 * a);
    }
}

TEST(TraceSeminorm, ThreadCountGivesIdenticalBits) {
    const CuspDomain d = fixtures::quadratic_domain();
    const BoundaryField f = sample_boundary(d, 16, identity_x2);
    const double ref = trace_seminorm(f, 2.0, 1);
    for (int t : {2, 3, 4, 8}) EXPECT_EQ(trace_seminorm(f, 2.0, t), ref) << t;
}

TEST(TraceSeminorm, PositivelyHomogeneous) {
    const CuspDomain d = fixtures::quadratic_domain();
    const BoundaryField f = sample_boundary(d, 16, identity_x2);
    BoundaryField g = f;
    for (double& v : g.values) v *= -2.5;
    for (double p : {1.5, 2.0, 3.0}) {
        EXPECT_NEAR(trace_seminorm(g, p), 2.5 * trace_seminorm(f, p), 1e-12 * trace_seminorm(g, p));
        EXPECT_NEAR(weighted_boundary_norm(g, p), 2.5 * weighted_boundary_norm(f, p), 1e-12);
    }
}

TEST(TraceSeminorm, TranslationInvariant) {
    const CuspDomain d = fixtures::quadratic_domain();
    const BoundaryField f = sample_boundary(d, 16, identity_x2);
    BoundaryField g = f;
    for (auto& n : g.nodes) n.point.position += Vec2(0.75, -0.25);
    const double a = trace_seminorm(f, 2.0);
    EXPECT_NEAR(trace_seminorm(g, 2.0), a, 1e-12 * a);
}

TEST(TraceSeminorm, WeightedNormOfOneMatchesOracle) {
    const CuspDomain d = fixtures::quadratic_domain();
    const auto& phi = d.profile();
    const double side = fixtures::reference_integral(
        [&](double t) { return phi(t) * std::sqrt(1 + phi.deriv(t) * phi.deriv(t)); }, 0.0, 1.0);
    const double expected = std::sqrt(2.0 * side + phi(1.0) * d.cap_length());
    const double got = weighted_boundary_norm(sample_boundary(d, 256, [](const Vec2&) { return 1.0; }), 2.0);
    EXPECT_NEAR(got, expected, 1e-5);
}

TEST(TraceSeminorm, StableUnderDoubledDensity) {
    const CuspDomain d = fixtures::quadratic_domain();
    for (double p : {2.0, 3.0}) {
        const double a = trace_seminorm(sample_boundary(d, 16, identity_x2), p);
        const double b = trace_seminorm(sample_boundary(d, 32, identity_x2), p);
        EXPECT_GT(a, 0.0);
        EXPECT_LT(std::abs(a - b) / b, 0.02) << p;
    }
}

TEST(TraceSeminorm, FrozenValueForHeight) {
    // first-run value, density 32, p = 2
    const CuspDomain d = fixtures::quadratic_domain();
    EXPECT_NEAR(trace_seminorm(sample_boundary(d, 32, identity_x2), 2.0), 1.6476, 5e-4);
}

TEST(TraceSeminorm, TraceNormIsSumOfParts) {
    const CuspDomain d = fixtures::quadratic_domain();
    const BoundaryField f = sample_boundary(d, 16, identity_x2);
    const TraceNormParts parts = trace_norm_parts(f, 2.0);
    EXPECT_EQ(parts.trace_norm, parts.weighted_part + parts.seminorm_part);
    EXPECT_EQ(parts.nodes, f.size());
}

TEST(TraceSeminorm, RejectsBadExponent) {
    const CuspDomain d = fixtures::quadratic_domain();
    const BoundaryField f = sample_boundary(d, 8, identity_x2);
    EXPECT_THROW(trace_seminorm(f, 0.5), InvalidArgument);
    EXPECT_THROW(weighted_boundary_norm(f, 0.5), InvalidArgument);
}

TEST(P1Trace, OperatorMatchesDirectTrace) {
    const CuspDomain d = fixtures::quadratic_domain();
    const Mesh m = generate_graded_mesh(d, 0.2, 2.0);
    Eigen::VectorXd u(m.num_nodes());
    for (int i = 0; i < u.size(); ++i) u[i] = std::cos(m.nodes[i].x()) * m.nodes[i].y();
    const BoundaryField f = p1_trace(m, d, u);
    const Eigen::VectorXd pu = p1_trace_operator(m, d) * u;
    ASSERT_EQ(pu.size(), f.size());
    for (int i = 0; i < f.size(); ++i) EXPECT_NEAR(pu[i], f.values[i], 1e-14);
    for (const auto& n : f.nodes) EXPECT_NE(n.point.segment, SegmentTag::TipCut);
}

TEST(P1Trace, SeminormFormReproducesSeminorm) {
    const CuspDomain d = fixtures::quadratic_domain();
    const Mesh m = generate_graded_mesh(d, 0.2, 2.0);
    const Eigen::SparseMatrix<double> q = seminorm_form(m, d);
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> dist(-1, 1);
    Eigen::VectorXd u(m.num_nodes());
    for (int i = 0; i < u.size(); ++i) u[i] = dist(rng);
    const double s = trace_seminorm(p1_trace(m, d, u), 2.0);
    EXPECT_NEAR(u.dot(q * u), s * s, 1e-10 * s * s);
}

TEST(P1Trace, TraceNormBoundedByH1Norm) {
    const CuspDomain d = fixtures::quadratic_domain();
    const Mesh m = refine(generate_graded_mesh(d, 0.2, 2.0), d);
    const DiscreteSystem sys = gram_system(m, d);
    const Eigen::SparseMatrix<double> p = p1_trace_operator(m, d);
    const BoundaryField pts = p1_trace(m, d, Eigen::VectorXd::Zero(m.num_nodes()));
    Eigen::VectorXd w(pts.size());
    for (int i = 0; i < pts.size(); ++i) w[i] = pts.nodes[i].point.weight * pts.nodes[i].quad_weight;
    const Eigen::SparseMatrix<double> mass = Eigen::SparseMatrix<double>(p.transpose()) * w.asDiagonal() * p;
    const double s_mass = generalized_singular_values(mass, sys.h1_gram, 1).singular_values[0];
    const double s_semi = generalized_singular_values(seminorm_form(m, d), sys.h1_gram, 1).singular_values[0];
    const double c = s_mass + s_semi;
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> dist(-1, 1);
    for (int k = 0; k < 20; ++k) {
        Eigen::VectorXd u(m.num_nodes());
        for (int i = 0; i < u.size(); ++i) u[i] = dist(rng);
        const double lhs = trace_norm(p1_trace(m, d, u), 2.0);
        EXPECT_LE(lhs, c * std::sqrt(u.dot(sys.h1_gram * u)) * (1 + 1e-9));
    }
}
