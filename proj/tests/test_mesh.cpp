#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "cuspfem/errors.hpp"
#include "cuspfem/mesh.hpp"
#include "test_support.hpp"

using namespace cuspfem;

namespace {

void expect_valid(const Mesh& m, const CuspDomain& d, double min_angle) {
    const auto bad = check_conformity(m);
    EXPECT_FALSE(bad.has_value()) << *bad;
    for (int t = 0; t < m.num_triangles(); ++t) ASSERT_GT(signed_area(m, t), 0.0);
    EXPECT_GE(min_angle_degrees(m), min_angle);
    for (const auto& e : m.boundary_edges) {
        for (int k : e.nodes) {
            const Vec2& x = m.nodes[k];
            if (e.tag == SegmentTag::TipCut) {
                EXPECT_NEAR(x.y(), m.tip_cutoff, 1e-12);
            } else {
                EXPECT_NEAR(d.boundary_residual(x, e.tag), 0.0, 1e-8);
            }
        }
    }
    for (const Vec2& x : m.nodes) EXPECT_GE(x.y(), m.tip_cutoff - 1e-14);
}

}  // namespace

TEST(GradedMesh, QuadraticProfileIsConforming) {
    const CuspDomain d = fixtures::quadratic_domain();
    const Mesh m = generate_graded_mesh(d, 0.2, 2.0);
    EXPECT_NEAR(m.tip_cutoff, 0.04, 1e-15);  // h0^lambda
    expect_valid(m, d, 15.0);
}

TEST(GradedMesh, OtherProfiles) {
    expect_valid(generate_graded_mesh(fixtures::cubic_domain(), 0.2, 2.0), fixtures::cubic_domain(), 15.0);
    const CuspDomain quartic = build_cusp_domain(make_power_profile(4.0, 0.25), 0.09);
    expect_valid(generate_graded_mesh(quartic, 0.2, 2.0), quartic, 15.0);
    const CuspDomain mild = build_cusp_domain(make_power_profile(1.5, 0.5), 0.0);
    expect_valid(generate_graded_mesh(mild, 0.15, 1.0), mild, 15.0);
}

TEST(GradedMesh, AreaEqualsBoundaryPolygon) {
    const CuspDomain d = fixtures::quadratic_domain();
    const Mesh m = generate_graded_mesh(d, 0.2, 2.0);
    EXPECT_NEAR(total_area(m), boundary_polygon_area(m), 1e-12);
    const double ref = fixtures::reference_area(CuspDomain(d.profile(), m.tip_cutoff));
    EXPECT_NEAR(total_area(m), ref, 1e-2 * ref);  // chords cut the cap
}

TEST(GradedMesh, GradingChangesNodeCount) {
    // The target size h0 * t^(g (lambda-1)/lambda) shrinks with g for t < 1, so a
    // larger exponent puts more nodes near the tip.
    const CuspDomain d = fixtures::quadratic_domain();
    const Mesh g1 = generate_graded_mesh(d, 0.1, 1.0);
    const Mesh g2 = generate_graded_mesh(d, 0.1, 2.0);
    EXPECT_GT(g2.num_nodes(), g1.num_nodes());
}

TEST(GradedMesh, TooSharpPeakReportsRegion) {
    const CuspDomain d = build_cusp_domain(make_power_profile(4.0, 0.25), 0.0);
    try {
        generate_graded_mesh(d, 0.2, 2.0);
        FAIL() << "meshing should fail with the default cutoff";
    } catch (const MeshingError& e) {
        EXPECT_NE(e.region().find("x2"), std::string::npos);
    }
}

TEST(GradedMesh, RejectsBadParameters) {
    const CuspDomain d = fixtures::quadratic_domain();
    EXPECT_THROW(generate_graded_mesh(d, 0.0, 2.0), InvalidArgument);
    EXPECT_THROW(generate_graded_mesh(d, 0.5, 2.0), InvalidArgument);
    EXPECT_THROW(generate_graded_mesh(d, 0.2, 0.5), InvalidArgument);
}

TEST(GradedMesh, Deterministic) {
    const CuspDomain d = fixtures::quadratic_domain();
    std::ostringstream a, b;
    write_mesh(a, generate_graded_mesh(d, 0.2, 2.0));
    write_mesh(b, generate_graded_mesh(d, 0.2, 2.0));
    EXPECT_EQ(a.str(), b.str());
}

TEST(Refine, QuadruplesTriangles) {
    const CuspDomain d = fixtures::quadratic_domain();
    const Mesh m0 = generate_graded_mesh(d, 0.2, 2.0);
    const Mesh m1 = refine(m0, d);
    const Mesh m2 = refine(m1, d);
    EXPECT_EQ(m1.num_triangles(), 4 * m0.num_triangles());
    EXPECT_EQ(m2.num_triangles(), 16 * m0.num_triangles());
    expect_valid(m1, d, 10.0);
    expect_valid(m2, d, 10.0);
    EXPECT_EQ(m1.tip_cutoff, m0.tip_cutoff);
}

TEST(Refine, ProjectedMidpointsOnPeak) {
    const CuspDomain d = fixtures::quadratic_domain();
    const Mesh m = refine(generate_graded_mesh(d, 0.2, 2.0), d);
    for (const auto& e : m.boundary_edges) {
        if (e.tag != SegmentTag::PeakLeft && e.tag != SegmentTag::PeakRight) continue;
        for (int k : e.nodes) {
            const Vec2& x = m.nodes[k];
            EXPECT_NEAR(std::abs(x.x()), d.profile()(x.y()), 1e-8);
        }
    }
}

TEST(Refine, AreaErrorDecreases) {
    const CuspDomain d = fixtures::quadratic_domain();
    Mesh m = generate_graded_mesh(d, 0.2, 2.0);
    const double ref = fixtures::reference_area(CuspDomain(d.profile(), m.tip_cutoff));
    double prev = std::abs(total_area(m) - ref);
    for (int level = 1; level <= 3; ++level) {
        m = refine(m, d);
        const double err = std::abs(total_area(m) - ref);
        EXPECT_LT(err, prev) << level;
        prev = err;
    }
}

TEST(Refine, ShapeRegularity) {
    const CuspDomain d = fixtures::cubic_domain();
    const Mesh m0 = generate_graded_mesh(d, 0.2, 2.0);
    const Mesh m1 = refine(m0, d);
    EXPECT_GE(min_angle_degrees(m1), std::min(min_angle_degrees(m0) - 1e-9, 10.0));
    EXPECT_GE(min_angle_degrees(m1), 10.0);
}

TEST(MeshIo, RoundTripIsByteIdentical) {
    const CuspDomain d = fixtures::cubic_domain();
    const Mesh m = generate_graded_mesh(d, 0.2, 2.0);
    std::ostringstream out;
    write_mesh(out, m);
    EXPECT_EQ(out.str().substr(0, 15), "cuspfem-mesh v1");
    std::istringstream in(out.str());
    const Mesh back = read_mesh(in);
    std::ostringstream again;
    write_mesh(again, back);
    EXPECT_EQ(out.str(), again.str());
    EXPECT_EQ(back.num_triangles(), m.num_triangles());
    EXPECT_NEAR(back.tip_cutoff, m.tip_cutoff, 1e-15);
}

TEST(MeshIo, RejectsGarbage) {
    std::istringstream in("not a mesh\n");
    EXPECT_THROW(read_mesh(in), InvalidArgument);
}

TEST(Renumber, PreservesConformity) {
    const CuspDomain d = fixtures::quadratic_domain();
    const Mesh m = generate_graded_mesh(d, 0.2, 2.0);
    std::vector<int> perm(m.num_nodes());
    std::iota(perm.begin(), perm.end(), 0);
    std::mt19937 rng(7);
    std::shuffle(perm.begin(), perm.end(), rng);
    const Mesh r = renumber(m, perm);
    EXPECT_FALSE(check_conformity(r).has_value());
    for (int i = 0; i < m.num_nodes(); ++i) EXPECT_EQ(r.nodes[perm[i]], m.nodes[i]);
    EXPECT_NEAR(total_area(r), total_area(m), 1e-14);
}

TEST(Conformity, DetectsBrokenMesh) {
    const CuspDomain d = fixtures::quadratic_domain();
    Mesh m = generate_graded_mesh(d, 0.2, 2.0);
    std::swap(m.triangles[0][0], m.triangles[0][1]);  // flip orientation
    EXPECT_TRUE(check_conformity(m).has_value());
}
