#pragma once

#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

namespace cuspfem {

using Vec2 = Eigen::Vector2d;

/// Cusp profile phi on [0, 1] with phi(0) = phi'(0) = 0 and 0 < phi' <= 1 on (0, 1].
class PeakProfile {
public:
    using Fn = std::function<double(double)>;

    /// Wraps an arbitrary profile; the invariants are checked on a sample grid.
    PeakProfile(std::string family, double lambda, double scale, Fn value, Fn derivative,
                Fn second_derivative = {});

    double operator()(double t) const { return value_(t); }
    double deriv(double t) const { return derivative_(t); }
    /// Throws if the profile was built without a second derivative.
    double second_deriv(double t) const;
    bool has_second_derivative() const { return static_cast<bool>(second_); }

    const std::string& family() const { return family_; }
    double lambda() const { return lambda_; }
    double scale() const { return scale_; }

private:
    std::string family_;
    double lambda_;
    double scale_;
    Fn value_;
    Fn derivative_;
    Fn second_;
};

/// phi(t) = scale * t^lambda.  Requires lambda > 1 (a genuine cusp) and scale * lambda <= 1.
PeakProfile make_power_profile(double lambda, double scale);

enum class SegmentTag { PeakRight, Cap, PeakLeft, TipCut };

std::string_view to_string(SegmentTag tag);
SegmentTag parse_segment_tag(std::string_view name);

/// Planar domain with an outward cusp at the origin:
///   peak  {0 < x2 < 1, |x1| < phi(x2)}
///   cap   {x2 >= 1, |x - c| < r}, the circle tangent to the peak sides at (+-phi(1), 1).
/// The boundary is C^1 except at the tip.  Everything below x2 = tip_cutoff is
/// discarded by the meshing and boundary-quadrature routines.
class CuspDomain {
public:
    CuspDomain(PeakProfile profile, double tip_cutoff);

    const PeakProfile& profile() const { return profile_; }
    double tip_cutoff() const { return tip_cutoff_; }

    /// Boundary weight xi extended by height: phi(x2) on the peak, phi(1) above it.
    double weight_at_height(double x2) const;
    /// Derivative of weight_at_height in x2 (one-sided phi'(1) is not used above the peak).
    double weight_derivative_at_height(double x2) const;

    /// Half width of the horizontal section at height x2 (0 outside the domain).
    double half_width(double x2) const;
    bool contains(const Vec2& x) const;
    double top_height() const { return cap_center_.y() + cap_radius_; }

    const Vec2& cap_center() const { return cap_center_; }
    double cap_radius() const { return cap_radius_; }
    /// The cap runs counter-clockwise from cap_start_angle() over cap_sweep() radians.
    double cap_start_angle() const { return cap_start_; }
    double cap_sweep() const { return cap_sweep_; }
    double cap_length() const { return cap_radius_ * cap_sweep_; }
    Vec2 cap_point(double angle) const;

    /// Point (+-phi(t), t) on a peak side.
    Vec2 peak_point(SegmentTag side, double t) const;
    /// Arc length of one peak side between heights t0 <= t1.
    double peak_arc_length(double t0, double t1) const;
    /// Length of the boundary of the truncated domain, excluding the tip cut.
    double boundary_length() const;

    /// Outward unit normal at a boundary point of the given segment.
    Vec2 outward_normal(const Vec2& x, SegmentTag tag) const;
    /// Midpoint of the boundary arc between two points of the same segment.
    Vec2 boundary_midpoint(const Vec2& a, const Vec2& b, SegmentTag tag) const;
    /// Signed residual of the boundary equation of `tag` (0 on the boundary).
    double boundary_residual(const Vec2& x, SegmentTag tag) const;

private:
    PeakProfile profile_;
    double tip_cutoff_;
    Vec2 cap_center_;
    double cap_radius_;
    double cap_start_;
    double cap_sweep_;
};

/// Requires 0 <= tip_cutoff < 0.1.
CuspDomain build_cusp_domain(PeakProfile profile, double tip_cutoff);

struct BoundaryPoint {
    Vec2 position;
    double arc_param = 0;
    SegmentTag segment = SegmentTag::Cap;
    double weight = 0;
};

struct BoundaryNode {
    BoundaryPoint point;
    double quad_weight = 0;
};

/// Midpoint-type boundary quadrature.  The boundary is cut into cells whose arc
/// length is weight / density (floored at 1e-2 * phi(1) / density near the tip);
/// each cell contributes its midpoint with the cell's exact arc length as weight.
/// Arc parameter starts at the bottom of the right peak side and runs counter-clockwise.
/// Requires density >= 4.
std::vector<BoundaryNode> boundary_quadrature(const CuspDomain& domain, int density);

/// Jacobian of the surface element over the chart x_{n-1} = sqrt(phi^2 - |x''|^2):
/// phi(t) * sqrt((1 + phi'(t)^2) / (phi(t)^2 - |x''|^2)).
double chart_surface_factor(const PeakProfile& profile, double t, double x_pp);

// JSON form: {"profile": {"family": "power", "lambda": <real>, "scale": <real>}, "tip_cutoff": <real>}
CuspDomain domain_from_json(const nlohmann::json& j);
nlohmann::json domain_to_json(const CuspDomain& domain);

/// CSV with columns arc_param,x1,x2,segment_tag,weight,quad_weight.
std::string boundary_quadrature_csv(const std::vector<BoundaryNode>& nodes);

}  // namespace cuspfem
