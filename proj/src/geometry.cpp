#include "cuspfem/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <fmt/format.h>
#include <json.hpp>

#include "cuspfem/errors.hpp"
#include "cuspfem/quadrature.hpp"

namespace cuspfem {

namespace {

constexpr double kProfileTol = 1e-12;
// Cells near the tip are never shorter than this fraction of phi(1) / density.
constexpr double kTipFloorFraction = 1e-2;

double gauss_integral(const std::function<double(double)>& f, double a, double b, int order) {
    const Rule1D& rule = gauss_legendre(order);
    const double half = 0.5 * (b - a);
    const double mid = 0.5 * (a + b);
    double sum = 0;
    for (std::size_t i = 0; i < rule.nodes.size(); ++i) sum += rule.weights[i] * f(mid + half * rule.nodes[i]);
    return half * sum;
}

}  // namespace

PeakProfile::PeakProfile(std::string family, double lambda, double scale, Fn value, Fn derivative,
                         Fn second_derivative)
    : family_(std::move(family)), lambda_(lambda), scale_(scale), value_(std::move(value)),
      derivative_(std::move(derivative)), second_(std::move(second_derivative)) {
    if (!value_ || !derivative_) throw InvalidArgument("PeakProfile: value and derivative are required");
    if (std::abs(value_(0.0)) > kProfileTol || std::abs(derivative_(0.0)) > kProfileTol) {
        throw InvalidArgument("PeakProfile: not a cusp, phi(0) and phi'(0) must vanish");
    }
    constexpr int samples = 512;
    for (int k = 1; k <= samples; ++k) {
        const double t = static_cast<double>(k) / samples;
        const double d = derivative_(t);
        if (!(d > 0.0)) throw InvalidArgument(fmt::format("PeakProfile: phi'({}) = {} is not positive", t, d));
        if (d > 1.0 + kProfileTol) {
            throw InvalidArgument(fmt::format("PeakProfile: phi'({}) = {} exceeds 1", t, d));
        }
    }
}

double PeakProfile::second_deriv(double t) const {
    if (!second_) throw InvalidArgument("PeakProfile: second derivative not available for family " + family_);
    return second_(t);
}

PeakProfile make_power_profile(double lambda, double scale) {
    if (!(lambda > 1.0)) {
        throw InvalidArgument(fmt::format("not a cusp: lambda = {} gives phi'(0) != 0, need lambda > 1", lambda));
    }
    if (!(scale > 0.0)) throw InvalidArgument("power profile: scale must be positive");
    if (scale * lambda > 1.0 + kProfileTol) {
        throw InvalidArgument(fmt::format("power profile: scale * lambda = {} violates phi' <= 1", scale * lambda));
    }
    auto value = [=](double t) { return t <= 0.0 ? 0.0 : scale * std::pow(t, lambda); };
    auto deriv = [=](double t) { return t <= 0.0 ? 0.0 : scale * lambda * std::pow(t, lambda - 1.0); };
    auto second = [=](double t) {
        if (lambda == 2.0) return 2.0 * scale;
        return t <= 0.0 ? 0.0 : scale * lambda * (lambda - 1.0) * std::pow(t, lambda - 2.0);
    };
    return PeakProfile("power", lambda, scale, value, deriv, second);
}

std::string_view to_string(SegmentTag tag) {
    switch (tag) {
        case SegmentTag::PeakRight: return "peak_right";
        case SegmentTag::Cap: return "cap";
        case SegmentTag::PeakLeft: return "peak_left";
        case SegmentTag::TipCut: return "tip_cut";
    }
    return "unknown";
}

SegmentTag parse_segment_tag(std::string_view name) {
    if (name == "peak_right") return SegmentTag::PeakRight;
    if (name == "cap") return SegmentTag::Cap;
    if (name == "peak_left") return SegmentTag::PeakLeft;
    if (name == "tip_cut") return SegmentTag::TipCut;
    throw InvalidArgument(fmt::format("unknown segment tag '{}'", name));
}

CuspDomain::CuspDomain(PeakProfile profile, double tip_cutoff)
    : profile_(std::move(profile)), tip_cutoff_(tip_cutoff) {
    const double top = profile_(1.0);
    const double slope = profile_.deriv(1.0);
    // The circle through (+-phi(1), 1) whose tangent there is (+-phi'(1), 1).
    cap_center_ = Vec2(0.0, 1.0 + top * slope);
    cap_radius_ = top * std::sqrt(1.0 + slope * slope);
    const double beta = std::atan(slope);
    cap_start_ = -beta;
    cap_sweep_ = std::numbers::pi + 2.0 * beta;
}

double CuspDomain::weight_at_height(double x2) const {
    if (x2 <= 0.0) return 0.0;
    if (x2 < 1.0) return profile_(x2);
    return profile_(1.0);
}

double CuspDomain::weight_derivative_at_height(double x2) const {
    if (x2 <= 0.0 || x2 >= 1.0) return 0.0;
    return profile_.deriv(x2);
}

double CuspDomain::half_width(double x2) const {
    if (x2 <= 0.0 || x2 >= top_height()) return 0.0;
    if (x2 < 1.0) return profile_(x2);
    const double dy = x2 - cap_center_.y();
    return std::sqrt(std::max(0.0, cap_radius_ * cap_radius_ - dy * dy));
}

bool CuspDomain::contains(const Vec2& x) const { return std::abs(x.x()) < half_width(x.y()); }

Vec2 CuspDomain::cap_point(double angle) const {
    return cap_center_ + cap_radius_ * Vec2(std::cos(angle), std::sin(angle));
}

Vec2 CuspDomain::peak_point(SegmentTag side, double t) const {
    const double w = profile_(t);
    return side == SegmentTag::PeakLeft ? Vec2(-w, t) : Vec2(w, t);
}

double CuspDomain::peak_arc_length(double t0, double t1) const {
    auto element = [this](double t) {
        const double d = profile_.deriv(t);
        return std::sqrt(1.0 + d * d);
    };
    // geometric panels resolve a possibly non-smooth phi' at the tip
    double total = 0;
    double hi = t1;
    while (hi > t0) {
        double lo = std::max(t0, 0.5 * hi);
        if (lo < 1e-12) lo = t0;
        total += gauss_integral(element, lo, hi, 16);
        hi = lo;
    }
    return total;
}

double CuspDomain::boundary_length() const {
    return 2.0 * peak_arc_length(tip_cutoff_, 1.0) + cap_length();
}

Vec2 CuspDomain::outward_normal(const Vec2& x, SegmentTag tag) const {
    switch (tag) {
        case SegmentTag::PeakRight:
        case SegmentTag::PeakLeft: {
            const double d = profile_.deriv(x.y());
            const double side = tag == SegmentTag::PeakRight ? 1.0 : -1.0;
            return Vec2(side, -d) / std::sqrt(1.0 + d * d);
        }
        case SegmentTag::Cap: return (x - cap_center_).normalized();
        case SegmentTag::TipCut: return Vec2(0.0, -1.0);
    }
    return Vec2::Zero();
}

Vec2 CuspDomain::boundary_midpoint(const Vec2& a, const Vec2& b, SegmentTag tag) const {
    switch (tag) {
        case SegmentTag::PeakRight:
        case SegmentTag::PeakLeft: return peak_point(tag, 0.5 * (a.y() + b.y()));
        case SegmentTag::Cap: {
            auto angle = [this](const Vec2& p) {
                double th = std::atan2(p.y() - cap_center_.y(), p.x() - cap_center_.x());
                if (th < -0.5 * std::numbers::pi) th += 2.0 * std::numbers::pi;
                return th;
            };
            return cap_point(0.5 * (angle(a) + angle(b)));
        }
        case SegmentTag::TipCut: return 0.5 * (a + b);
    }
    return 0.5 * (a + b);
}

double CuspDomain::boundary_residual(const Vec2& x, SegmentTag tag) const {
    switch (tag) {
        case SegmentTag::PeakRight:
        case SegmentTag::PeakLeft: return std::abs(x.x()) - profile_(x.y());
        case SegmentTag::Cap: return (x - cap_center_).norm() - cap_radius_;
        case SegmentTag::TipCut: return x.y() - tip_cutoff_;
    }
    return 0;
}

CuspDomain build_cusp_domain(PeakProfile profile, double tip_cutoff) {
    if (!(tip_cutoff >= 0.0 && tip_cutoff < 0.1)) {
        throw InvalidArgument(fmt::format("build_cusp_domain: tip_cutoff = {} outside [0, 0.1)", tip_cutoff));
    }
    return CuspDomain(std::move(profile), tip_cutoff);
}

std::vector<BoundaryNode> boundary_quadrature(const CuspDomain& domain, int density) {
    if (density < 4) throw InvalidArgument("boundary_quadrature: density must be >= 4");
    const PeakProfile& phi = domain.profile();
    const double n = density;
    const double floor_len = kTipFloorFraction * phi(1.0) / n;
    const double t_min = domain.tip_cutoff();

    // Cell breakpoints of one peak side, built from the top down.
    std::vector<double> breaks{1.0};
    for (double t = 1.0; t > t_min;) {
        const double ds = std::max(phi(t) / n, floor_len);
        const double d = phi.deriv(t);
        double next = t - ds / std::sqrt(1.0 + d * d);
        if (next <= t_min) next = t_min;
        breaks.push_back(next);
        t = next;
    }
    std::reverse(breaks.begin(), breaks.end());  // ascending heights

    std::vector<BoundaryNode> out;
    double arc = 0;
    auto add_peak_cell = [&](SegmentTag side, double lo, double hi) {
        const double len = domain.peak_arc_length(lo, hi);
        const double mid = 0.5 * (lo + hi);
        BoundaryNode node;
        node.point.position = domain.peak_point(side, mid);
        node.point.arc_param = arc + 0.5 * len;
        node.point.segment = side;
        node.point.weight = phi(mid);
        node.quad_weight = len;
        out.push_back(node);
        arc += len;
    };

    for (std::size_t k = 0; k + 1 < breaks.size(); ++k) add_peak_cell(SegmentTag::PeakRight, breaks[k], breaks[k + 1]);

    const double cap_w = phi(1.0);
    const int cap_cells = static_cast<int>(std::ceil(domain.cap_length() / (cap_w / n)));
    const double dtheta = domain.cap_sweep() / cap_cells;
    for (int k = 0; k < cap_cells; ++k) {
        const double len = domain.cap_radius() * dtheta;
        BoundaryNode node;
        node.point.position = domain.cap_point(domain.cap_start_angle() + (k + 0.5) * dtheta);
        node.point.arc_param = arc + 0.5 * len;
        node.point.segment = SegmentTag::Cap;
        node.point.weight = cap_w;
        node.quad_weight = len;
        out.push_back(node);
        arc += len;
    }

    for (std::size_t k = breaks.size() - 1; k > 0; --k) add_peak_cell(SegmentTag::PeakLeft, breaks[k - 1], breaks[k]);
    return out;
}

double chart_surface_factor(const PeakProfile& profile, double t, double x_pp) {
    const double w = profile(t);
    const double d = profile.deriv(t);
    return w * std::sqrt((1.0 + d * d) / (w * w - x_pp * x_pp));
}

CuspDomain domain_from_json(const nlohmann::json& j) {
    auto field = [](const nlohmann::json& obj, const char* key, const std::string& path) -> const nlohmann::json& {
        if (!obj.is_object() || !obj.contains(key)) throw InvalidArgument("missing field '" + path + key + "'");
        return obj.at(key);
    };
    const auto& prof = field(j, "profile", "domain.");
    const auto& family = field(prof, "family", "domain.profile.");
    if (!family.is_string() || family.get<std::string>() != "power") {
        throw InvalidArgument("field 'domain.profile.family' must be \"power\"");
    }
    const auto& lambda = field(prof, "lambda", "domain.profile.");
    const auto& scale = field(prof, "scale", "domain.profile.");
    if (!lambda.is_number()) throw InvalidArgument("field 'domain.profile.lambda' must be a number");
    if (!scale.is_number()) throw InvalidArgument("field 'domain.profile.scale' must be a number");
    double cutoff = 0;
    if (j.contains("tip_cutoff")) {
        if (!j.at("tip_cutoff").is_number()) throw InvalidArgument("field 'domain.tip_cutoff' must be a number");
        cutoff = j.at("tip_cutoff").get<double>();
    }
    return build_cusp_domain(make_power_profile(lambda.get<double>(), scale.get<double>()), cutoff);
}

nlohmann::json domain_to_json(const CuspDomain& domain) {
    const auto& p = domain.profile();
    return {{"profile", {{"family", p.family()}, {"lambda", p.lambda()}, {"scale", p.scale()}}},
            {"tip_cutoff", domain.tip_cutoff()}};
}

std::string boundary_quadrature_csv(const std::vector<BoundaryNode>& nodes) {
    std::string out = "arc_param,x1,x2,segment_tag,weight,quad_weight\n";
    for (const auto& n : nodes) {
        out += fmt::format("{:.17g},{:.17g},{:.17g},{},{:.17g},{:.17g}\n", n.point.arc_param, n.point.position.x(),
                           n.point.position.y(), to_string(n.point.segment), n.point.weight, n.quad_weight);
    }
    return out;
}

}  // namespace cuspfem
