#include "cuspfem/decomposition.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "cuspfem/errors.hpp"

namespace cuspfem {

namespace {

double bump(double t) {
    if (std::abs(t) >= 1.0) return 0.0;
    return std::exp(-1.0 / (1.0 - t * t));
}

}  // namespace

MollifierPair make_standard_mollifiers() {
    MollifierPair m;
    const double ih = adaptive_integral(bump, -1.0, 1.0);
    m.c_h = 1.0 / ih;
    // K is the same bump moved to (1/2, 1) and squeezed by 4
    m.c_K = 4.0 / ih;
    const double ch = m.c_h;
    const double cK = m.c_K;
    m.h = [ch](double t) { return ch * bump(t); };
    m.K = [cK](double t) { return t <= 0.5 || t >= 1.0 ? 0.0 : cK * bump(4.0 * t - 3.0); };
    m.m_K = adaptive_integral([&](double s) { return s * m.K(s); }, 0.5, 1.0);
    return m;
}

AnalyticField::AnalyticField(const CuspDomain& domain, Expr expr, std::string name)
    : domain_(std::make_shared<const CuspDomain>(domain)),
      expr_(expr),
      dx1_(expr.diff(1)),
      dx2_(expr.diff(2)),
      name_(name.empty() ? expr.str() : std::move(name)) {}

double AnalyticField::value(const Vec2& x) const { return expr_.eval(expr_vars(*domain_, x)); }

Vec2 AnalyticField::gradient(const Vec2& x) const {
    const ExprVars v = expr_vars(*domain_, x);
    return Vec2(dx1_.eval(v), dx2_.eval(v));
}

P1Field::P1Field(std::shared_ptr<const Mesh> mesh, Eigen::VectorXd values, std::string name)
    : mesh_(std::move(mesh)), values_(std::move(values)), name_(std::move(name)) {
    if (!mesh_ || values_.size() != mesh_->num_nodes()) throw InvalidArgument("P1Field: values do not match the mesh");
    Vec2 hi = Vec2::Constant(-std::numeric_limits<double>::infinity());
    lo_ = Vec2::Constant(std::numeric_limits<double>::infinity());
    for (const Vec2& p : mesh_->nodes) {
        lo_ = lo_.cwiseMin(p);
        hi = hi.cwiseMax(p);
    }
    const int side = std::max(1, static_cast<int>(std::sqrt(static_cast<double>(mesh_->num_triangles())) / 2));
    nx_ = ny_ = side;
    cell_ = ((hi - lo_) / side).cwiseMax(Vec2::Constant(1e-300));
    buckets_.assign(static_cast<std::size_t>(nx_) * ny_, {});
    for (int t = 0; t < mesh_->num_triangles(); ++t) {
        Vec2 tlo = mesh_->nodes[mesh_->triangles[t][0]];
        Vec2 thi = tlo;
        for (int k = 1; k < 3; ++k) {
            tlo = tlo.cwiseMin(mesh_->nodes[mesh_->triangles[t][k]]);
            thi = thi.cwiseMax(mesh_->nodes[mesh_->triangles[t][k]]);
        }
        const int i0 = std::clamp(static_cast<int>((tlo.x() - lo_.x()) / cell_.x()), 0, nx_ - 1);
        const int i1 = std::clamp(static_cast<int>((thi.x() - lo_.x()) / cell_.x()), 0, nx_ - 1);
        const int j0 = std::clamp(static_cast<int>((tlo.y() - lo_.y()) / cell_.y()), 0, ny_ - 1);
        const int j1 = std::clamp(static_cast<int>((thi.y() - lo_.y()) / cell_.y()), 0, ny_ - 1);
        for (int j = j0; j <= j1; ++j) {
            for (int i = i0; i <= i1; ++i) buckets_[static_cast<std::size_t>(j) * nx_ + i].push_back(t);
        }
    }
}

std::array<double, 3> P1Field::barycentric(int tri, const Vec2& x) const {
    const auto& t = mesh_->triangles[tri];
    const Vec2& a = mesh_->nodes[t[0]];
    const Vec2& b = mesh_->nodes[t[1]];
    const Vec2& c = mesh_->nodes[t[2]];
    const double det = (b.x() - a.x()) * (c.y() - a.y()) - (b.y() - a.y()) * (c.x() - a.x());
    const double l1 = ((x.x() - a.x()) * (c.y() - a.y()) - (x.y() - a.y()) * (c.x() - a.x())) / det;
    const double l2 = ((b.x() - a.x()) * (x.y() - a.y()) - (b.y() - a.y()) * (x.x() - a.x())) / det;
    return {1.0 - l1 - l2, l1, l2};
}

int P1Field::locate(const Vec2& x) const {
    const int i = std::clamp(static_cast<int>((x.x() - lo_.x()) / cell_.x()), 0, nx_ - 1);
    const int j = std::clamp(static_cast<int>((x.y() - lo_.y()) / cell_.y()), 0, ny_ - 1);
    int best = -1;
    double best_violation = std::numeric_limits<double>::infinity();
    auto scan = [&](const std::vector<int>& cands) {
        for (int t : cands) {
            const auto l = barycentric(t, x);
            const double violation = -std::min({l[0], l[1], l[2]});
            if (violation < best_violation) {
                best_violation = violation;
                best = t;
            }
        }
    };
    scan(buckets_[static_cast<std::size_t>(j) * nx_ + i]);
    if (best_violation > 1e-12) {
        // outside every triangle of the bucket: fall back to the whole mesh
        std::vector<int> all(mesh_->num_triangles());
        for (int t = 0; t < mesh_->num_triangles(); ++t) all[t] = t;
        scan(all);
    }
    return best;
}

double P1Field::value(const Vec2& x) const {
    const int t = locate(x);
    const auto l = barycentric(t, x);
    const auto& tri = mesh_->triangles[t];
    return l[0] * values_[tri[0]] + l[1] * values_[tri[1]] + l[2] * values_[tri[2]];
}

Vec2 P1Field::gradient(const Vec2& x) const {
    const auto& tri = mesh_->triangles[locate(x)];
    const Vec2& a = mesh_->nodes[tri[0]];
    const Vec2 e1 = mesh_->nodes[tri[1]] - a;
    const Vec2 e2 = mesh_->nodes[tri[2]] - a;
    const double det = e1.x() * e2.y() - e1.y() * e2.x();
    const double d1 = values_[tri[1]] - values_[tri[0]];
    const double d2 = values_[tri[2]] - values_[tri[0]];
    return Vec2(d1 * e2.y() - d2 * e1.y(), d2 * e1.x() - d1 * e2.x()) / det;
}

std::unique_ptr<SampledField> make_field(const CuspDomain& domain, const std::string& spec) {
    if (spec.rfind("const:", 0) == 0) {
        const std::string number = spec.substr(6);
        std::size_t used = 0;
        double v = 0;
        try {
            v = std::stod(number, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used == 0 || used != number.size()) throw InvalidArgument("field '" + spec + "': bad constant");
        return std::make_unique<AnalyticField>(domain, Expr::constant(v), spec);
    }
    return std::make_unique<AnalyticField>(domain, Expr::parse(spec), spec);
}

double alpha_component(const SampledField& F, const CuspDomain& domain, const MollifierPair& moll, double x_n,
                       const WindowRule& rule) {
    const PeakProfile& profile = domain.profile();
    if (!(x_n > 0.0)) throw WindowOutOfDomain(fmt::format("alpha window at x_n = {} needs x_n > 0", x_n));
    const double phi = profile(x_n);
    if (!(x_n + phi < 1.0)) {
        throw WindowOutOfDomain(fmt::format("alpha window at x_n = {} reaches x_n + phi = {} >= 1", x_n, x_n + phi));
    }
    // Kernel weights are rescaled so the discrete rule reproduces constants to
    // round-off; the correction is below 1e-11 for the default rule.
    const Rule1D rs = composite_gauss(-1.0, 1.0, rule.order, rule.panels);
    const Rule1D rt = composite_gauss(0.5, 1.0, rule.order, rule.panels);
    std::vector<double> ws(rs.nodes.size()), wt(rt.nodes.size());
    double sum_s = 0, sum_t = 0;
    for (std::size_t a = 0; a < rs.nodes.size(); ++a) sum_s += ws[a] = rs.weights[a] * moll.h(rs.nodes[a]);
    for (std::size_t b = 0; b < rt.nodes.size(); ++b) sum_t += wt[b] = rt.weights[b] * moll.K(rt.nodes[b]);
    if (!(sum_s > 0.0) || !(sum_t > 0.0)) throw InvalidArgument("alpha_component: window rule misses the kernel support");
    double sum = 0;
    for (std::size_t b = 0; b < rt.nodes.size(); ++b) {
        if (wt[b] == 0.0) continue;
        const double zn = x_n + phi * rt.nodes[b];
        double row = 0;
        for (std::size_t a = 0; a < rs.nodes.size(); ++a) {
            if (ws[a] == 0.0) continue;
            row += ws[a] * F.value(Vec2(phi * rs.nodes[a], zn));
        }
        sum += wt[b] * row;
    }
    return sum / (sum_s * sum_t);
}

std::function<double(const Vec2&)> remainder(const SampledField& F, std::function<double(double)> alpha) {
    return [&F, alpha = std::move(alpha)](const Vec2& x) { return F.value(x) - alpha(x.y()); };
}

namespace {

// Integrates g(x, phi(t)) over the peak region; the callback receives the point and phi(t).
template <class G>
double peak_integral(const CuspDomain& domain, const PeakRegionRule& rule, G g) {
    if (!(rule.eps_low > 0.0) || !(rule.x_max > rule.eps_low)) throw InvalidArgument("peak region: need 0 < eps_low < x_max");
    if (rule.x_max > 1.0) throw InvalidArgument("peak region: x_max must be <= 1");
    const PeakProfile& profile = domain.profile();
    const Rule1D& rs = gauss_legendre(rule.s_order);
    const Rule1D& rt = gauss_legendre(rule.t_order);
    std::vector<double> cuts{rule.x_max};
    while (cuts.back() / 2.0 > rule.eps_low * 1.5) cuts.push_back(cuts.back() / 2.0);
    cuts.push_back(rule.eps_low);
    std::reverse(cuts.begin(), cuts.end());
    double total = 0;
    for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
        const double a = cuts[k];
        const double b = cuts[k + 1];
        for (std::size_t j = 0; j < rt.nodes.size(); ++j) {
            const double t = 0.5 * (a + b) + 0.5 * (b - a) * rt.nodes[j];
            const double phi = profile(t);
            double row = 0;
            for (std::size_t i = 0; i < rs.nodes.size(); ++i) row += rs.weights[i] * g(Vec2(rs.nodes[i] * phi, t), phi);
            total += 0.5 * (b - a) * rt.weights[j] * phi * row;
        }
    }
    return total;
}

}  // namespace

double peak_lp_norm(const std::function<double(const Vec2&)>& g, const CuspDomain& domain, double p,
                    const PeakRegionRule& rule) {
    if (!(p >= 1.0)) throw InvalidArgument("peak_lp_norm: p must be >= 1");
    const double s = peak_integral(domain, rule, [&](const Vec2& x, double) { return std::pow(std::abs(g(x)), p); });
    return std::pow(s, 1.0 / p);
}

double peak_w1p_norm(const SampledField& F, const CuspDomain& domain, double p, const PeakRegionRule& rule) {
    if (!(p >= 1.0)) throw InvalidArgument("peak_w1p_norm: p must be >= 1");
    const double v = peak_integral(domain, rule, [&](const Vec2& x, double) { return std::pow(std::abs(F.value(x)), p); });
    const double g = peak_integral(domain, rule, [&](const Vec2& x, double) { return std::pow(F.gradient(x).norm(), p); });
    return std::sqrt(std::pow(v, 2.0 / p) + std::pow(g, 2.0 / p));
}

DecompositionCheck check_decomposition_bound(const SampledField& F, const CuspDomain& domain, double p,
                                             const MollifierPair& moll, const PeakRegionRule& rule,
                                             const WindowRule& window) {
    if (!(p > 1.0) || !std::isfinite(p)) throw InvalidArgument("check_decomposition_bound: need 1 < p < infinity");
    DecompositionCheck out;
    out.field = F.name();
    out.p = p;
    out.eps_low = rule.eps_low;
    out.norm_F = peak_w1p_norm(F, domain, p, rule);
    double cached_t = std::numeric_limits<double>::quiet_NaN();
    double cached_alpha = 0;
    const double numerator = peak_integral(domain, rule, [&](const Vec2& x, double phi) {
        if (x.y() != cached_t) {
            cached_t = x.y();
            cached_alpha = alpha_component(F, domain, moll, x.y(), window);
        }
        const double r = F.value(x) - cached_alpha;
        return std::pow(std::abs(r / phi), p);
    });
    out.norm_phiinvR = std::pow(numerator, 1.0 / p);
    if (out.norm_F > 0.0) out.ratio = out.norm_phiinvR / out.norm_F;
    return out;
}

const std::vector<std::string>& decomposition_test_family() {
    static const std::vector<std::string> family{"1", "x2", "x1", "x2^2", "x1*x2", "sin(pi*x2)"};
    return family;
}

}  // namespace cuspfem
