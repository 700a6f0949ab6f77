#include "cuspfem/quadrature.hpp"

#include <cmath>
#include <map>
#include <mutex>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/legendre.hpp>

#include "cuspfem/errors.hpp"

namespace cuspfem {

namespace {

Rule1D build_gauss_legendre(int order) {
    Rule1D rule;
    const auto positive = boost::math::legendre_p_zeros<double>(order);
    for (auto it = positive.rbegin(); it != positive.rend(); ++it) {
        if (*it == 0.0) continue;
        rule.nodes.push_back(-*it);
    }
    if (order % 2 == 1) rule.nodes.push_back(0.0);
    for (double x : positive) {
        if (x != 0.0) rule.nodes.push_back(x);
    }
    rule.weights.reserve(rule.nodes.size());
    for (double x : rule.nodes) {
        const double dp = boost::math::legendre_p_prime(order, x);
        rule.weights.push_back(2.0 / ((1.0 - x * x) * dp * dp));
    }
    return rule;
}

std::vector<TriangleQPoint> symmetric_orbit(double a, double w) {
    // barycentric (a, a, 1 - 2a) and its permutations
    const double b = 1.0 - 2.0 * a;
    return {{a, a, w}, {b, a, w}, {a, b, w}};
}

}  // namespace

const Rule1D& gauss_legendre(int order) {
    if (order < 1 || order > 128) throw InvalidArgument("gauss_legendre: order must be in [1, 128]");
    static std::mutex guard;
    static std::map<int, Rule1D> cache;
    std::lock_guard lock(guard);
    auto it = cache.find(order);
    if (it == cache.end()) it = cache.emplace(order, build_gauss_legendre(order)).first;
    return it->second;
}

Rule1D composite_gauss(double a, double b, int order, int panels) {
    if (panels < 1) throw InvalidArgument("composite_gauss: panels must be >= 1");
    const Rule1D& ref = gauss_legendre(order);
    Rule1D out;
    out.nodes.reserve(static_cast<std::size_t>(order * panels));
    out.weights.reserve(out.nodes.capacity());
    const double width = (b - a) / panels;
    for (int p = 0; p < panels; ++p) {
        const double lo = a + p * width;
        const double half = 0.5 * width;
        for (std::size_t i = 0; i < ref.nodes.size(); ++i) {
            out.nodes.push_back(lo + half * (ref.nodes[i] + 1.0));
            out.weights.push_back(half * ref.weights[i]);
        }
    }
    return out;
}

const std::vector<TriangleQPoint>& triangle_rule(int degree) {
    static const std::vector<TriangleQPoint> centroid{{1.0 / 3.0, 1.0 / 3.0, 0.5}};
    static const std::vector<TriangleQPoint> deg2 = [] {
        return symmetric_orbit(1.0 / 6.0, 1.0 / 6.0);
    }();
    // Dunavant degree-4 rule: two orbits, all weights positive.
    static const std::vector<TriangleQPoint> deg4 = [] {
        auto pts = symmetric_orbit(0.445948490915965, 0.5 * 0.223381589678011);
        auto second = symmetric_orbit(0.091576213509771, 0.5 * 0.109951743655322);
        pts.insert(pts.end(), second.begin(), second.end());
        return pts;
    }();
    static const std::vector<TriangleQPoint> deg5 = [] {
        std::vector<TriangleQPoint> pts{{1.0 / 3.0, 1.0 / 3.0, 0.5 * 0.225}};
        auto o1 = symmetric_orbit(0.470142064105115, 0.5 * 0.132394152788506);
        auto o2 = symmetric_orbit(0.101286507323456, 0.5 * 0.125939180544827);
        pts.insert(pts.end(), o1.begin(), o1.end());
        pts.insert(pts.end(), o2.begin(), o2.end());
        return pts;
    }();
    switch (degree) {
        case 1: return centroid;
        case 2: return deg2;
        case 3:
        case 4: return deg4;
        case 5: return deg5;
        default: throw InvalidArgument("triangle_rule: supported degrees are 1..5");
    }
}

double adaptive_integral(const std::function<double(double)>& f, double a, double b,
                         double tolerance, int max_depth) {
    return boost::math::quadrature::gauss_kronrod<double, 15>::integrate(
        f, a, b, static_cast<unsigned>(max_depth), tolerance);
}

}  // namespace cuspfem
