#include "delaunay.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "cuspfem/errors.hpp"

namespace cuspfem::detail {

namespace {

struct Triangle {
    std::array<int, 3> v;
    Vec2 center;
    double radius_sq;
    bool alive = true;
};

double orient(const Vec2& a, const Vec2& b, const Vec2& c) {
    return (b.x() - a.x()) * (c.y() - a.y()) - (b.y() - a.y()) * (c.x() - a.x());
}

Triangle make_triangle(const std::vector<Vec2>& pts, int a, int b, int c) {
    if (orient(pts[a], pts[b], pts[c]) < 0) std::swap(b, c);
    const Vec2& p = pts[a];
    const Vec2& q = pts[b];
    const Vec2& r = pts[c];
    const double d = 2.0 * orient(p, q, r);
    const double p2 = p.squaredNorm();
    const double q2 = q.squaredNorm();
    const double r2 = r.squaredNorm();
    Vec2 center((p2 * (q.y() - r.y()) + q2 * (r.y() - p.y()) + r2 * (p.y() - q.y())) / d,
                (p2 * (r.x() - q.x()) + q2 * (p.x() - r.x()) + r2 * (q.x() - p.x())) / d);
    return {{a, b, c}, center, (center - p).squaredNorm()};
}

}  // namespace

std::vector<std::array<int, 3>> delaunay_triangulate(const std::vector<Vec2>& points) {
    const int n = static_cast<int>(points.size());
    if (n < 3) throw MeshingError("delaunay: need at least three points", "cap");

    Vec2 lo = points.front();
    Vec2 hi = points.front();
    for (const auto& p : points) {
        lo = lo.cwiseMin(p);
        hi = hi.cwiseMax(p);
    }
    const Vec2 mid = 0.5 * (lo + hi);
    const double span = std::max(hi.x() - lo.x(), hi.y() - lo.y()) + 1.0;

    std::vector<Vec2> pts = points;
    pts.push_back(mid + Vec2(-40.0 * span, -30.0 * span));
    pts.push_back(mid + Vec2(40.0 * span, -30.0 * span));
    pts.push_back(mid + Vec2(0.0, 40.0 * span));

    std::vector<Triangle> tris{make_triangle(pts, n, n + 1, n + 2)};
    std::vector<std::array<int, 2>> edges;
    for (int i = 0; i < n; ++i) {
        const Vec2& p = pts[i];
        edges.clear();
        for (auto& t : tris) {
            if (!t.alive) continue;
            // cocircular points count as outside
            if ((p - t.center).squaredNorm() < t.radius_sq * (1.0 - 1e-12)) {
                t.alive = false;
                for (int k = 0; k < 3; ++k) edges.push_back({t.v[k], t.v[(k + 1) % 3]});
            }
        }
        // cavity boundary = edges seen exactly once
        std::vector<std::array<int, 2>> keyed;
        keyed.reserve(edges.size());
        for (const auto& e : edges) keyed.push_back({std::min(e[0], e[1]), std::max(e[0], e[1])});
        std::vector<std::size_t> order(edges.size());
        for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return keyed[a] < keyed[b]; });
        for (std::size_t k = 0; k < order.size();) {
            std::size_t m = k + 1;
            while (m < order.size() && keyed[order[m]] == keyed[order[k]]) ++m;
            if (m - k == 1) {
                const auto& e = edges[order[k]];
                if (std::abs(orient(pts[e[0]], pts[e[1]], p)) > 0.0) tris.push_back(make_triangle(pts, e[0], e[1], i));
            }
            k = m;
        }
        // compact occasionally
        if (tris.size() > 64 && i % 64 == 0) {
            std::erase_if(tris, [](const Triangle& t) { return !t.alive; });
        }
    }

    std::vector<std::array<int, 3>> out;
    for (const auto& t : tris) {
        if (!t.alive) continue;
        if (t.v[0] >= n || t.v[1] >= n || t.v[2] >= n) continue;
        out.push_back(t.v);
    }
    return out;
}

}  // namespace cuspfem::detail
