#include "cuspfem/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <numbers>
#include <ostream>
#include <sstream>

#include <fmt/format.h>

#include "cuspfem/errors.hpp"
#include "delaunay.hpp"

namespace cuspfem {

namespace {

constexpr int kMaxRows = 200000;
constexpr double kMinAngle = 15.0;

double triangle_min_angle(const Vec2& a, const Vec2& b, const Vec2& c) {
    auto angle = [](const Vec2& p, const Vec2& q, const Vec2& r) {
        const Vec2 u = q - p;
        const Vec2 v = r - p;
        return std::atan2(std::abs(u.x() * v.y() - u.y() * v.x()), u.dot(v));
    };
    const double m = std::min({angle(a, b, c), angle(b, c, a), angle(c, a, b)});
    return m * 180.0 / std::numbers::pi;
}

double orient(const Vec2& a, const Vec2& b, const Vec2& c) {
    return (b.x() - a.x()) * (c.y() - a.y()) - (b.y() - a.y()) * (c.x() - a.x());
}

struct RowLayout {
    std::vector<double> heights;
    std::vector<int> segments;
};

// Row heights of the mapped strip, equidistributing dt / H(t) between the tip cut and x2 = 1.
RowLayout layout_rows(const PeakProfile& phi, double cutoff, double h0, double exponent) {
    auto target = [&](double t) { return h0 * std::pow(t, exponent); };
    auto spacing = [&](double t) { return std::min(target(t), 2.0 * phi(t)); };

    constexpr int grid = 8000;
    std::vector<double> log_t(grid + 1);
    std::vector<double> cumulative(grid + 1, 0.0);
    const double l0 = std::log(cutoff);
    for (int i = 0; i <= grid; ++i) log_t[i] = l0 * (1.0 - static_cast<double>(i) / grid);
    for (int i = 1; i <= grid; ++i) {
        // dt / H = t / H d(log t), trapezoidal in log t
        const double ta = std::exp(log_t[i - 1]);
        const double tb = std::exp(log_t[i]);
        const double fa = ta / spacing(ta);
        const double fb = tb / spacing(tb);
        cumulative[i] = cumulative[i - 1] + 0.5 * (fa + fb) * (log_t[i] - log_t[i - 1]);
    }
    const double total = cumulative.back();
    if (total > kMaxRows) {
        double t_star = cutoff;
        for (int i = 0; i <= grid; ++i) {
            const double t = std::exp(log_t[i]);
            if (target(t) <= 2.0 * phi(t)) {
                t_star = t;
                break;
            }
        }
        throw MeshingError(fmt::format("peak too sharp for h0 = {}: {:.0f} element rows needed; reduce h0 or "
                                       "raise the tip cutoff",
                                       h0, total),
                           fmt::format("x2 in [{:.3g}, {:.3g}]", cutoff, t_star));
    }
    const int rows = std::max(2, static_cast<int>(std::ceil(total)));

    RowLayout layout;
    layout.heights.resize(rows + 1);
    layout.heights.front() = cutoff;
    layout.heights.back() = 1.0;
    int seg = 1;
    for (int k = 1; k < rows; ++k) {
        const double u = total * k / rows;
        while (cumulative[seg] < u) ++seg;
        const double frac = (u - cumulative[seg - 1]) / (cumulative[seg] - cumulative[seg - 1]);
        layout.heights[k] = std::exp(log_t[seg - 1] + frac * (log_t[seg] - log_t[seg - 1]));
    }
    for (double t : layout.heights) {
        layout.segments.push_back(std::max(1, static_cast<int>(std::lround(2.0 * phi(t) / target(t)))));
    }
    return layout;
}

// Triangulates the band between two node rows ordered left to right.
void zip_rows(const std::vector<Vec2>& nodes, const std::vector<int>& lower, const std::vector<int>& upper,
              std::vector<std::array<int, 3>>& out) {
    std::size_t i = 0;
    std::size_t j = 0;
    while (i + 1 < lower.size() || j + 1 < upper.size()) {
        bool advance_lower;
        if (i + 1 == lower.size()) {
            advance_lower = false;
        } else if (j + 1 == upper.size()) {
            advance_lower = true;
        } else {
            const double q_lower = triangle_min_angle(nodes[lower[i]], nodes[lower[i + 1]], nodes[upper[j]]);
            const double q_upper = triangle_min_angle(nodes[lower[i]], nodes[upper[j + 1]], nodes[upper[j]]);
            advance_lower = q_lower >= q_upper;
        }
        if (advance_lower) {
            out.push_back({lower[i], lower[i + 1], upper[j]});
            ++i;
        } else {
            out.push_back({lower[i], upper[j + 1], upper[j]});
            ++j;
        }
    }
}

bool inside_cap(const CuspDomain& domain, const Vec2& p, double clearance) {
    return p.y() - 1.0 >= clearance && domain.cap_radius() - (p - domain.cap_center()).norm() >= clearance;
}

}  // namespace

Mesh generate_graded_mesh(const CuspDomain& domain, double h0, double grading_exponent) {
    if (!(h0 > 0.0 && h0 < 0.5)) throw InvalidArgument(fmt::format("generate_graded_mesh: h0 = {} outside (0, 0.5)", h0));
    if (!(grading_exponent >= 1.0)) throw InvalidArgument("generate_graded_mesh: grading exponent must be >= 1");

    const PeakProfile& phi = domain.profile();
    const double lambda = phi.lambda();
    const double cutoff = domain.tip_cutoff() > 0.0 ? domain.tip_cutoff() : std::pow(h0, lambda);
    const double exponent = grading_exponent * (lambda - 1.0) / lambda;

    Mesh mesh;
    mesh.grading_exponent = grading_exponent;
    mesh.tip_cutoff = cutoff;

    // Peak: rows of the strip {|s| < 1, cutoff < t < 1}, x1 = s * phi(t).
    const RowLayout layout = layout_rows(phi, cutoff, h0, exponent);
    std::vector<std::vector<int>> rows;
    for (std::size_t k = 0; k < layout.heights.size(); ++k) {
        const double t = layout.heights[k];
        const double w = phi(t);
        const int segs = layout.segments[k];
        std::vector<int> row;
        for (int i = 0; i <= segs; ++i) {
            const double s = -1.0 + 2.0 * i / segs;
            // endpoints exactly on the boundary
            const double x1 = i == 0 ? -w : (i == segs ? w : s * w);
            row.push_back(mesh.num_nodes());
            mesh.nodes.emplace_back(x1, t);
        }
        rows.push_back(std::move(row));
    }
    for (std::size_t k = 0; k + 1 < rows.size(); ++k) zip_rows(mesh.nodes, rows[k], rows[k + 1], mesh.triangles);

    // Cap: boundary nodes on the arc, hexagonal interior points, Delaunay.
    const std::vector<int>& chord = rows.back();
    const int arc_segments = std::max(3, static_cast<int>(std::ceil(domain.cap_length() / h0)));
    std::vector<int> arc{chord.back()};
    for (int k = 1; k < arc_segments; ++k) {
        const double angle = domain.cap_start_angle() + domain.cap_sweep() * k / arc_segments;
        arc.push_back(mesh.num_nodes());
        mesh.nodes.push_back(domain.cap_point(angle));
    }
    arc.push_back(chord.front());

    const int first_interior = mesh.num_nodes();
    const double dy = h0 * std::sqrt(3.0) / 2.0;
    const double clearance = 0.5 * h0;
    const double r = domain.cap_radius();
    for (int j = 1; 1.0 + j * dy < domain.top_height(); ++j) {
        const double y = 1.0 + j * dy;
        const double shift = (j % 2 == 1) ? 0.5 * h0 : 0.0;
        const int span = static_cast<int>(std::ceil(r / h0)) + 1;
        for (int i = -span; i <= span; ++i) {
            const Vec2 p(i * h0 + shift, y);
            if (inside_cap(domain, p, clearance)) mesh.nodes.push_back(p);
        }
    }

    // Chord interior nodes go last: each then splits an existing hull edge.
    std::vector<int> cap_nodes{chord.front(), chord.back()};
    cap_nodes.insert(cap_nodes.end(), arc.begin() + 1, arc.end() - 1);
    for (int i = first_interior; i < mesh.num_nodes(); ++i) cap_nodes.push_back(i);
    cap_nodes.insert(cap_nodes.end(), chord.begin() + 1, chord.end() - 1);

    auto triangulate_cap = [&]() {
        std::vector<Vec2> local;
        local.reserve(cap_nodes.size());
        for (int idx : cap_nodes) local.push_back(mesh.nodes[idx]);
        auto tris = detail::delaunay_triangulate(local);
        for (auto& t : tris) t = {cap_nodes[t[0]], cap_nodes[t[1]], cap_nodes[t[2]]};
        return tris;
    };
    auto cap_tris = triangulate_cap();

    // Laplacian smoothing of interior cap points, then re-triangulate.
    std::vector<std::vector<int>> neighbours(mesh.nodes.size());
    for (const auto& t : cap_tris) {
        for (int k = 0; k < 3; ++k) {
            neighbours[t[k]].push_back(t[(k + 1) % 3]);
            neighbours[t[k]].push_back(t[(k + 2) % 3]);
        }
    }
    for (auto& nb : neighbours) {
        std::sort(nb.begin(), nb.end());
        nb.erase(std::unique(nb.begin(), nb.end()), nb.end());
    }
    for (int sweep = 0; sweep < 6; ++sweep) {
        for (int i = first_interior; i < mesh.num_nodes(); ++i) {
            Vec2 avg = Vec2::Zero();
            for (int nb : neighbours[i]) avg += mesh.nodes[nb];
            avg /= static_cast<double>(neighbours[i].size());
            if (inside_cap(domain, avg, 0.25 * h0)) mesh.nodes[i] = avg;
        }
    }
    cap_tris = triangulate_cap();
    for (const auto& t : cap_tris) {
        if (std::abs(orient(mesh.nodes[t[0]], mesh.nodes[t[1]], mesh.nodes[t[2]])) < 1e-14 * h0 * h0) {
            throw MeshingError("degenerate cap triangle", "cap");
        }
    }
    mesh.triangles.insert(mesh.triangles.end(), cap_tris.begin(), cap_tris.end());

    // Boundary loop, counter-clockwise from the bottom right corner.
    for (std::size_t k = 0; k + 1 < rows.size(); ++k) {
        mesh.boundary_edges.push_back({{rows[k].back(), rows[k + 1].back()}, SegmentTag::PeakRight});
    }
    for (std::size_t k = 0; k + 1 < arc.size(); ++k) mesh.boundary_edges.push_back({{arc[k], arc[k + 1]}, SegmentTag::Cap});
    for (std::size_t k = rows.size() - 1; k > 0; --k) {
        mesh.boundary_edges.push_back({{rows[k].front(), rows[k - 1].front()}, SegmentTag::PeakLeft});
    }
    for (std::size_t i = 0; i + 1 < rows.front().size(); ++i) {
        mesh.boundary_edges.push_back({{rows.front()[i], rows.front()[i + 1]}, SegmentTag::TipCut});
    }

    if (auto problem = check_conformity(mesh)) throw MeshingError("generated mesh is not conforming: " + *problem, "all");
    const double quality = min_angle_degrees(mesh);
    if (quality < kMinAngle) {
        // locate the offending element for the report
        int worst = 0;
        double worst_angle = 180.0;
        for (int k = 0; k < mesh.num_triangles(); ++k) {
            const auto& t = mesh.triangles[k];
            const double a = triangle_min_angle(mesh.nodes[t[0]], mesh.nodes[t[1]], mesh.nodes[t[2]]);
            if (a < worst_angle) {
                worst_angle = a;
                worst = k;
            }
        }
        const auto& t = mesh.triangles[worst];
        const Vec2 c = (mesh.nodes[t[0]] + mesh.nodes[t[1]] + mesh.nodes[t[2]]) / 3.0;
        throw MeshingError(fmt::format("minimum angle {:.2f} deg below {} deg", quality, kMinAngle),
                           fmt::format("near ({:.4g}, {:.4g})", c.x(), c.y()));
    }
    return mesh;
}

Mesh refine(const Mesh& mesh, const CuspDomain& domain) {
    Mesh out;
    out.nodes = mesh.nodes;
    out.grading_exponent = mesh.grading_exponent;
    out.tip_cutoff = mesh.tip_cutoff;

    std::map<std::pair<int, int>, SegmentTag> boundary_tag;
    for (const auto& e : mesh.boundary_edges) {
        boundary_tag[{std::min(e.nodes[0], e.nodes[1]), std::max(e.nodes[0], e.nodes[1])}] = e.tag;
    }
    std::map<std::pair<int, int>, int> midpoint;
    auto mid = [&](int a, int b) {
        const std::pair<int, int> key{std::min(a, b), std::max(a, b)};
        auto it = midpoint.find(key);
        if (it != midpoint.end()) return it->second;
        Vec2 p = 0.5 * (mesh.nodes[a] + mesh.nodes[b]);
        if (auto tag = boundary_tag.find(key); tag != boundary_tag.end()) {
            p = domain.boundary_midpoint(mesh.nodes[a], mesh.nodes[b], tag->second);
        }
        const int idx = out.num_nodes();
        out.nodes.push_back(p);
        midpoint.emplace(key, idx);
        return idx;
    };

    out.triangles.reserve(4 * mesh.triangles.size());
    for (const auto& t : mesh.triangles) {
        const int ab = mid(t[0], t[1]);
        const int bc = mid(t[1], t[2]);
        const int ca = mid(t[2], t[0]);
        out.triangles.push_back({t[0], ab, ca});
        out.triangles.push_back({ab, t[1], bc});
        out.triangles.push_back({ca, bc, t[2]});
        out.triangles.push_back({ab, bc, ca});
    }
    for (const auto& e : mesh.boundary_edges) {
        const int m = mid(e.nodes[0], e.nodes[1]);
        out.boundary_edges.push_back({{e.nodes[0], m}, e.tag});
        out.boundary_edges.push_back({{m, e.nodes[1]}, e.tag});
    }
    return out;
}

double signed_area(const Mesh& mesh, int triangle) {
    const auto& t = mesh.triangles[triangle];
    return 0.5 * orient(mesh.nodes[t[0]], mesh.nodes[t[1]], mesh.nodes[t[2]]);
}

double total_area(const Mesh& mesh) {
    double sum = 0;
    for (int k = 0; k < mesh.num_triangles(); ++k) sum += signed_area(mesh, k);
    return sum;
}

double min_angle_degrees(const Mesh& mesh) {
    double m = 180.0;
    for (const auto& t : mesh.triangles) {
        m = std::min(m, triangle_min_angle(mesh.nodes[t[0]], mesh.nodes[t[1]], mesh.nodes[t[2]]));
    }
    return m;
}

double max_edge_length(const Mesh& mesh) {
    double h = 0;
    for (const auto& t : mesh.triangles) {
        for (int k = 0; k < 3; ++k) h = std::max(h, (mesh.nodes[t[k]] - mesh.nodes[t[(k + 1) % 3]]).norm());
    }
    return h;
}

double boundary_polygon_area(const Mesh& mesh) {
    double sum = 0;
    for (const auto& e : mesh.boundary_edges) {
        const Vec2& a = mesh.nodes[e.nodes[0]];
        const Vec2& b = mesh.nodes[e.nodes[1]];
        sum += a.x() * b.y() - b.x() * a.y();
    }
    return 0.5 * sum;
}

std::optional<std::string> check_conformity(const Mesh& mesh) {
    const int n = mesh.num_nodes();
    std::vector<char> used(n, 0);
    std::map<std::pair<int, int>, int> directed;
    for (int k = 0; k < mesh.num_triangles(); ++k) {
        const auto& t = mesh.triangles[k];
        for (int v : t) {
            if (v < 0 || v >= n) return fmt::format("triangle {} references missing node {}", k, v);
            used[v] = 1;
        }
        if (!(signed_area(mesh, k) > 0.0)) return fmt::format("triangle {} has non-positive area", k);
        for (int e = 0; e < 3; ++e) {
            if (++directed[{t[e], t[(e + 1) % 3]}] > 1) {
                return fmt::format("edge ({}, {}) used twice with the same orientation", t[e], t[(e + 1) % 3]);
            }
        }
    }
    for (int v = 0; v < n; ++v) {
        if (!used[v]) return fmt::format("node {} belongs to no triangle", v);
    }
    std::map<std::pair<int, int>, int> open;
    for (const auto& [edge, count] : directed) {
        if (!directed.contains({edge.second, edge.first})) open.emplace(edge, 0);
    }
    if (open.size() != mesh.boundary_edges.size()) {
        return fmt::format("{} free triangle edges but {} listed boundary edges", open.size(),
                           mesh.boundary_edges.size());
    }
    std::map<int, int> successor;
    for (const auto& e : mesh.boundary_edges) {
        auto it = open.find({e.nodes[0], e.nodes[1]});
        if (it == open.end()) return fmt::format("boundary edge ({}, {}) is not a free edge", e.nodes[0], e.nodes[1]);
        if (!successor.emplace(e.nodes[0], e.nodes[1]).second) return "boundary is not a simple loop";
    }
    if (!mesh.boundary_edges.empty()) {
        int start = mesh.boundary_edges.front().nodes[0];
        int v = start;
        std::size_t steps = 0;
        do {
            auto it = successor.find(v);
            if (it == successor.end()) return "boundary loop is open";
            v = it->second;
            ++steps;
        } while (v != start && steps <= mesh.boundary_edges.size());
        if (steps != mesh.boundary_edges.size()) return "boundary consists of more than one loop";
    }
    const double area = total_area(mesh);
    if (std::abs(area - boundary_polygon_area(mesh)) > 1e-10 * std::max(1.0, area)) {
        return "triangles overlap: covered area differs from the boundary polygon area";
    }
    return std::nullopt;
}

std::vector<int> robin_boundary_nodes(const Mesh& mesh) {
    std::vector<int> out;
    for (const auto& e : mesh.boundary_edges) {
        if (e.tag == SegmentTag::TipCut) continue;
        out.push_back(e.nodes[0]);
        out.push_back(e.nodes[1]);
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

Mesh renumber(const Mesh& mesh, const std::vector<int>& permutation) {
    if (static_cast<int>(permutation.size()) != mesh.num_nodes()) throw InvalidArgument("renumber: size mismatch");
    Mesh out = mesh;
    for (int i = 0; i < mesh.num_nodes(); ++i) out.nodes[permutation[i]] = mesh.nodes[i];
    for (auto& t : out.triangles) {
        for (int& v : t) v = permutation[v];
    }
    for (auto& e : out.boundary_edges) {
        for (int& v : e.nodes) v = permutation[v];
    }
    return out;
}

void write_mesh(std::ostream& os, const Mesh& mesh) {
    os << "cuspfem-mesh v1\n";
    os << "nodes " << mesh.nodes.size() << '\n';
    for (const auto& p : mesh.nodes) os << fmt::format("{:.17g} {:.17g}\n", p.x(), p.y());
    os << "tris " << mesh.triangles.size() << '\n';
    for (const auto& t : mesh.triangles) os << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
    os << "bedges " << mesh.boundary_edges.size() << '\n';
    for (const auto& e : mesh.boundary_edges) os << e.nodes[0] << ' ' << e.nodes[1] << ' ' << to_string(e.tag) << '\n';
}

Mesh read_mesh(std::istream& is) {
    auto expect = [&](const std::string& word) {
        std::string got;
        if (!(is >> got) || got != word) throw InvalidArgument("mesh file: expected '" + word + "'");
    };
    std::string header;
    std::getline(is, header);
    if (header != "cuspfem-mesh v1") throw InvalidArgument("mesh file: bad header '" + header + "'");
    Mesh mesh;
    std::size_t count = 0;
    expect("nodes");
    is >> count;
    mesh.nodes.resize(count);
    for (auto& p : mesh.nodes) is >> p.x() >> p.y();
    expect("tris");
    is >> count;
    mesh.triangles.resize(count);
    for (auto& t : mesh.triangles) is >> t[0] >> t[1] >> t[2];
    expect("bedges");
    is >> count;
    mesh.boundary_edges.resize(count);
    for (auto& e : mesh.boundary_edges) {
        std::string tag;
        is >> e.nodes[0] >> e.nodes[1] >> tag;
        e.tag = parse_segment_tag(tag);
    }
    if (!is) throw InvalidArgument("mesh file: truncated");
    double cutoff = mesh.nodes.empty() ? 0.0 : mesh.nodes.front().y();
    for (const auto& p : mesh.nodes) cutoff = std::min(cutoff, p.y());
    mesh.tip_cutoff = cutoff;
    return mesh;
}

}  // namespace cuspfem
