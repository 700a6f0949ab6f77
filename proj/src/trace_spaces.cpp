#include "cuspfem/trace_spaces.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

#include "cuspfem/errors.hpp"
#include "cuspfem/quadrature.hpp"

namespace cuspfem {

BoundaryField sample_boundary(const CuspDomain& domain, int density, const std::function<double(const Vec2&)>& f) {
    BoundaryField out;
    out.nodes = boundary_quadrature(domain, density);
    out.values.reserve(out.nodes.size());
    for (const auto& n : out.nodes) out.values.push_back(f(n.point.position));
    return out;
}

namespace {

struct TracePoint {
    int edge;
    double tau;
};

template <class Visit>
void for_each_trace_point(const Mesh& mesh, const CuspDomain& domain, Visit visit) {
    const Rule1D& rule = gauss_legendre(3);
    double arc = 0;
    for (const auto& e : mesh.boundary_edges) {
        if (e.tag == SegmentTag::TipCut) continue;
        const Vec2& a = mesh.nodes[e.nodes[0]];
        const Vec2& b = mesh.nodes[e.nodes[1]];
        const double len = (b - a).norm();
        for (std::size_t q = 0; q < rule.nodes.size(); ++q) {
            const double tau = 0.5 * (1.0 + rule.nodes[q]);
            BoundaryNode node;
            node.point.position = a + tau * (b - a);
            node.point.arc_param = arc + tau * len;
            node.point.segment = e.tag;
            node.point.weight = domain.weight_at_height(node.point.position.y());
            node.quad_weight = 0.5 * len * rule.weights[q];
            visit(e, tau, node);
        }
        arc += len;
    }
}

}  // namespace

BoundaryField p1_trace(const Mesh& mesh, const CuspDomain& domain, const Eigen::VectorXd& u) {
    if (u.size() != mesh.num_nodes()) throw InvalidArgument("p1_trace: vector size does not match the mesh");
    BoundaryField out;
    for_each_trace_point(mesh, domain, [&](const BoundaryEdge& e, double tau, const BoundaryNode& node) {
        out.nodes.push_back(node);
        out.values.push_back((1.0 - tau) * u[e.nodes[0]] + tau * u[e.nodes[1]]);
    });
    return out;
}

Eigen::SparseMatrix<double> p1_trace_operator(const Mesh& mesh, const CuspDomain& domain) {
    std::vector<Eigen::Triplet<double>> t;
    int row = 0;
    for_each_trace_point(mesh, domain, [&](const BoundaryEdge& e, double tau, const BoundaryNode&) {
        t.emplace_back(row, e.nodes[0], 1.0 - tau);
        t.emplace_back(row, e.nodes[1], tau);
        ++row;
    });
    Eigen::SparseMatrix<double> p(row, mesh.num_nodes());
    p.setFromTriplets(t.begin(), t.end());
    return p;
}

double weighted_boundary_norm(const BoundaryField& f, double p) {
    if (!(p >= 1.0)) throw InvalidArgument("weighted_boundary_norm: p must be >= 1");
    double sum = 0;
    for (int i = 0; i < f.size(); ++i) {
        sum += f.nodes[i].quad_weight * f.nodes[i].point.weight * std::pow(std::abs(f.values[i]), p);
    }
    return std::pow(sum, 1.0 / p);
}

double cutoff_radius(const BoundaryNode& x, const BoundaryNode& y) {
    return std::max(x.point.weight, y.point.weight);
}

double pair_contribution(const BoundaryField& f, int i, int j, double p) {
    const BoundaryNode& x = f.nodes[i];
    const BoundaryNode& y = f.nodes[j];
    const double dist = (x.point.position - y.point.position).norm();
    if (dist < kDiagonalSeparation || dist > cutoff_radius(x, y)) return 0.0;
    const double diff = std::abs(f.values[i] - f.values[j]);
    if (diff == 0.0) return 0.0;
    return x.quad_weight * y.quad_weight * std::pow(diff / dist, p);
}

double trace_seminorm(const BoundaryField& f, double p, int threads, PairOrder order) {
    if (!(p > 1.0)) throw InvalidArgument("trace_seminorm: p must be > 1");
    const int n = f.size();
    std::vector<double> partial(n, 0.0);
    auto rows = [&](int begin, int end) {
        for (int i = begin; i < end; ++i) {
            double s = 0;
            for (int j = 0; j < n; ++j) {
                s += order == PairOrder::RowMajor ? pair_contribution(f, i, j, p) : pair_contribution(f, j, i, p);
            }
            partial[i] = s;
        }
    };
    threads = std::clamp(threads, 1, std::max(1, n));
    if (threads == 1) {
        rows(0, n);
    } else {
        std::vector<std::thread> pool;
        const int chunk = (n + threads - 1) / threads;
        for (int t = 0; t < threads; ++t) {
            const int b = t * chunk;
            const int e = std::min(n, b + chunk);
            if (b < e) pool.emplace_back(rows, b, e);
        }
        for (auto& th : pool) th.join();
    }
    double total = 0;
    for (double v : partial) total += v;
    return std::pow(total, 1.0 / p);
}

TraceNormParts trace_norm_parts(const BoundaryField& f, double p, int threads) {
    TraceNormParts r;
    r.p = p;
    r.weighted_part = weighted_boundary_norm(f, p);
    r.seminorm_part = trace_seminorm(f, p, threads);
    r.trace_norm = r.weighted_part + r.seminorm_part;
    r.nodes = f.size();
    return r;
}

Eigen::SparseMatrix<double> seminorm_form(const Mesh& mesh, const CuspDomain& domain) {
    // sum_{i != j} W_ij (f_i - f_j)^2 = 2 f^T (D - W) f
    const BoundaryField pts = p1_trace(mesh, domain, Eigen::VectorXd::Zero(mesh.num_nodes()));
    const int n = pts.size();
    std::vector<Eigen::Triplet<double>> t;
    for (int i = 0; i < n; ++i) {
        double row = 0;
        for (int j = 0; j < n; ++j) {
            const BoundaryNode& x = pts.nodes[i];
            const BoundaryNode& y = pts.nodes[j];
            const double dist = (x.point.position - y.point.position).norm();
            if (dist < kDiagonalSeparation || dist > cutoff_radius(x, y)) continue;
            const double w = x.quad_weight * y.quad_weight / (dist * dist);
            t.emplace_back(i, j, -2.0 * w);
            row += w;
        }
        t.emplace_back(i, i, 2.0 * row);
    }
    Eigen::SparseMatrix<double> l(n, n);
    l.setFromTriplets(t.begin(), t.end());
    const Eigen::SparseMatrix<double> p = p1_trace_operator(mesh, domain);
    Eigen::SparseMatrix<double> q = Eigen::SparseMatrix<double>(p.transpose()) * l * p;
    q.makeCompressed();
    return q;
}

}  // namespace cuspfem
