#pragma once

#include <functional>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include "cuspfem/geometry.hpp"
#include "cuspfem/mesh.hpp"

namespace cuspfem {

/// Values of a boundary function at boundary quadrature nodes.  The node weight
/// field carries xi at the node; quad_weight is the dS weight.
struct BoundaryField {
    std::vector<BoundaryNode> nodes;
    std::vector<double> values;

    int size() const { return static_cast<int>(nodes.size()); }
};

BoundaryField sample_boundary(const CuspDomain& domain, int density, const std::function<double(const Vec2&)>& f);

/// P1 trace of a nodal vector, sampled at 3 Gauss points per boundary edge.
/// The tip-cut edge is not part of the boundary of G and is skipped.
BoundaryField p1_trace(const Mesh& mesh, const CuspDomain& domain, const Eigen::VectorXd& u);

/// Matrix P with (P u)_q = value of the P1 trace at the q-th point of p1_trace.
Eigen::SparseMatrix<double> p1_trace_operator(const Mesh& mesh, const CuspDomain& domain);

/// (sum |f|^p xi dS)^(1/p).
double weighted_boundary_norm(const BoundaryField& f, double p);

/// Distances below this count as the diagonal and are skipped.
inline constexpr double kDiagonalSeparation = 1e-12;

/// E(x, y) = max(xi(x), xi(y)), with the extended weight on the cap.
double cutoff_radius(const BoundaryNode& x, const BoundaryNode& y);

/// Contribution of the ordered pair (i, j) to the seminorm's p-th power:
/// w_i w_j |f_i - f_j|^p / |x - y|^p if |x - y| <= E(x, y), else exactly 0.
double pair_contribution(const BoundaryField& f, int i, int j, double p);

enum class PairOrder { RowMajor, ColumnMajor };

/// Cut-off double-integral seminorm, (sum_{i != j} pair_contribution)^(1/p).
/// Rows are split across `threads` workers; partial sums are combined in row
/// order, so the result does not depend on the thread count.
double trace_seminorm(const BoundaryField& f, double p, int threads = 1, PairOrder order = PairOrder::RowMajor);

struct TraceNormParts {
    double p = 2;
    double weighted_part = 0;
    double seminorm_part = 0;
    double trace_norm = 0;
    int nodes = 0;
};

TraceNormParts trace_norm_parts(const BoundaryField& f, double p, int threads = 1);
inline double trace_norm(const BoundaryField& f, double p, int threads = 1) {
    return trace_norm_parts(f, p, threads).trace_norm;
}

/// Nodal quadratic form Q with u^T Q u = trace_seminorm(p1_trace(u), 2)^2.
Eigen::SparseMatrix<double> seminorm_form(const Mesh& mesh, const CuspDomain& domain);

}  // namespace cuspfem
