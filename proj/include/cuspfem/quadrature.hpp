#pragma once

#include <array>
#include <functional>
#include <vector>

#include <Eigen/Core>

namespace cuspfem {

/// One-dimensional rule on [-1, 1].
struct Rule1D {
    std::vector<double> nodes;
    std::vector<double> weights;
};

/// Gauss-Legendre rule with `order` points on [-1, 1].
const Rule1D& gauss_legendre(int order);

/// Composite Gauss-Legendre rule on [a, b] with `panels` equal panels.
Rule1D composite_gauss(double a, double b, int order, int panels);

/// Quadrature point on the reference triangle {(r, s) : r, s >= 0, r + s <= 1}.
/// Weights sum to 1/2 (the reference area).
struct TriangleQPoint {
    double r;
    double s;
    double weight;
};

/// Symmetric rule exact for polynomials of total degree <= `degree` (supported 1..5).
const std::vector<TriangleQPoint>& triangle_rule(int degree);

/// Globally adaptive Gauss-Kronrod (15-point) integral of f over [a, b].
double adaptive_integral(const std::function<double(double)>& f, double a, double b,
                         double tolerance = 1e-14, int max_depth = 15);

}  // namespace cuspfem
