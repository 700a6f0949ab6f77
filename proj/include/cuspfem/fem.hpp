#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include "cuspfem/expression.hpp"
#include "cuspfem/geometry.hpp"
#include "cuspfem/mesh.hpp"

namespace cuspfem {

using SpMat = Eigen::SparseMatrix<double>;
using Field = std::function<double(const Vec2&)>;
/// Boundary datum evaluated with the outward unit normal of the boundary edge.
using BoundaryDatum = std::function<double(const Vec2& x, const Vec2& normal)>;

/// Data of the Robin problem
///   sum_ij d_i(a_ij d_j u) + sum_i b_i d_i u + a u = f   in G,
///   du/dN + sigma u = mu                                  on dG,
/// whose weak form is assembled as
///   int a_kl d_l u d_k eta - int b_k d_k u eta - int a u eta + int_dG sigma u eta
///     = -int f eta + int_dG mu eta.
struct RobinCoefficients {
    Field a11;
    Field a12;
    Field a22;
    Field b1;
    Field b2;
    Field a;
    Field f;
    Field sigma;
    BoundaryDatum mu;

    /// a_ij = delta_ij, everything else 0 (pure Neumann Laplace).
    static RobinCoefficients laplace();
};

/// Coefficients as expressions (the configuration-file form).
struct CoefficientExprs {
    Expr a11 = Expr::constant(1);
    Expr a12 = Expr::constant(0);
    Expr a22 = Expr::constant(1);
    Expr b1;
    Expr b2;
    Expr a;
    Expr f;
    Expr sigma;
    Expr mu;

    RobinCoefficients bind(const CuspDomain& domain) const;
};

/// Sets f and mu so that u_exact solves the strong problem:
///   f  = sum_ij d_i(a_ij d_j u) + sum_i b_i d_i u + a u
///   mu = sum_ij a_ij d_j u n_i + sigma u
CoefficientExprs manufactured_data(CoefficientExprs coefficients, const Expr& u_exact);

struct AdmissibilityReport {
    double c1 = 0;              // ellipticity lower bound over the probe directions
    double c2 = 0;              // ellipticity upper bound
    double m_sigma = 0;         // sup |sigma| / xi over the boundary quadrature points
    double mu_weighted_sq = 0;  // int mu^2 / xi dS with the assembly quadrature
    double mu_weighted_sq_coarse = 0;  // same integral over the untruncated boundary, density 16
    double mu_weighted_sq_fine = 0;    // ... and density 32
    bool admissible = true;
    std::string failed_condition;  // "ellipticity", "M_sigma" or "mu-integrability"
};

/// P1 system of the weak Robin problem plus the Gram matrices of the
/// W^1_2 inner product and of the boundary forms.
struct DiscreteSystem {
    std::shared_ptr<const Mesh> mesh;
    SpMat matrix;
    Eigen::VectorXd load;
    SpMat h1_gram;                 // int grad u . grad eta + u eta
    SpMat a_gram;                  // int a_kl d_l u d_k eta + u eta
    SpMat boundary_gram_weighted;  // int_dG xi u eta dS
    SpMat boundary_gram_unit;      // int_dG u eta dS
    SpMat robin_term;              // int_dG sigma u eta dS
    Eigen::VectorXd load_f;        // -int f eta
    Eigen::VectorXd load_mu;       // int_dG mu eta dS
    AdmissibilityReport admissibility;
};

/// The ellipticity probe directions (k pi / 8, k = 0..7).
const std::vector<Vec2>& ellipticity_probes();

/// Checks the coefficient conditions without assembling.
AdmissibilityReport validate_coefficients(const Mesh& mesh, const RobinCoefficients& coeffs, const CuspDomain& domain);

/// Triangle quadrature exact to degree 4, boundary edges Gauss-Legendre with 3 points.
/// The tip-cut edge is treated as boundary (normal (0, -1)).  Throws ValidationError naming the failed condition.
DiscreteSystem assemble(const Mesh& mesh, const RobinCoefficients& coeffs, const CuspDomain& domain);

struct UniqueSolution {
    Eigen::VectorXd u;
    double residual = 0;  // ||M u - b||
    double sigma_min = 0;
    double sigma_max = 0;
};

/// Outcome for a numerically singular system.
struct FredholmReport {
    Eigen::MatrixXd kernel;    // orthonormal columns, right singular vectors
    Eigen::MatrixXd cokernel;  // orthonormal columns, left singular vectors
    double sigma_min = 0;
    double sigma_max = 0;
    double compatibility_residual = 0;  // || cokernel^T b ||
    bool compatible = false;
    std::optional<Eigen::VectorXd> solution;  // minimum-norm solution when compatible
    double residual = 0;

    int kernel_dim() const { return static_cast<int>(kernel.cols()); }
    std::string verdict() const { return compatible ? "compatible" : "incompatible"; }
};

using SolveResult = std::variant<UniqueSolution, FredholmReport>;

/// Singular values below tol * sigma_max count as kernel.  Returned solutions
/// satisfy ||M x - b|| <= 1e-10 ||b||; singularity is an outcome, not an error.
SolveResult solve(const SpMat& matrix, const Eigen::VectorXd& load, double tol = 1e-8);
SolveResult solve(const DiscreteSystem& system, double tol = 1e-8);

inline constexpr double kResidualTolerance = 1e-10;
/// Largest system the dense singular-value fallback accepts.
inline constexpr int kDenseLimit = 6000;

struct FunctionalBoundCheck {
    int samples = 0;
    double worst_l3_ratio = 0;  // max |u^T R eta| / (M_sigma ||u||_xi ||eta||_xi)
    double worst_l4_ratio = 0;  // max |l4(eta)| / (||mu||_{1/xi} ||eta||_xi)
    bool passed = true;
};

/// Discrete Cauchy-Bunyakovski bounds of the boundary functionals for seeded random vectors.
FunctionalBoundCheck check_functional_bounds(const DiscreteSystem& system, int samples, std::uint64_t seed,
                                             double tolerance = 1e-10);

/// Nodal interpolant.
Eigen::VectorXd interpolate(const Mesh& mesh, const CuspDomain& domain, const Expr& field);

struct ErrorRecord {
    double h = 0;
    double l2_error = 0;
    double h1_error = 0;  // full W^1_2 norm of the error
    int nodes = 0;
};

/// L2 and W^1_2 errors of a P1 function against an exact field (degree-5 quadrature).
ErrorRecord discretization_error(const Mesh& mesh, const CuspDomain& domain, const Eigen::VectorXd& uh,
                                 const Expr& exact);

/// Solves the manufactured problem of u_exact on each mesh in turn.
std::vector<ErrorRecord> manufactured_solution_error(const CuspDomain& domain, const CoefficientExprs& coefficients,
                                                     const Expr& u_exact, const std::vector<Mesh>& meshes,
                                                     double tol = 1e-8);

double observed_order(const ErrorRecord& coarse, const ErrorRecord& fine);

}  // namespace cuspfem
