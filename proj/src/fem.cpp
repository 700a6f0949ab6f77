#include "cuspfem/fem.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include <Eigen/Dense>
#include <Eigen/SparseLU>
#include <fmt/format.h>

#include "cuspfem/errors.hpp"
#include "cuspfem/quadrature.hpp"

namespace cuspfem {

namespace {

using Triplets = std::vector<Eigen::Triplet<double>>;

struct ElementGeometry {
    std::array<Vec2, 3> x;
    std::array<Vec2, 3> grad;  // gradients of the barycentric coordinates
    double area;
};

ElementGeometry element_geometry(const Mesh& mesh, const std::array<int, 3>& tri) {
    ElementGeometry g;
    for (int k = 0; k < 3; ++k) g.x[k] = mesh.nodes[tri[k]];
    const Vec2 e1 = g.x[1] - g.x[0];
    const Vec2 e2 = g.x[2] - g.x[0];
    const double det = e1.x() * e2.y() - e1.y() * e2.x();
    g.area = 0.5 * det;
    for (int k = 0; k < 3; ++k) {
        const Vec2& p = g.x[(k + 1) % 3];
        const Vec2& q = g.x[(k + 2) % 3];
        g.grad[k] = Vec2(p.y() - q.y(), q.x() - p.x()) / det;
    }
    return g;
}

Vec2 edge_normal(const Vec2& a, const Vec2& b) {
    // boundary edges run counter-clockwise, so the outward normal is the clockwise rotation
    const Vec2 d = b - a;
    return Vec2(d.y(), -d.x()) / d.norm();
}

SpMat from_triplets(int n, const Triplets& t) {
    SpMat m(n, n);
    m.setFromTriplets(t.begin(), t.end());
    m.makeCompressed();
    return m;
}

bool is_valid(const Field& f) { return static_cast<bool>(f); }

}  // namespace

RobinCoefficients RobinCoefficients::laplace() {
    RobinCoefficients c;
    c.a11 = [](const Vec2&) { return 1.0; };
    c.a12 = [](const Vec2&) { return 0.0; };
    c.a22 = [](const Vec2&) { return 1.0; };
    c.b1 = c.b2 = c.a = c.f = c.sigma = [](const Vec2&) { return 0.0; };
    c.mu = [](const Vec2&, const Vec2&) { return 0.0; };
    return c;
}

RobinCoefficients CoefficientExprs::bind(const CuspDomain& domain) const {
    auto shared = std::make_shared<const CuspDomain>(domain);
    auto field = [shared](Expr e) -> Field {
        if (e.is_constant()) {
            const double v = e.eval({});
            return [v](const Vec2&) { return v; };
        }
        return [shared, e](const Vec2& x) { return e.eval(expr_vars(*shared, x)); };
    };
    RobinCoefficients c;
    c.a11 = field(a11);
    c.a12 = field(a12);
    c.a22 = field(a22);
    c.b1 = field(b1);
    c.b2 = field(b2);
    c.a = field(a);
    c.f = field(f);
    c.sigma = field(sigma);
    c.mu = [shared, e = mu](const Vec2& x, const Vec2& n) { return e.eval(expr_vars(*shared, x, n)); };
    return c;
}

CoefficientExprs manufactured_data(CoefficientExprs c, const Expr& u) {
    const Expr ux1 = u.diff(1);
    const Expr ux2 = u.diff(2);
    const Expr flux1 = c.a11 * ux1 + c.a12 * ux2;
    const Expr flux2 = c.a12 * ux1 + c.a22 * ux2;
    c.f = flux1.diff(1) + flux2.diff(2) + c.b1 * ux1 + c.b2 * ux2 + c.a * u;
    c.mu = flux1 * Expr::variable("n1") + flux2 * Expr::variable("n2") + c.sigma * u;
    return c;
}

const std::vector<Vec2>& ellipticity_probes() {
    static const std::vector<Vec2> probes = [] {
        std::vector<Vec2> p;
        for (int k = 0; k < 8; ++k) {
            const double th = k * std::acos(-1.0) / 8.0;
            p.emplace_back(std::cos(th), std::sin(th));
        }
        return p;
    }();
    return probes;
}

namespace {

struct Accumulator {
    double c1 = std::numeric_limits<double>::infinity();
    double c2 = -std::numeric_limits<double>::infinity();
    double m_sigma = 0;
    double mu_sq = 0;

    void probe(double a11, double a12, double a22) {
        for (const Vec2& d : ellipticity_probes()) {
            const double q = a11 * d.x() * d.x() + 2.0 * a12 * d.x() * d.y() + a22 * d.y() * d.y();
            c1 = std::min(c1, q);
            c2 = std::max(c2, q);
        }
    }
};

double geometric_mu_integral(const RobinCoefficients& coeffs, const CuspDomain& domain, int density) {
    double sum = 0;
    for (const auto& node : boundary_quadrature(domain, density)) {
        const Vec2 n = domain.outward_normal(node.point.position, node.point.segment);
        const double m = coeffs.mu(node.point.position, n);
        sum += node.quad_weight * m * m / node.point.weight;
    }
    return sum;
}

void finish_report(AdmissibilityReport& report, const Accumulator& acc, const RobinCoefficients& coeffs,
                   const CuspDomain& domain) {
    report.c1 = acc.c1;
    report.c2 = acc.c2;
    report.m_sigma = acc.m_sigma;
    report.mu_weighted_sq = acc.mu_sq;
    // over the whole boundary: divergence at the tip shows up as density dependence
    const CuspDomain full(domain.profile(), 0.0);
    report.mu_weighted_sq_coarse = geometric_mu_integral(coeffs, full, 16);
    report.mu_weighted_sq_fine = geometric_mu_integral(coeffs, full, 32);

    report.admissible = true;
    if (!(report.c1 > 0.0) || !std::isfinite(report.c2)) {
        report.admissible = false;
        report.failed_condition = "ellipticity";
    } else if (!std::isfinite(report.m_sigma)) {
        report.admissible = false;
        report.failed_condition = "M_sigma";
    } else {
        const double a = report.mu_weighted_sq_coarse;
        const double b = report.mu_weighted_sq_fine;
        const bool finite = std::isfinite(a) && std::isfinite(b) && std::isfinite(report.mu_weighted_sq);
        const double scale = std::max(std::abs(a), std::abs(b));
        if (!finite || (scale > 1e-300 && std::abs(a - b) > 0.05 * scale)) {
            report.admissible = false;
            report.failed_condition = "mu-integrability";
        }
    }
}

}  // namespace

AdmissibilityReport validate_coefficients(const Mesh& mesh, const RobinCoefficients& coeffs,
                                          const CuspDomain& domain) {
    Accumulator acc;
    const auto& rule = triangle_rule(4);
    for (const auto& tri : mesh.triangles) {
        const ElementGeometry g = element_geometry(mesh, tri);
        for (const auto& q : rule) {
            const Vec2 x = (1.0 - q.r - q.s) * g.x[0] + q.r * g.x[1] + q.s * g.x[2];
            acc.probe(coeffs.a11(x), coeffs.a12(x), coeffs.a22(x));
        }
    }
    const Rule1D& edge_rule = gauss_legendre(3);
    for (const auto& e : mesh.boundary_edges) {
        const Vec2& a = mesh.nodes[e.nodes[0]];
        const Vec2& b = mesh.nodes[e.nodes[1]];
        const Vec2 n = edge_normal(a, b);
        const double len = (b - a).norm();
        for (std::size_t k = 0; k < edge_rule.nodes.size(); ++k) {
            const double tau = 0.5 * (1.0 + edge_rule.nodes[k]);
            const Vec2 x = a + tau * (b - a);
            const double xi = domain.weight_at_height(x.y());
            acc.m_sigma = std::max(acc.m_sigma, std::abs(coeffs.sigma(x)) / xi);
            const double m = coeffs.mu(x, n);
            acc.mu_sq += 0.5 * len * edge_rule.weights[k] * m * m / xi;
        }
    }
    AdmissibilityReport report;
    finish_report(report, acc, coeffs, domain);
    return report;
}

DiscreteSystem assemble(const Mesh& mesh, const RobinCoefficients& coeffs, const CuspDomain& domain) {
    for (const Field* f : {&coeffs.a11, &coeffs.a12, &coeffs.a22, &coeffs.b1, &coeffs.b2, &coeffs.a, &coeffs.f,
                           &coeffs.sigma}) {
        if (!is_valid(*f)) throw InvalidArgument("assemble: every coefficient field must be set");
    }
    if (!coeffs.mu) throw InvalidArgument("assemble: mu must be set");

    const int n = mesh.num_nodes();
    Triplets stiff_a, stiff_unit, mass, advection, reaction, robin, bnd_w, bnd_1;
    const std::size_t per_elem = 9 * mesh.triangles.size();
    for (Triplets* t : {&stiff_a, &stiff_unit, &mass, &advection, &reaction}) t->reserve(per_elem);

    DiscreteSystem sys;
    sys.load_f = Eigen::VectorXd::Zero(n);
    sys.load_mu = Eigen::VectorXd::Zero(n);
    Accumulator acc;

    const auto& rule = triangle_rule(4);
    for (const auto& tri : mesh.triangles) {
        const ElementGeometry g = element_geometry(mesh, tri);
        double ka[3][3] = {}, ku[3][3] = {}, m[3][3] = {}, adv[3][3] = {}, re[3][3] = {};
        for (const auto& q : rule) {
            const std::array<double, 3> phi{1.0 - q.r - q.s, q.r, q.s};
            const Vec2 x = phi[0] * g.x[0] + phi[1] * g.x[1] + phi[2] * g.x[2];
            const double w = q.weight * 2.0 * g.area;
            const double a11 = coeffs.a11(x), a12 = coeffs.a12(x), a22 = coeffs.a22(x);
            acc.probe(a11, a12, a22);
            const Vec2 b(coeffs.b1(x), coeffs.b2(x));
            const double a = coeffs.a(x);
            const double f = coeffs.f(x);
            for (int i = 0; i < 3; ++i) {
                const Vec2& gi = g.grad[i];
                const Vec2 agi(a11 * gi.x() + a12 * gi.y(), a12 * gi.x() + a22 * gi.y());
                sys.load_f[tri[i]] -= w * f * phi[i];
                for (int j = 0; j < 3; ++j) {
                    const Vec2& gj = g.grad[j];
                    ka[i][j] += w * agi.dot(gj);
                    m[i][j] += w * phi[i] * phi[j];
                    adv[i][j] += w * b.dot(gj) * phi[i];
                    re[i][j] += w * a * phi[i] * phi[j];
                }
            }
        }
        for (int i = 0; i < 3; ++i) {
            for (int j = 0; j < 3; ++j) ku[i][j] = g.area * g.grad[i].dot(g.grad[j]);
        }
        for (int i = 0; i < 3; ++i) {
            for (int j = 0; j < 3; ++j) {
                stiff_a.emplace_back(tri[i], tri[j], ka[i][j]);
                stiff_unit.emplace_back(tri[i], tri[j], ku[i][j]);
                mass.emplace_back(tri[i], tri[j], m[i][j]);
                advection.emplace_back(tri[i], tri[j], adv[i][j]);
                reaction.emplace_back(tri[i], tri[j], re[i][j]);
            }
        }
    }

    const Rule1D& edge_rule = gauss_legendre(3);
    for (const auto& e : mesh.boundary_edges) {
        const int ia = e.nodes[0];
        const int ib = e.nodes[1];
        const Vec2& pa = mesh.nodes[ia];
        const Vec2& pb = mesh.nodes[ib];
        const Vec2 normal = edge_normal(pa, pb);
        const double len = (pb - pa).norm();
        double rb[2][2] = {}, wb[2][2] = {}, ub[2][2] = {};
        for (std::size_t k = 0; k < edge_rule.nodes.size(); ++k) {
            const double tau = 0.5 * (1.0 + edge_rule.nodes[k]);
            const std::array<double, 2> phi{1.0 - tau, tau};
            const Vec2 x = pa + tau * (pb - pa);
            const double w = 0.5 * len * edge_rule.weights[k];
            const double xi = domain.weight_at_height(x.y());
            const double sigma = coeffs.sigma(x);
            const double mu = coeffs.mu(x, normal);
            acc.m_sigma = std::max(acc.m_sigma, std::abs(sigma) / xi);
            acc.mu_sq += w * mu * mu / xi;
            for (int i = 0; i < 2; ++i) {
                sys.load_mu[e.nodes[i]] += w * mu * phi[i];
                for (int j = 0; j < 2; ++j) {
                    rb[i][j] += w * sigma * phi[i] * phi[j];
                    wb[i][j] += w * xi * phi[i] * phi[j];
                    ub[i][j] += w * phi[i] * phi[j];
                }
            }
        }
        for (int i = 0; i < 2; ++i) {
            for (int j = 0; j < 2; ++j) {
                robin.emplace_back(e.nodes[i], e.nodes[j], rb[i][j]);
                bnd_w.emplace_back(e.nodes[i], e.nodes[j], wb[i][j]);
                bnd_1.emplace_back(e.nodes[i], e.nodes[j], ub[i][j]);
            }
        }
    }

    finish_report(sys.admissibility, acc, coeffs, domain);
    if (!sys.admissibility.admissible) {
        const auto& r = sys.admissibility;
        throw ValidationError(r.failed_condition,
                              fmt::format("C1 = {:.6g}, C2 = {:.6g}, M_sigma = {:.6g}, int mu^2/xi = {:.6g} / {:.6g}",
                                          r.c1, r.c2, r.m_sigma, r.mu_weighted_sq_coarse, r.mu_weighted_sq_fine));
    }

    const SpMat ka = from_triplets(n, stiff_a);
    const SpMat ku = from_triplets(n, stiff_unit);
    const SpMat m = from_triplets(n, mass);
    const SpMat adv = from_triplets(n, advection);
    const SpMat re = from_triplets(n, reaction);
    sys.robin_term = from_triplets(n, robin);
    sys.boundary_gram_weighted = from_triplets(n, bnd_w);
    sys.boundary_gram_unit = from_triplets(n, bnd_1);
    sys.h1_gram = ku + m;
    sys.a_gram = ka + m;
    sys.matrix = ka - adv - re + sys.robin_term;
    sys.matrix.makeCompressed();
    sys.load = sys.load_f + sys.load_mu;
    sys.mesh = std::make_shared<const Mesh>(mesh);
    return sys;
}

namespace {

double relative_ok_bound(const Eigen::VectorXd& b) { return kResidualTolerance * b.norm(); }

// Symmetric case: eigenvalues only, then the near-kernel by block inverse
// iteration.  Much cheaper than accumulating all eigenvectors.
FredholmReport symmetric_analysis(const SpMat& matrix, const Eigen::MatrixXd& dense, const Eigen::VectorXd& b,
                                  double tol) {
    const Eigen::Index n = dense.rows();
    const Eigen::VectorXd lambda =
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(dense, Eigen::EigenvaluesOnly).eigenvalues();
    FredholmReport report;
    report.sigma_max = lambda.cwiseAbs().maxCoeff();
    report.sigma_min = lambda.cwiseAbs().minCoeff();
    const double threshold = tol * report.sigma_max;
    std::vector<double> small;
    for (Eigen::Index i = 0; i < n; ++i) {
        if (std::abs(lambda[i]) < threshold) small.push_back(lambda[i]);
    }
    const auto k = static_cast<Eigen::Index>(small.size());

    Eigen::MatrixXd z(n, k);
    Eigen::VectorXd lambda_z(k);
    if (k > 0) {
        // shift in [-threshold, threshold] farthest from every eigenvalue
        double mu = 0, best = -1;
        for (int c = -8; c <= 8; ++c) {
            const double cand = threshold * c / 8.0;
            const double dist = (lambda.array() - cand).abs().minCoeff();
            if (dist > best) best = dist, mu = cand;
        }
        const Eigen::PartialPivLU<Eigen::MatrixXd> shifted(dense - mu * Eigen::MatrixXd::Identity(n, n));
        const Eigen::Index m = std::min<Eigen::Index>(n, k + 2);
        std::mt19937_64 rng(1);
        std::normal_distribution<double> gauss;
        Eigen::MatrixXd q(n, m);
        for (Eigen::Index j = 0; j < m; ++j) {
            for (Eigen::Index i = 0; i < n; ++i) q(i, j) = gauss(rng);
        }
        for (int it = 0; it < 40; ++it) {
            q = Eigen::HouseholderQR<Eigen::MatrixXd>(shifted.solve(q)).householderQ() * Eigen::MatrixXd::Identity(n, m);
            const Eigen::MatrixXd aq = dense * q;
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ritz(q.transpose() * aq);
            // Ritz pairs nearest the shift
            std::vector<Eigen::Index> order(static_cast<std::size_t>(m));
            std::iota(order.begin(), order.end(), 0);
            std::sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index c) {
                return std::abs(ritz.eigenvalues()[a] - mu) < std::abs(ritz.eigenvalues()[c] - mu);
            });
            double worst = 0;
            for (Eigen::Index j = 0; j < k; ++j) {
                z.col(j) = q * ritz.eigenvectors().col(order[j]);
                lambda_z[j] = ritz.eigenvalues()[order[j]];
                worst = std::max(worst, (dense * z.col(j) - lambda_z[j] * z.col(j)).norm());
            }
            if (worst <= 1e-13 * report.sigma_max) break;
        }
    }
    report.kernel = z;
    report.cokernel = z;
    report.compatibility_residual = (z.transpose() * b).norm();
    report.compatible = report.compatibility_residual <= relative_ok_bound(b);

    // truncated pseudo-inverse: replace the small eigenvalues by 1 and project b
    Eigen::MatrixXd regular = dense;
    if (k > 0) regular += z * (Eigen::VectorXd::Ones(k) - lambda_z).asDiagonal() * z.transpose();
    const Eigen::PartialPivLU<Eigen::MatrixXd> lu(regular);
    auto project = [&](const Eigen::VectorXd& v) -> Eigen::VectorXd {
        return k > 0 ? Eigen::VectorXd(v - z * (z.transpose() * v)) : v;
    };
    Eigen::VectorXd x = project(lu.solve(project(b)));
    report.residual = (matrix * x - b).norm();
    if (report.compatible) {
        for (int it = 0; it < 3 && report.residual > relative_ok_bound(b); ++it) {
            x += project(lu.solve(project(b - matrix * x)));
            report.residual = (matrix * x - b).norm();
        }
        report.solution = x;
    }
    return report;
}

FredholmReport dense_analysis(const SpMat& matrix, const Eigen::VectorXd& b, double tol) {
    const Eigen::MatrixXd dense(matrix);
    const double scale = dense.cwiseAbs().maxCoeff();
    const bool symmetric = (dense - dense.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * scale;
    if (symmetric) return symmetric_analysis(matrix, dense, b, tol);

    Eigen::BDCSVD<Eigen::MatrixXd> svd(dense, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Eigen::VectorXd s = svd.singularValues();
    const Eigen::MatrixXd& left = svd.matrixU();
    const Eigen::MatrixXd& right = svd.matrixV();

    FredholmReport report;
    report.sigma_max = s.maxCoeff();
    report.sigma_min = s.minCoeff();
    const double threshold = tol * report.sigma_max;
    std::vector<int> kernel_idx;
    for (int i = 0; i < s.size(); ++i) {
        if (s[i] < threshold) kernel_idx.push_back(i);
    }
    report.kernel.resize(dense.rows(), static_cast<Eigen::Index>(kernel_idx.size()));
    report.cokernel.resize(dense.rows(), static_cast<Eigen::Index>(kernel_idx.size()));
    for (std::size_t k = 0; k < kernel_idx.size(); ++k) {
        report.kernel.col(static_cast<Eigen::Index>(k)) = right.col(kernel_idx[k]);
        report.cokernel.col(static_cast<Eigen::Index>(k)) = left.col(kernel_idx[k]);
    }
    report.compatibility_residual = (report.cokernel.transpose() * b).norm();
    report.compatible = report.compatibility_residual <= relative_ok_bound(b);

    Eigen::VectorXd x = Eigen::VectorXd::Zero(dense.cols());
    for (int i = 0; i < s.size(); ++i) {
        if (s[i] >= threshold) x += right.col(i) * (left.col(i).dot(b) / s[i]);
    }
    report.residual = (matrix * x - b).norm();
    if (report.compatible) {
        // projected refinement steps
        for (int it = 0; it < 2 && report.residual > relative_ok_bound(b); ++it) {
            const Eigen::VectorXd r = b - matrix * x;
            for (int i = 0; i < s.size(); ++i) {
                if (s[i] >= threshold) x += right.col(i) * (left.col(i).dot(r) / s[i]);
            }
            report.residual = (matrix * x - b).norm();
        }
        report.solution = x;
    }
    return report;
}

}  // namespace

SolveResult solve(const SpMat& matrix, const Eigen::VectorXd& b, double tol) {
    const int n = static_cast<int>(matrix.rows());
    if (matrix.cols() != n || b.size() != n) throw InvalidArgument("solve: dimension mismatch");

    Eigen::SparseLU<SpMat> lu;
    lu.analyzePattern(matrix);
    lu.factorize(matrix);
    if (lu.info() == Eigen::Success) {
        // sigma_max by power iteration on M^T M, sigma_min by inverse iteration
        Eigen::VectorXd v = Eigen::VectorXd::Ones(n).normalized();
        double sigma_max = 0;
        for (int it = 0; it < 40; ++it) {
            Eigen::VectorXd w = matrix.transpose() * (matrix * v);
            const double nw = w.norm();
            if (nw == 0) break;
            v = w / nw;
            sigma_max = (matrix * v).norm();
        }
        Eigen::VectorXd y = Eigen::VectorXd::LinSpaced(n, 1.0, 2.0).normalized();
        double sigma_min = std::numeric_limits<double>::infinity();
        bool finite = true;
        for (int it = 0; it < 30; ++it) {
            Eigen::VectorXd z = lu.transpose().solve(y);
            z = lu.solve(z);
            const double nz = z.norm();
            if (!std::isfinite(nz) || nz == 0) {
                finite = false;
                break;
            }
            y = z / nz;
            sigma_min = (matrix * y).norm();
        }
        if (finite && sigma_min > 10.0 * tol * sigma_max) {
            UniqueSolution sol;
            sol.sigma_min = sigma_min;
            sol.sigma_max = sigma_max;
            sol.u = lu.solve(b);
            sol.residual = (matrix * sol.u - b).norm();
            for (int it = 0; it < 4 && sol.residual > 0.5 * relative_ok_bound(b); ++it) {
                sol.u += lu.solve(b - matrix * sol.u);
                sol.residual = (matrix * sol.u - b).norm();
            }
            if (!(sol.residual <= relative_ok_bound(b))) {
                throw SolverError(fmt::format("solve: residual {:.3e} exceeds 1e-10 ||b|| = {:.3e}", sol.residual,
                                              relative_ok_bound(b)));
            }
            return sol;
        }
    }

    if (n > kDenseLimit) {
        throw SolverError(fmt::format("solve: system of size {} looks singular but exceeds the dense analysis limit {}",
                                      n, kDenseLimit));
    }
    FredholmReport report = dense_analysis(matrix, b, tol);
    if (report.kernel_dim() == 0) {
        UniqueSolution sol;
        sol.sigma_min = report.sigma_min;
        sol.sigma_max = report.sigma_max;
        sol.u = *report.solution;
        sol.residual = report.residual;
        if (!(sol.residual <= relative_ok_bound(b))) {
            throw SolverError(fmt::format("solve: residual {:.3e} exceeds 1e-10 ||b||", sol.residual));
        }
        return sol;
    }
    if (report.solution && !(report.residual <= relative_ok_bound(b))) {
        throw SolverError(fmt::format("solve: compatible system left residual {:.3e}", report.residual));
    }
    return report;
}

SolveResult solve(const DiscreteSystem& system, double tol) { return solve(system.matrix, system.load, tol); }

FunctionalBoundCheck check_functional_bounds(const DiscreteSystem& sys, int samples, std::uint64_t seed,
                                             double tolerance) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    const int n = static_cast<int>(sys.matrix.rows());
    auto random_vector = [&] {
        Eigen::VectorXd v(n);
        for (int i = 0; i < n; ++i) v[i] = dist(rng);
        return v;
    };
    const double m_sigma = sys.admissibility.m_sigma;
    const double mu_norm = std::sqrt(sys.admissibility.mu_weighted_sq);
    auto xi_norm = [&](const Eigen::VectorXd& v) { return std::sqrt(std::max(0.0, v.dot(sys.boundary_gram_weighted * v))); };

    FunctionalBoundCheck check;
    check.samples = samples;
    for (int k = 0; k < samples; ++k) {
        const Eigen::VectorXd u = random_vector();
        const Eigen::VectorXd eta = random_vector();
        const double l3 = std::abs(u.dot(sys.robin_term * eta));
        const double b3 = m_sigma * xi_norm(u) * xi_norm(eta);
        const double l4 = std::abs(sys.load_mu.dot(eta));
        const double b4 = mu_norm * xi_norm(eta);
        if (b3 > 0) check.worst_l3_ratio = std::max(check.worst_l3_ratio, l3 / b3);
        if (b4 > 0) check.worst_l4_ratio = std::max(check.worst_l4_ratio, l4 / b4);
        if (l3 > b3 * (1.0 + tolerance) + tolerance * 1e-300) check.passed = false;
        if (l4 > b4 * (1.0 + tolerance) + tolerance * 1e-300) check.passed = false;
    }
    return check;
}

Eigen::VectorXd interpolate(const Mesh& mesh, const CuspDomain& domain, const Expr& field) {
    Eigen::VectorXd v(mesh.num_nodes());
    for (int i = 0; i < mesh.num_nodes(); ++i) v[i] = field.eval(expr_vars(domain, mesh.nodes[i]));
    return v;
}

ErrorRecord discretization_error(const Mesh& mesh, const CuspDomain& domain, const Eigen::VectorXd& uh,
                                 const Expr& exact) {
    const Expr dx1 = exact.diff(1);
    const Expr dx2 = exact.diff(2);
    double l2 = 0;
    double semi = 0;
    for (const auto& tri : mesh.triangles) {
        const ElementGeometry g = element_geometry(mesh, tri);
        const Vec2 grad_h = uh[tri[0]] * g.grad[0] + uh[tri[1]] * g.grad[1] + uh[tri[2]] * g.grad[2];
        for (const auto& q : triangle_rule(5)) {
            const std::array<double, 3> phi{1.0 - q.r - q.s, q.r, q.s};
            const Vec2 x = phi[0] * g.x[0] + phi[1] * g.x[1] + phi[2] * g.x[2];
            const ExprVars vars = expr_vars(domain, x);
            const double w = q.weight * 2.0 * g.area;
            const double e = uh[tri[0]] * phi[0] + uh[tri[1]] * phi[1] + uh[tri[2]] * phi[2] - exact.eval(vars);
            const Vec2 ge = grad_h - Vec2(dx1.eval(vars), dx2.eval(vars));
            l2 += w * e * e;
            semi += w * ge.squaredNorm();
        }
    }
    ErrorRecord rec;
    rec.h = max_edge_length(mesh);
    rec.l2_error = std::sqrt(l2);
    rec.h1_error = std::sqrt(l2 + semi);
    rec.nodes = mesh.num_nodes();
    return rec;
}

std::vector<ErrorRecord> manufactured_solution_error(const CuspDomain& domain, const CoefficientExprs& coefficients,
                                                     const Expr& u_exact, const std::vector<Mesh>& meshes,
                                                     double tol) {
    const CoefficientExprs data = manufactured_data(coefficients, u_exact);
    const RobinCoefficients bound = data.bind(domain);
    std::vector<ErrorRecord> out;
    for (const Mesh& mesh : meshes) {
        const DiscreteSystem sys = assemble(mesh, bound, domain);
        const SolveResult result = solve(sys, tol);
        const auto* unique = std::get_if<UniqueSolution>(&result);
        if (!unique) throw SolverError("manufactured problem is singular on this mesh; add a Robin term");
        out.push_back(discretization_error(mesh, domain, unique->u, u_exact));
    }
    return out;
}

double observed_order(const ErrorRecord& coarse, const ErrorRecord& fine) {
    return std::log(coarse.l2_error / fine.l2_error) / std::log(coarse.h / fine.h);
}

}  // namespace cuspfem
