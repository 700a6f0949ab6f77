#include "cuspfem/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

#include <Eigen/Dense>
#include <Eigen/SparseCholesky>
#include <fmt/format.h>

#include "cuspfem/errors.hpp"
#include "cuspfem/quadrature.hpp"

namespace cuspfem {

std::string to_string(WeightMode mode) { return mode == WeightMode::Weighted ? "weighted" : "unweighted"; }

WeightMode parse_weight_mode(const std::string& name) {
    if (name == "weighted") return WeightMode::Weighted;
    if (name == "unweighted") return WeightMode::Unweighted;
    throw InvalidArgument("unknown weight mode '" + name + "'");
}

TraceSpectrum generalized_singular_values(const SpMat& boundary_form, const SpMat& gram, int k, bool with_vectors) {
    if (k < 1) throw InvalidArgument("trace spectrum: k must be >= 1");
    const int n = static_cast<int>(gram.rows());
    if (gram.cols() != n || boundary_form.rows() != n || boundary_form.cols() != n) {
        throw InvalidArgument("trace spectrum: dimension mismatch");
    }

    std::vector<char> on_boundary(n, 0);
    for (int col = 0; col < boundary_form.outerSize(); ++col) {
        for (SpMat::InnerIterator it(boundary_form, col); it; ++it) {
            if (it.value() != 0.0) on_boundary[it.row()] = on_boundary[it.col()] = 1;
        }
    }
    std::vector<int> local(n, -1);
    std::vector<int> bnd, inner;
    for (int i = 0; i < n; ++i) {
        if (on_boundary[i]) {
            local[i] = static_cast<int>(bnd.size());
            bnd.push_back(i);
        } else {
            local[i] = static_cast<int>(inner.size());
            inner.push_back(i);
        }
    }
    const int nb = static_cast<int>(bnd.size());
    const int ni = static_cast<int>(inner.size());

    TraceSpectrum out;
    out.rank = nb;
    out.singular_values.assign(k, 0.0);
    out.padded = k > nb;
    if (nb == 0) return out;

    Eigen::MatrixXd m_bb = Eigen::MatrixXd::Zero(nb, nb);
    Eigen::MatrixXd h_bb = Eigen::MatrixXd::Zero(nb, nb);
    std::vector<Eigen::Triplet<double>> t_ii, t_ib;
    for (int col = 0; col < boundary_form.outerSize(); ++col) {
        for (SpMat::InnerIterator it(boundary_form, col); it; ++it) {
            if (on_boundary[it.row()] && on_boundary[it.col()]) m_bb(local[it.row()], local[it.col()]) += it.value();
        }
    }
    for (int col = 0; col < gram.outerSize(); ++col) {
        for (SpMat::InnerIterator it(gram, col); it; ++it) {
            const bool rb = on_boundary[it.row()];
            const bool cb = on_boundary[it.col()];
            if (rb && cb) {
                h_bb(local[it.row()], local[it.col()]) += it.value();
            } else if (!rb && !cb) {
                t_ii.emplace_back(local[it.row()], local[it.col()], it.value());
            } else if (!rb && cb) {
                t_ib.emplace_back(local[it.row()], local[it.col()], it.value());
            }
        }
    }

    Eigen::MatrixXd schur = h_bb;
    Eigen::MatrixXd interior_map;  // -H_II^{-1} H_IB
    if (ni > 0) {
        SpMat h_ii(ni, ni), h_ib(ni, nb);
        h_ii.setFromTriplets(t_ii.begin(), t_ii.end());
        h_ib.setFromTriplets(t_ib.begin(), t_ib.end());
        Eigen::SimplicialLDLT<SpMat> ldlt(h_ii);
        if (ldlt.info() != Eigen::Success) throw SolverError("trace spectrum: interior Gram block is not SPD");
        const Eigen::MatrixXd rhs(h_ib);
        interior_map = -ldlt.solve(rhs);
        schur += Eigen::MatrixXd(h_ib.transpose()) * interior_map;
    }
    schur = 0.5 * (schur + schur.transpose());
    m_bb = 0.5 * (m_bb + m_bb.transpose());

    const int options = with_vectors ? (Eigen::ComputeEigenvectors | Eigen::Ax_lBx) : (Eigen::EigenvaluesOnly | Eigen::Ax_lBx);
    Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> ges(m_bb, schur, options);
    if (ges.info() != Eigen::Success) throw SolverError("trace spectrum: generalized eigensolver failed");
    const Eigen::VectorXd& lambda = ges.eigenvalues();  // ascending

    const int kept = std::min(k, nb);
    for (int j = 0; j < kept; ++j) out.singular_values[j] = std::sqrt(std::max(0.0, lambda[nb - 1 - j]));
    if (with_vectors) {
        out.vectors = Eigen::MatrixXd::Zero(n, kept);
        for (int j = 0; j < kept; ++j) {
            const Eigen::VectorXd xb = ges.eigenvectors().col(nb - 1 - j);
            for (int i = 0; i < nb; ++i) out.vectors(bnd[i], j) = xb[i];
            if (ni > 0) {
                const Eigen::VectorXd xi = interior_map * xb;
                for (int i = 0; i < ni; ++i) out.vectors(inner[i], j) = xi[i];
            }
        }
    }
    return out;
}

TraceSpectrum trace_singular_values(const DiscreteSystem& system, WeightMode mode, int k, bool with_vectors) {
    const SpMat& form = mode == WeightMode::Weighted ? system.boundary_gram_weighted : system.boundary_gram_unit;
    TraceSpectrum s = generalized_singular_values(form, system.h1_gram, k, with_vectors);
    s.mode = mode;
    return s;
}

DiscreteSystem gram_system(const Mesh& mesh, const CuspDomain& domain) {
    return assemble(mesh, RobinCoefficients::laplace(), domain);
}

double tip_mass_fraction(const Mesh& mesh, const CuspDomain& domain, const Eigen::VectorXd& u, double delta) {
    const Rule1D& rule = gauss_legendre(3);
    double below = 0;
    double total = 0;
    for (const auto& e : mesh.boundary_edges) {
        const Vec2& a = mesh.nodes[e.nodes[0]];
        const Vec2& b = mesh.nodes[e.nodes[1]];
        const double ua = u[e.nodes[0]];
        const double ub = u[e.nodes[1]];
        const double len = (b - a).norm();
        double mass = 0;
        for (std::size_t q = 0; q < rule.nodes.size(); ++q) {
            const double tau = 0.5 * (1.0 + rule.nodes[q]);
            const Vec2 x = a + tau * (b - a);
            const double v = (1.0 - tau) * ua + tau * ub;
            mass += 0.5 * len * rule.weights[q] * domain.weight_at_height(x.y()) * v * v;
        }
        total += mass;
        if (0.5 * (a.y() + b.y()) < delta) below += mass;
    }
    return total > 0 ? below / total : 0.0;
}

CompactnessReport compactness_report(const CuspDomain& domain, const Mesh& base_mesh, int levels, int k) {
    if (levels < 1 || levels > 4) throw InvalidArgument("compactness_report: levels must be in [1, 4]");
    CompactnessReport report;
    Mesh mesh = base_mesh;
    for (int level = 0; level < levels; ++level) {
        if (level > 0) mesh = refine(mesh, domain);
        const DiscreteSystem sys = gram_system(mesh, domain);
        LevelSpectra ls;
        ls.level = level;
        ls.nodes = mesh.num_nodes();
        ls.weighted = trace_singular_values(sys, WeightMode::Weighted, k, true);
        ls.unweighted = trace_singular_values(sys, WeightMode::Unweighted, k);
        ls.weighted.level = ls.unweighted.level = level;
        ls.boundary_nodes = ls.weighted.rank;
        const int nv = std::min<int>(kTipVectors, static_cast<int>(ls.weighted.vectors.cols()));
        for (double delta : kTipDeltas) {
            double below = 0;
            double total = 0;
            for (int j = 0; j < nv; ++j) {
                const Eigen::VectorXd v = ls.weighted.vectors.col(j);
                const double mass = v.dot(sys.boundary_gram_weighted * v);
                below += tip_mass_fraction(mesh, domain, v, delta) * mass;
                total += mass;
            }
            ls.tip.push_back({delta, total > 0 ? below / total : 0.0});
        }
        ls.weighted.vectors.resize(0, 0);
        report.unweighted_top_by_level.push_back(ls.unweighted.singular_values.front());
        report.levels.push_back(std::move(ls));
    }
    const auto& finest = report.levels.back().weighted.singular_values;
    report.c_emb = finest.front();
    report.decay_ratio_k25 =
        finest.size() >= 25 && finest.front() > 0 ? finest[24] / finest.front() : std::numeric_limits<double>::quiet_NaN();
    return report;
}

void write_spectrum_csv(std::ostream& os, const CompactnessReport& report) {
    os << "level,mode,j,s_j\n";
    for (const auto& ls : report.levels) {
        for (const TraceSpectrum* s : {&ls.weighted, &ls.unweighted}) {
            for (std::size_t j = 0; j < s->singular_values.size(); ++j) {
                os << fmt::format("{},{},{},{:.17g}\n", ls.level, to_string(s->mode), j + 1, s->singular_values[j]);
            }
        }
    }
}

}  // namespace cuspfem
