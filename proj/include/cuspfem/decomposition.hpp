#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "cuspfem/expression.hpp"
#include "cuspfem/geometry.hpp"
#include "cuspfem/mesh.hpp"
#include "cuspfem/quadrature.hpp"

namespace cuspfem {

/// Smooth bumps h (support (-1, 1)) and K (support (1/2, 1)) with unit integrals.
struct MollifierPair {
    std::function<double(double)> h;
    std::function<double(double)> K;
    double c_h = 0;  // normalization constants
    double c_K = 0;
    double m_K = 0;  // int s K(s) ds
};

/// h(t) = c_h exp(-1/(1-t^2)), K(t) = c_K exp(-1/(1-(4t-3)^2)).
MollifierPair make_standard_mollifiers();

/// F and grad F at points of G.
class SampledField {
public:
    virtual ~SampledField() = default;
    virtual double value(const Vec2& x) const = 0;
    virtual Vec2 gradient(const Vec2& x) const = 0;
    virtual std::string name() const = 0;
};

/// Expression field with a symbolic gradient.
class AnalyticField : public SampledField {
public:
    AnalyticField(const CuspDomain& domain, Expr expr, std::string name = "");
    double value(const Vec2& x) const override;
    Vec2 gradient(const Vec2& x) const override;
    std::string name() const override { return name_; }

private:
    std::shared_ptr<const CuspDomain> domain_;
    Expr expr_, dx1_, dx2_;
    std::string name_;
};

/// Continuous piecewise-linear field on a mesh.  Points slightly outside the
/// polygon (curved boundary) are evaluated on the nearest triangle.
class P1Field : public SampledField {
public:
    P1Field(std::shared_ptr<const Mesh> mesh, Eigen::VectorXd values, std::string name = "p1");
    double value(const Vec2& x) const override;
    Vec2 gradient(const Vec2& x) const override;
    std::string name() const override { return name_; }

    /// Triangle containing x, or the nearest one.
    int locate(const Vec2& x) const;

private:
    std::array<double, 3> barycentric(int tri, const Vec2& x) const;

    std::shared_ptr<const Mesh> mesh_;
    Eigen::VectorXd values_;
    std::string name_;
    Vec2 lo_, cell_;
    int nx_ = 1, ny_ = 1;
    std::vector<std::vector<int>> buckets_;
};

/// Parses "const:<value>" or an expression over x1, x2, phi, ...
std::unique_ptr<SampledField> make_field(const CuspDomain& domain, const std::string& spec);

/// Tensor rule on the window, in the scaled variables z' = phi s, z_n = x_n + phi t.
struct WindowRule {
    int order = 32;
    int panels = 4;
};

/// alpha(x_n) = int F(z) h(z'/phi) K((z_n - x_n)/phi) dz / phi^2 with phi = phi(x_n).
/// Throws WindowOutOfDomain unless 0 < x_n and x_n + phi(x_n) < 1.
double alpha_component(const SampledField& F, const CuspDomain& domain, const MollifierPair& moll, double x_n,
                       const WindowRule& rule = {});

/// R(x) = F(x) - alpha(x_2).
std::function<double(const Vec2&)> remainder(const SampledField& F, std::function<double(double)> alpha);

/// Peak region {eps_low <= x2 <= x_max, |x1| < phi(x2)} integrated on the strip
/// x1 = s phi(t): Gauss-Legendre in s, geometric panels (ratio 2) in t.
struct PeakRegionRule {
    double eps_low = 1e-3;
    double x_max = 0.5;
    int s_order = 16;
    int t_order = 16;
};

/// (int |g|^p dx)^(1/p) over the peak region.
double peak_lp_norm(const std::function<double(const Vec2&)>& g, const CuspDomain& domain, double p,
                    const PeakRegionRule& rule = {});

/// [(int |F|^p)^(2/p) + (int |grad F|^p)^(2/p)]^(1/2) over the peak region.
double peak_w1p_norm(const SampledField& F, const CuspDomain& domain, double p, const PeakRegionRule& rule = {});

struct DecompositionCheck {
    std::string field;
    double p = 2;
    std::optional<double> ratio;  // empty when ||F|| = 0
    double norm_F = 0;
    double norm_phiinvR = 0;
    double eps_low = 0;
};

/// ||phi^{-1}(x2) R||_{L^p(peak)} / ||F||_{W^1_p(peak)}.
DecompositionCheck check_decomposition_bound(const SampledField& F, const CuspDomain& domain, double p,
                                             const MollifierPair& moll, const PeakRegionRule& rule = {},
                                             const WindowRule& window = {});

/// Test family used for the uniform bound: 1, x2, x1, x2^2, x1*x2, sin(pi*x2).
const std::vector<std::string>& decomposition_test_family();

}  // namespace cuspfem
