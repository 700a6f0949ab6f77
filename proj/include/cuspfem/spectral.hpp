#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "cuspfem/fem.hpp"

namespace cuspfem {

enum class WeightMode { Weighted, Unweighted };

std::string to_string(WeightMode mode);
WeightMode parse_weight_mode(const std::string& name);

/// Generalized singular values of the discrete trace map, largest first.
struct TraceSpectrum {
    int level = 0;
    WeightMode mode = WeightMode::Weighted;
    std::vector<double> singular_values;
    int rank = 0;         // number of boundary degrees of freedom
    bool padded = false;  // k exceeded the rank; trailing entries are exact zeros
    // Columns are H-normalized eigenvectors on all mesh nodes, matching singular_values
    // (only the non-padded ones).
    Eigen::MatrixXd vectors;
};

/// s_j = sqrt(lambda_j) for the k largest eigenvalues of  B x = lambda H x.
/// B must be PSD and supported on a node subset; the problem is reduced to that
/// subset by an exact Schur complement of H.
TraceSpectrum generalized_singular_values(const SpMat& boundary_form, const SpMat& gram, int k,
                                          bool with_vectors = false);

TraceSpectrum trace_singular_values(const DiscreteSystem& system, WeightMode mode, int k,
                                    bool with_vectors = false);

/// System with only the Gram matrices of interest (Laplace coefficients, no data).
DiscreteSystem gram_system(const Mesh& mesh, const CuspDomain& domain);

/// Weighted boundary mass of u below height delta divided by the total.
double tip_mass_fraction(const Mesh& mesh, const CuspDomain& domain, const Eigen::VectorXd& u, double delta);

struct TipDiagnostic {
    double delta = 0;
    double fraction = 0;  // summed over the leading eigenvectors
};

struct LevelSpectra {
    int level = 0;
    int nodes = 0;
    int boundary_nodes = 0;
    TraceSpectrum weighted;
    TraceSpectrum unweighted;
    std::vector<TipDiagnostic> tip;
};

struct CompactnessReport {
    std::vector<LevelSpectra> levels;
    double c_emb = 0;            // weighted s_1 on the finest level
    double decay_ratio_k25 = 0;  // weighted s_25 / s_1 on the finest level (NaN if k < 25)
    std::vector<double> unweighted_top_by_level;
};

inline const std::vector<double> kTipDeltas{0.2, 0.1, 0.05};
inline constexpr int kTipVectors = 5;

/// Spectra on base_mesh refined 0..levels-1 times (levels <= 4).
CompactnessReport compactness_report(const CuspDomain& domain, const Mesh& base_mesh, int levels, int k);

/// CSV with header "level,mode,j,s_j".
void write_spectrum_csv(std::ostream& os, const CompactnessReport& report);

}  // namespace cuspfem
