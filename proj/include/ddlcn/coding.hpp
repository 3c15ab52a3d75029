#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "ddlcn/dictionary.hpp"

namespace ddlcn {

/// Euclidean distance from a signal to every atom of a dictionary.
struct LocalityVector {
  std::vector<double> distances;
};

/// A code over one layer's atoms. Every solver returns codes whose entries
/// sum to one.
struct LayerCode {
  std::vector<double> values;
  std::size_t layer_index = 1;
  double objective = 0.0;
  bool degenerate = false;  // solution not unique, or a regularizing fallback was used
  bool converged = true;
  std::size_t iterations = 0;

  /// Indices with |value| > 1e-10.
  std::vector<std::size_t> support() const;
};

LocalityVector locality_vector(std::span<const double> signal, const Dictionary& dict);

struct AdmmSettings {
  double rho = 1.0;
  double tolerance = 1e-8;
  std::size_t max_iterations = 5000;
  bool adapt_rho = true;  // residual balancing (mu = 10, tau = 2)
  bool polish = true;     // exact re-solve on the detected support and sign pattern
};

/// 0.5 ||y - D g||^2 + beta * sum_j |g_j| zeta_j.
double locality_objective(std::span<const double> signal, const Dictionary& dict,
                          std::span<const double> code, double beta, std::span<const double> distances);

/// Locality-weighted l1 coding with the shift-invariance constraint:
///   min 0.5 ||y - D g||^2 + beta ||g (.) zeta||_1   s.t.  1^T g = 1
/// solved by operator splitting (g = z): an equality-constrained
/// least-squares g-step, a weighted soft-threshold z-step and a dual update.
LayerCode code_exact(std::span<const double> signal, const Dictionary& dict, double beta,
                     const AdmmSettings& settings = {});

/// code_exact restricted to the k atoms nearest the signal (ties broken by
/// lower index); zero elsewhere.
LayerCode code_knn(std::span<const double> signal, const Dictionary& dict, double beta, std::size_t k,
                   const AdmmSettings& settings = {});

/// ||y - D g||^2 + lambda ||b (.) g||^2 with b = exp(dist / psi).
double llc_objective(std::span<const double> signal, const Dictionary& dict, std::span<const double> code,
                     double lambda, double psi);

/// Locality-constrained linear coding baseline, closed form:
/// solve (C + lambda diag(b^2)) w = 1 with C the covariance of the atoms
/// shifted by the signal, then g = w / 1^T w.
LayerCode code_llc(std::span<const double> signal, const Dictionary& dict, double lambda, double psi = 1.0);

/// y' = D g for a layer-1 code.
std::vector<double> approximate_layer1(const LayerCode& code, const Dictionary& dict);

/// y'' = sum_j g1_j * (U g2_j): each activated layer-1 atom replaced by its
/// own layer-2 reconstruction. `codes2[j]` is the layer-2 code of atom j.
std::vector<double> approximate_layer2(const LayerCode& code1, std::span<const LayerCode> codes2,
                                       const Dictionary& dict2);

}  // namespace ddlcn
