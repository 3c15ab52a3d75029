#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "ddlcn/matrix.hpp"

namespace ddlcn {

inline constexpr int kUnlabeled = -1;

/// One layer's atoms. Row j of `atoms` is atom j (dimension m); every atom
/// lies in the unit l2 ball. Layer-1 dictionaries are grouped by class and
/// record each atom's class; deeper layers carry kUnlabeled.
struct Dictionary {
  RowMatrix atoms;
  std::vector<int> atom_class;
  std::size_t layer_index = 1;

  std::size_t size() const { return atoms.rows; }
  std::size_t dim() const { return atoms.cols; }
  std::span<const double> atom(std::size_t j) const { return atoms.row(j); }

  bool operator==(const Dictionary&) const = default;
};

/// Builds a dictionary from explicit atoms (validated: finite, unit ball).
Dictionary make_dictionary(RowMatrix atoms, std::size_t layer_index = 1, int atom_class = kUnlabeled);

struct LassoSolution {
  std::vector<double> coefficients;
  double objective = 0.0;  // 0.5 * ||y - D x||^2 + lambda * ||x||_1
  std::size_t sweeps = 0;
};

/// Gram matrix D D^T of the atoms (size x size).
RowMatrix gram_matrix(const Dictionary& dict);

/// Penalized lasso min 0.5 ||y - D x||^2 + lambda ||x||_1 by cyclic
/// coordinate descent with soft-thresholding, run until the KKT residual
/// falls below 1e-8.
LassoSolution lasso(std::span<const double> signal, const Dictionary& dict, double lambda);

/// Same, reusing a precomputed Gram matrix and starting from `warm_start`
/// (empty means zeros). Coordinate descent never increases the objective
/// from its starting point.
LassoSolution lasso(std::span<const double> signal, const Dictionary& dict, const RowMatrix& gram,
                    double lambda, std::span<const double> warm_start);

double lasso_objective(std::span<const double> signal, const Dictionary& dict,
                       std::span<const double> coefficients, double lambda);

/// Largest violation of the lasso optimality conditions:
/// |<d_j, r>| <= lambda where x_j == 0, <d_j, r> == lambda sign(x_j) elsewhere.
double lasso_kkt_residual(std::span<const double> signal, const Dictionary& dict,
                          std::span<const double> coefficients, double lambda);

struct LearningOptions {
  double lambda = 0.15;
  std::size_t iterations = 30;
  std::uint64_t seed = 0;
  std::size_t threads = 1;  // workers for the per-sample coding step
};

/// Per-outer-iteration training objective sum_i 0.5||y_i - D a_i||^2 + lambda||a_i||_1.
/// Entry 0 is measured on the initial atoms, entry t after t atom updates.
struct LearningTrace {
  std::vector<double> objective;
  std::vector<double> max_kkt_residual;
  std::size_t reseeded_atoms = 0;
};

/// Learns `atom_count` atoms from the rows of `samples` by alternating lasso
/// coding and one block-coordinate pass over the atoms, each projected onto
/// the unit ball. Atoms start from distinct samples drawn by the seeded
/// generator (padded with random unit vectors when there are too few).
Dictionary learn_class_dictionary(const RowMatrix& samples, std::size_t atom_count,
                                  const LearningOptions& options, LearningTrace* trace = nullptr);

/// Concatenates per-class dictionaries (class i at position i) into a layer-1
/// dictionary of r * q atoms, recording each atom's class.
Dictionary assemble_first_layer(std::span<const Dictionary> per_class);

/// Learns layer n + 1 using the atoms of layer n as training signals.
Dictionary learn_next_layer(const Dictionary& prev, std::size_t next_size,
                            const LearningOptions& options, LearningTrace* trace = nullptr);

}  // namespace ddlcn
