#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "ddlcn/matrix.hpp"

namespace ddlcn {

/// One-vs-rest linear SVM: row c of `weights` and `biases[c]` score class
/// `classes[c]`.
struct SvmModel {
  RowMatrix weights;
  std::vector<double> biases;
  std::vector<int> classes;
  double C = 1.0;

  std::size_t feature_dim() const { return weights.cols; }
  bool operator==(const SvmModel&) const = default;
};

struct SvmOptions {
  double C = 1.0;
  std::size_t epochs = 100;
  std::uint64_t seed = 0;
  double gap_tolerance = 1e-3;  // stop when primal - dual <= tol * primal
  std::size_t threads = 1;      // per-class problems run concurrently
};

/// Binary hinge-loss problem  min 0.5 (||w||^2 + b^2) + C sum max(0, 1 - y_i (w.x_i + b)).
/// The bias is an extra always-one feature, so it is regularized too.
struct BinarySvm {
  std::vector<double> w;
  double bias = 0.0;
  std::vector<double> alpha;  // dual variables, each in [0, C]
  double primal = 0.0;
  double dual = 0.0;
  std::size_t epochs = 0;
};

/// Dual coordinate descent on one binary problem; `targets` are +1 / -1.
BinarySvm train_binary_svm(const RowMatrix& features, std::span<const int> targets, const SvmOptions& options);

double svm_primal_objective(std::span<const double> w, double bias, const RowMatrix& features,
                            std::span<const int> targets, double C);

/// Gradient of the primal objective, valid where no margin equals exactly one.
/// Returns dim + 1 entries; the last is d/d bias.
std::vector<double> svm_primal_gradient(std::span<const double> w, double bias, const RowMatrix& features,
                                        std::span<const int> targets, double C);

/// Trains one binary problem per distinct label. Needs at least two classes.
SvmModel train_svm(const RowMatrix& features, std::span<const int> labels, const SvmOptions& options);

std::vector<double> svm_scores(const SvmModel& model, std::span<const double> feature);

/// Class with the highest score; ties go to the lower class id.
int predict(const SvmModel& model, std::span<const double> feature);

}  // namespace ddlcn
