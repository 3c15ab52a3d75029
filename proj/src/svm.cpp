#include "ddlcn/svm.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <string>

#include "ddlcn/errors.hpp"
#include "ddlcn/parallel.hpp"
#include "ddlcn/rng.hpp"
#include "ddlcn/simd/kernels.hpp"

namespace ddlcn {

double svm_primal_objective(std::span<const double> w, double bias, const RowMatrix& features,
                            std::span<const int> targets, double C) {
  double loss = 0.0;
  for (std::size_t i = 0; i < features.rows; ++i) {
    const double margin = targets[i] * (simd::dot(w, features.row(i)) + bias);
    loss += std::max(0.0, 1.0 - margin);
  }
  return 0.5 * (simd::dot(w, w) + bias * bias) + C * loss;
}

std::vector<double> svm_primal_gradient(std::span<const double> w, double bias, const RowMatrix& features,
                                        std::span<const int> targets, double C) {
  std::vector<double> grad(w.begin(), w.end());
  grad.push_back(bias);
  std::span<double> gw(grad.data(), w.size());
  for (std::size_t i = 0; i < features.rows; ++i) {
    const double margin = targets[i] * (simd::dot(w, features.row(i)) + bias);
    if (margin < 1.0) {
      simd::axpy(-C * targets[i], features.row(i), gw);
      grad.back() -= C * targets[i];
    }
  }
  return grad;
}

BinarySvm train_binary_svm(const RowMatrix& features, std::span<const int> targets, const SvmOptions& options) {
  const std::size_t n = features.rows;
  if (targets.size() != n) throw InvalidInput("target count does not match feature rows");
  if (!(options.C > 0.0)) throw InvalidInput("SVM regularization C must be > 0");

  BinarySvm m;
  m.w.assign(features.cols, 0.0);
  m.alpha.assign(n, 0.0);
  std::vector<double> diag(n);
  for (std::size_t i = 0; i < n; ++i) diag[i] = simd::dot(features.row(i), features.row(i)) + 1.0;

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(options.seed);
  const double C = options.C;

  for (std::size_t epoch = 0; epoch < options.epochs; ++epoch) {
    rng.shuffle(order);
    for (std::size_t i : order) {
      const double y = targets[i];
      const double g = y * (simd::dot(m.w, features.row(i)) + m.bias) - 1.0;
      double& a = m.alpha[i];
      double pg = g;
      if (a == 0.0) pg = std::min(g, 0.0);
      else if (a == C) pg = std::max(g, 0.0);
      if (std::abs(pg) <= 1e-12) continue;
      const double updated = std::clamp(a - g / diag[i], 0.0, C);
      const double step = (updated - a) * y;
      a = updated;
      simd::axpy(step, features.row(i), m.w);
      m.bias += step;
    }
    m.epochs = epoch + 1;

    const double wnorm = simd::dot(m.w, m.w) + m.bias * m.bias;
    m.primal = svm_primal_objective(m.w, m.bias, features, targets, C);
    m.dual = std::accumulate(m.alpha.begin(), m.alpha.end(), 0.0) - 0.5 * wnorm;
    if (m.primal - m.dual <= options.gap_tolerance * m.primal) break;
  }
  return m;
}

SvmModel train_svm(const RowMatrix& features, std::span<const int> labels, const SvmOptions& options) {
  if (labels.size() != features.rows) throw InvalidInput("label count does not match feature rows");
  const std::set<int> distinct(labels.begin(), labels.end());
  if (distinct.size() < 2) throw InvalidInput("SVM training needs at least two classes");
  for (double v : features.data) {
    if (!std::isfinite(v)) throw InvalidInput("SVM features contain non-finite values");
  }

  SvmModel model;
  model.classes.assign(distinct.begin(), distinct.end());
  model.C = options.C;
  model.weights = RowMatrix(model.classes.size(), features.cols);
  model.biases.assign(model.classes.size(), 0.0);

  parallel_for(model.classes.size(), options.threads, [&](std::size_t c) {
    std::vector<int> targets(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) targets[i] = labels[i] == model.classes[c] ? 1 : -1;
    SvmOptions per_class = options;
    per_class.seed = derive_seed(options.seed, c);
    const BinarySvm b = train_binary_svm(features, targets, per_class);
    std::copy(b.w.begin(), b.w.end(), model.weights.row(c).begin());
    model.biases[c] = b.bias;
  });
  return model;
}

std::vector<double> svm_scores(const SvmModel& model, std::span<const double> feature) {
  if (feature.size() != model.feature_dim()) {
    throw InvalidInput("feature dimension " + std::to_string(feature.size()) + " does not match SVM dimension " +
                       std::to_string(model.feature_dim()));
  }
  std::vector<double> scores(model.classes.size());
  for (std::size_t c = 0; c < scores.size(); ++c) {
    scores[c] = simd::dot(model.weights.row(c), feature) + model.biases[c];
  }
  return scores;
}

int predict(const SvmModel& model, std::span<const double> feature) {
  const std::vector<double> scores = svm_scores(model, feature);
  std::size_t best = 0;
  for (std::size_t c = 1; c < scores.size(); ++c) {
    if (scores[c] > scores[best]) best = c;
  }
  return model.classes[best];
}

}  // namespace ddlcn
