#include "ddlcn/coding.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "ddlcn/errors.hpp"
#include "ddlcn/simd/kernels.hpp"

namespace ddlcn {
namespace {

void require_dims(std::span<const double> signal, const Dictionary& dict) {
  if (signal.size() != dict.dim()) {
    throw InvalidInput("signal dimension " + std::to_string(signal.size()) +
                       " does not match dictionary dimension " + std::to_string(dict.dim()));
  }
  if (dict.size() == 0) throw InvalidInput("dictionary has no atoms");
  for (double v : signal) {
    if (!std::isfinite(v)) throw InvalidInput("signal contains non-finite values");
  }
}

struct Subproblem {
  Eigen::MatrixXd gram;   // G = D_S D_S^T
  Eigen::VectorXd dty;    // D_S y
  Eigen::VectorXd weight; // beta * zeta_S
  double yty = 0.0;
};

double subproblem_objective(const Subproblem& p, const Eigen::VectorXd& g) {
  const double quad = 0.5 * (g.dot(p.gram * g) - 2.0 * g.dot(p.dty) + p.yty);
  return std::max(0.0, quad) + p.weight.dot(g.cwiseAbs());
}

// Re-solve exactly assuming z's support and signs are right, then accept
// only if the full optimality conditions hold.
bool polish(const Subproblem& p, const Eigen::VectorXd& z, Eigen::VectorXd& out) {
  const Eigen::Index n = z.size();
  std::vector<Eigen::Index> support;
  for (Eigen::Index j = 0; j < n; ++j) {
    if (z[j] != 0.0) support.push_back(j);
  }
  if (support.empty()) return false;
  const auto s = static_cast<Eigen::Index>(support.size());

  Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(s + 1, s + 1);
  Eigen::VectorXd rhs(s + 1);
  for (Eigen::Index a = 0; a < s; ++a) {
    for (Eigen::Index b = 0; b < s; ++b) kkt(a, b) = p.gram(support[a], support[b]);
    kkt(a, s) = 1.0;
    kkt(s, a) = 1.0;
    const double sign = z[support[a]] > 0.0 ? 1.0 : -1.0;
    rhs[a] = p.dty[support[a]] - p.weight[support[a]] * sign;
  }
  rhs[s] = 1.0;

  Eigen::FullPivLU<Eigen::MatrixXd> lu(kkt);
  if (!lu.isInvertible()) return false;
  const Eigen::VectorXd sol = lu.solve(rhs);
  if (!sol.allFinite()) return false;

  Eigen::VectorXd g = Eigen::VectorXd::Zero(n);
  for (Eigen::Index a = 0; a < s; ++a) {
    const double sign = z[support[a]] > 0.0 ? 1.0 : -1.0;
    if (sol[a] * sign <= 0.0) return false;
    g[support[a]] = sol[a];
  }
  const double mu = sol[s];

  // Stationarity off the support: |(G g - D y)_j + mu| <= beta zeta_j.
  const Eigen::VectorXd grad = p.gram * g - p.dty;
  const double scale = 1.0 + grad.cwiseAbs().maxCoeff() + std::abs(mu);
  for (Eigen::Index j = 0; j < n; ++j) {
    if (g[j] != 0.0) continue;
    if (std::abs(grad[j] + mu) > p.weight[j] + 1e-9 * scale) return false;
  }
  out = g;
  return true;
}

struct SolveResult {
  Eigen::VectorXd code;
  std::size_t iterations = 0;
  bool converged = false;
};

SolveResult solve_locality_admm(const Subproblem& p, const AdmmSettings& settings) {
  const Eigen::Index n = p.dty.size();
  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(n);

  double rho = settings.rho;
  Eigen::LLT<Eigen::MatrixXd> chol;
  Eigen::VectorXd minv_ones;
  double ones_minv_ones = 0.0;
  auto factor = [&] {
    chol.compute(p.gram + rho * Eigen::MatrixXd::Identity(n, n));
    minv_ones = chol.solve(ones);
    ones_minv_ones = ones.dot(minv_ones);
  };
  factor();

  Eigen::VectorXd g = Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n));
  Eigen::VectorXd z = g;
  Eigen::VectorXd u = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd z_prev(n);

  SolveResult res;
  for (std::size_t it = 1; it <= settings.max_iterations; ++it) {
    // g-step: min 0.5||y - D g||^2 + rho/2 ||g - z + u||^2  s.t. 1^T g = 1
    const Eigen::VectorXd h = p.dty + rho * (z - u);
    const Eigen::VectorXd minv_h = chol.solve(h);
    const double mult = (ones.dot(minv_h) - 1.0) / ones_minv_ones;
    g = minv_h - mult * minv_ones;

    // z-step: per-coordinate soft threshold at beta zeta_j / rho.
    z_prev = z;
    const Eigen::VectorXd v = g + u;
    for (Eigen::Index j = 0; j < n; ++j) {
      const double t = p.weight[j] / rho;
      z[j] = v[j] > t ? v[j] - t : (v[j] < -t ? v[j] + t : 0.0);
    }
    u += g - z;

    const double primal = (g - z).norm();
    const double dual = rho * (z - z_prev).norm();
    res.iterations = it;
    if (primal < settings.tolerance && dual < settings.tolerance) {
      res.converged = true;
      break;
    }
    if (settings.adapt_rho) {
      if (primal > 10.0 * dual) {
        rho *= 2.0;
        u /= 2.0;
        factor();
      } else if (dual > 10.0 * primal) {
        rho /= 2.0;
        u *= 2.0;
        factor();
      }
    }
  }

  res.code = g;
  if (settings.polish) {
    Eigen::VectorXd exact;
    if (polish(p, z, exact) && subproblem_objective(p, exact) <= subproblem_objective(p, g) + 1e-12) {
      res.code = exact;
      res.converged = true;
    }
  }
  return res;
}

LayerCode code_on_subset(std::span<const double> signal, const Dictionary& dict, double beta,
                         std::span<const std::size_t> subset, std::span<const double> distances,
                         const AdmmSettings& settings) {
  if (!std::isfinite(beta) || beta < 0.0) throw InvalidInput("beta must be finite and >= 0");
  const auto n = static_cast<Eigen::Index>(subset.size());

  LayerCode code;
  code.layer_index = dict.layer_index;
  code.values.assign(dict.size(), 0.0);

  bool all_zero = true;
  for (std::size_t j : subset) {
    const auto a = dict.atom(j);
    if (std::any_of(a.begin(), a.end(), [](double v) { return v != 0.0; })) {
      all_zero = false;
      break;
    }
  }
  if (all_zero) {
    // Every feasible code reconstructs nothing; return the minimum-norm one.
    for (std::size_t j : subset) code.values[j] = 1.0 / static_cast<double>(n);
    code.degenerate = true;
    code.objective = locality_objective(signal, dict, code.values, beta, distances);
    return code;
  }

  Subproblem p;
  p.gram.resize(n, n);
  p.dty.resize(n);
  p.weight.resize(n);
  p.yty = simd::dot(signal, signal);
  for (Eigen::Index a = 0; a < n; ++a) {
    const auto da = dict.atom(subset[a]);
    p.dty[a] = simd::dot(da, signal);
    p.weight[a] = beta * distances[subset[a]];
    for (Eigen::Index b = a; b < n; ++b) {
      const double v = simd::dot(da, dict.atom(subset[b]));
      p.gram(a, b) = v;
      p.gram(b, a) = v;
    }
  }

  const SolveResult res = solve_locality_admm(p, settings);
  for (Eigen::Index a = 0; a < n; ++a) code.values[subset[a]] = res.code[a];
  code.iterations = res.iterations;
  code.converged = res.converged;
  code.objective = locality_objective(signal, dict, code.values, beta, distances);
  return code;
}

}  // namespace

std::vector<std::size_t> LayerCode::support() const {
  std::vector<std::size_t> s;
  for (std::size_t j = 0; j < values.size(); ++j) {
    if (std::abs(values[j]) > 1e-10) s.push_back(j);
  }
  return s;
}

LocalityVector locality_vector(std::span<const double> signal, const Dictionary& dict) {
  if (signal.size() != dict.dim()) throw InvalidInput("signal and dictionary dimensions differ");
  LocalityVector lv;
  lv.distances.resize(dict.size());
  for (std::size_t j = 0; j < dict.size(); ++j) {
    lv.distances[j] = std::sqrt(simd::squared_distance(signal, dict.atom(j)));
  }
  return lv;
}

double locality_objective(std::span<const double> signal, const Dictionary& dict,
                          std::span<const double> code, double beta, std::span<const double> distances) {
  std::vector<double> residual(signal.begin(), signal.end());
  double penalty = 0.0;
  for (std::size_t j = 0; j < code.size(); ++j) {
    if (code[j] == 0.0) continue;
    simd::axpy(-code[j], dict.atom(j), residual);
    penalty += std::abs(code[j]) * distances[j];
  }
  return 0.5 * simd::dot(residual, residual) + beta * penalty;
}

LayerCode code_exact(std::span<const double> signal, const Dictionary& dict, double beta,
                     const AdmmSettings& settings) {
  require_dims(signal, dict);
  const LocalityVector lv = locality_vector(signal, dict);
  std::vector<std::size_t> all(dict.size());
  std::iota(all.begin(), all.end(), 0);
  return code_on_subset(signal, dict, beta, all, lv.distances, settings);
}

LayerCode code_knn(std::span<const double> signal, const Dictionary& dict, double beta, std::size_t k,
                   const AdmmSettings& settings) {
  require_dims(signal, dict);
  if (k < 1 || k > dict.size()) {
    throw InvalidInput("k must lie in [1, " + std::to_string(dict.size()) + "], got " + std::to_string(k));
  }
  const LocalityVector lv = locality_vector(signal, dict);
  std::vector<std::size_t> order(dict.size());
  std::iota(order.begin(), order.end(), 0);
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                    [&](std::size_t a, std::size_t b) {
                      return lv.distances[a] < lv.distances[b] ||
                             (lv.distances[a] == lv.distances[b] && a < b);
                    });
  order.resize(k);
  std::sort(order.begin(), order.end());
  return code_on_subset(signal, dict, beta, order, lv.distances, settings);
}

double llc_objective(std::span<const double> signal, const Dictionary& dict, std::span<const double> code,
                     double lambda, double psi) {
  const LocalityVector lv = locality_vector(signal, dict);
  std::vector<double> residual(signal.begin(), signal.end());
  double penalty = 0.0;
  for (std::size_t j = 0; j < code.size(); ++j) {
    simd::axpy(-code[j], dict.atom(j), residual);
    const double b = std::exp(lv.distances[j] / psi);
    penalty += b * b * code[j] * code[j];
  }
  return simd::dot(residual, residual) + lambda * penalty;
}

LayerCode code_llc(std::span<const double> signal, const Dictionary& dict, double lambda, double psi) {
  require_dims(signal, dict);
  if (!(psi > 0.0) || !std::isfinite(psi)) throw InvalidInput("psi must be > 0");
  if (!std::isfinite(lambda) || lambda < 0.0) throw InvalidInput("lambda must be finite and >= 0");
  const auto n = static_cast<Eigen::Index>(dict.size());
  const LocalityVector lv = locality_vector(signal, dict);

  // Shifted atoms z_j = d_j - y; for 1^T g = 1, ||y - D g||^2 = g^T C g.
  const auto m = static_cast<Eigen::Index>(dict.dim());
  Eigen::MatrixXd shifted(n, m);
  for (Eigen::Index j = 0; j < n; ++j) {
    const auto a = dict.atom(static_cast<std::size_t>(j));
    for (Eigen::Index i = 0; i < m; ++i) shifted(j, i) = a[i] - signal[i];
  }
  Eigen::MatrixXd system = shifted * shifted.transpose();
  for (Eigen::Index j = 0; j < n; ++j) {
    const double b = std::exp(lv.distances[j] / psi);
    system(j, j) += lambda * b * b;
  }

  LayerCode code;
  code.layer_index = dict.layer_index;
  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(n);
  Eigen::LDLT<Eigen::MatrixXd> ldlt(system);
  Eigen::VectorXd w = ldlt.solve(ones);
  const bool singular = ldlt.info() != Eigen::Success || !w.allFinite() ||
                        (system * w - ones).norm() > 1e-8 * (1.0 + system.norm() * w.norm()) ||
                        std::abs(w.sum()) < 1e-300;
  if (singular) {
    const double jitter = 1e-10 * std::max(1.0, system.trace() / static_cast<double>(n));
    system.diagonal().array() += jitter;
    w = system.ldlt().solve(ones);
    code.degenerate = true;
  }
  w /= w.sum();
  code.values.assign(w.data(), w.data() + n);
  code.objective = llc_objective(signal, dict, code.values, lambda, psi);
  return code;
}

std::vector<double> approximate_layer1(const LayerCode& code, const Dictionary& dict) {
  if (code.values.size() != dict.size()) throw InvalidInput("code length does not match dictionary size");
  std::vector<double> out(dict.dim(), 0.0);
  for (std::size_t j = 0; j < dict.size(); ++j) {
    if (code.values[j] != 0.0) simd::axpy(code.values[j], dict.atom(j), out);
  }
  return out;
}

std::vector<double> approximate_layer2(const LayerCode& code1, std::span<const LayerCode> codes2,
                                       const Dictionary& dict2) {
  if (codes2.size() != code1.values.size()) {
    throw InvalidInput("need one layer-2 code per layer-1 atom");
  }
  std::vector<double> out(dict2.dim(), 0.0);
  for (std::size_t j = 0; j < code1.values.size(); ++j) {
    const double w = code1.values[j];
    if (w == 0.0) continue;
    const std::vector<double> inner = approximate_layer1(codes2[j], dict2);
    simd::axpy(w, inner, out);
  }
  return out;
}

}  // namespace ddlcn
