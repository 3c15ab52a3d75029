#include "ddlcn/dictionary.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "ddlcn/errors.hpp"
#include "ddlcn/parallel.hpp"
#include "ddlcn/rng.hpp"
#include "ddlcn/simd/kernels.hpp"

namespace ddlcn {
namespace {

constexpr double kKktTolerance = 1e-8;
constexpr std::size_t kMaxSweeps = 100000;
constexpr double kUnitBallSlack = 1e-9;

double soft_threshold(double v, double t) {
  if (v > t) return v - t;
  if (v < -t) return v + t;
  return 0.0;
}

void require_finite(std::span<const double> v, const char* what) {
  for (double x : v) {
    if (!std::isfinite(x)) throw InvalidInput(std::string(what) + " contains non-finite values");
  }
}

// c = D y - G x
void correlations(std::span<const double> dty, const RowMatrix& gram, std::span<const double> x,
                  std::span<double> c) {
  for (std::size_t j = 0; j < c.size(); ++j) c[j] = dty[j] - simd::dot(gram.row(j), x);
}

double kkt_from_correlations(const RowMatrix& gram, std::span<const double> x, std::span<const double> c,
                             double lambda, bool active_only) {
  double worst = 0.0;
  for (std::size_t j = 0; j < x.size(); ++j) {
    if (gram(j, j) <= 0.0) continue;
    double r;
    if (x[j] == 0.0) {
      if (active_only) continue;
      r = std::max(0.0, std::abs(c[j]) - lambda);
    } else {
      r = std::abs(c[j] - std::copysign(lambda, x[j]));
    }
    worst = std::max(worst, r);
  }
  return worst;
}

void project_to_unit_ball(std::span<double> v) {
  const double n = std::sqrt(simd::dot(v, v));
  if (n > 1.0) simd::scale(v, 1.0 / n);
}

}  // namespace

Dictionary make_dictionary(RowMatrix atoms, std::size_t layer_index, int atom_class) {
  require_finite(atoms.data, "dictionary");
  for (std::size_t j = 0; j < atoms.rows; ++j) {
    const auto a = atoms.row(j);
    if (std::sqrt(simd::scalar_kernels().dot(a.data(), a.data(), a.size())) > 1.0 + kUnitBallSlack) {
      throw InvalidInput("atom " + std::to_string(j) + " lies outside the unit ball");
    }
  }
  Dictionary d;
  d.atom_class.assign(atoms.rows, atom_class);
  d.atoms = std::move(atoms);
  d.layer_index = layer_index;
  return d;
}

RowMatrix gram_matrix(const Dictionary& dict) {
  const std::size_t n = dict.size();
  RowMatrix g(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) {
      const double v = simd::dot(dict.atom(i), dict.atom(j));
      g(i, j) = v;
      g(j, i) = v;
    }
  }
  return g;
}

double lasso_objective(std::span<const double> signal, const Dictionary& dict,
                       std::span<const double> coefficients, double lambda) {
  std::vector<double> residual(signal.begin(), signal.end());
  double l1 = 0.0;
  for (std::size_t j = 0; j < coefficients.size(); ++j) {
    if (coefficients[j] == 0.0) continue;
    simd::axpy(-coefficients[j], dict.atom(j), residual);
    l1 += std::abs(coefficients[j]);
  }
  return 0.5 * simd::dot(residual, residual) + lambda * l1;
}

double lasso_kkt_residual(std::span<const double> signal, const Dictionary& dict,
                          std::span<const double> coefficients, double lambda) {
  std::vector<double> residual(signal.begin(), signal.end());
  for (std::size_t j = 0; j < coefficients.size(); ++j) {
    if (coefficients[j] != 0.0) simd::axpy(-coefficients[j], dict.atom(j), residual);
  }
  double worst = 0.0;
  for (std::size_t j = 0; j < coefficients.size(); ++j) {
    const double corr = simd::dot(dict.atom(j), residual);
    const double r = coefficients[j] == 0.0 ? std::max(0.0, std::abs(corr) - lambda)
                                            : std::abs(corr - std::copysign(lambda, coefficients[j]));
    worst = std::max(worst, r);
  }
  return worst;
}

LassoSolution lasso(std::span<const double> signal, const Dictionary& dict, double lambda) {
  return lasso(signal, dict, gram_matrix(dict), lambda, {});
}

LassoSolution lasso(std::span<const double> signal, const Dictionary& dict, const RowMatrix& gram,
                    double lambda, std::span<const double> warm_start) {
  if (signal.size() != dict.dim()) {
    throw InvalidInput("signal dimension " + std::to_string(signal.size()) +
                       " does not match dictionary dimension " + std::to_string(dict.dim()));
  }
  require_finite(signal, "lasso signal");
  if (!std::isfinite(lambda) || lambda < 0.0) throw InvalidInput("lasso lambda must be finite and >= 0");
  const std::size_t n = dict.size();
  if (!warm_start.empty() && warm_start.size() != n) throw InvalidInput("warm start has wrong length");

  LassoSolution sol;
  sol.coefficients.assign(n, 0.0);
  if (!warm_start.empty()) std::copy(warm_start.begin(), warm_start.end(), sol.coefficients.begin());
  auto& x = sol.coefficients;

  std::vector<double> dty(n);
  for (std::size_t j = 0; j < n; ++j) dty[j] = simd::dot(dict.atom(j), signal);
  std::vector<double> c(n);
  correlations(dty, gram, x, c);

  auto sweep = [&](bool active_only) {
    for (std::size_t j = 0; j < n; ++j) {
      if (active_only && x[j] == 0.0) continue;
      const double gjj = gram(j, j);
      if (gjj <= 0.0) continue;
      const double old = x[j];
      const double updated = soft_threshold(c[j] + gjj * old, lambda) / gjj;
      if (updated != old) {
        simd::axpy(-(updated - old), gram.row(j), c);
        x[j] = updated;
      }
    }
    ++sol.sweeps;
  };

  while (sol.sweeps < kMaxSweeps) {
    sweep(false);
    // Polish the current support before paying for another full pass.
    for (std::size_t inner = 0; inner < 1000 && sol.sweeps < kMaxSweeps; ++inner) {
      if (kkt_from_correlations(gram, x, c, lambda, true) <= 0.1 * kKktTolerance) break;
      sweep(true);
    }
    correlations(dty, gram, x, c);
    if (kkt_from_correlations(gram, x, c, lambda, false) <= kKktTolerance) break;
  }

  sol.objective = lasso_objective(signal, dict, x, lambda);
  return sol;
}

namespace {

Dictionary learn_atoms(const RowMatrix& samples, std::size_t atom_count, const LearningOptions& options,
                       LearningTrace* trace, std::size_t layer_index) {
  if (samples.rows == 0) throw InvalidInput("dictionary learning needs at least one sample");
  if (atom_count == 0) throw InvalidInput("dictionary learning needs at least one atom");
  if (options.iterations == 0) throw InvalidInput("dictionary learning needs at least one iteration");
  if (samples.cols == 0) throw InvalidInput("samples have zero dimension");
  if (!std::isfinite(options.lambda) || options.lambda < 0.0) throw InvalidInput("lambda must be >= 0");
  require_finite(samples.data, "training samples");

  const std::size_t n = samples.rows;
  const std::size_t m = samples.cols;
  const std::size_t q = atom_count;
  Rng rng(options.seed);

  Dictionary dict;
  dict.layer_index = layer_index;
  dict.atom_class.assign(q, kUnlabeled);
  dict.atoms = RowMatrix(q, m);
  const auto picks = rng.sample_without_replacement(n, std::min(q, n));
  for (std::size_t j = 0; j < picks.size(); ++j) {
    const auto src = samples.row(picks[j]);
    std::copy(src.begin(), src.end(), dict.atoms.row(j).begin());
    project_to_unit_ball(dict.atoms.row(j));
  }
  for (std::size_t j = picks.size(); j < q; ++j) {
    auto a = dict.atoms.row(j);
    for (double& v : a) v = rng.normal();
    simd::scale(a, 1.0 / std::sqrt(simd::dot(a, a)));
  }

  RowMatrix codes(n, q);
  std::vector<double> objective(n), recon(n), kkt(n);
  LearningTrace local;
  LearningTrace& tr = trace ? *trace : local;
  tr = {};

  for (std::size_t it = 0;; ++it) {
    const RowMatrix gram = gram_matrix(dict);
    parallel_for(n, options.threads, [&](std::size_t i) {
      const auto y = samples.row(i);
      LassoSolution s = lasso(y, dict, gram, options.lambda, codes.row(i));
      std::copy(s.coefficients.begin(), s.coefficients.end(), codes.row(i).begin());
      objective[i] = s.objective;
      double l1 = 0.0;
      for (double a : s.coefficients) l1 += std::abs(a);
      recon[i] = s.objective - options.lambda * l1;
      kkt[i] = lasso_kkt_residual(y, dict, s.coefficients, options.lambda);
    });
    double total = 0.0;
    for (double f : objective) total += f;
    tr.objective.push_back(total);
    tr.max_kkt_residual.push_back(*std::max_element(kkt.begin(), kkt.end()));
    if (it == options.iterations) break;

    // Sufficient statistics A = sum a a^T, B_j = sum_i a_ij y_i.
    RowMatrix a_stat(q, q);
    RowMatrix b_stat(q, m);
    for (std::size_t i = 0; i < n; ++i) {
      const auto a = codes.row(i);
      for (std::size_t j = 0; j < q; ++j) {
        if (a[j] == 0.0) continue;
        simd::axpy(a[j], a, a_stat.row(j));
        simd::axpy(a[j], samples.row(i), b_stat.row(j));
      }
    }

    std::vector<double> u(m);
    std::vector<std::size_t> unused;
    for (std::size_t j = 0; j < q; ++j) {
      const double ajj = a_stat(j, j);
      if (ajj <= 0.0) {
        unused.push_back(j);
        continue;
      }
      // u = d_j + (b_j - D a_j) / A_jj, then project onto the unit ball.
      std::copy(b_stat.row(j).begin(), b_stat.row(j).end(), u.begin());
      for (std::size_t k = 0; k < q; ++k) {
        if (a_stat(k, j) != 0.0) simd::axpy(-a_stat(k, j), dict.atom(k), u);
      }
      simd::scale(u, 1.0 / ajj);
      simd::axpy(1.0, dict.atom(j), u);
      project_to_unit_ball(u);
      std::copy(u.begin(), u.end(), dict.atoms.row(j).begin());
    }

    // Unused atoms carry zero coefficients everywhere, so replacing them
    // leaves the objective at the current codes unchanged.
    if (!unused.empty()) {
      std::vector<std::size_t> order(n);
      for (std::size_t i = 0; i < n; ++i) order[i] = i;
      std::stable_sort(order.begin(), order.end(),
                       [&](std::size_t l, std::size_t r) { return recon[l] > recon[r]; });
      std::size_t next = 0;
      for (std::size_t j : unused) {
        while (next < n) {
          const auto y = samples.row(order[next]);
          if (recon[order[next]] > 0.0 && simd::dot(y, y) > 0.0) break;
          ++next;
        }
        if (next == n) break;
        const auto y = samples.row(order[next++]);
        auto atom = dict.atoms.row(j);
        std::copy(y.begin(), y.end(), atom.begin());
        simd::scale(atom, 1.0 / std::sqrt(simd::dot(atom, atom)));
        ++tr.reseeded_atoms;
      }
    }
  }
  return dict;
}

}  // namespace

Dictionary learn_class_dictionary(const RowMatrix& samples, std::size_t atom_count,
                                  const LearningOptions& options, LearningTrace* trace) {
  return learn_atoms(samples, atom_count, options, trace, 1);
}

Dictionary learn_next_layer(const Dictionary& prev, std::size_t next_size, const LearningOptions& options,
                            LearningTrace* trace) {
  if (prev.size() == 0) throw InvalidInput("previous layer has no atoms");
  return learn_atoms(prev.atoms, next_size, options, trace, prev.layer_index + 1);
}

Dictionary assemble_first_layer(std::span<const Dictionary> per_class) {
  if (per_class.empty()) throw InvalidInput("no per-class dictionaries to assemble");
  const std::size_t m = per_class.front().dim();
  const std::size_t q = per_class.front().size();
  Dictionary out;
  out.layer_index = 1;
  out.atoms = RowMatrix(per_class.size() * q, m);
  out.atom_class.resize(per_class.size() * q);
  for (std::size_t c = 0; c < per_class.size(); ++c) {
    const Dictionary& d = per_class[c];
    if (d.dim() != m) throw InvalidInput("per-class dictionaries disagree on atom dimension");
    if (d.size() != q) throw InvalidInput("per-class dictionaries disagree on atom count");
    std::copy(d.atoms.data.begin(), d.atoms.data.end(), out.atoms.data.begin() + c * q * m);
    std::fill_n(out.atom_class.begin() + c * q, q, static_cast<int>(c));
  }
  return out;
}

}  // namespace ddlcn
