#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "ddlcn/coding.hpp"
#include "ddlcn/errors.hpp"
#include "../support/oracles.hpp"

using namespace ddlcn;

namespace {

double sum(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0); }

Dictionary from_rows(std::vector<std::vector<double>> rows) {
  RowMatrix a(rows.size(), rows.front().size());
  for (std::size_t j = 0; j < rows.size(); ++j) {
    for (std::size_t i = 0; i < rows[j].size(); ++i) a(j, i) = rows[j][i];
  }
  return make_dictionary(std::move(a));
}

}  // namespace

TEST_CASE("locality vector") {
  const Dictionary d = from_rows({{1, 0}, {-1, 0}});
  const auto z = locality_vector(std::vector<double>{2, 0}, d).distances;
  CHECK(z == std::vector<double>{1, 3});
  CHECK(locality_vector(std::vector<double>{-1, 0}, d).distances[1] == 0.0);

  std::mt19937_64 gen(3);
  const Dictionary r = oracle::random_dictionary(8, 5, gen);
  const auto y = oracle::random_vector(5, gen);
  const auto expected = oracle::distances(r, y);
  const auto got = locality_vector(y, r).distances;
  for (std::size_t j = 0; j < 8; ++j) CHECK(std::abs(got[j] - expected[j]) < 1e-12);
}

TEST_CASE("locality vector scales with the inputs") {
  std::mt19937_64 gen(4);
  const Dictionary r = oracle::random_dictionary(5, 4, gen, 0.5);
  auto y = oracle::random_vector(4, gen);
  RowMatrix scaled = r.atoms;
  for (double& v : scaled.data) v *= 2.0;
  const auto base = locality_vector(y, r).distances;
  for (double& v : y) v *= 2.0;
  const auto twice = locality_vector(y, make_dictionary(scaled)).distances;
  for (std::size_t j = 0; j < 5; ++j) CHECK(twice[j] == doctest::Approx(2.0 * base[j]).epsilon(1e-14));
}

TEST_CASE("signal equal to an atom codes one-hot") {
  std::mt19937_64 gen(5);
  const Dictionary d = oracle::random_dictionary(6, 4, gen);
  const std::vector<double> y(d.atom(3).begin(), d.atom(3).end());
  const LayerCode c = code_exact(y, d, 0.2);
  for (std::size_t j = 0; j < 6; ++j) CHECK(std::abs(c.values[j] - (j == 3 ? 1.0 : 0.0)) < 1e-8);
}

TEST_CASE("symmetric two-atom case") {
  const Dictionary d = from_rows({{1, 0}, {0, 1}});
  const LayerCode c = code_exact(std::vector<double>{0.5, 0.5}, d, 0.0);
  CHECK(c.values[0] == doctest::Approx(0.5).epsilon(1e-9));
  CHECK(c.values[1] == doctest::Approx(0.5).epsilon(1e-9));
}

TEST_CASE("three atoms in the plane match a dense grid search") {
  std::mt19937_64 gen(31);
  const Dictionary d = oracle::random_dictionary(3, 2, gen);
  const auto y = oracle::random_vector(2, gen);
  const double beta = 0.3;
  const auto zeta = oracle::distances(d, y);
  double best = std::numeric_limits<double>::infinity();
  for (int a = -3000; a <= 3000; ++a) {
    for (int b = -3000; b <= 3000; ++b) {
      const double g0 = a * 1e-3;
      const double g1 = b * 1e-3;
      const double g2 = 1.0 - g0 - g1;
      if (std::abs(g2) > 3.0) continue;
      best = std::min(best, oracle::locality_value(d, y, {g0, g1, g2}, beta, zeta));
    }
  }
  const LayerCode c = code_exact(y, d, beta);
  CHECK(std::abs(c.objective - best) < 1e-3);
  CHECK(c.objective <= best + 1e-9);
}

TEST_CASE("code_exact matches the enumeration and subgradient oracles") {
  std::mt19937_64 gen(77);
  for (int rep = 0; rep < 30; ++rep) {
    const std::size_t D = 2 + rep % 5;
    const std::size_t m = 2 + rep % 3;
    const double beta = std::array{0.0, 0.1, 1.0}[rep % 3];
    const Dictionary d = oracle::random_dictionary(D, m, gen);
    const auto y = oracle::random_vector(m, gen);
    const LayerCode c = code_exact(y, d, beta);
    const double exact = oracle::locality_enumeration(d, y, beta);
    CAPTURE(rep);
    CHECK(std::abs(sum(c.values) - 1.0) < 1e-6);
    CHECK(c.objective == doctest::Approx(locality_objective(y, d, c.values, beta, oracle::distances(d, y))));
    CHECK(std::abs(c.objective - exact) < 1e-6);
    if (rep < 5) {
      const double sub = oracle::locality_subgradient(d, y, beta, 5, 20000, gen);
      CHECK(c.objective <= sub + 1e-6);
    }
  }
}

TEST_CASE("large beta concentrates on the nearest atom") {
  std::mt19937_64 gen(9);
  for (int rep = 0; rep < 20; ++rep) {
    const Dictionary d = oracle::random_dictionary(5, 3, gen);
    const auto y = oracle::random_vector(3, gen);
    const auto z = oracle::distances(d, y);
    const auto nearest = static_cast<std::size_t>(std::min_element(z.begin(), z.end()) - z.begin());
    const LayerCode c = code_exact(y, d, 1e6);
    for (std::size_t j = 0; j < 5; ++j) CHECK(std::abs(c.values[j] - (j == nearest ? 1.0 : 0.0)) < 1e-4);
  }
}

TEST_CASE("beta zero reconstructs signals in the affine hull") {
  std::mt19937_64 gen(15);
  const Dictionary d = oracle::random_dictionary(4, 3, gen);
  const std::vector<double> w{0.7, -0.4, 0.2, 0.5};
  const auto y = oracle::reconstruct(d, w);
  const LayerCode c = code_exact(y, d, 0.0);
  const auto rec = approximate_layer1(c, d);
  double err = 0.0;
  for (std::size_t i = 0; i < 3; ++i) err += (rec[i] - y[i]) * (rec[i] - y[i]);
  CHECK(std::sqrt(err) < 1e-8);
}

TEST_CASE("all-zero dictionary yields a flagged feasible code") {
  const LayerCode c = code_exact(std::vector<double>{0.3, 0.1}, make_dictionary(RowMatrix(3, 2)), 0.5);
  CHECK(c.degenerate);
  CHECK(std::abs(sum(c.values) - 1.0) < 1e-12);
}

TEST_CASE("k-nearest coding") {
  std::mt19937_64 gen(41);
  const Dictionary d = oracle::random_dictionary(7, 4, gen);
  const auto y = oracle::random_vector(4, gen);
  const LayerCode full = code_exact(y, d, 0.1);
  const LayerCode same = code_knn(y, d, 0.1, 7);
  for (std::size_t j = 0; j < 7; ++j) CHECK(std::abs(full.values[j] - same.values[j]) < 1e-8);

  const auto z = oracle::distances(d, y);
  const auto nearest = static_cast<std::size_t>(std::min_element(z.begin(), z.end()) - z.begin());
  const LayerCode one = code_knn(y, d, 0.1, 1);
  for (std::size_t j = 0; j < 7; ++j) CHECK(one.values[j] == (j == nearest ? 1.0 : 0.0));

  const LayerCode three = code_knn(y, d, 0.1, 3);
  CHECK(three.support().size() <= 3);
  CHECK(std::abs(sum(three.values) - 1.0) < 1e-6);
  CHECK(three.objective >= full.objective - 1e-9);
  CHECK_THROWS_AS(code_knn(y, d, 0.1, 0), InvalidInput);
  CHECK_THROWS_AS(code_knn(y, d, 0.1, 8), InvalidInput);
}

TEST_CASE("k-nearest ties go to the lower index") {
  const Dictionary d = from_rows({{1, 0}, {0, 1}, {-1, 0}, {0, -1}});
  const LayerCode c = code_knn(std::vector<double>{0, 0}, d, 0.1, 1);
  CHECK(c.values == std::vector<double>{1, 0, 0, 0});
}

TEST_CASE("LLC matches the KKT system and a coarse grid") {
  std::mt19937_64 gen(51);
  const Dictionary d = oracle::random_dictionary(4, 3, gen);
  const auto y = oracle::random_vector(3, gen);
  const double lambda = 0.05;
  const LayerCode c = code_llc(y, d, lambda, 1.0);
  const auto expected = oracle::llc_kkt(d, y, lambda, 1.0);
  for (std::size_t j = 0; j < 4; ++j) CHECK(std::abs(c.values[j] - expected[j]) < 1e-8);
  CHECK(std::abs(sum(c.values) - 1.0) < 1e-9);

  double best = std::numeric_limits<double>::infinity();
  for (int a = -100; a <= 100; ++a) {
    for (int b = -100; b <= 100; ++b) {
      for (int e = -100; e <= 100; ++e) {
        const std::vector<double> g{a * 0.02, b * 0.02, e * 0.02, 1.0 - (a + b + e) * 0.02};
        best = std::min(best, llc_objective(y, d, g, lambda, 1.0));
      }
    }
  }
  const double got = llc_objective(y, d, c.values, lambda, 1.0);
  CHECK(got <= best + 1e-12);
  CHECK(best - got < 1e-1);
}

TEST_CASE("LLC limits") {
  std::mt19937_64 gen(52);
  const Dictionary d = oracle::random_dictionary(4, 3, gen);
  const std::vector<double> w{0.4, 0.3, 0.2, 0.1};
  const auto y = oracle::reconstruct(d, w);
  const LayerCode small = code_llc(y, d, 1e-14);
  const auto rec = approximate_layer1(small, d);
  double err = 0.0;
  for (std::size_t i = 0; i < 3; ++i) err += (rec[i] - y[i]) * (rec[i] - y[i]);
  CHECK(std::sqrt(err) < 1e-8);

  const auto z = oracle::distances(d, y);
  const LayerCode big = code_llc(y, d, 1e8);
  const auto argmax = std::max_element(big.values.begin(), big.values.end()) - big.values.begin();
  const auto argmin = std::min_element(z.begin(), z.end()) - z.begin();
  CHECK(argmax == argmin);
  CHECK_THROWS_AS(code_llc(y, d, 0.1, 0.0), InvalidInput);
}

TEST_CASE("layer-1 approximation") {
  std::mt19937_64 gen(61);
  const Dictionary d = oracle::random_dictionary(5, 4, gen);
  LayerCode onehot;
  onehot.values = {0, 0, 1, 0, 0};
  const auto a = approximate_layer1(onehot, d);
  for (std::size_t i = 0; i < 4; ++i) CHECK(a[i] == d.atoms(2, i));

  LayerCode half;
  half.values = {0.5, 0.5};
  const auto h = approximate_layer1(half, from_rows({{1, 0}, {0, 1}}));
  CHECK(h == std::vector<double>{0.5, 0.5});

  LayerCode random;
  random.values = oracle::random_vector(5, gen);
  const auto got = approximate_layer1(random, d);
  const auto expected = oracle::reconstruct(d, random.values);
  for (std::size_t i = 0; i < 4; ++i) CHECK(std::abs(got[i] - expected[i]) < 1e-12);
}

TEST_CASE("layer-2 approximation") {
  std::mt19937_64 gen(62);
  const Dictionary d1 = oracle::random_dictionary(4, 3, gen);
  const Dictionary d2 = oracle::random_dictionary(5, 3, gen);
  LayerCode c1;
  c1.values = oracle::random_vector(4, gen);
  std::vector<LayerCode> c2(4);
  for (auto& c : c2) c.values = oracle::random_vector(5, gen);

  std::vector<double> expected(3, 0.0);
  for (std::size_t j = 0; j < 4; ++j) {
    for (std::size_t u = 0; u < 5; ++u) {
      for (std::size_t i = 0; i < 3; ++i) expected[i] += c1.values[j] * c2[j].values[u] * d2.atoms(u, i);
    }
  }
  const auto got = approximate_layer2(c1, c2, d2);
  for (std::size_t i = 0; i < 3; ++i) CHECK(std::abs(got[i] - expected[i]) < 1e-12);

  LayerCode onehot;
  onehot.values = {0, 1, 0, 0};
  const auto single = approximate_layer2(onehot, c2, d2);
  const auto direct = oracle::reconstruct(d2, c2[1].values);
  for (std::size_t i = 0; i < 3; ++i) CHECK(std::abs(single[i] - direct[i]) < 1e-12);

  // Layer 2 containing layer 1 verbatim: each atom reconstructs itself.
  RowMatrix both(6, 3);
  for (std::size_t j = 0; j < 4; ++j) {
    for (std::size_t i = 0; i < 3; ++i) both(j, i) = d1.atoms(j, i);
  }
  for (std::size_t i = 0; i < 3; ++i) {
    both(4, i) = d2.atoms(0, i);
    both(5, i) = d2.atoms(1, i);
  }
  const Dictionary wide = make_dictionary(both, 2);
  std::vector<LayerCode> exact(4);
  for (std::size_t j = 0; j < 4; ++j) {
    exact[j].values.assign(6, 0.0);
    exact[j].values[j] = 1.0;
  }
  const auto collapsed = approximate_layer2(c1, exact, wide);
  const auto first = approximate_layer1(c1, d1);
  for (std::size_t i = 0; i < 3; ++i) CHECK(std::abs(collapsed[i] - first[i]) < 1e-10);
}
