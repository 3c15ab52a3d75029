// Acceptance suite: one PASS/FAIL line per criterion; exit status 1 if any fails.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <random>
#include <sstream>
#include <string>

#include "ddlcn/coding.hpp"
#include "ddlcn/datasets.hpp"
#include "ddlcn/experiment.hpp"
#include "ddlcn/model_io.hpp"
#include "ddlcn/network.hpp"
#include "ddlcn/svm.hpp"
#include "../support/oracles.hpp"

using namespace ddlcn;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct MnistRun {
  bool available = false;
  std::vector<double> two_layer;
  std::vector<double> three_layer;
  double ms_per_image = 0.0;
  std::string error;
};

const fs::path kMnist = DDLCN_MNIST_DIR;

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

double mean(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size()); }

ExperimentConfig desk_config() {
  ExperimentConfig c;
  c.p = 1;
  c.q = 2;
  c.t = 1000;
  c.layers = {20};
  c.trials = 3;
  c.seed = 0;
  return c;
}

// Trains and evaluates DDLCN-2 and DDLCN-3 on the same three trials.
MnistRun run_mnist() {
  MnistRun run;
  if (!fs::exists(kMnist / "train-images-idx3-ubyte") || !fs::exists(kMnist / "t10k-images-idx3-ubyte")) {
    run.error = "MNIST IDX files not found in " + kMnist.string();
    return run;
  }
  const LabeledImages train = load_mnist(kMnist / "train-images-idx3-ubyte", kMnist / "train-labels-idx1-ubyte");
  const LabeledImages test = load_mnist(kMnist / "t10k-images-idx3-ubyte", kMnist / "t10k-labels-idx1-ubyte");
  std::vector<std::size_t> all(test.size());
  std::iota(all.begin(), all.end(), 0);
  run.available = true;

  ExperimentConfig two = desk_config();
  ExperimentConfig three = desk_config();
  three.layers = {20, 10};
  double total_ms = 0.0;
  std::size_t images = 0;
  for (std::size_t trial = 0; trial < two.trials; ++trial) {
    double ms = 0.0;
    run.two_layer.push_back(evaluate_model(train_trial(two, train, trial), test, all, 0, &ms).accuracy);
    total_ms += ms;
    images += all.size();
    run.three_layer.push_back(evaluate_model(train_trial(three, train, trial), test, all, 0).accuracy);
    std::printf("  trial %zu: DDLCN-2 %.2f%%, DDLCN-3 %.2f%%\n", trial, 100 * run.two_layer.back(),
                100 * run.three_layer.back());
    std::fflush(stdout);
  }
  run.ms_per_image = total_ms / static_cast<double>(images);
  return run;
}

Outcome criterion1(const MnistRun& run) {
  if (!run.available) return {false, run.error};
  const double m = mean(run.two_layer);
  return {m >= 0.92, fmt("(1-2), t=1000, 3 trials: mean accuracy %.2f%% (threshold 92.00%%)", 100 * m)};
}

Outcome criterion2(const MnistRun& run) {
  if (!run.available) return {false, run.error};
  const double a2 = mean(run.two_layer);
  const double a3 = mean(run.three_layer);
  return {a3 >= a2 - 0.003, fmt("DDLCN-3 (20-20-10) %.2f%% vs DDLCN-2 %.2f%% (allowed drop 0.30 pp)", 100 * a3, 100 * a2)};
}

Outcome criterion3() {
  std::mt19937_64 gen(2024);
  double worst_gap = 0.0, worst_sum = 0.0;
  const auto start = std::chrono::steady_clock::now();
  for (int i = 0; i < 200; ++i) {
    const std::size_t D = 1 + gen() % 6;
    const std::size_t m = 1 + gen() % 4;
    const double beta = std::array{0.0, 0.1, 1.0}[i % 3];
    const Dictionary d = oracle::random_dictionary(D, m, gen);
    const auto y = oracle::random_vector(m, gen);
    const LayerCode c = code_exact(y, d, beta);
    const double exact = oracle::locality_enumeration(d, y, beta);
    worst_gap = std::max(worst_gap, std::abs(c.objective - exact));
    worst_sum = std::max(worst_sum, std::abs(std::accumulate(c.values.begin(), c.values.end(), 0.0) - 1.0));
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return {worst_gap <= 1e-3 && worst_sum < 1e-6 && secs <= 120.0,
          fmt("200 instances: max |objective - oracle| %.2e, max |sum - 1| %.2e, %.1f s", worst_gap, worst_sum, secs)};
}

Outcome criterion4() {
  std::mt19937_64 gen(77);
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    const std::size_t D = 2 + gen() % 7;
    const std::size_t m = 2 + gen() % 5;
    const Dictionary d = oracle::random_dictionary(D, m, gen);
    const auto y = oracle::random_vector(m, gen);
    auto z = oracle::distances(d, y);
    auto sorted = z;
    std::sort(sorted.begin(), sorted.end());
    if (sorted[1] - sorted[0] < 1e-9) {
      --i;
      continue;
    }
    const auto nearest = static_cast<std::size_t>(std::min_element(z.begin(), z.end()) - z.begin());
    const LayerCode c = code_exact(y, d, 1e6);
    for (std::size_t j = 0; j < D; ++j) worst = std::max(worst, std::abs(c.values[j] - (j == nearest ? 1.0 : 0.0)));
  }
  return {worst <= 1e-4, fmt("100 instances at beta=1e6: max l-inf distance to nearest one-hot %.2e", worst)};
}

Outcome criterion5() {
  std::mt19937_64 gen(55);
  double worst_rise = -std::numeric_limits<double>::infinity();
  double worst_kkt = 0.0;
  std::normal_distribution<double> normal;
  for (int run = 0; run < 50; ++run) {
    const std::size_t n = 10 + gen() % 40;
    const std::size_t m = 4 + gen() % 12;
    const std::size_t q = 1 + gen() % 8;
    RowMatrix s(n, m);
    for (double& v : s.data) v = normal(gen);
    LearningTrace trace;
    learn_class_dictionary(s, q, {0.05 + 0.05 * (run % 4), 20, static_cast<std::uint64_t>(run), 1}, &trace);
    for (std::size_t t = 1; t < trace.objective.size(); ++t) {
      worst_rise = std::max(worst_rise, trace.objective[t] - trace.objective[t - 1]);
    }
    for (double k : trace.max_kkt_residual) worst_kkt = std::max(worst_kkt, k);
  }
  return {worst_rise <= 1e-9 && worst_kkt <= 1e-6,
          fmt("50 runs: largest per-iteration objective change %.2e, max lasso KKT residual %.2e", worst_rise, worst_kkt)};
}

Outcome criterion6() {
  struct Case {
    std::size_t r, q, d2;
  };
  const std::vector<std::size_t> pyr{1, 2, 4};
  std::string detail;
  bool ok = true;
  for (const Case c : {Case{10, 2, 20}, Case{10, 100, 1000}, Case{2, 1, 3}}) {
    const std::size_t d1 = c.r * c.q;
    const std::vector<std::size_t> sizes{d1, c.d2};
    // Build a table of the right shape and measure the produced vectors.
    RowMatrix table(d1, c.d2, 1.0 / static_cast<double>(c.d2));
    LayerCode code;
    code.values.assign(d1, 1.0 / static_cast<double>(d1));
    const AugmentedCode a = augment(code, table);
    const std::size_t aug = a.values.size();
    std::size_t pooled = 0;
    if (aug <= 100000) {
      const std::vector<AugmentedCode> codes{a};
      const std::vector<Position> pos{{0.3, 0.7}};
      pooled = pool_pyramid(codes, pos, pyr, true).values.size();
    } else {
      pooled = pooled_dim(pyr, aug);
    }
    ok = ok && aug == d1 * (1 + c.d2) && augmented_dim(sizes) == aug && pooled == 21 * aug &&
         pooled_dim(pyr, augmented_dim(sizes)) == pooled;
    detail += "(" + std::to_string(c.r) + "," + std::to_string(c.q) + "," + std::to_string(c.d2) + ")->" +
              std::to_string(aug) + "/" + std::to_string(pooled) + " ";
  }
  ok = ok && augmented_dim(std::vector<std::size_t>{20, 20}) == 420 && pooled_dim(pyr, 420) == 8820;
  return {ok, "augmented/pooled: " + detail};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string("\"") + DDLCN_CLI + "\" " + args + " > /dev/null 2>&1";
  return std::system(cmd.c_str());
}

Outcome criterion7(const fs::path& work) {
  if (!fs::exists(kMnist / "train-images-idx3-ubyte")) return {false, "MNIST IDX files not found"};
  const std::string common = "train --mnist \"" + kMnist.string() + "\" --t 200 --trials 2 --seed 7";
  const fs::path runs[3] = {work / "run_a", work / "run_b", work / "run_c"};
  const char* threads[3] = {"1", "1", "4"};
  for (int i = 0; i < 3; ++i) {
    fs::remove_all(runs[i]);
    if (run_cli(common + " --threads " + threads[i] + " --out \"" + runs[i].string() + "\"") != 0) {
      return {false, "train command failed"};
    }
    const std::string models = "\"" + (runs[i] / "model_trial0.ddlc").string() + "\" \"" +
                               (runs[i] / "model_trial1.ddlc").string() + "\"";
    if (run_cli("eval --mnist \"" + kMnist.string() + "\" --limit 2000 --threads " + threads[i] + " --out \"" +
                (runs[i] / "report").string() + "\" " + models) != 0) {
      return {false, "eval command failed"};
    }
  }
  bool same = true;
  for (const char* f : {"model_trial0.ddlc", "model_trial1.ddlc", "report/report.txt", "report/report.csv"}) {
    const std::string ref = slurp(runs[0] / f);
    same = same && !ref.empty() && ref == slurp(runs[1] / f) && ref == slurp(runs[2] / f);
  }
  const bool trials_differ = slurp(runs[0] / "model_trial0.ddlc") != slurp(runs[0] / "model_trial1.ddlc");
  return {same && trials_differ,
          std::string("2 model files + report.txt + report.csv byte-identical across two runs and --threads 1 vs 4: ") +
              (same ? "yes" : "no")};
}

Outcome criterion8(const MnistRun& run, const fs::path& work) {
  const std::string timing = slurp(work / "run_a" / "report" / "timing.txt");
  const auto at = timing.find("ms_per_image=");
  if (at == std::string::npos) return {false, "timing.txt missing ms_per_image"};
  const double cli_ms = std::strtod(timing.c_str() + at + 13, nullptr);
  const double lib_ms = run.available ? run.ms_per_image : cli_ms;
  const bool ok = cli_ms > 0.0 && cli_ms < 1000.0 && lib_ms > 0.0 && lib_ms < 1000.0;
  return {ok, fmt("encode+predict %.3f ms/image on the (1-2) model (CLI report: %.3f ms/image)", lib_ms, cli_ms)};
}

Outcome criterion9() {
  bool ok = true;
  std::string detail;
  // 1-D separable pair.
  RowMatrix x1(2, 1);
  x1(0, 0) = 1.0;
  x1(1, 0) = -1.0;
  const std::vector<int> y1{1, 0};
  const SvmModel m1 = train_svm(x1, y1, {});
  ok = ok && predict(m1, x1.row(0)) == 1 && predict(m1, x1.row(1)) == 0;

  // Four blobs, centers 10 sigma apart.
  std::mt19937_64 gen(9);
  std::normal_distribution<double> noise(0.0, 0.1);
  const double centers[4][2] = {{1, 0}, {0, 1}, {-1, 0}, {0, -1}};
  RowMatrix xb(400, 2);
  std::vector<int> yb(400);
  for (std::size_t i = 0; i < 400; ++i) {
    yb[i] = static_cast<int>(i % 4);
    xb(i, 0) = centers[i % 4][0] + noise(gen);
    xb(i, 1) = centers[i % 4][1] + noise(gen);
  }
  const SvmModel mb = train_svm(xb, yb, {});
  std::size_t correct = 0;
  for (std::size_t i = 0; i < 400; ++i) correct += predict(mb, xb.row(i)) == yb[i];
  ok = ok && correct == 400;
  detail += "blobs " + std::to_string(correct) + "/400; ";

  // Dual box and finite differences.
  double worst_fd = 0.0;
  bool box = true;
  std::normal_distribution<double> normal;
  for (int rep = 0; rep < 10; ++rep) {
    RowMatrix x(40, 6);
    for (double& v : x.data) v = normal(gen);
    std::vector<int> t(40);
    for (std::size_t i = 0; i < 40; ++i) t[i] = x(i, 0) + 0.5 * normal(gen) > 0 ? 1 : -1;
    SvmOptions o;
    o.C = 0.5 + rep;
    const BinarySvm b = train_binary_svm(x, t, o);
    for (double a : b.alpha) box = box && a >= 0.0 && a <= o.C;
    std::vector<double> w(6);
    for (double& v : w) v = normal(gen);
    const double bias = normal(gen);
    const auto g = svm_primal_gradient(w, bias, x, t, o.C);
    for (std::size_t k = 0; k < 7; ++k) {
      auto wp = w, wm = w;
      double bp = bias, bm = bias;
      const double h = 1e-6;
      if (k < 6) {
        wp[k] += h;
        wm[k] -= h;
      } else {
        bp += h;
        bm -= h;
      }
      const double fd =
          (svm_primal_objective(wp, bp, x, t, o.C) - svm_primal_objective(wm, bm, x, t, o.C)) / (2 * h);
      worst_fd = std::max(worst_fd, std::abs(fd - g[k]) / std::max(1.0, std::abs(g[k])));
    }
  }
  ok = ok && box && worst_fd <= 1e-5;
  detail += fmt("max relative gradient error %.2e; ", worst_fd) + (box ? "duals in [0, C]" : "dual box violated");
  return {ok, detail};
}

}  // namespace

int main() {
  const fs::path work = fs::temp_directory_path() / "ddlcn_acceptance";
  fs::create_directories(work);
  int failures = 0;
  auto report = [&](int id, const Outcome& o) {
    std::printf("%s criterion %d: %s\n", o.pass ? "PASS" : "FAIL", id, o.detail.c_str());
    std::fflush(stdout);
    failures += o.pass ? 0 : 1;
  };
  auto guarded = [&](int id, const std::function<Outcome()>& f) {
    try {
      report(id, f());
    } catch (const std::exception& e) {
      report(id, {false, std::string("exception: ") + e.what()});
    }
  };

  std::printf("training DDLCN-2 and DDLCN-3 on MNIST (3 trials)...\n");
  std::fflush(stdout);
  MnistRun mnist;
  try {
    mnist = run_mnist();
  } catch (const std::exception& e) {
    mnist.error = std::string("exception: ") + e.what();
  }
  guarded(1, [&] { return criterion1(mnist); });
  guarded(2, [&] { return criterion2(mnist); });
  guarded(3, criterion3);
  guarded(4, criterion4);
  guarded(5, criterion5);
  guarded(6, criterion6);
  guarded(7, [&] { return criterion7(work); });
  guarded(8, [&] { return criterion8(mnist, work); });
  guarded(9, criterion9);
  std::printf("%d of 9 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
