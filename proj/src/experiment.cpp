#include "ddlcn/experiment.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include "ddlcn/errors.hpp"
#include "ddlcn/parallel.hpp"
#include "ddlcn/rng.hpp"

namespace ddlcn {
namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

template <typename T>
T parse_number(std::string_view key, std::string_view text) {
  const std::string v = trim(text);
  T out{};
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (v.empty() || res.ec != std::errc{} || res.ptr != v.data() + v.size()) {
    throw ConfigError("invalid value '" + v + "' for " + std::string(key));
  }
  return out;
}

std::vector<std::size_t> parse_sizes(std::string_view key, std::string_view text) {
  std::vector<std::size_t> out;
  std::string v = trim(text);
  if (v.empty()) return out;
  std::size_t start = 0;
  while (start <= v.size()) {
    const std::size_t end = std::min(v.find(',', start), v.size());
    out.push_back(parse_number<std::size_t>(key, std::string_view(v).substr(start, end - start)));
    start = end + 1;
  }
  return out;
}

std::string fmt(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string join_sizes(const std::vector<std::size_t>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + std::to_string(v[i]);
  return out;
}

std::vector<std::vector<std::size_t>> indices_by_class(const LabeledImages& data) {
  std::vector<std::vector<std::size_t>> by_class(data.num_classes());
  for (std::size_t i = 0; i < data.size(); ++i) {
    const int l = data.labels[i];
    if (l < 0 || static_cast<std::size_t>(l) >= by_class.size()) throw ConfigError("label out of range");
    by_class[static_cast<std::size_t>(l)].push_back(i);
  }
  return by_class;
}

RowMatrix descriptor_samples(const LabeledImages& data, const std::vector<std::size_t>& indices,
                             const DescriptorParams& params) {
  RowMatrix samples;
  samples.cols = kDescriptorDim;
  for (std::size_t i : indices) {
    const DescriptorGrid g = extract_dense_descriptors(data.images[i], params);
    samples.data.insert(samples.data.end(), g.values.begin(), g.values.end());
    samples.rows += g.count();
  }
  return samples;
}

}  // namespace

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys{
      "p",      "q",          "t",      "layers", "beta",   "lambda",     "knn",        "C",       "pyramid",
      "patch_size", "stride", "normalize", "trials", "seed", "dict_iters", "svm_epochs", "threads",
  };
  return keys;
}

void apply_config_value(ExperimentConfig& c, std::string_view key_in, std::string_view value) {
  const std::string key = trim(key_in);
  if (key == "p") c.p = parse_number<std::size_t>(key, value);
  else if (key == "q") c.q = parse_number<std::size_t>(key, value);
  else if (key == "t") {
    if (trim(value) == "all") c.t.reset();
    else c.t = parse_number<std::size_t>(key, value);
  } else if (key == "layers") c.layers = parse_sizes(key, value);
  else if (key == "beta") c.beta = parse_number<double>(key, value);
  else if (key == "lambda") c.lambda = parse_number<double>(key, value);
  else if (key == "knn") c.knn = parse_number<std::size_t>(key, value);
  else if (key == "C") c.C = parse_number<double>(key, value);
  else if (key == "pyramid") c.pyramid = parse_sizes(key, value);
  else if (key == "patch_size") c.patch_size = parse_number<std::size_t>(key, value);
  else if (key == "stride") c.stride = parse_number<std::size_t>(key, value);
  else if (key == "normalize") {
    const std::string v = trim(value);
    if (v == "1" || v == "true") c.normalize = true;
    else if (v == "0" || v == "false") c.normalize = false;
    else throw ConfigError("invalid value '" + v + "' for normalize");
  } else if (key == "trials") c.trials = parse_number<std::size_t>(key, value);
  else if (key == "seed") c.seed = parse_number<std::uint64_t>(key, value);
  else if (key == "dict_iters") c.dict_iters = parse_number<std::size_t>(key, value);
  else if (key == "svm_epochs") c.svm_epochs = parse_number<std::size_t>(key, value);
  else if (key == "threads") c.threads = parse_number<std::size_t>(key, value);
  else throw ConfigError("unknown config key '" + key + "'");
}

ExperimentConfig parse_config(std::string_view text) {
  ExperimentConfig c;
  std::istringstream in{std::string(text)};
  std::size_t lineno = 0;
  for (std::string line; std::getline(in, line);) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    if (trim(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(lineno) + ": expected key=value");
    apply_config_value(c, std::string_view(line).substr(0, eq), std::string_view(line).substr(eq + 1));
  }
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string format_config(const ExperimentConfig& c) {
  std::ostringstream o;
  o << "p=" << c.p << "\nq=" << c.q << "\nt=" << (c.t ? std::to_string(*c.t) : "all")
    << "\nlayers=" << join_sizes(c.layers) << "\nbeta=" << fmt(c.beta) << "\nlambda=" << fmt(c.lambda)
    << "\nknn=" << c.knn << "\nC=" << fmt(c.C) << "\npyramid=" << join_sizes(c.pyramid)
    << "\npatch_size=" << c.patch_size << "\nstride=" << c.stride << "\nnormalize=" << (c.normalize ? 1 : 0)
    << "\ntrials=" << c.trials << "\nseed=" << c.seed << "\ndict_iters=" << c.dict_iters
    << "\nsvm_epochs=" << c.svm_epochs << "\nthreads=" << c.threads << '\n';
  return o.str();
}

void validate(const ExperimentConfig& c) {
  if (c.p < 1) throw ConfigError("p must be >= 1");
  if (c.q < 1) throw ConfigError("q must be >= 1");
  if (c.t && *c.t < 1) throw ConfigError("t must be >= 1 or 'all'");
  if (c.trials < 1) throw ConfigError("trials must be >= 1");
  if (c.layers.empty()) throw ConfigError("need at least one layer beyond the first");
  for (std::size_t d : c.layers) {
    if (d < 1) throw ConfigError("layer sizes must be >= 1");
  }
  if (!(c.beta >= 0.0) || !std::isfinite(c.beta)) throw ConfigError("beta must be >= 0");
  if (!(c.lambda >= 0.0) || !std::isfinite(c.lambda)) throw ConfigError("lambda must be >= 0");
  if (!(c.C > 0.0) || !std::isfinite(c.C)) throw ConfigError("C must be > 0");
  if (c.knn < 1) throw ConfigError("knn must be >= 1");
  if (c.dict_iters < 1) throw ConfigError("dict_iters must be >= 1");
  if (c.svm_epochs < 1) throw ConfigError("svm_epochs must be >= 1");
  if (c.stride < 1) throw ConfigError("stride must be >= 1");
  if (c.patch_size < kDescriptorCells) throw ConfigError("patch_size must be >= 4");
  if (c.pyramid.empty()) throw ConfigError("pyramid needs at least one level");
  for (std::size_t i = 0; i < c.pyramid.size(); ++i) {
    if (c.pyramid[i] < 1 || (i > 0 && c.pyramid[i] <= c.pyramid[i - 1])) {
      throw ConfigError("pyramid levels must be >= 1 and strictly increasing");
    }
  }
}

TrialSplit sample_trial(const LabeledImages& data, const ExperimentConfig& config, std::size_t trial) {
  const auto by_class = indices_by_class(data);
  Rng dict_rng(derive_seed(config.seed, 2 * trial));
  Rng train_rng(derive_seed(config.seed, 2 * trial + 1));
  TrialSplit split;
  for (std::size_t c = 0; c < by_class.size(); ++c) {
    const auto& members = by_class[c];
    if (config.p > members.size()) {
      throw ConfigError("p = " + std::to_string(config.p) + " exceeds the " + std::to_string(members.size()) +
                        " samples of class " + data.class_names[c]);
    }
    const std::size_t t = config.t.value_or(members.size());
    if (t > members.size()) {
      throw ConfigError("t = " + std::to_string(t) + " exceeds the " + std::to_string(members.size()) +
                        " samples of class " + data.class_names[c]);
    }
    for (std::size_t k : dict_rng.sample_without_replacement(members.size(), config.p)) {
      split.dictionary.push_back(members[k]);
    }
    if (config.t) {
      for (std::size_t k : train_rng.sample_without_replacement(members.size(), t)) split.train.push_back(members[k]);
    } else {
      split.train.insert(split.train.end(), members.begin(), members.end());
    }
  }
  return split;
}

std::vector<std::size_t> held_out(const LabeledImages& data, const TrialSplit& split) {
  std::vector<bool> used(data.size(), false);
  for (std::size_t i : split.dictionary) used[i] = true;
  for (std::size_t i : split.train) used[i] = true;
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (!used[i]) out.push_back(i);
  }
  return out;
}

DdlcnModel train_trial(const ExperimentConfig& config, const LabeledImages& data, std::size_t trial,
                       TrainingLog* log) {
  validate(config);
  const std::size_t r = data.num_classes();
  if (r < 2) throw ConfigError("training needs at least two classes");
  const TrialSplit split = sample_trial(data, config, trial);
  const std::uint64_t trial_seed = derive_seed(config.seed, 1000 + trial);
  const DescriptorParams params{config.patch_size, config.stride};

  std::vector<std::vector<std::size_t>> dict_images(r);
  for (std::size_t i : split.dictionary) dict_images[static_cast<std::size_t>(data.labels[i])].push_back(i);

  TrainingLog local;
  TrainingLog& tl = log ? *log : local;
  tl = {};
  tl.class_objectives.resize(r);

  std::vector<Dictionary> per_class(r);
  std::vector<LearningTrace> class_traces(r);
  parallel_for(r, config.threads, [&](std::size_t c) {
    const RowMatrix samples = descriptor_samples(data, dict_images[c], params);
    const LearningOptions opts{config.lambda, config.dict_iters, derive_seed(trial_seed, c), 1};
    per_class[c] = learn_class_dictionary(samples, config.q, opts, &class_traces[c]);
  });
  for (std::size_t c = 0; c < r; ++c) {
    tl.class_objectives[c] = class_traces[c].objective;
    for (double k : class_traces[c].max_kkt_residual) tl.max_kkt_residual = std::max(tl.max_kkt_residual, k);
  }

  DdlcnModel model;
  model.layers.push_back(assemble_first_layer(per_class));
  for (std::size_t n = 0; n < config.layers.size(); ++n) {
    LearningTrace trace;
    const LearningOptions opts{config.lambda, config.dict_iters, derive_seed(trial_seed, 10000 + n), config.threads};
    model.layers.push_back(learn_next_layer(model.layers.back(), config.layers[n], opts, &trace));
    tl.layer_objectives.push_back(trace.objective);
    for (double k : trace.max_kkt_residual) tl.max_kkt_residual = std::max(tl.max_kkt_residual, k);
  }
  model.beta.assign(model.layers.size(), config.beta);
  model.knn_k = config.knn;
  model.pyramid = config.pyramid;
  model.descriptor = params;
  model.normalize = config.normalize;
  model.atom_codes = precompute_atom_codes(model.layers, model.beta, config.knn, config.threads);

  const CompactPlan plan = make_compact_plan(model);
  RowMatrix features(split.train.size(), plan.dim());
  std::vector<int> labels(split.train.size());
  parallel_for(split.train.size(), config.threads, [&](std::size_t k) {
    const std::size_t i = split.train[k];
    const std::vector<double> f = encode_image_compact(data.images[i], model, plan);
    std::copy(f.begin(), f.end(), features.row(k).begin());
    labels[k] = data.labels[i];
  });
  SvmOptions svm_opts;
  svm_opts.C = config.C;
  svm_opts.epochs = config.svm_epochs;
  svm_opts.seed = derive_seed(trial_seed, 20000);
  svm_opts.threads = config.threads;
  model.svm = train_svm(features, labels, svm_opts);

  model.info = {
      {"p", std::to_string(config.p)},
      {"q", std::to_string(config.q)},
      {"t", config.t ? std::to_string(*config.t) : "all"},
      {"trial", std::to_string(trial)},
      {"seed", std::to_string(config.seed)},
      {"lambda", fmt(config.lambda)},
      {"dict_iters", std::to_string(config.dict_iters)},
      {"svm_epochs", std::to_string(config.svm_epochs)},
      {"classes", std::to_string(r)},
  };
  return model;
}

ExperimentConfig config_from_model(const DdlcnModel& model) {
  ExperimentConfig c;
  for (const char* key : {"p", "q", "t", "seed", "lambda", "dict_iters", "svm_epochs"}) {
    if (const auto it = model.info.find(key); it != model.info.end()) apply_config_value(c, key, it->second);
  }
  c.layers.clear();
  for (std::size_t i = 1; i < model.layers.size(); ++i) c.layers.push_back(model.layers[i].size());
  c.beta = model.beta.empty() ? c.beta : model.beta.front();
  c.knn = model.knn_k;
  c.pyramid = model.pyramid;
  c.patch_size = model.descriptor.patch_size;
  c.stride = model.descriptor.stride;
  c.normalize = model.normalize;
  if (model.svm) c.C = model.svm->C;
  return c;
}

TrialResult evaluate_model(const DdlcnModel& model, const LabeledImages& data,
                           const std::vector<std::size_t>& test_indices, std::size_t threads, double* total_image_ms) {
  if (!model.svm) throw InvalidInput("model has no classifier");
  const CompactPlan plan = make_compact_plan(model);
  if (model.svm->feature_dim() != plan.dim()) {
    throw ConfigError("feature dimension " + std::to_string(plan.dim()) + " does not match the classifier's " +
                      std::to_string(model.svm->feature_dim()));
  }
  const std::size_t r = data.num_classes();
  std::vector<int> predicted(test_indices.size());
  std::vector<double> elapsed(test_indices.size());
  parallel_for(test_indices.size(), threads, [&](std::size_t k) {
    const auto start = std::chrono::steady_clock::now();
    predicted[k] = classify(data.images[test_indices[k]], model, plan);
    elapsed[k] = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  });

  TrialResult res;
  res.confusion.assign(r, std::vector<std::size_t>(r, 0));
  std::size_t correct = 0;
  for (std::size_t k = 0; k < test_indices.size(); ++k) {
    const int truth = data.labels[test_indices[k]];
    const int pred = predicted[k];
    if (pred < 0 || static_cast<std::size_t>(pred) >= r) throw ConfigError("model predicts a class absent from the data");
    ++res.confusion[static_cast<std::size_t>(truth)][static_cast<std::size_t>(pred)];
    if (truth == pred) ++correct;
  }
  res.test_count = test_indices.size();
  res.accuracy = res.test_count ? static_cast<double>(correct) / static_cast<double>(res.test_count) : 0.0;
  if (total_image_ms) {
    double sum = 0.0;
    for (double e : elapsed) sum += e;
    *total_image_ms = sum;
  }
  return res;
}

void summarize(EvalReport& report) {
  const auto n = static_cast<double>(report.trials.size());
  if (report.trials.empty()) return;
  double sum = 0.0;
  for (const TrialResult& t : report.trials) sum += t.accuracy;
  report.mean_accuracy = sum / n;
  double ss = 0.0;
  for (const TrialResult& t : report.trials) ss += (t.accuracy - report.mean_accuracy) * (t.accuracy - report.mean_accuracy);
  report.std_accuracy = report.trials.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
}

std::vector<std::pair<std::pair<int, int>, std::size_t>> confused_pairs(const TrialResult& result) {
  std::vector<std::pair<std::pair<int, int>, std::size_t>> pairs;
  const std::size_t r = result.confusion.size();
  for (std::size_t a = 0; a < r; ++a) {
    for (std::size_t b = a + 1; b < r; ++b) {
      pairs.push_back({{static_cast<int>(a), static_cast<int>(b)}, result.confusion[a][b] + result.confusion[b][a]});
    }
  }
  std::stable_sort(pairs.begin(), pairs.end(), [](const auto& l, const auto& r2) { return l.second > r2.second; });
  return pairs;
}

std::string render_report_text(const EvalReport& report) {
  std::ostringstream o;
  o << "DDLCN evaluation report\n\n";
  for (const auto& [k, v] : report.settings) o << "  " << std::left << std::setw(12) << k << v << '\n';
  o << "\n  trial   accuracy(%)   test images\n";
  for (const TrialResult& t : report.trials) {
    o << "  " << std::left << std::setw(8) << t.trial << std::setw(14) << std::fixed << std::setprecision(2)
      << 100.0 * t.accuracy << t.test_count << '\n';
  }
  o << "\n  mean accuracy: " << std::fixed << std::setprecision(2) << 100.0 * report.mean_accuracy << " +- "
    << 100.0 * report.std_accuracy << " %\n";
  if (!report.trials.empty()) {
    const auto pairs = confused_pairs(report.trials.front());
    o << "  most confused pairs (trial " << report.trials.front().trial << "):";
    for (std::size_t i = 0; i < std::min<std::size_t>(3, pairs.size()); ++i) {
      o << " (" << report.class_names[static_cast<std::size_t>(pairs[i].first.first)] << ", "
        << report.class_names[static_cast<std::size_t>(pairs[i].first.second)] << "): " << pairs[i].second;
    }
    o << '\n';
  }
  o.unsetf(std::ios::floatfield);

  o << "\n[results]\n";
  for (const auto& [k, v] : report.settings) o << k << '=' << v << '\n';
  o << "trials=" << report.trials.size() << '\n';
  for (const TrialResult& t : report.trials) {
    o << "accuracy." << t.trial << '=' << fmt(t.accuracy) << '\n';
    o << "test_count." << t.trial << '=' << t.test_count << '\n';
  }
  o << "mean_accuracy=" << fmt(report.mean_accuracy) << '\n';
  o << "std_accuracy=" << fmt(report.std_accuracy) << '\n';
  return o.str();
}

std::string render_report_csv(const EvalReport& report) {
  std::ostringstream o;
  o << "trial,true_class";
  for (const std::string& name : report.class_names) o << ",pred_" << name;
  o << '\n';
  for (const TrialResult& t : report.trials) {
    for (std::size_t a = 0; a < t.confusion.size(); ++a) {
      o << t.trial << ',' << report.class_names[a];
      for (std::size_t count : t.confusion[a]) o << ',' << count;
      o << '\n';
    }
  }
  return o.str();
}

std::string render_timing(const EvalReport& report) {
  std::ostringstream o;
  o << "ms_per_image=" << fmt(report.ms_per_image) << '\n';
  o << "wall_seconds=" << fmt(report.wall_seconds) << '\n';
  return o.str();
}

void write_report(const EvalReport& report, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  auto write = [&](const char* name, const std::string& text) {
    std::ofstream out(dir / name, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + (dir / name).string());
    out << text;
  };
  write("report.txt", render_report_text(report));
  write("report.csv", render_report_csv(report));
  write("timing.txt", render_timing(report));
}

}  // namespace ddlcn
