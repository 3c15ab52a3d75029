// ddlcn: train, evaluate and inspect deep dictionary coding networks.
#include <CLI11.hpp>

#include <charconv>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "ddlcn/datasets.hpp"
#include "ddlcn/errors.hpp"
#include "ddlcn/experiment.hpp"
#include "ddlcn/model_io.hpp"
#include "ddlcn/network.hpp"

namespace fs = std::filesystem;
using namespace ddlcn;

namespace {

enum ExitCode : int { kOk = 0, kFailure = 1, kConfig = 2, kFormat = 3 };

struct DataSource {
  std::string mnist;
  std::string images;
};

void add_data_options(CLI::App* cmd, DataSource& src) {
  auto* m = cmd->add_option("--mnist", src.mnist, "Directory with the four MNIST IDX files");
  auto* d = cmd->add_option("--images", src.images, "Root of a class-per-subdirectory PGM tree");
  m->excludes(d);
}

void require_source(const DataSource& src) {
  if (src.mnist.empty() && src.images.empty()) throw ConfigError("one of --mnist or --images is required");
}

LabeledImages load_mnist_split(const fs::path& dir, bool train) {
  const char* prefix = train ? "train" : "t10k";
  return load_mnist(dir / (std::string(prefix) + "-images-idx3-ubyte"), dir / (std::string(prefix) + "-labels-idx1-ubyte"));
}

LabeledImages load_directory(const fs::path& root) {
  ImageDirectory dir = load_image_dir(root);
  for (const std::string& e : dir.errors) std::cerr << "warning: " << e << '\n';
  if (dir.skipped) std::cerr << "warning: skipped " << dir.skipped << " non-PGM files\n";
  return std::move(dir.data);
}

std::string shortest(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string join(const std::vector<std::size_t>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + std::to_string(v[i]);
  return out;
}

void print_trace(const char* label, const std::vector<double>& objective) {
  if (objective.empty()) return;
  std::printf("  %s objective %.6g -> %.6g (%zu iterations)\n", label, objective.front(), objective.back(),
              objective.size() - 1);
}

struct TrainArgs {
  std::string config;
  DataSource source;
  std::string out = "ddlcn_out";
  std::vector<std::pair<std::string, std::string>> overrides;
};

int run_train(TrainArgs& args) {
  require_source(args.source);
  ExperimentConfig config = args.config.empty() ? ExperimentConfig{} : load_config(args.config);
  for (const auto& [k, v] : args.overrides) apply_config_value(config, k, v);
  validate(config);

  const LabeledImages data =
      args.source.mnist.empty() ? load_directory(args.source.images) : load_mnist_split(args.source.mnist, true);
  fs::create_directories(args.out);
  {
    FILE* f = std::fopen((fs::path(args.out) / "config.txt").c_str(), "wb");
    if (!f) throw std::runtime_error("cannot write into " + args.out);
    const std::string text = format_config(config);
    std::fwrite(text.data(), 1, text.size(), f);
    std::fclose(f);
  }
  std::printf("training on %zu images, %zu classes, %zu trial(s)\n", data.size(), data.num_classes(), config.trials);
  for (std::size_t trial = 0; trial < config.trials; ++trial) {
    const auto start = std::chrono::steady_clock::now();
    TrainingLog log;
    const DdlcnModel model = train_trial(config, data, trial, &log);
    const fs::path path = fs::path(args.out) / ("model_trial" + std::to_string(trial) + ".ddlc");
    save_model(model, path);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("trial %zu: %s (%.1f s)\n", trial, path.c_str(), secs);
    for (std::size_t c = 0; c < log.class_objectives.size(); ++c) {
      print_trace(("class " + data.class_names[c]).c_str(), log.class_objectives[c]);
    }
    for (std::size_t n = 0; n < log.layer_objectives.size(); ++n) {
      print_trace(("layer " + std::to_string(n + 2)).c_str(), log.layer_objectives[n]);
    }
    std::printf("  max lasso KKT residual %.3g\n", log.max_kkt_residual);
  }
  return kOk;
}

struct EvalArgs {
  DataSource source;
  std::string out = "ddlcn_report";
  std::vector<std::string> models;
  std::size_t threads = 0;
  std::optional<std::size_t> limit;
};

int run_eval(EvalArgs& args) {
  require_source(args.source);
  const auto wall_start = std::chrono::steady_clock::now();
  std::optional<LabeledImages> test_split;
  std::optional<LabeledImages> directory;
  if (!args.source.mnist.empty()) test_split = load_mnist_split(args.source.mnist, false);
  else directory = load_directory(args.source.images);
  const LabeledImages& data = test_split ? *test_split : *directory;

  EvalReport report;
  report.class_names = data.class_names;
  double total_ms = 0.0;
  std::size_t total_images = 0;
  for (const std::string& path : args.models) {
    const DdlcnModel model = load_model(path);
    const ExperimentConfig config = config_from_model(model);
    std::size_t trial = 0;
    if (const auto it = model.info.find("trial"); it != model.info.end()) trial = std::stoul(it->second);

    std::vector<std::size_t> test;
    if (test_split) {
      test.resize(data.size());
      for (std::size_t i = 0; i < test.size(); ++i) test[i] = i;
    } else {
      test = held_out(data, sample_trial(data, config, trial));
    }
    if (args.limit && test.size() > *args.limit) test.resize(*args.limit);

    double ms = 0.0;
    TrialResult res = evaluate_model(model, data, test, args.threads, &ms);
    res.trial = trial;
    total_ms += ms;
    total_images += test.size();
    report.trials.push_back(std::move(res));
    if (report.settings.empty()) {
      report.settings = {
          {"p", std::to_string(config.p)},
          {"q", std::to_string(config.q)},
          {"t", config.t ? std::to_string(*config.t) : "all"},
          {"layers", std::to_string(model.layers.front().size()) + (config.layers.empty() ? "" : "," + join(config.layers))},
          {"beta", shortest(config.beta)},
          {"lambda", shortest(config.lambda)},
          {"knn", std::to_string(config.knn)},
          {"C", shortest(config.C)},
          {"pyramid", join(config.pyramid)},
          {"patch_size", std::to_string(config.patch_size)},
          {"stride", std::to_string(config.stride)},
          {"normalize", config.normalize ? "1" : "0"},
          {"test_set", test_split ? "mnist-t10k" : "held-out"},
      };
    }
  }
  summarize(report);
  report.ms_per_image = total_images ? total_ms / static_cast<double>(total_images) : 0.0;
  report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - wall_start).count();
  write_report(report, args.out);
  std::cout << render_report_text(report);
  std::printf("encode+predict: %.3f ms/image, wall %.1f s\n", report.ms_per_image, report.wall_seconds);
  return kOk;
}

struct EncodeArgs {
  std::string model;
  std::string image;
  std::string mnist;
  std::size_t index = 0;
};

int run_encode(const EncodeArgs& args) {
  const DdlcnModel model = load_model(args.model);
  GrayImage image;
  if (!args.image.empty()) {
    image = parse_pgm(read_file(args.image));
  } else if (!args.mnist.empty()) {
    LabeledImages data = load_mnist_split(args.mnist, false);
    if (args.index >= data.size()) throw ConfigError("--index out of range");
    image = std::move(data.images[args.index]);
  } else {
    throw ConfigError("one of --image or --mnist is required");
  }
  const PooledFeature f = encode_image(image, model);
  std::printf("dim %zu\n", f.values.size());
  for (double v : f.values) std::printf("%.17g\n", v);
  return kOk;
}

int run_inspect(const std::string& path) {
  const DdlcnModel model = load_model(path);
  std::printf("format version %u\n", model.version);
  std::vector<std::size_t> sizes;
  for (const Dictionary& d : model.layers) sizes.push_back(d.size());
  std::printf("layers %s (descriptor dim %zu)\n", join(sizes).c_str(), model.layers.front().dim());
  std::printf("beta");
  for (double b : model.beta) std::printf(" %g", b);
  std::printf("\nknn %zu\npyramid %s\npatch_size %zu\nstride %zu\nnormalize %d\n", model.knn_k,
              join(model.pyramid).c_str(), model.descriptor.patch_size, model.descriptor.stride,
              model.normalize ? 1 : 0);
  std::printf("augmented dim %zu\npooled dim %zu\n", augmented_dim(sizes),
              pooled_dim(model.pyramid, augmented_dim(sizes)));
  if (model.svm) {
    std::printf("svm classes %zu, feature dim %zu (compact), C %g\n", model.svm->classes.size(),
                model.svm->feature_dim(), model.svm->C);
  } else {
    std::printf("svm none\n");
  }
  for (const auto& [k, v] : model.info) std::printf("info.%s %s\n", k.c_str(), v.c_str());
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Deep dictionary learning and coding network"};
  app.require_subcommand(1);

  TrainArgs train;
  auto* train_cmd = app.add_subcommand("train", "Learn dictionaries and classifier, one model per trial");
  train_cmd->add_option("--config", train.config, "key=value config file");
  add_data_options(train_cmd, train.source);
  train_cmd->add_option("--out", train.out, "Output directory for model files");
  for (const std::string& key : config_keys()) {
    std::string flag = "--" + key;
    for (char& ch : flag) ch = ch == '_' ? '-' : ch;
    train_cmd->add_option_function<std::string>(
        flag, [&train, key](const std::string& v) { train.overrides.emplace_back(key, v); },
        "Override config key " + key);
  }

  EvalArgs eval;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate trained models and write report files");
  add_data_options(eval_cmd, eval.source);
  eval_cmd->add_option("--out", eval.out, "Report directory");
  eval_cmd->add_option("--threads", eval.threads, "Worker threads (0: all cores)");
  eval_cmd->add_option("--limit", eval.limit, "Evaluate only the first N test images");
  eval_cmd->add_option("models", eval.models, "Model files, one per trial")->required();

  EncodeArgs encode;
  auto* encode_cmd = app.add_subcommand("encode", "Print one image's pooled feature");
  encode_cmd->add_option("--model", encode.model)->required();
  encode_cmd->add_option("--image", encode.image, "PGM file");
  encode_cmd->add_option("--mnist", encode.mnist, "MNIST directory (test split)");
  encode_cmd->add_option("--index", encode.index, "Image index within the MNIST test split");

  std::string inspect_path;
  auto* inspect_cmd = app.add_subcommand("inspect", "Print model metadata");
  inspect_cmd->add_option("model", inspect_path)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }

  try {
    if (*train_cmd) return run_train(train);
    if (*eval_cmd) return run_eval(eval);
    if (*encode_cmd) return run_encode(encode);
    if (*inspect_cmd) return run_inspect(inspect_path);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const FormatError& e) {
    std::cerr << "format error: " << e.what() << " (byte offset " << e.offset() << ")\n";
    return kFormat;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kFailure;
  }
  return kFailure;
}
