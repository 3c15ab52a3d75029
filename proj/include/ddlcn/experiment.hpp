#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ddlcn/datasets.hpp"
#include "ddlcn/network.hpp"

namespace ddlcn {

/// Training / evaluation protocol. Keys of the config file match the field
/// names (see `config_keys()`); `t = all` uses every sample of a class.
struct ExperimentConfig {
  std::size_t p = 1;                     // dictionary-training images per class
  std::size_t q = 2;                     // layer-1 atoms per class
  std::optional<std::size_t> t;          // SVM-training images per class (nullopt: all)
  std::vector<std::size_t> layers{20};   // D2..Dn
  double beta = 0.1;
  double lambda = 0.15;
  std::size_t knn = 5;
  double C = 1.0;
  std::vector<std::size_t> pyramid{1, 2, 4};
  std::size_t patch_size = 12;
  std::size_t stride = 4;
  bool normalize = true;
  std::size_t trials = 10;
  std::uint64_t seed = 0;
  std::size_t dict_iters = 30;
  std::size_t svm_epochs = 100;
  std::size_t threads = 0;  // 0: hardware concurrency; never changes results

  bool operator==(const ExperimentConfig&) const = default;
};

const std::vector<std::string>& config_keys();

/// Applies one key=value pair. Throws ConfigError on unknown keys or bad values.
void apply_config_value(ExperimentConfig& config, std::string_view key, std::string_view value);

/// Reads flat key=value lines; blank lines and '#' comments are ignored.
ExperimentConfig parse_config(std::string_view text);
ExperimentConfig load_config(const std::filesystem::path& path);
std::string format_config(const ExperimentConfig& config);

/// Throws ConfigError when an invariant (p, q, trials, layer sizes >= 1, ...) fails.
void validate(const ExperimentConfig& config);

/// Dataset indices used by one trial. Both sets are drawn per class without
/// replacement, independently of each other, from seeds derived from
/// (config.seed, trial).
struct TrialSplit {
  std::vector<std::size_t> dictionary;
  std::vector<std::size_t> train;
};

TrialSplit sample_trial(const LabeledImages& data, const ExperimentConfig& config, std::size_t trial);

/// Indices in neither set of the trial's split, in dataset order.
std::vector<std::size_t> held_out(const LabeledImages& data, const TrialSplit& split);

struct TrainingLog {
  std::vector<std::vector<double>> class_objectives;  // per class dictionary
  std::vector<std::vector<double>> layer_objectives;  // layers 2..n
  double max_kkt_residual = 0.0;
};

/// Full pipeline for one trial: sample -> per-class dictionaries -> assemble
/// -> deeper layers -> atom-code tables -> encode t images/class -> SVM.
DdlcnModel train_trial(const ExperimentConfig& config, const LabeledImages& data, std::size_t trial,
                       TrainingLog* log = nullptr);

/// The model's own experiment settings, recovered from its info block.
ExperimentConfig config_from_model(const DdlcnModel& model);

struct TrialResult {
  std::size_t trial = 0;
  double accuracy = 0.0;
  std::vector<std::vector<std::size_t>> confusion;  // [true][predicted]
  std::size_t test_count = 0;
};

struct EvalReport {
  std::vector<std::string> class_names;
  std::vector<TrialResult> trials;
  double mean_accuracy = 0.0;
  double std_accuracy = 0.0;  // sample standard deviation; 0 for one trial
  double ms_per_image = 0.0;  // mean encode + predict time per image
  double wall_seconds = 0.0;
  std::map<std::string, std::string> settings;
};

/// Encodes and classifies `test_indices` of `data` with one trained model.
TrialResult evaluate_model(const DdlcnModel& model, const LabeledImages& data,
                           const std::vector<std::size_t>& test_indices, std::size_t threads,
                           double* total_image_ms = nullptr);

/// Fills mean / std from the per-trial accuracies.
void summarize(EvalReport& report);

/// Unordered class pairs ranked by total confusion (both directions).
std::vector<std::pair<std::pair<int, int>, std::size_t>> confused_pairs(const TrialResult& result);

/// Human-readable table followed by key=value lines; contains no timings.
std::string render_report_text(const EvalReport& report);
/// Confusion matrices: header, then one row per (trial, true class).
std::string render_report_csv(const EvalReport& report);
std::string render_timing(const EvalReport& report);

/// Writes report.txt, report.csv and timing.txt into `dir`.
void write_report(const EvalReport& report, const std::filesystem::path& dir);

}  // namespace ddlcn
