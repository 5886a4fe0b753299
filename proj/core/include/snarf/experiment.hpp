#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "snarf/config.hpp"
#include "snarf/dataset.hpp"
#include "snarf/evaluation.hpp"

namespace snarf {

struct ExperimentOptions {
  std::ostream* log = nullptr;  // progress lines; null = silent
  bool reuse_data = true;       // load <out>/data/*.snrd when they match the config
  bool gallery = true;
  bool sweep = true;            // interpolation regime only
};

struct ModelComparison {
  IouReport forward;
  IouReport baseline;
};

struct SweepPoint {
  double train_step_deg = 0.0;
  std::vector<double> forward_iou;   // IoU bbox per seed
  std::vector<double> baseline_iou;
  double forward_mean = 0.0;
  double baseline_mean = 0.0;
  double gap() const { return forward_mean - baseline_mean; }
};

struct ExperimentSummary {
  ModelComparison main;
  std::vector<SweepPoint> sweep;
  bool aborted = false;
  std::string message;
};

/// Generates (or reuses) the train/test splits for `config`, saving them in
/// `data_dir` when it is non-empty.
std::pair<Dataset, Dataset> prepare_data(const ExperimentConfig& config, const std::filesystem::path& data_dir,
                                         bool reuse);

/// Trains the forward model and the backward-LBS baseline on the same data and
/// scores both on the test split.
ModelComparison compare_models(const ExperimentConfig& config, const Dataset& train_data, const Dataset& test_data,
                               const std::filesystem::path& out_dir, std::ostream* log, bool* aborted = nullptr,
                               std::string* message = nullptr);

/// IoU-vs-train-step curve: for every step, forward and baseline IoU bbox
/// averaged over sweep_seeds.
std::vector<SweepPoint> interpolation_sweep(const ExperimentConfig& config, std::ostream* log);

void write_sweep_csv(const std::filesystem::path& path, const std::vector<SweepPoint>& sweep);

/// Full run. Artifacts in `out_dir`: config.json, data/, forward/ and
/// baseline/ (checkpoints, metrics.csv, iou.json, iou.csv), summary.json,
/// summary.csv, gallery/*.png and, for the interpolation regime,
/// interpolation_curve.csv.
ExperimentSummary run_experiment(const ExperimentConfig& config, const std::filesystem::path& out_dir,
                                 const ExperimentOptions& options = {});
ExperimentSummary run_experiment(const std::filesystem::path& config_path, const std::filesystem::path& out_dir,
                                 const ExperimentOptions& options = {});

}  // namespace snarf
