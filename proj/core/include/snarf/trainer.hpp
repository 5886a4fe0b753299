#pragma once

#include <filesystem>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "snarf/config.hpp"
#include "snarf/dataset.hpp"
#include "snarf/losses.hpp"
#include "snarf/model.hpp"

namespace snarf {

struct EpochMetrics {
  int epoch = 0;  // 1-based
  double loss_bce = 0.0;
  double loss_bone = 0.0;
  double loss_joint = 0.0;
  double val_iou_bbox = std::numeric_limits<double>::quiet_NaN();
  double val_iou_surface = std::numeric_limits<double>::quiet_NaN();
};

struct TrainOptions {
  std::filesystem::path out_dir{};     // checkpoint.snrf, model.snrf, metrics.csv; empty = no files
  const Dataset* validation = nullptr;  // scored every validation_interval epochs and after the last
  std::function<void(const EpochMetrics&)> on_epoch{};
};

struct TrainResult {
  ModelParams model;
  std::vector<EpochMetrics> metrics;
  bool aborted = false;  // non-finite loss; `model` is the last finite state
  std::string message;
};

/// Freshly initialized model of the requested kind for `config`.
ModelParams initial_model(const ExperimentConfig& config, ModelKind kind);

struct LossBreakdown {
  double total = 0.0;
  double bce = 0.0;
  double bone = 0.0;
  double joint = 0.0;
};

struct BootstrapTerms {
  const Batch* bone_points = nullptr;  // null: no bone term
  const SkeletonLayout* layout = nullptr;  // null: no joint term
  const BoneTransformSet* joint_frame = nullptr;
  double bone_weight = 1.0;
  double joint_weight = 1.0;
};

/// L = mean BCE over the queries + bone_weight * bone + joint_weight * joint,
/// with gradients added to the accumulators when they are non-null. The BCE
/// part is processed in fixed blocks summed in order, so the result is
/// independent of the thread count.
LossBreakdown total_loss(const ModelParams& model, const Batch& queries, FrameRefs frames,
                         std::span<const std::uint8_t> labels, const BootstrapTerms& bootstrap,
                         MlpGrad* grad_occupancy, MlpGrad* grad_skinning);

TrainResult train(const Dataset& data, const ExperimentConfig& config, ModelKind kind,
                  const TrainOptions& options = {});

/// Checkpoint whose metadata also records the training config.
Checkpoint training_checkpoint(const ModelParams& model, const ExperimentConfig& config);
/// The config stored by training_checkpoint, if any.
std::optional<ExperimentConfig> checkpoint_config(const Checkpoint& checkpoint);

void write_metrics_csv(const std::filesystem::path& path, const std::vector<EpochMetrics>& metrics);

}  // namespace snarf
