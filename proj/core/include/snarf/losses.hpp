#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <utility>
#include <vector>

#include "snarf/config.hpp"
#include "snarf/model.hpp"
#include "snarf/oracle.hpp"

namespace snarf {

constexpr double kBceClamp = 1e-7;

/// -[gt log o + (1 - gt) log(1 - o)] with o clamped to [1e-7, 1 - 1e-7].
double loss_bce(double o, bool gt);

struct BatchLoss {
  double value = 0.0;
  Eigen::VectorXd grad;  // d value / d prediction (zero where the clamp is active)
};

/// Mean BCE over a batch.
BatchLoss loss_bce_batch(const Eigen::VectorXd& o, std::span<const std::uint8_t> labels);

// Bones and joints of the canonical skeleton, used by the bootstrap losses.
struct SkeletonLayout {
  int dim = 2;
  std::vector<Segment> bones;
  std::vector<Vec> joints;
  std::vector<std::pair<int, int>> joint_bones;

  static SkeletonLayout from_config(const ExperimentConfig& config);
};

/// Points uniform along the bone segments (bones chosen by length).
Batch sample_bone_points(const SkeletonLayout& layout, int count, std::mt19937_64& rng);

/// Mean BCE of canonical occupancy at `points` against label 1. When `grad` is
/// given, scale * d/d(sigma_f) is added to it.
double loss_bootstrap_bone(const ModelParams& model, const Batch& points, MlpGrad* grad = nullptr,
                           double scale = 1.0);

/// Mean over joints and bones of (w_i(joint) - target_i)^2 where the target
/// puts 0.5 on the two bones meeting at the joint. Forward models query the
/// canonical joints. The baseline queries the joints posed by `frame` (or the
/// canonical ones with a zero pose when null), together with that pose.
double loss_bootstrap_joint(const ModelParams& model, const SkeletonLayout& layout,
                            const BoneTransformSet* frame = nullptr, MlpGrad* grad = nullptr, double scale = 1.0);

}  // namespace snarf
