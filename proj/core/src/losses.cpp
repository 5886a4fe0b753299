#include "snarf/losses.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "snarf/baseline.hpp"
#include "snarf/occupancy.hpp"

namespace snarf {

double loss_bce(double o, bool gt) {
  const double c = std::clamp(o, kBceClamp, 1.0 - kBceClamp);
  return gt ? -std::log(c) : -std::log1p(-c);
}

BatchLoss loss_bce_batch(const Eigen::VectorXd& o, std::span<const std::uint8_t> labels) {
  if (static_cast<std::size_t>(o.size()) != labels.size()) throw std::invalid_argument("loss_bce: length mismatch");
  BatchLoss out;
  out.grad = Eigen::VectorXd::Zero(o.size());
  if (o.size() == 0) return out;
  const double inv_n = 1.0 / static_cast<double>(o.size());
  for (Eigen::Index k = 0; k < o.size(); ++k) {
    const bool gt = labels[static_cast<std::size_t>(k)] != 0;
    out.value += loss_bce(o(k), gt);
    if (o(k) > kBceClamp && o(k) < 1.0 - kBceClamp) out.grad(k) = (gt ? -1.0 / o(k) : 1.0 / (1.0 - o(k))) * inv_n;
  }
  out.value *= inv_n;
  return out;
}

SkeletonLayout SkeletonLayout::from_config(const ExperimentConfig& config) {
  SkeletonLayout layout;
  layout.dim = config.dim();
  if (config.shape == ShapeKind::stick) {
    const StickGeometry g = config.effective_stick();
    layout.bones = bone_segments(g);
    for (int j = 0; j < g.joint_count(); ++j) layout.joints.push_back(g.joint(j));
    layout.joint_bones = g.joint_bones();
  } else {
    layout.bones = bone_segments(config.capsule);
    for (int j = 0; j < config.capsule.joint_count(); ++j) layout.joints.push_back(config.capsule.joint(j));
    layout.joint_bones = config.capsule.joint_bones();
  }
  return layout;
}

Batch sample_bone_points(const SkeletonLayout& layout, int count, std::mt19937_64& rng) {
  std::vector<double> lengths;
  double total = 0.0;
  for (const auto& [a, b] : layout.bones) total += lengths.emplace_back((b - a).norm());
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Batch out(layout.dim, count);
  for (int k = 0; k < count; ++k) {
    double s = unit(rng) * total;
    std::size_t i = 0;
    while (i + 1 < lengths.size() && s >= lengths[i]) s -= lengths[i++];
    const auto& [a, b] = layout.bones[i];
    out.col(k) = a + std::min(s / lengths[i], 1.0) * (b - a);
  }
  return out;
}

double loss_bootstrap_bone(const ModelParams& model, const Batch& points, MlpGrad* grad, double scale) {
  if (points.cols() == 0) return 0.0;
  const BoneTransformSet canonical = BoneTransformSet::identity(model.bones, model.dim, model.pose_dim);
  const BoneTransformSet* frames[] = {&canonical};
  const MlpTape tape = mlp_forward_batch(model.occupancy, occupancy_inputs(model, points, frames));
  const std::vector<std::uint8_t> ones(static_cast<std::size_t>(points.cols()), 1);
  const BatchLoss loss = loss_bce_batch(tape.output.row(0).transpose(), ones);
  if (grad != nullptr) mlp_backward_batch(model.occupancy, tape, scale * loss.grad.transpose(), grad);
  return loss.value;
}

double loss_bootstrap_joint(const ModelParams& model, const SkeletonLayout& layout, const BoneTransformSet* frame,
                            MlpGrad* grad, double scale) {
  const auto joints = static_cast<Eigen::Index>(layout.joints.size());
  if (joints == 0) return 0.0;
  Batch points(model.dim, joints);
  for (Eigen::Index j = 0; j < joints; ++j) points.col(j) = layout.joints[static_cast<std::size_t>(j)];
  Batch inputs = points;
  if (model.kind == ModelKind::backward_lbs) {
    BoneTransformSet canonical = BoneTransformSet::identity(model.bones, model.dim, model.pose_dim);
    const BoneTransformSet* f = frame != nullptr ? frame : &canonical;
    // Both bones at a joint move its pivot to the same place.
    for (Eigen::Index j = 0; j < joints; ++j) {
      const int bone = layout.joint_bones[static_cast<std::size_t>(j)].first;
      points.col(j) = f->transforms[bone].apply(Vec(points.col(j)));
    }
    const BoneTransformSet* frames[] = {f};
    inputs = backlbs_weight_inputs(model, points, frames);
  }
  const MlpTape tape = mlp_forward_batch(model.skinning, inputs);
  Eigen::MatrixXd target = Eigen::MatrixXd::Zero(model.bones, joints);
  for (Eigen::Index j = 0; j < joints; ++j) {
    const auto [a, b] = layout.joint_bones[static_cast<std::size_t>(j)];
    target(a, j) = 0.5;
    target(b, j) = 0.5;
  }
  const Eigen::MatrixXd diff = tape.output - target;
  const double count = static_cast<double>(diff.size());
  if (grad != nullptr) mlp_backward_batch(model.skinning, tape, (2.0 * scale / count) * diff, grad);
  return diff.squaredNorm() / count;
}

}  // namespace snarf
