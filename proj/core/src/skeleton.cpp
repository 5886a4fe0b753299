#include "snarf/skeleton.hpp"

#include <stdexcept>
#include <string>

namespace snarf {

namespace {

const BoneTransformSet& frame_for(FrameRefs frames, Eigen::Index column) {
  return frames.size() == 1 ? *frames[0] : *frames[static_cast<std::size_t>(column)];
}

void check_inputs(const MlpParams& sigma_w, const Batch& x, FrameRefs frames) {
  if (frames.empty() || (frames.size() != 1 && frames.size() != static_cast<std::size_t>(x.cols()))) {
    throw std::invalid_argument("lbs: need one transform set, or one per point");
  }
  const int bones = sigma_w.spec().output_dim;
  for (const BoneTransformSet* f : frames) {
    if (f->bone_count() != bones) {
      throw std::invalid_argument("lbs: skinning net has " + std::to_string(bones) + " outputs but " +
                                  std::to_string(f->bone_count()) + " bone transforms were given");
    }
    if (f->dim() != x.rows()) throw std::invalid_argument("lbs: point / transform dimension mismatch");
  }
  if (sigma_w.spec().input_dim != x.rows()) {
    throw std::invalid_argument("lbs: skinning net input dimension does not match point dimension");
  }
}

// True when every bone carries the same transform; LBS is then that transform.
bool single_motion(const BoneTransformSet& frame) {
  const RigidTransform& first = frame.transforms.front();
  for (const RigidTransform& t : frame.transforms) {
    if (t.rotation != first.rotation || t.translation != first.translation) return false;
  }
  return true;
}

}  // namespace

SkinningWeights skin_weights(const MlpParams& sigma_w, const Vec& x) {
  if (sigma_w.spec().output_activation != OutputActivation::softmax) {
    throw std::invalid_argument("skinning net must use a softmax head");
  }
  return {mlp_forward(sigma_w, Eigen::VectorXd(x)).y};
}

LbsBatch lbs_deform_batch(const MlpParams& sigma_w, const Batch& x, FrameRefs frames) {
  check_inputs(sigma_w, x, frames);
  LbsBatch out{mlp_forward_batch(sigma_w, x), Eigen::MatrixXd::Zero(x.rows(), x.cols())};
  const Eigen::MatrixXd& w = out.tape.output;
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    const BoneTransformSet& frame = frame_for(frames, j);
    const Vec xj = x.col(j);
    if (single_motion(frame)) {
      out.deformed.col(j) = frame.transforms.front().apply(xj);
      continue;
    }
    Vec acc = Vec::Zero(xj.size());
    for (int i = 0; i < frame.bone_count(); ++i) acc += w(i, j) * frame.transforms[i].apply(xj);
    out.deformed.col(j) = acc;
  }
  return out;
}

std::vector<Mat> lbs_spatial_jacobian_batch(const MlpParams& sigma_w, const LbsBatch& lbs, const Batch& x,
                                            FrameRefs frames) {
  check_inputs(sigma_w, x, frames);
  const auto weight_jac = mlp_input_jacobian_batch(sigma_w, lbs.tape);
  const Eigen::MatrixXd& w = lbs.tape.output;
  const int d = static_cast<int>(x.rows());
  std::vector<Mat> out;
  out.reserve(x.cols());
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    const BoneTransformSet& frame = frame_for(frames, j);
    if (single_motion(frame)) {
      out.push_back(frame.transforms.front().rotation);
      continue;
    }
    const Vec xj = x.col(j);
    Mat jac = Mat::Zero(d, d);
    for (int i = 0; i < frame.bone_count(); ++i) {
      const RigidTransform& b = frame.transforms[i];
      jac += w(i, j) * b.rotation;
      const Vec moved = b.apply(xj);
      for (int k = 0; k < d; ++k) jac.col(k) += weight_jac[k](i, j) * moved;
    }
    out.push_back(jac);
  }
  return out;
}

void lbs_param_gradient_batch(const MlpParams& sigma_w, const LbsBatch& lbs, const Batch& x, FrameRefs frames,
                              const Batch& upstream, MlpGrad& grad) {
  check_inputs(sigma_w, x, frames);
  if (upstream.rows() != x.rows() || upstream.cols() != x.cols()) {
    throw std::invalid_argument("lbs_param_gradient: upstream shape mismatch");
  }
  const int bones = sigma_w.spec().output_dim;
  Eigen::MatrixXd dweights(bones, x.cols());
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    const BoneTransformSet& frame = frame_for(frames, j);
    const Vec xj = x.col(j);
    const Vec uj = upstream.col(j);
    for (int i = 0; i < bones; ++i) dweights(i, j) = uj.dot(frame.transforms[i].apply(xj));
  }
  mlp_backward_batch(sigma_w, lbs.tape, dweights, &grad);
}

Vec lbs_deform(const MlpParams& sigma_w, const Vec& x, const BoneTransformSet& bones) {
  const BoneTransformSet* frames[] = {&bones};
  return lbs_deform_batch(sigma_w, Batch(x), frames).deformed.col(0);
}

Mat lbs_spatial_jacobian(const MlpParams& sigma_w, const Vec& x, const BoneTransformSet& bones) {
  const BoneTransformSet* frames[] = {&bones};
  const Batch xb(x);
  const LbsBatch lbs = lbs_deform_batch(sigma_w, xb, frames);
  return lbs_spatial_jacobian_batch(sigma_w, lbs, xb, frames).front();
}

MlpGrad lbs_param_gradient(const MlpParams& sigma_w, const Vec& x, const BoneTransformSet& bones,
                           const Vec& upstream) {
  const BoneTransformSet* frames[] = {&bones};
  const Batch xb(x);
  const LbsBatch lbs = lbs_deform_batch(sigma_w, xb, frames);
  MlpGrad grad(sigma_w);
  lbs_param_gradient_batch(sigma_w, lbs, xb, frames, Batch(upstream), grad);
  return grad;
}

BoneTransformSet forward_kinematics_chain(std::span<const double> joint_angles, std::span<const Vec> pivots,
                                          int dim, const Vec& axis) {
  if (joint_angles.size() != pivots.size()) throw std::invalid_argument("forward kinematics: angle count != joint count");
  BoneTransformSet set;
  set.pose = Eigen::Map<const Eigen::VectorXd>(joint_angles.data(), static_cast<Eigen::Index>(joint_angles.size()));
  RigidTransform accumulated = RigidTransform::identity(dim);
  set.transforms.push_back(accumulated);
  for (std::size_t j = 0; j < joint_angles.size(); ++j) {
    const Mat rotation = dim == 2 ? rotation_2d(joint_angles[j]) : rotation_axis_angle(axis, joint_angles[j]);
    accumulated = accumulated.compose(RigidTransform::about_pivot(rotation, pivots[j]));
    set.transforms.push_back(accumulated);
  }
  return set;
}

BoneTransformSet forward_kinematics_stick(std::span<const double> joint_angles, const StickGeometry& geometry) {
  std::vector<Vec> pivots;
  for (int j = 0; j < geometry.joint_count(); ++j) pivots.push_back(geometry.joint(j));
  return forward_kinematics_chain(joint_angles, pivots, 2, Vec());
}

BoneTransformSet forward_kinematics_capsule(std::span<const double> joint_angles, const CapsuleGeometry& geometry) {
  std::vector<Vec> pivots;
  for (int j = 0; j < geometry.joint_count(); ++j) pivots.push_back(geometry.joint(j));
  return forward_kinematics_chain(joint_angles, pivots, 3, geometry.bend_axis);
}

}  // namespace snarf
