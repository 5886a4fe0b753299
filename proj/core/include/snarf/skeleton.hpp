#pragma once

#include <span>
#include <vector>

#include "snarf/geometry.hpp"
#include "snarf/nn.hpp"
#include "snarf/transform.hpp"
#include "snarf/types.hpp"

namespace snarf {

// Convex per-bone coefficients at one canonical point.
struct SkinningWeights {
  Eigen::VectorXd w;
};

/// Softmax head of the skinning net. The net sees only the canonical point, so
/// the weights cannot depend on pose.
SkinningWeights skin_weights(const MlpParams& sigma_w, const Vec& x);

/// sum_i w_i(x) * B_i x
Vec lbs_deform(const MlpParams& sigma_w, const Vec& x, const BoneTransformSet& bones);

/// d(lbs_deform)/dx, including the spatial gradient of the weight field.
Mat lbs_spatial_jacobian(const MlpParams& sigma_w, const Vec& x, const BoneTransformSet& bones);

/// upstream^T * d(lbs_deform)/d(sigma_w).
MlpGrad lbs_param_gradient(const MlpParams& sigma_w, const Vec& x, const BoneTransformSet& bones,
                           const Vec& upstream);

// Batched LBS: one column per point. `frames` holds either one transform set
// shared by every column or one per column.
using FrameRefs = std::span<const BoneTransformSet* const>;

struct LbsBatch {
  MlpTape tape;              // tape.output holds the weights (n_b x n)
  Eigen::MatrixXd deformed;  // d x n
};

LbsBatch lbs_deform_batch(const MlpParams& sigma_w, const Batch& x, FrameRefs frames);
std::vector<Mat> lbs_spatial_jacobian_batch(const MlpParams& sigma_w, const LbsBatch& lbs, const Batch& x,
                                            FrameRefs frames);
/// Adds sum_j upstream_j^T * d(deformed_j)/d(sigma_w) to `grad`.
void lbs_param_gradient_batch(const MlpParams& sigma_w, const LbsBatch& lbs, const Batch& x, FrameRefs frames,
                              const Batch& upstream, MlpGrad& grad);

/// Kinematic chain of bones laid end to end; joint j rotates every bone after it
/// about the joint's canonical pivot. All-zero angles give identity transforms.
BoneTransformSet forward_kinematics_chain(std::span<const double> joint_angles, std::span<const Vec> pivots,
                                          int dim, const Vec& axis);
BoneTransformSet forward_kinematics_stick(std::span<const double> joint_angles, const StickGeometry& geometry);
BoneTransformSet forward_kinematics_capsule(std::span<const double> joint_angles, const CapsuleGeometry& geometry);

}  // namespace snarf
