#pragma once

#include "snarf/model.hpp"
#include "snarf/skeleton.hpp"

namespace snarf {

// Backward-LBS baseline: weights are predicted in posed space from the query
// and the pose, and the query is warped back as x_c = sum_i w_i B_i^-1 x'.
// Uses ModelParams with kind == backward_lbs.
struct BackLbsBatch {
  Eigen::VectorXd occupancy;
  MlpTape weight_tape;
  Batch canonical;  // warped queries
  MlpTape occupancy_tape;
};

/// Stacks posed points with their frame's pose as skinning-net inputs.
Batch backlbs_weight_inputs(const ModelParams& model, const Batch& queries, FrameRefs frames);

BackLbsBatch backlbs_forward_batch(const ModelParams& model, const Batch& queries, FrameRefs frames);

/// Adds gradients of sum_j upstream_j * o_j to both accumulators.
void backlbs_backward_batch(const ModelParams& model, const BackLbsBatch& forward, const Batch& queries,
                            FrameRefs frames, const Eigen::VectorXd& upstream, MlpGrad& grad_occupancy,
                            MlpGrad& grad_skinning);

double baseline_backlbs_forward(const ModelParams& model, const Vec& x_query, const Eigen::VectorXd& p,
                                const BoneTransformSet& bones);

}  // namespace snarf
