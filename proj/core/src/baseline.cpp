#include "snarf/baseline.hpp"

#include <stdexcept>

#include "snarf/occupancy.hpp"

namespace snarf {

namespace {

const BoneTransformSet* frame_of(FrameRefs frames, Eigen::Index j) {
  return frames.size() == 1 ? frames[0] : frames[static_cast<std::size_t>(j)];
}

void check(const ModelParams& model, const Batch& queries, FrameRefs frames) {
  if (model.kind != ModelKind::backward_lbs) throw std::invalid_argument("back-LBS: model is not a baseline model");
  if (queries.rows() != model.dim) throw std::invalid_argument("back-LBS: query dimension mismatch");
  if (frames.size() != 1 && frames.size() != static_cast<std::size_t>(queries.cols())) {
    throw std::invalid_argument("back-LBS: need one frame or one frame per query");
  }
}

}  // namespace

Batch backlbs_weight_inputs(const ModelParams& model, const Batch& queries, FrameRefs frames) {
  Batch in(model.dim + model.pose_dim, queries.cols());
  in.topRows(model.dim) = queries;
  for (Eigen::Index j = 0; j < queries.cols(); ++j) {
    const BoneTransformSet* f = frame_of(frames, j);
    if (f->pose.size() != model.pose_dim) throw std::invalid_argument("back-LBS: pose dimension mismatch");
    if (model.pose_dim > 0) in.block(model.dim, j, model.pose_dim, 1) = f->pose;
  }
  return in;
}

BackLbsBatch backlbs_forward_batch(const ModelParams& model, const Batch& queries, FrameRefs frames) {
  check(model, queries, frames);
  BackLbsBatch out;
  out.weight_tape = mlp_forward_batch(model.skinning, backlbs_weight_inputs(model, queries, frames));
  const Eigen::MatrixXd& w = out.weight_tape.output;
  out.canonical = Batch::Zero(model.dim, queries.cols());
  for (Eigen::Index j = 0; j < queries.cols(); ++j) {
    const BoneTransformSet* f = frame_of(frames, j);
    const Vec x = queries.col(j);
    for (int i = 0; i < model.bones; ++i) out.canonical.col(j) += w(i, j) * f->transforms[i].apply_inverse(x);
  }
  out.occupancy_tape = mlp_forward_batch(model.occupancy, occupancy_inputs(model, out.canonical, frames));
  out.occupancy = out.occupancy_tape.output.row(0).transpose();
  return out;
}

void backlbs_backward_batch(const ModelParams& model, const BackLbsBatch& forward, const Batch& queries,
                            FrameRefs frames, const Eigen::VectorXd& upstream, MlpGrad& grad_occupancy,
                            MlpGrad& grad_skinning) {
  check(model, queries, frames);
  if (upstream.size() != queries.cols()) throw std::invalid_argument("back-LBS: upstream size");
  const Eigen::MatrixXd dcanonical =
      mlp_backward_batch(model.occupancy, forward.occupancy_tape, upstream.transpose(), &grad_occupancy);
  Eigen::MatrixXd dweights(model.bones, queries.cols());
  for (Eigen::Index j = 0; j < queries.cols(); ++j) {
    const BoneTransformSet* f = frame_of(frames, j);
    const Vec x = queries.col(j);
    const Vec g = dcanonical.col(j).head(model.dim);
    for (int i = 0; i < model.bones; ++i) dweights(i, j) = g.dot(f->transforms[i].apply_inverse(x));
  }
  mlp_backward_batch(model.skinning, forward.weight_tape, dweights, &grad_skinning);
}

double baseline_backlbs_forward(const ModelParams& model, const Vec& x_query, const Eigen::VectorXd& p,
                                const BoneTransformSet& bones) {
  BoneTransformSet posed = bones;
  posed.pose = p;
  const BoneTransformSet* frames[] = {&posed};
  return backlbs_forward_batch(model, Batch(x_query), frames).occupancy(0);
}

}  // namespace snarf
