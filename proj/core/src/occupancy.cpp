#include "snarf/occupancy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <Eigen/LU>
#include <Eigen/SVD>

namespace snarf {

namespace {

constexpr double kMaxCondition = 1e12;

BoneTransformSet with_pose(const BoneTransformSet& bones, const Eigen::VectorXd& p) {
  BoneTransformSet copy = bones;
  copy.pose = p;
  return copy;
}

// Roots that take part in the union for one query: converged roots, or the
// fallback when it is close enough to count.
std::vector<const RootCandidate*> usable_roots(const CorrespondenceSet& set, const ModelParams& model) {
  std::vector<const RootCandidate*> out;
  for (const auto& r : set.roots) out.push_back(&r);
  if (out.empty() && set.fallback &&
      set.fallback->residual <= model.composition.fallback_residual_factor * model.solver.epsilon) {
    out.push_back(&*set.fallback);
  }
  return out;
}

}  // namespace

Batch occupancy_inputs(const ModelParams& model, const Batch& x, FrameRefs frames) {
  if (!model.pose_conditioning || model.pose_dim == 0) return x;
  Batch in(model.dim + model.pose_dim, x.cols());
  in.topRows(model.dim) = x;
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    const BoneTransformSet* f = frames.size() == 1 ? frames[0] : frames[static_cast<std::size_t>(j)];
    if (f->pose.size() != model.pose_dim) throw std::invalid_argument("occupancy: pose dimension mismatch");
    in.block(model.dim, j, model.pose_dim, 1) = f->pose;
  }
  return in;
}

double occupancy_canonical(const MlpParams& sigma_f, const Vec& x, const Eigen::VectorXd& p) {
  const int expected = sigma_f.spec().input_dim;
  if (x.size() + p.size() != expected) {
    throw std::invalid_argument("occupancy_canonical: point+pose has " + std::to_string(x.size() + p.size()) +
                                " entries, net expects " + std::to_string(expected));
  }
  Eigen::VectorXd in(expected);
  in << Eigen::VectorXd(x), p;
  return mlp_forward(sigma_f, in).y(0);
}

double occupancy_canonical(const ModelParams& model, const Vec& x, const Eigen::VectorXd& p) {
  return occupancy_canonical(model.occupancy, x, model.pose_conditioning ? p : Eigen::VectorXd());
}

AggregateResult aggregate_occupancy(std::span<const double> values, const CompositionSettings& settings) {
  AggregateResult out;
  if (values.empty()) return out;
  out.partials.assign(values.size(), 0.0);
  const auto max_it = std::max_element(values.begin(), values.end());
  const double vmax = *max_it;
  if (settings.aggregation == Aggregation::hard_max || values.size() == 1) {
    out.value = vmax;
    out.partials[static_cast<std::size_t>(max_it - values.begin())] = 1.0;
    return out;
  }
  const double k = settings.softmax_scale;
  std::vector<double> s(values.size());
  double total = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) total += s[i] = std::exp(k * (values[i] - vmax));
  for (double& si : s) si /= total;

  if (settings.aggregation == Aggregation::softmax) {
    out.value = vmax + std::log(total / static_cast<double>(values.size())) / k;
    out.value = std::clamp(out.value, *std::min_element(values.begin(), values.end()), vmax);
    out.partials = s;
    return out;
  }
  for (std::size_t i = 0; i < values.size(); ++i) out.value += s[i] * values[i];
  for (std::size_t i = 0; i < values.size(); ++i) {
    out.partials[i] = settings.differentiate_blend_weights ? s[i] * (1.0 + k * (values[i] - out.value)) : s[i];
  }
  return out;
}

DeformedBatch occupancy_deformed_batch(const ModelParams& model, const Batch& queries, FrameRefs frames) {
  if (model.kind != ModelKind::forward_skinning) {
    throw std::invalid_argument("occupancy_deformed: model is not a forward-skinning model");
  }
  if (queries.rows() != model.dim) throw std::invalid_argument("occupancy_deformed: query dimension mismatch");
  DeformedBatch out;
  const Eigen::Index n = queries.cols();
  out.correspondences = find_correspondences_batch(model.skinning, queries, frames, model.solver);
  out.occupancy = Eigen::VectorXd::Zero(n);

  std::vector<Eigen::Index> first_root(static_cast<std::size_t>(n) + 1, 0);
  std::vector<const RootCandidate*> used;
  for (Eigen::Index j = 0; j < n; ++j) {
    first_root[static_cast<std::size_t>(j)] = static_cast<Eigen::Index>(used.size());
    for (const RootCandidate* r : usable_roots(out.correspondences[static_cast<std::size_t>(j)], model)) {
      used.push_back(r);
      out.root_query.push_back(j);
    }
  }
  first_root[static_cast<std::size_t>(n)] = static_cast<Eigen::Index>(used.size());

  const auto roots = static_cast<Eigen::Index>(used.size());
  out.root_points.resize(model.dim, roots);
  std::vector<const BoneTransformSet*> root_frames(used.size());
  for (Eigen::Index r = 0; r < roots; ++r) {
    out.root_points.col(r) = used[static_cast<std::size_t>(r)]->x_star;
    const Eigen::Index q = out.root_query[static_cast<std::size_t>(r)];
    root_frames[static_cast<std::size_t>(r)] = frames.size() == 1 ? frames[0] : frames[static_cast<std::size_t>(q)];
  }
  out.root_partials = Eigen::VectorXd::Zero(roots);
  if (roots == 0) return out;

  out.occupancy_tape = mlp_forward_batch(model.occupancy, occupancy_inputs(model, out.root_points, root_frames));
  const Eigen::RowVectorXd values = out.occupancy_tape.output.row(0);
  for (Eigen::Index j = 0; j < n; ++j) {
    const Eigen::Index begin = first_root[static_cast<std::size_t>(j)];
    const Eigen::Index end = first_root[static_cast<std::size_t>(j) + 1];
    if (begin == end) continue;
    std::vector<double> v(values.data() + begin, values.data() + end);
    const AggregateResult agg = aggregate_occupancy(v, model.composition);
    out.occupancy(j) = agg.value;
    for (Eigen::Index r = begin; r < end; ++r) out.root_partials(r) = agg.partials[static_cast<std::size_t>(r - begin)];
  }
  return out;
}

BackwardDiagnostics occupancy_backward_batch(const ModelParams& model, const DeformedBatch& forward,
                                             FrameRefs frames, const Eigen::VectorXd& upstream,
                                             MlpGrad& grad_occupancy, MlpGrad& grad_skinning) {
  BackwardDiagnostics diag;
  const Eigen::Index roots = forward.root_points.cols();
  diag.roots = static_cast<int>(roots);
  if (upstream.size() != forward.occupancy.size()) throw std::invalid_argument("occupancy_backward: upstream size");
  if (roots == 0) return diag;

  std::vector<const BoneTransformSet*> root_frames(static_cast<std::size_t>(roots));
  Eigen::MatrixXd dy(1, roots);
  for (Eigen::Index r = 0; r < roots; ++r) {
    const Eigen::Index q = forward.root_query[static_cast<std::size_t>(r)];
    root_frames[static_cast<std::size_t>(r)] = frames.size() == 1 ? frames[0] : frames[static_cast<std::size_t>(q)];
    dy(0, r) = upstream(q) * forward.root_partials(r);
  }
  // dL/dsigma_f and dL/dx* through the occupancy net.
  const Eigen::MatrixXd dinput = mlp_backward_batch(model.occupancy, forward.occupancy_tape, dy, &grad_occupancy);

  // Implicit differentiation of d(x*) = x': solve (dd/dx*)^T y = -dL/dx*, then
  // push y through dd/dsigma_w.
  const LbsBatch lbs = lbs_deform_batch(model.skinning, forward.root_points, root_frames);
  const std::vector<Mat> jac = lbs_spatial_jacobian_batch(model.skinning, lbs, forward.root_points, root_frames);
  Batch y = Batch::Zero(model.dim, roots);
  const double lambda = model.solver.jacobian_damping;
  for (Eigen::Index r = 0; r < roots; ++r) {
    const Vec g = dinput.col(r).head(model.dim);
    if (g.isZero(0.0)) continue;
    const Mat damped = jac[static_cast<std::size_t>(r)] + lambda * Mat::Identity(model.dim, model.dim);
    const Eigen::JacobiSVD<Mat> svd(damped);
    const auto& sv = svd.singularValues();
    const double smin = sv(sv.size() - 1);
    if (!(smin > 0.0) || sv(0) / smin > kMaxCondition) {
      ++diag.dropped_roots;
      continue;
    }
    y.col(r) = damped.transpose().partialPivLu().solve(Eigen::VectorXd(-g));
  }
  lbs_param_gradient_batch(model.skinning, lbs, forward.root_points, root_frames, y, grad_skinning);
  return diag;
}

DeformedOccupancy occupancy_deformed(const ModelParams& model, const Vec& x_query, const Eigen::VectorXd& p,
                                     const BoneTransformSet& bones) {
  const BoneTransformSet posed = with_pose(bones, p);
  const BoneTransformSet* frames[] = {&posed};
  DeformedBatch batch = occupancy_deformed_batch(model, Batch(x_query), frames);
  return {batch.occupancy(0), std::move(batch.correspondences.front())};
}

OccupancyGradients occupancy_backward(const ModelParams& model, const Vec& x_query, const Eigen::VectorXd& p,
                                      const BoneTransformSet& bones, double upstream) {
  const BoneTransformSet posed = with_pose(bones, p);
  const BoneTransformSet* frames[] = {&posed};
  const DeformedBatch forward = occupancy_deformed_batch(model, Batch(x_query), frames);
  OccupancyGradients out{MlpGrad(model.occupancy), MlpGrad(model.skinning), {}};
  out.diagnostics = occupancy_backward_batch(model, forward, frames, Eigen::VectorXd::Constant(1, upstream),
                                             out.occupancy, out.skinning);
  return out;
}

}  // namespace snarf
