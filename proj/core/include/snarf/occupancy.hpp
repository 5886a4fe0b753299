#pragma once

#include <span>
#include <vector>

#include "snarf/model.hpp"
#include "snarf/rootfind.hpp"
#include "snarf/skeleton.hpp"

namespace snarf {

/// Sigmoid occupancy of a canonical point. `p` may be empty when the model has
/// no pose conditioning.
double occupancy_canonical(const MlpParams& sigma_f, const Vec& x, const Eigen::VectorXd& p);
double occupancy_canonical(const ModelParams& model, const Vec& x, const Eigen::VectorXd& p);

/// Stacks points and (optionally) per-column poses into occupancy-net inputs.
Batch occupancy_inputs(const ModelParams& model, const Batch& x, FrameRefs frames);

struct AggregateResult {
  double value = 0.0;
  std::vector<double> partials;  // d value / d values[i]
};

/// Union of per-root occupancies; empty input yields 0.
AggregateResult aggregate_occupancy(std::span<const double> values, const CompositionSettings& settings);

struct DeformedOccupancy {
  double occupancy = 0.0;
  CorrespondenceSet correspondences;
};

DeformedOccupancy occupancy_deformed(const ModelParams& model, const Vec& x_query, const Eigen::VectorXd& p,
                                     const BoneTransformSet& bones);

struct BackwardDiagnostics {
  int roots = 0;
  int dropped_roots = 0;  // ill-conditioned dd/dx; no skinning-net contribution

  BackwardDiagnostics& operator+=(const BackwardDiagnostics& o) {
    roots += o.roots;
    dropped_roots += o.dropped_roots;
    return *this;
  }
};

struct OccupancyGradients {
  MlpGrad occupancy;
  MlpGrad skinning;
  BackwardDiagnostics diagnostics;
};

/// Gradients of upstream * o(x') wrt both nets. Root positions are
/// differentiated implicitly: dx*/dsigma_w = -(dd/dx*)^-1 dd/dsigma_w.
OccupancyGradients occupancy_backward(const ModelParams& model, const Vec& x_query, const Eigen::VectorXd& p,
                                      const BoneTransformSet& bones, double upstream);

// Batched evaluation. Roots of all queries are gathered into one occupancy-net
// pass; the tape is kept for the backward pass.
struct DeformedBatch {
  Eigen::VectorXd occupancy;
  std::vector<CorrespondenceSet> correspondences;
  std::vector<Eigen::Index> root_query;  // owning query of each used root
  Batch root_points;
  Eigen::VectorXd root_partials;  // d o(query) / d f(root)
  MlpTape occupancy_tape;
};

DeformedBatch occupancy_deformed_batch(const ModelParams& model, const Batch& queries, FrameRefs frames);

BackwardDiagnostics occupancy_backward_batch(const ModelParams& model, const DeformedBatch& forward,
                                             FrameRefs frames, const Eigen::VectorXd& upstream,
                                             MlpGrad& grad_occupancy, MlpGrad& grad_skinning);

}  // namespace snarf
