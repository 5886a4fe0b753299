#pragma once

#include <cstdint>

#include "snarf/checkpoint.hpp"
#include "snarf/nn.hpp"
#include "snarf/rootfind.hpp"

namespace snarf {

enum class Aggregation {
  hard_max,
  // Smooth maximum: log(mean(exp(k o_i))) / k. Lies in [min, max], is
  // increasing in every o_i and tends to the hard max as k grows.
  softmax,
  // sum_i softmax(k o)_i * o_i; bounded but not monotone in the smaller values.
  weighted_softmax,
};

struct CompositionSettings {
  Aggregation aggregation = Aggregation::softmax;
  double softmax_scale = 20.0;
  // weighted_softmax only: include d(blend weights)/d(o) in gradients.
  bool differentiate_blend_weights = true;
  // With no converged root, the best candidate still counts if its residual is
  // within this multiple of epsilon; otherwise the query is treated as empty.
  double fallback_residual_factor = 10.0;

  void validate() const;
};

// Network sizes used to build a model. Input/output dims are filled in from
// the model dimensions.
struct NetShape {
  std::vector<int> hidden_widths{128, 128, 128, 128};
  HiddenActivation activation = HiddenActivation::softplus;
  double softplus_beta = 1.0;
};

// Trainable state of either the forward-skinning model or the backward-LBS
// baseline. The baseline's skinning net reads (deformed point, pose).
struct ModelParams {
  ModelKind kind = ModelKind::forward_skinning;
  int dim = 2;
  int bones = 2;
  int pose_dim = 0;
  bool pose_conditioning = false;  // occupancy net also reads the pose
  MlpParams occupancy;
  MlpParams skinning;
  CompositionSettings composition{};
  SolverSettings solver{};

  static ModelParams create(ModelKind kind, int dim, int bones, int pose_dim, bool pose_conditioning,
                            const NetShape& occupancy_shape, const NetShape& skinning_shape, std::uint64_t seed);

  int occupancy_input_dim() const { return dim + (pose_conditioning ? pose_dim : 0); }
  int skinning_input_dim() const { return dim + (kind == ModelKind::backward_lbs ? pose_dim : 0); }

  void validate() const;
  bool operator==(const ModelParams& other) const;
};

Checkpoint to_checkpoint(const ModelParams& model);
ModelParams from_checkpoint(const Checkpoint& checkpoint);

}  // namespace snarf
