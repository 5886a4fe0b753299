#include "snarf/model.hpp"

#include <cmath>
#include <stdexcept>

#include "detail/json_convert.hpp"

namespace snarf {

void CompositionSettings::validate() const {
  if (!std::isfinite(softmax_scale) || softmax_scale <= 0.0) {
    throw std::invalid_argument("composition: softmax_scale must be finite and > 0");
  }
  if (!(fallback_residual_factor >= 1.0)) {
    throw std::invalid_argument("composition: fallback_residual_factor must be >= 1");
  }
}

ModelParams ModelParams::create(ModelKind kind, int dim, int bones, int pose_dim, bool pose_conditioning,
                                const NetShape& occupancy_shape, const NetShape& skinning_shape,
                                std::uint64_t seed) {
  ModelParams m;
  m.kind = kind;
  m.dim = dim;
  m.bones = bones;
  m.pose_dim = pose_dim;
  m.pose_conditioning = pose_conditioning;

  MlpSpec occ;
  occ.input_dim = m.occupancy_input_dim();
  occ.output_dim = 1;
  occ.hidden_widths = occupancy_shape.hidden_widths;
  occ.hidden_activation = occupancy_shape.activation;
  occ.softplus_beta = occupancy_shape.softplus_beta;
  occ.output_activation = OutputActivation::sigmoid;

  MlpSpec skin;
  skin.input_dim = m.skinning_input_dim();
  skin.output_dim = bones;
  skin.hidden_widths = skinning_shape.hidden_widths;
  skin.hidden_activation = skinning_shape.activation;
  skin.softplus_beta = skinning_shape.softplus_beta;
  skin.output_activation = OutputActivation::softmax;

  m.occupancy = MlpParams::glorot_uniform(occ, seed);
  m.skinning = MlpParams::glorot_uniform(skin, seed ^ 0x9e3779b97f4a7c15ull);
  m.validate();
  return m;
}

void ModelParams::validate() const {
  if (dim < 1 || dim > kMaxDim) throw std::invalid_argument("model: dim must be 1, 2 or 3");
  if (bones < 1) throw std::invalid_argument("model: need at least one bone");
  if (pose_dim < 0) throw std::invalid_argument("model: negative pose dimension");
  const MlpSpec& f = occupancy.spec();
  const MlpSpec& w = skinning.spec();
  if (f.input_dim != occupancy_input_dim() || f.output_dim != 1 || f.output_activation != OutputActivation::sigmoid) {
    throw std::invalid_argument("model: occupancy net must map " + std::to_string(occupancy_input_dim()) +
                                " inputs to one sigmoid output");
  }
  if (w.input_dim != skinning_input_dim() || w.output_dim != bones ||
      w.output_activation != OutputActivation::softmax) {
    throw std::invalid_argument("model: skinning net must map " + std::to_string(skinning_input_dim()) +
                                " inputs to " + std::to_string(bones) + " softmax outputs");
  }
  if (!occupancy.all_finite() || !skinning.all_finite()) throw std::invalid_argument("model: non-finite parameters");
  composition.validate();
  solver.validate();
}

bool ModelParams::operator==(const ModelParams& o) const {
  return kind == o.kind && dim == o.dim && bones == o.bones && pose_dim == o.pose_dim &&
         pose_conditioning == o.pose_conditioning && occupancy == o.occupancy && skinning == o.skinning &&
         detail::to_json(composition) == detail::to_json(o.composition) &&
         detail::to_json(solver) == detail::to_json(o.solver);
}

Checkpoint to_checkpoint(const ModelParams& model) {
  nlohmann::json meta;
  meta["dim"] = model.dim;
  meta["bones"] = model.bones;
  meta["pose_dim"] = model.pose_dim;
  meta["pose_conditioning"] = model.pose_conditioning;
  meta["composition"] = detail::to_json(model.composition);
  meta["solver"] = detail::to_json(model.solver);
  return {model.kind, model.occupancy, model.skinning, meta.dump()};
}

ModelParams from_checkpoint(const Checkpoint& checkpoint) {
  ModelParams m;
  m.kind = checkpoint.kind;
  try {
    const nlohmann::json meta = nlohmann::json::parse(checkpoint.metadata);
    m.dim = meta.at("dim").get<int>();
    m.bones = meta.at("bones").get<int>();
    m.pose_dim = meta.at("pose_dim").get<int>();
    m.pose_conditioning = meta.at("pose_conditioning").get<bool>();
    m.composition = detail::composition_from_json(meta.at("composition"));
    m.solver = detail::solver_from_json(meta.at("solver"));
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(std::string("checkpoint metadata: ") + e.what());
  }
  m.occupancy = checkpoint.occupancy;
  m.skinning = checkpoint.skinning;
  m.validate();
  return m;
}

}  // namespace snarf
