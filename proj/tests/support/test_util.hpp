#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "snarf/model.hpp"
#include "snarf/nn.hpp"
#include "snarf/transform.hpp"

namespace snarf::testing {

inline double rel_err(double a, double b, double floor = 1e-8) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

inline Vec random_vec(std::mt19937_64& rng, int dim, double scale = 1.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  Vec v(dim);
  for (int i = 0; i < dim; ++i) v(i) = u(rng);
  return v;
}

inline RigidTransform random_rigid(std::mt19937_64& rng, int dim) {
  std::uniform_real_distribution<double> angle(-M_PI, M_PI);
  RigidTransform t = RigidTransform::identity(dim);
  if (dim == 2) {
    t.rotation = rotation_2d(angle(rng));
  } else if (dim == 3) {
    t.rotation = rotation_axis_angle(random_vec(rng, 3).normalized(), angle(rng));
  }
  t.translation = random_vec(rng, dim);
  return t;
}

inline BoneTransformSet random_frame(std::mt19937_64& rng, int bones, int dim) {
  BoneTransformSet set = BoneTransformSet::identity(bones, dim);
  for (auto& t : set.transforms) t = random_rigid(rng, dim);
  return set;
}

// Softmax net that puts (numerically) all weight on bone `hot`.
inline MlpParams one_hot_skinning(int input_dim, int bones, int hot) {
  MlpSpec spec{input_dim, bones, {4}, HiddenActivation::softplus, OutputActivation::softmax};
  MlpParams p(spec);
  p.bias(1)(hot) = 80.0;
  return p;
}

// Two-bone weight field w = (1 - s, s) with s = sigmoid(a * x_0).
inline MlpParams sigmoid_skinning(int input_dim, double a) {
  MlpSpec spec{input_dim, 2, {2}, HiddenActivation::relu, OutputActivation::softmax};
  MlpParams p(spec);
  p.weight(0)(0, 0) = 1.0;
  p.weight(0)(1, 0) = -1.0;
  p.weight(1)(1, 0) = a;
  p.weight(1)(1, 1) = -a;
  return p;
}

// Occupancy net whose output is the constant c.
inline MlpParams constant_occupancy(int input_dim, double c) {
  MlpSpec spec{input_dim, 1, {4}, HiddenActivation::softplus, OutputActivation::sigmoid};
  MlpParams p(spec);
  p.bias(1)(0) = std::log(c / (1.0 - c));
  return p;
}

inline ModelParams small_model(int dim, int bones, int width, std::uint64_t seed,
                               ModelKind kind = ModelKind::forward_skinning) {
  NetShape shape;
  shape.hidden_widths = {width, width};
  return ModelParams::create(kind, dim, bones, bones - 1, false, shape, shape, seed);
}

}  // namespace snarf::testing
