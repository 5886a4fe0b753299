#include "snarf/nn.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>
#include <string>

namespace snarf {

namespace {

void require_finite(const Eigen::MatrixXd& x, const char* what) {
  if (!x.allFinite()) {
    throw std::invalid_argument(std::string(what) + ": non-finite input");
  }
}

// beta-scaled softplus and its derivative, evaluated without overflow.
Eigen::MatrixXd softplus(const Eigen::MatrixXd& z, double beta) {
  const Eigen::ArrayXXd bz = beta * z.array();
  return ((bz.max(0.0) + (-bz.abs()).exp().log1p()) / beta).matrix();
}

Eigen::ArrayXXd softplus_derivative(const Eigen::MatrixXd& z, double beta) {
  return 1.0 / (1.0 + (-beta * z.array()).exp());
}

Eigen::MatrixXd hidden_activation(const MlpSpec& spec, const Eigen::MatrixXd& z) {
  if (spec.hidden_activation == HiddenActivation::relu) return z.cwiseMax(0.0);
  return softplus(z, spec.softplus_beta);
}

Eigen::ArrayXXd hidden_derivative(const MlpSpec& spec, const Eigen::MatrixXd& z) {
  if (spec.hidden_activation == HiddenActivation::relu) {
    return (z.array() > 0.0).cast<double>();
  }
  return softplus_derivative(z, spec.softplus_beta);
}

Eigen::MatrixXd output_activation(const MlpSpec& spec, const Eigen::MatrixXd& z) {
  switch (spec.output_activation) {
    case OutputActivation::sigmoid:
      return (1.0 / (1.0 + (-z.array()).exp())).matrix();
    case OutputActivation::softmax: {
      const Eigen::RowVectorXd shift = z.colwise().maxCoeff();
      Eigen::MatrixXd e = (z.rowwise() - shift).array().exp().matrix();
      const Eigen::RowVectorXd total = e.colwise().sum();
      for (Eigen::Index j = 0; j < e.cols(); ++j) e.col(j) /= total(j);
      return e;
    }
    case OutputActivation::none:
      break;
  }
  return z;
}

// Maps a derivative wrt the activated output to one wrt the pre-activation.
// Applies equally to cotangents (backward) and tangents (forward mode): both
// Jacobians are symmetric.
Eigen::MatrixXd output_pullback(const MlpSpec& spec, const Eigen::MatrixXd& y, const Eigen::MatrixXd& dy) {
  switch (spec.output_activation) {
    case OutputActivation::sigmoid:
      return (dy.array() * y.array() * (1.0 - y.array())).matrix();
    case OutputActivation::softmax: {
      const Eigen::RowVectorXd inner = (y.array() * dy.array()).colwise().sum();
      return (y.array() * (dy.rowwise() - inner).array()).matrix();
    }
    case OutputActivation::none:
      break;
  }
  return dy;
}

void check_tape(const MlpParams& params, const MlpTape& tape) {
  const MlpSpec& spec = params.spec();
  const auto layers = static_cast<std::size_t>(spec.layer_count());
  if (tape.inputs.size() != layers || tape.pre.size() != layers) {
    throw std::invalid_argument("mlp tape does not match parameter layout (layer count)");
  }
  const Eigen::Index n = tape.output.cols();
  for (int l = 0; l < spec.layer_count(); ++l) {
    if (tape.inputs[l].rows() != spec.layer_input(l) || tape.pre[l].rows() != spec.layer_output(l) ||
        tape.inputs[l].cols() != n || tape.pre[l].cols() != n) {
      throw std::invalid_argument("mlp tape does not match parameter layout (layer " + std::to_string(l) +
                                  ")");
    }
  }
  if (tape.output.rows() != spec.output_dim) {
    throw std::invalid_argument("mlp tape does not match parameter layout (output)");
  }
}

}  // namespace

void MlpSpec::validate() const {
  if (input_dim < 1 || output_dim < 1) throw std::invalid_argument("MlpSpec: dims must be >= 1");
  if (hidden_widths.empty()) throw std::invalid_argument("MlpSpec: at least one hidden layer required");
  for (int w : hidden_widths) {
    if (w < 1) throw std::invalid_argument("MlpSpec: hidden widths must be >= 1");
  }
  if (!std::isfinite(softplus_beta) || softplus_beta <= 0.0) {
    throw std::invalid_argument("MlpSpec: softplus_beta must be finite and positive");
  }
}

int MlpSpec::layer_input(int layer) const { return layer == 0 ? input_dim : hidden_widths[layer - 1]; }

int MlpSpec::layer_output(int layer) const {
  return layer == static_cast<int>(hidden_widths.size()) ? output_dim : hidden_widths[layer];
}

std::size_t MlpSpec::parameter_count() const {
  std::size_t total = 0;
  for (int l = 0; l < layer_count(); ++l) {
    total += static_cast<std::size_t>(layer_output(l)) * (layer_input(l) + 1);
  }
  return total;
}

ParamBuffer::ParamBuffer(MlpSpec spec) : spec_(std::move(spec)) {
  spec_.validate();
  std::size_t offset = 0;
  for (int l = 0; l < spec_.layer_count(); ++l) {
    offsets_.push_back(offset);
    offset += static_cast<std::size_t>(spec_.layer_output(l)) * (spec_.layer_input(l) + 1);
  }
  data_.assign(offset, 0.0);
}

RowMatrixMap ParamBuffer::weight(int layer) {
  return {data_.data() + offsets_[layer], spec_.layer_output(layer), spec_.layer_input(layer)};
}

ConstRowMatrixMap ParamBuffer::weight(int layer) const {
  return {data_.data() + offsets_[layer], spec_.layer_output(layer), spec_.layer_input(layer)};
}

VectorMap ParamBuffer::bias(int layer) {
  const std::size_t rows = spec_.layer_output(layer);
  return {data_.data() + offsets_[layer] + rows * spec_.layer_input(layer), static_cast<Eigen::Index>(rows)};
}

ConstVectorMap ParamBuffer::bias(int layer) const {
  const std::size_t rows = spec_.layer_output(layer);
  return {data_.data() + offsets_[layer] + rows * spec_.layer_input(layer), static_cast<Eigen::Index>(rows)};
}

void ParamBuffer::set_zero() { std::fill(data_.begin(), data_.end(), 0.0); }

bool ParamBuffer::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

MlpParams MlpParams::glorot_uniform(MlpSpec spec, std::uint64_t seed) {
  MlpParams params(std::move(spec));
  std::mt19937_64 rng(seed);
  for (int l = 0; l < params.spec().layer_count(); ++l) {
    const double limit =
        std::sqrt(6.0 / (params.spec().layer_input(l) + params.spec().layer_output(l)));
    std::uniform_real_distribution<double> uniform(-limit, limit);
    auto w = params.weight(l);
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = uniform(rng);
    }
  }
  return params;
}

MlpGrad& MlpGrad::operator+=(const MlpGrad& other) {
  if (!same_layout(other)) throw std::invalid_argument("MlpGrad: layout mismatch");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
  return *this;
}

MlpGrad& MlpGrad::operator*=(double scale) {
  for (double& v : data_) v *= scale;
  return *this;
}

double MlpGrad::max_abs() const {
  double m = 0.0;
  for (double v : data_) m = std::max(m, std::abs(v));
  return m;
}

MlpTape mlp_forward_batch(const MlpParams& params, const Eigen::MatrixXd& x) {
  const MlpSpec& spec = params.spec();
  if (x.rows() != spec.input_dim) {
    throw std::invalid_argument("mlp_forward: input has " + std::to_string(x.rows()) + " rows, expected " +
                                std::to_string(spec.input_dim));
  }
  require_finite(x, "mlp_forward");
  MlpTape tape;
  const int layers = spec.layer_count();
  tape.inputs.reserve(layers);
  tape.pre.reserve(layers);
  tape.inputs.push_back(x);
  for (int l = 0; l < layers; ++l) {
    Eigen::MatrixXd z = params.weight(l) * tape.inputs.back();
    z.colwise() += params.bias(l);
    if (l + 1 < layers) {
      tape.inputs.push_back(hidden_activation(spec, z));
    } else {
      tape.output = output_activation(spec, z);
    }
    tape.pre.push_back(std::move(z));
  }
  return tape;
}

Eigen::MatrixXd mlp_backward_batch(const MlpParams& params, const MlpTape& tape, const Eigen::MatrixXd& dy,
                                   MlpGrad* grad) {
  check_tape(params, tape);
  const MlpSpec& spec = params.spec();
  if (dy.rows() != spec.output_dim || dy.cols() != tape.batch_size()) {
    throw std::invalid_argument("mlp_backward: upstream shape mismatch");
  }
  if (grad != nullptr && grad->spec() != spec) throw std::invalid_argument("mlp_backward: gradient layout mismatch");

  Eigen::MatrixXd delta = output_pullback(spec, tape.output, dy);
  for (int l = spec.layer_count() - 1; l >= 0; --l) {
    if (grad != nullptr) {
      grad->weight(l).noalias() += delta * tape.inputs[l].transpose();
      grad->bias(l) += delta.rowwise().sum();
    }
    Eigen::MatrixXd upstream = params.weight(l).transpose() * delta;
    if (l == 0) return upstream;
    delta = (upstream.array() * hidden_derivative(spec, tape.pre[l - 1])).matrix();
  }
  return delta;  // unreachable: layer_count() >= 2
}

std::vector<Eigen::MatrixXd> mlp_input_jacobian_batch(const MlpParams& params, const MlpTape& tape) {
  check_tape(params, tape);
  const MlpSpec& spec = params.spec();
  const Eigen::Index n = tape.batch_size();
  const int layers = spec.layer_count();

  std::vector<Eigen::ArrayXXd> derivatives;
  derivatives.reserve(layers - 1);
  for (int l = 0; l + 1 < layers; ++l) derivatives.push_back(hidden_derivative(spec, tape.pre[l]));

  std::vector<Eigen::MatrixXd> jac;
  jac.reserve(spec.input_dim);
  for (int k = 0; k < spec.input_dim; ++k) {
    Eigen::MatrixXd tangent = params.weight(0).col(k).replicate(1, n);
    for (int l = 1; l < layers; ++l) {
      tangent = params.weight(l) * (tangent.array() * derivatives[l - 1]).matrix();
    }
    jac.push_back(output_pullback(spec, tape.output, tangent));
  }
  return jac;
}

MlpForwardResult mlp_forward(const MlpParams& params, const Eigen::VectorXd& x) {
  MlpTape tape = mlp_forward_batch(params, x);
  Eigen::VectorXd y = tape.output.col(0);
  return {std::move(y), std::move(tape)};
}

MlpBackwardResult mlp_backward(const MlpParams& params, const MlpTape& tape, const Eigen::VectorXd& dy) {
  MlpBackwardResult result{Eigen::VectorXd(), MlpGrad(params)};
  result.dx = mlp_backward_batch(params, tape, dy, &result.dparams).col(0);
  return result;
}

Eigen::MatrixXd mlp_input_jacobian(const MlpParams& params, const Eigen::VectorXd& x) {
  const MlpTape tape = mlp_forward_batch(params, x);
  const auto columns = mlp_input_jacobian_batch(params, tape);
  Eigen::MatrixXd jac(params.spec().output_dim, params.spec().input_dim);
  for (int k = 0; k < params.spec().input_dim; ++k) jac.col(k) = columns[k].col(0);
  return jac;
}

}  // namespace snarf
