#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace snarf {

enum class HiddenActivation : std::uint32_t { softplus = 0, relu = 1 };
enum class OutputActivation : std::uint32_t { sigmoid = 0, softmax = 1, none = 2 };

struct MlpSpec {
  int input_dim = 1;
  int output_dim = 1;
  std::vector<int> hidden_widths{};
  HiddenActivation hidden_activation = HiddenActivation::softplus;
  OutputActivation output_activation = OutputActivation::none;
  // softplus(z) = log(1 + exp(beta z)) / beta; beta = 1 is the standard softplus.
  double softplus_beta = 1.0;

  /// Throws std::invalid_argument unless all dims >= 1, at least one hidden layer
  /// exists, and beta is finite and positive.
  void validate() const;

  int layer_count() const { return static_cast<int>(hidden_widths.size()) + 1; }
  int layer_input(int layer) const;
  int layer_output(int layer) const;
  std::size_t parameter_count() const;

  bool operator==(const MlpSpec&) const = default;
};

using RowMatrixMap = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
using ConstRowMatrixMap =
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
using VectorMap = Eigen::Map<Eigen::VectorXd>;
using ConstVectorMap = Eigen::Map<const Eigen::VectorXd>;

// Flat parameter storage shared by parameters and gradients. Layer l occupies
// a contiguous block: its weight matrix (row-major, out x in) followed by its bias.
class ParamBuffer {
 public:
  ParamBuffer() = default;
  explicit ParamBuffer(MlpSpec spec);

  const MlpSpec& spec() const { return spec_; }
  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }
  std::size_t size() const { return data_.size(); }

  RowMatrixMap weight(int layer);
  ConstRowMatrixMap weight(int layer) const;
  VectorMap bias(int layer);
  ConstVectorMap bias(int layer) const;

  void set_zero();
  bool all_finite() const;
  bool same_layout(const ParamBuffer& other) const { return spec_ == other.spec_; }

 protected:
  MlpSpec spec_{};
  std::vector<double> data_{};
  std::vector<std::size_t> offsets_{};
};

class MlpParams : public ParamBuffer {
 public:
  MlpParams() = default;
  /// Zero-initialized parameters.
  explicit MlpParams(MlpSpec spec) : ParamBuffer(std::move(spec)) {}

  /// Weights uniform in +-sqrt(6 / (fan_in + fan_out)), biases zero.
  static MlpParams glorot_uniform(MlpSpec spec, std::uint64_t seed);

  bool operator==(const MlpParams& other) const {
    return spec_ == other.spec_ && data_ == other.data_;
  }
};

class MlpGrad : public ParamBuffer {
 public:
  MlpGrad() = default;
  explicit MlpGrad(const MlpParams& params) : ParamBuffer(params.spec()) {}

  MlpGrad& operator+=(const MlpGrad& other);
  MlpGrad& operator*=(double scale);
  double max_abs() const;
};

// Activations recorded by a batched forward pass (one column per sample).
struct MlpTape {
  std::vector<Eigen::MatrixXd> inputs;  // inputs[l] feeds layer l; inputs[0] is x
  std::vector<Eigen::MatrixXd> pre;     // pre-activations of every layer
  Eigen::MatrixXd output;

  Eigen::Index batch_size() const { return output.cols(); }
};

MlpTape mlp_forward_batch(const MlpParams& params, const Eigen::MatrixXd& x);

/// Vector-Jacobian product for every column of dy. Returns dx; parameter
/// gradients summed over the batch are added to *grad when it is non-null.
Eigen::MatrixXd mlp_backward_batch(const MlpParams& params, const MlpTape& tape,
                                   const Eigen::MatrixXd& dy, MlpGrad* grad);

/// Forward-mode input Jacobians: element k is the (output_dim x batch) matrix
/// of derivatives with respect to input coordinate k.
std::vector<Eigen::MatrixXd> mlp_input_jacobian_batch(const MlpParams& params, const MlpTape& tape);

struct MlpForwardResult {
  Eigen::VectorXd y;
  MlpTape tape;
};

struct MlpBackwardResult {
  Eigen::VectorXd dx;
  MlpGrad dparams;
};

MlpForwardResult mlp_forward(const MlpParams& params, const Eigen::VectorXd& x);
MlpBackwardResult mlp_backward(const MlpParams& params, const MlpTape& tape, const Eigen::VectorXd& dy);
/// output_dim x input_dim.
Eigen::MatrixXd mlp_input_jacobian(const MlpParams& params, const Eigen::VectorXd& x);

}  // namespace snarf
