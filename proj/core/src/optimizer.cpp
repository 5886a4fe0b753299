#include "snarf/optimizer.hpp"

#include <cmath>
#include <stdexcept>

namespace snarf {

Adam::Adam(std::size_t size, AdamSettings settings) : s_(settings), m_(size, 0.0), v_(size, 0.0) {}

void Adam::step(std::span<double> params, std::span<const double> grad) {
  if (params.size() != m_.size() || grad.size() != m_.size()) throw std::invalid_argument("Adam: size mismatch");
  ++t_;
  const double c1 = 1.0 - std::pow(s_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(s_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    m_[i] = s_.beta1 * m_[i] + (1.0 - s_.beta1) * grad[i];
    v_[i] = s_.beta2 * v_[i] + (1.0 - s_.beta2) * grad[i] * grad[i];
    params[i] -= s_.learning_rate * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + s_.eps);
  }
}

}  // namespace snarf
