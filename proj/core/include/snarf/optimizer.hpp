#pragma once

#include <span>
#include <vector>

namespace snarf {

struct AdamSettings {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Adam with bias correction over a flat parameter vector.
class Adam {
 public:
  Adam(std::size_t size, AdamSettings settings);

  void step(std::span<double> params, std::span<const double> grad);
  long steps() const { return t_; }

 private:
  AdamSettings s_;
  std::vector<double> m_;
  std::vector<double> v_;
  long t_ = 0;
};

}  // namespace snarf
