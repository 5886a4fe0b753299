#pragma once

#include <Eigen/Core>

namespace snarf {

// Small spatial vectors and matrices. Dimension is a runtime value in {1, 2, 3};
// the fixed upper bound keeps them off the heap.
using Vec = Eigen::Matrix<double, Eigen::Dynamic, 1, Eigen::ColMajor, 3, 1>;
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor, 3, 3>;

// Column-per-sample batches.
using Batch = Eigen::MatrixXd;

constexpr int kMaxDim = 3;

}  // namespace snarf
