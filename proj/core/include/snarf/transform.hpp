#pragma once

#include <vector>

#include <Eigen/Core>

#include "snarf/types.hpp"

namespace snarf {

// x -> rotation * x + translation.
struct RigidTransform {
  Mat rotation;
  Vec translation;

  static RigidTransform identity(int dim);
  static RigidTransform translate(const Vec& offset);
  /// Rotation by `rotation` about a fixed pivot: x -> R (x - pivot) + pivot.
  static RigidTransform about_pivot(const Mat& rotation, const Vec& pivot);
  static RigidTransform from_homogeneous(const Eigen::MatrixXd& h);

  int dim() const { return static_cast<int>(translation.size()); }

  Vec apply(const Vec& x) const { return rotation * x + translation; }
  Vec apply_inverse(const Vec& x) const { return rotation.transpose() * (x - translation); }
  RigidTransform inverse() const;
  /// (*this) after `inner`.
  RigidTransform compose(const RigidTransform& inner) const;
  Eigen::MatrixXd homogeneous() const;

  /// Orthonormal rotation with determinant +1, within `tolerance`.
  bool is_rigid(double tolerance = 1e-10) const;
};

Mat rotation_2d(double angle);
Mat rotation_axis_angle(const Vec& axis, double angle);

struct BoneTransformSet {
  std::vector<RigidTransform> transforms;
  Eigen::VectorXd pose;

  static BoneTransformSet identity(int bones, int dim, int pose_dim = 0);

  int bone_count() const { return static_cast<int>(transforms.size()); }
  int dim() const { return transforms.empty() ? 0 : transforms.front().dim(); }
  bool is_identity() const;

  /// Throws std::invalid_argument if empty, of mixed dimension, or not rigid.
  void validate() const;
};

}  // namespace snarf
