#include "snarf/transform.hpp"

#include <cmath>
#include <stdexcept>

#include <Eigen/Geometry>
#include <Eigen/LU>

namespace snarf {

RigidTransform RigidTransform::identity(int dim) {
  return {Mat::Identity(dim, dim), Vec::Zero(dim)};
}

RigidTransform RigidTransform::translate(const Vec& offset) {
  return {Mat::Identity(offset.size(), offset.size()), offset};
}

RigidTransform RigidTransform::about_pivot(const Mat& rotation, const Vec& pivot) {
  return {rotation, pivot - rotation * pivot};
}

RigidTransform RigidTransform::from_homogeneous(const Eigen::MatrixXd& h) {
  const Eigen::Index d = h.rows() - 1;
  if (d < 1 || d > kMaxDim || h.cols() != d + 1) throw std::invalid_argument("homogeneous matrix has bad shape");
  RigidTransform t{h.topLeftCorner(d, d), h.topRightCorner(d, 1)};
  if (!t.is_rigid(1e-9)) throw std::invalid_argument("homogeneous matrix is not rigid");
  return t;
}

RigidTransform RigidTransform::inverse() const {
  Mat rt = rotation.transpose();
  Vec t = -(rt * translation);
  return {std::move(rt), std::move(t)};
}

RigidTransform RigidTransform::compose(const RigidTransform& inner) const {
  return {rotation * inner.rotation, rotation * inner.translation + translation};
}

Eigen::MatrixXd RigidTransform::homogeneous() const {
  const int d = dim();
  Eigen::MatrixXd h = Eigen::MatrixXd::Identity(d + 1, d + 1);
  h.topLeftCorner(d, d) = rotation;
  h.topRightCorner(d, 1) = translation;
  return h;
}

bool RigidTransform::is_rigid(double tolerance) const {
  const int d = dim();
  if (rotation.rows() != d || rotation.cols() != d) return false;
  if (!rotation.allFinite() || !translation.allFinite()) return false;
  const double orth = (rotation.transpose() * rotation - Mat::Identity(d, d)).cwiseAbs().maxCoeff();
  return orth <= tolerance && std::abs(rotation.determinant() - 1.0) <= tolerance;
}

Mat rotation_2d(double angle) {
  Mat r(2, 2);
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  r << c, -s, s, c;
  return r;
}

Mat rotation_axis_angle(const Vec& axis, double angle) {
  if (axis.size() != 3) throw std::invalid_argument("rotation axis must be 3-dimensional");
  const Eigen::Vector3d a = Eigen::Vector3d(axis(0), axis(1), axis(2)).normalized();
  return Mat(Eigen::AngleAxisd(angle, a).toRotationMatrix());
}

BoneTransformSet BoneTransformSet::identity(int bones, int dim, int pose_dim) {
  BoneTransformSet set;
  set.transforms.assign(bones, RigidTransform::identity(dim));
  set.pose = Eigen::VectorXd::Zero(pose_dim);
  return set;
}

bool BoneTransformSet::is_identity() const {
  for (const auto& t : transforms) {
    if (t.rotation != Mat::Identity(t.dim(), t.dim()) || t.translation != Vec::Zero(t.dim())) return false;
  }
  return true;
}

void BoneTransformSet::validate() const {
  if (transforms.empty()) throw std::invalid_argument("bone transform set is empty");
  const int d = dim();
  if (d < 1 || d > kMaxDim) throw std::invalid_argument("bone transforms must be 1-, 2- or 3-dimensional");
  for (const auto& t : transforms) {
    if (t.dim() != d) throw std::invalid_argument("bone transforms have mixed dimensions");
    if (!t.is_rigid()) throw std::invalid_argument("bone transform is not rigid");
  }
  if (!pose.allFinite()) throw std::invalid_argument("pose vector is not finite");
}

}  // namespace snarf
