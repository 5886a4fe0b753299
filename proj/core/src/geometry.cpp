#include "snarf/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace snarf {

Aabb Aabb::inflated(double factor) const {
  const Vec c = center();
  const Vec half = 0.5 * factor * (hi - lo);
  return {c - half, c + half};
}

bool Aabb::contains(const Vec& x) const {
  return (x.array() >= lo.array()).all() && (x.array() <= hi.array()).all();
}

void Aabb::expand(const Vec& x) {
  if (lo.size() == 0) {
    lo = x;
    hi = x;
    return;
  }
  lo = lo.cwiseMin(x);
  hi = hi.cwiseMax(x);
}

double segment_distance(const Vec& x, const Vec& a, const Vec& b) {
  const Vec ab = b - a;
  const double len2 = ab.squaredNorm();
  const double t = len2 > 0.0 ? std::clamp((x - a).dot(ab) / len2, 0.0, 1.0) : 0.0;
  return (x - (a + t * ab)).norm();
}

bool RigidObjectSpec::contains_canonical(const Vec& x) const {
  const Vec local = placement.apply_inverse(x);
  return (local.array().abs() <= half_extents.array()).all();
}

RigidObjectSpec StickGeometry::default_object() {
  // 0.3 x 0.3 square whose lower edge sits 0.25 above the first joint.
  Vec half(2);
  half << 0.15, 0.15;
  Vec center(2);
  center << 0.0, 0.40;
  return {half, RigidTransform::translate(center), 0};
}

double StickGeometry::end() const {
  return start() + std::accumulate(bone_lengths.begin(), bone_lengths.end(), 0.0);
}

Vec StickGeometry::joint(int j) const {
  double x = start();
  for (int i = 0; i <= j; ++i) x += bone_lengths[i];
  Vec p(2);
  p << x, 0.0;
  return p;
}

std::pair<Vec, Vec> StickGeometry::bone_segment(int i) const {
  double x = start();
  for (int k = 0; k < i; ++k) x += bone_lengths[k];
  Vec a(2), b(2);
  a << x, 0.0;
  b << x + bone_lengths[i], 0.0;
  return {a, b};
}

std::vector<std::pair<int, int>> StickGeometry::joint_bones() const {
  std::vector<std::pair<int, int>> pairs;
  for (int j = 0; j < joint_count(); ++j) pairs.emplace_back(j, j + 1);
  return pairs;
}

bool StickGeometry::inside_stick_canonical(const Vec& x) const {
  return x(0) >= start() && x(0) <= end() && std::abs(x(1)) <= half_width;
}

bool StickGeometry::inside_canonical(const Vec& x) const {
  return inside_stick_canonical(x) || (rigid_object && rigid_object->contains_canonical(x));
}

Aabb StickGeometry::canonical_bounds() const {
  Aabb box;
  Vec corner(2);
  corner << start(), -half_width;
  box.expand(corner);
  corner << end(), half_width;
  box.expand(corner);
  if (rigid_object) {
    const Vec& h = rigid_object->half_extents;
    for (int sx : {-1, 1}) {
      for (int sy : {-1, 1}) {
        Vec local(2);
        local << sx * h(0), sy * h(1);
        box.expand(rigid_object->placement.apply(local));
      }
    }
  }
  return box;
}

double StickGeometry::stick_area() const { return (end() - start()) * 2.0 * half_width; }

void StickGeometry::validate() const {
  if (bone_lengths.empty()) throw std::invalid_argument("stick needs at least one bone");
  for (double l : bone_lengths) {
    if (!(l > 0.0)) throw std::invalid_argument("bone lengths must be positive");
  }
  if (!(half_width > 0.0)) throw std::invalid_argument("stick half_width must be positive");
  if (rigid_object) {
    if (rigid_object->half_extents.size() != 2 || !(rigid_object->half_extents.array() > 0.0).all()) {
      throw std::invalid_argument("rigid object half extents must be 2 positive values");
    }
    if (rigid_object->attached_bone < 0 || rigid_object->attached_bone >= bone_count()) {
      throw std::invalid_argument("rigid object attached to a nonexistent bone");
    }
    if (rigid_object->placement.dim() != 2 || !rigid_object->placement.is_rigid(1e-9)) {
      throw std::invalid_argument("rigid object placement must be a rigid 2D transform");
    }
  }
}

Vec CapsuleGeometry::joint(int j) const {
  double x = start();
  for (int i = 0; i <= j; ++i) x += bone_lengths[i];
  Vec p = Vec::Zero(3);
  p(0) = x;
  return p;
}

std::pair<Vec, Vec> CapsuleGeometry::bone_segment(int i) const {
  double x = start();
  for (int k = 0; k < i; ++k) x += bone_lengths[k];
  Vec a = Vec::Zero(3);
  Vec b = Vec::Zero(3);
  a(0) = x;
  b(0) = x + bone_lengths[i];
  return {a, b};
}

std::vector<std::pair<int, int>> CapsuleGeometry::joint_bones() const {
  std::vector<std::pair<int, int>> pairs;
  for (int j = 0; j < joint_count(); ++j) pairs.emplace_back(j, j + 1);
  return pairs;
}

bool CapsuleGeometry::inside_canonical(const Vec& x) const {
  for (int i = 0; i < bone_count(); ++i) {
    const auto [a, b] = bone_segment(i);
    if (segment_distance(x, a, b) <= radius) return true;
  }
  return false;
}

Aabb CapsuleGeometry::canonical_bounds() const {
  const double total = std::accumulate(bone_lengths.begin(), bone_lengths.end(), 0.0);
  Vec lo(3), hi(3);
  lo << start() - radius, -radius, -radius;
  hi << start() + total + radius, radius, radius;
  return {lo, hi};
}

void CapsuleGeometry::validate() const {
  if (bone_lengths.empty()) throw std::invalid_argument("capsule chain needs at least one bone");
  for (double l : bone_lengths) {
    if (!(l > 0.0)) throw std::invalid_argument("bone lengths must be positive");
  }
  if (!(radius > 0.0)) throw std::invalid_argument("capsule radius must be positive");
  if (bend_axis.size() != 3 || !(bend_axis.norm() > 0.0)) throw std::invalid_argument("bend axis must be a nonzero 3-vector");
}

}  // namespace snarf
