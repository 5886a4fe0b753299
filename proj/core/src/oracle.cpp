#include "snarf/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace snarf {

namespace {

double cross(const Eigen::Vector2d& a, const Eigen::Vector2d& b) { return a.x() * b.y() - a.y() * b.x(); }

bool in_triangle(const Eigen::Vector2d& p, const Eigen::Vector2d& a, const Eigen::Vector2d& b,
                 const Eigen::Vector2d& c) {
  const double area = cross(b - a, c - a);
  if (area == 0.0) return false;
  const double s = area > 0.0 ? 1.0 : -1.0;
  constexpr double tol = -1e-14;
  return s * cross(b - a, p - a) >= tol && s * cross(c - b, p - b) >= tol && s * cross(a - c, p - c) >= tol;
}

RigidTransform object_pose(const RigidObjectSpec& object, const BoneTransformSet& frame) {
  return frame.transforms[object.attached_bone].compose(object.placement);
}

}  // namespace

std::vector<Segment> bone_segments(const StickGeometry& geometry) {
  std::vector<Segment> out;
  for (int i = 0; i < geometry.bone_count(); ++i) out.push_back(geometry.bone_segment(i));
  return out;
}

std::vector<Segment> bone_segments(const CapsuleGeometry& geometry) {
  std::vector<Segment> out;
  for (int i = 0; i < geometry.bone_count(); ++i) out.push_back(geometry.bone_segment(i));
  return out;
}

SkinningWeights oracle_skinning(std::span<const Segment> bones, const Vec& x, double eps_d) {
  if (!x.allFinite()) throw std::invalid_argument("oracle_skinning: non-finite point");
  Eigen::VectorXd w(static_cast<Eigen::Index>(bones.size()));
  for (std::size_t i = 0; i < bones.size(); ++i) {
    w(static_cast<Eigen::Index>(i)) = 1.0 / (segment_distance(x, bones[i].first, bones[i].second) + eps_d);
  }
  return {w / w.sum()};
}

SkinningWeights oracle_skinning(const StickGeometry& geometry, const Vec& x, double eps_d) {
  return oracle_skinning(bone_segments(geometry), x, eps_d);
}

SkinningWeights oracle_skinning(const CapsuleGeometry& geometry, const Vec& x, double eps_d) {
  return oracle_skinning(bone_segments(geometry), x, eps_d);
}

Vec oracle_deform(std::span<const Segment> bones, const BoneTransformSet& frame, const Vec& x, double eps_d) {
  const SkinningWeights w = oracle_skinning(bones, x, eps_d);
  Vec out = Vec::Zero(x.size());
  for (int i = 0; i < frame.bone_count(); ++i) out += w.w(i) * frame.transforms[i].apply(x);
  return out;
}

StickOracle::StickOracle(const StickGeometry& geometry, const BoneTransformSet& frame, int lattice_cells,
                         double eps_d)
    : geometry_(geometry), frame_(frame), bones_(bone_segments(geometry)), eps_d_(eps_d) {
  geometry_.validate();
  frame_.validate();
  if (frame_.bone_count() != geometry_.bone_count() || frame_.dim() != 2) {
    throw std::invalid_argument("StickOracle: transforms do not match the stick");
  }
  if (lattice_cells < 1) throw std::invalid_argument("StickOracle: lattice_cells must be >= 1");
  identity_ = frame_.is_identity();

  const double length = geometry_.end() - geometry_.start();
  const double width = 2.0 * geometry_.half_width;
  nx_ = lattice_cells;
  ny_ = std::max(2, static_cast<int>(std::lround(lattice_cells * width / length)));
  vertices_.resize(static_cast<std::size_t>(nx_ + 1) * (ny_ + 1));
  Vec c(2);
  for (int j = 0; j <= ny_; ++j) {
    for (int i = 0; i <= nx_; ++i) {
      c << geometry_.start() + length * i / nx_, -geometry_.half_width + width * j / ny_;
      const Vec d = identity_ ? c : oracle_deform(bones_, frame_, c, eps_d_);
      vertices_[static_cast<std::size_t>(j) * (nx_ + 1) + i] = d;
      bounds_.expand(d);
    }
  }
  if (geometry_.rigid_object) {
    const RigidTransform pose = object_pose(*geometry_.rigid_object, frame_);
    const Vec& h = geometry_.rigid_object->half_extents;
    for (int sx : {-1, 1}) {
      for (int sy : {-1, 1}) {
        Vec corner(2);
        corner << sx * h(0), sy * h(1);
        bounds_.expand(pose.apply(corner));
      }
    }
  }
  if (identity_) return;

  bin_size_ = 2.0 * std::max(length / nx_, width / ny_);
  bin_origin_ = bounds_.lo;
  bins_x_ = static_cast<int>((bounds_.hi(0) - bounds_.lo(0)) / bin_size_) + 1;
  bins_y_ = static_cast<int>((bounds_.hi(1) - bounds_.lo(1)) / bin_size_) + 1;

  // Two passes over the cells: count per bin, then fill (compressed rows).
  const auto cell_bins = [&](int cell, auto&& visit) {
    const int i = cell % nx_;
    const int j = cell / nx_;
    Eigen::Vector2d lo = vertices_[static_cast<std::size_t>(j) * (nx_ + 1) + i];
    Eigen::Vector2d hi = lo;
    for (int dj = 0; dj <= 1; ++dj) {
      for (int di = 0; di <= 1; ++di) {
        const auto& v = vertices_[static_cast<std::size_t>(j + dj) * (nx_ + 1) + i + di];
        lo = lo.cwiseMin(v);
        hi = hi.cwiseMax(v);
      }
    }
    const int bx0 = std::clamp(static_cast<int>((lo.x() - bin_origin_.x()) / bin_size_), 0, bins_x_ - 1);
    const int bx1 = std::clamp(static_cast<int>((hi.x() - bin_origin_.x()) / bin_size_), 0, bins_x_ - 1);
    const int by0 = std::clamp(static_cast<int>((lo.y() - bin_origin_.y()) / bin_size_), 0, bins_y_ - 1);
    const int by1 = std::clamp(static_cast<int>((hi.y() - bin_origin_.y()) / bin_size_), 0, bins_y_ - 1);
    for (int by = by0; by <= by1; ++by) {
      for (int bx = bx0; bx <= bx1; ++bx) visit(static_cast<std::size_t>(by) * bins_x_ + bx);
    }
  };
  const int cells = nx_ * ny_;
  bin_start_.assign(static_cast<std::size_t>(bins_x_) * bins_y_ + 1, 0);
  for (int cell = 0; cell < cells; ++cell) cell_bins(cell, [&](std::size_t b) { ++bin_start_[b + 1]; });
  for (std::size_t b = 1; b < bin_start_.size(); ++b) bin_start_[b] += bin_start_[b - 1];
  bin_cells_.resize(bin_start_.back());
  std::vector<std::size_t> fill(bin_start_.begin(), bin_start_.end() - 1);
  for (int cell = 0; cell < cells; ++cell) cell_bins(cell, [&](std::size_t b) { bin_cells_[fill[b]++] = cell; });
}

bool StickOracle::inside_cell(int cell, const Eigen::Vector2d& p) const {
  const int i = cell % nx_;
  const int j = cell / nx_;
  const auto& v00 = vertices_[static_cast<std::size_t>(j) * (nx_ + 1) + i];
  const auto& v10 = vertices_[static_cast<std::size_t>(j) * (nx_ + 1) + i + 1];
  const auto& v01 = vertices_[static_cast<std::size_t>(j + 1) * (nx_ + 1) + i];
  const auto& v11 = vertices_[static_cast<std::size_t>(j + 1) * (nx_ + 1) + i + 1];
  return in_triangle(p, v00, v10, v11) || in_triangle(p, v00, v11, v01);
}

bool StickOracle::inside_stick(const Vec& x) const {
  if (identity_) return geometry_.inside_stick_canonical(x);
  const Eigen::Vector2d p = x;
  const Eigen::Vector2d rel = (p - bin_origin_) / bin_size_;
  if (rel.x() < 0.0 || rel.y() < 0.0) return false;
  const auto bx = static_cast<std::size_t>(rel.x());
  const auto by = static_cast<std::size_t>(rel.y());
  if (bx >= static_cast<std::size_t>(bins_x_) || by >= static_cast<std::size_t>(bins_y_)) return false;
  const std::size_t b = by * bins_x_ + bx;
  for (std::size_t k = bin_start_[b]; k < bin_start_[b + 1]; ++k) {
    if (inside_cell(bin_cells_[k], p)) return true;
  }
  return false;
}

bool StickOracle::inside_object(const Vec& x) const {
  if (!geometry_.rigid_object) return false;
  const RigidTransform pose = object_pose(*geometry_.rigid_object, frame_);
  const Vec local = pose.apply_inverse(x);
  return (local.array().abs() <= geometry_.rigid_object->half_extents.array()).all();
}

bool StickOracle::inside(const Vec& x) const {
  if (x.size() != 2) throw std::invalid_argument("StickOracle: expected a 2D point");
  return inside_stick(x) || inside_object(x);
}

Batch StickOracle::sample_boundary(std::mt19937_64& rng, int count) const {
  const double length = geometry_.end() - geometry_.start();
  const double hw = geometry_.half_width;
  const double stick_perimeter = 2.0 * length + 4.0 * hw;
  double object_perimeter = 0.0;
  if (geometry_.rigid_object) {
    const Vec& h = geometry_.rigid_object->half_extents;
    object_perimeter = 4.0 * (h(0) + h(1));
  }
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Batch out(2, count);
  for (int k = 0; k < count; ++k) {
    double s = unit(rng) * (stick_perimeter + object_perimeter);
    Vec p(2);
    if (s < stick_perimeter) {
      if (s < length) {
        p << geometry_.start() + s, -hw;
      } else if ((s -= length) < length) {
        p << geometry_.start() + s, hw;
      } else if ((s -= length) < 2.0 * hw) {
        p << geometry_.start(), -hw + s;
      } else {
        s -= 2.0 * hw;
        p << geometry_.end(), -hw + s;
      }
      out.col(k) = identity_ ? p : oracle_deform(bones_, frame_, p, eps_d_);
    } else {
      s -= stick_perimeter;
      const Vec& h = geometry_.rigid_object->half_extents;
      if (s < 2.0 * h(0)) {
        p << -h(0) + s, -h(1);
      } else if ((s -= 2.0 * h(0)) < 2.0 * h(0)) {
        p << -h(0) + s, h(1);
      } else if ((s -= 2.0 * h(0)) < 2.0 * h(1)) {
        p << -h(0), -h(1) + s;
      } else {
        s -= 2.0 * h(1);
        p << h(0), -h(1) + std::min(s, 2.0 * h(1));
      }
      out.col(k) = object_pose(*geometry_.rigid_object, frame_).apply(p);
    }
  }
  return out;
}

CapsuleOracle::CapsuleOracle(const CapsuleGeometry& geometry, const BoneTransformSet& frame)
    : geometry_(geometry), frame_(frame), bones_(bone_segments(geometry)) {
  geometry_.validate();
  frame_.validate();
  if (frame_.bone_count() != geometry_.bone_count() || frame_.dim() != 3) {
    throw std::invalid_argument("CapsuleOracle: transforms do not match the capsule chain");
  }
  const Vec r = Vec::Constant(3, geometry_.radius);
  for (int i = 0; i < geometry_.bone_count(); ++i) {
    for (const Vec& end : {bones_[i].first, bones_[i].second}) {
      const Vec p = frame_.transforms[i].apply(end);
      bounds_.expand(p - r);
      bounds_.expand(p + r);
    }
  }
}

bool CapsuleOracle::inside(const Vec& x) const {
  if (x.size() != 3) throw std::invalid_argument("CapsuleOracle: expected a 3D point");
  for (int i = 0; i < geometry_.bone_count(); ++i) {
    const Vec local = frame_.transforms[i].apply_inverse(x);
    if (segment_distance(local, bones_[i].first, bones_[i].second) <= geometry_.radius) return true;
  }
  return false;
}

Batch CapsuleOracle::sample_boundary(std::mt19937_64& rng, int count) const {
  const double r = geometry_.radius;
  std::vector<double> areas;
  double total = 0.0;
  for (int i = 0; i < geometry_.bone_count(); ++i) {
    const double a = 2.0 * std::numbers::pi * r * geometry_.bone_lengths[i] + 4.0 * std::numbers::pi * r * r;
    areas.push_back(a);
    total += a;
  }
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  Batch out(3, count);
  int k = 0;
  int attempts = 0;
  while (k < count) {
    if (++attempts > 1000 * (count + 1)) throw std::runtime_error("CapsuleOracle: boundary sampling failed");
    double s = unit(rng) * total;
    int bone = 0;
    while (bone + 1 < geometry_.bone_count() && s >= areas[bone]) s -= areas[bone++];
    const auto& [a, b] = bones_[bone];
    const double len = (b - a).norm();
    const Vec axis = (b - a) / len;
    // Unit direction orthogonal to the bone axis or on the full sphere (caps).
    Vec dir(3);
    dir << normal(rng), normal(rng), normal(rng);
    dir.normalize();
    Vec p(3);
    const double side = 2.0 * std::numbers::pi * r * len;
    if (s < side) {
      dir -= dir.dot(axis) * axis;
      if (dir.norm() < 1e-12) continue;
      dir.normalize();
      p = a + (s / side) * len * axis + r * dir;
    } else {
      const double t = dir.dot(axis);
      p = (t >= 0.0 ? b : a) + r * dir;
    }
    const Vec posed = frame_.transforms[bone].apply(p);
    bool covered = false;
    for (int i = 0; i < geometry_.bone_count() && !covered; ++i) {
      if (i == bone) continue;
      const Vec local = frame_.transforms[i].apply_inverse(posed);
      covered = segment_distance(local, bones_[i].first, bones_[i].second) < r - 1e-12;
    }
    if (covered) continue;
    out.col(k++) = posed;
  }
  return out;
}

bool oracle_occupancy(const StickGeometry& geometry, const BoneTransformSet& frame, const Vec& x, int lattice_cells,
                      double eps_d) {
  return StickOracle(geometry, frame, lattice_cells, eps_d).inside(x);
}

bool oracle_occupancy(const CapsuleGeometry& geometry, const BoneTransformSet& frame, const Vec& x) {
  return CapsuleOracle(geometry, frame).inside(x);
}

}  // namespace snarf
