#pragma once

#include <random>
#include <span>
#include <utility>
#include <vector>

#include "snarf/geometry.hpp"
#include "snarf/skeleton.hpp"
#include "snarf/transform.hpp"

namespace snarf {

using Segment = std::pair<Vec, Vec>;

std::vector<Segment> bone_segments(const StickGeometry& geometry);
std::vector<Segment> bone_segments(const CapsuleGeometry& geometry);

/// w_i proportional to 1 / (distance(x, bone i) + eps_d), normalized.
SkinningWeights oracle_skinning(std::span<const Segment> bones, const Vec& x, double eps_d = 1e-3);
SkinningWeights oracle_skinning(const StickGeometry& geometry, const Vec& x, double eps_d = 1e-3);
SkinningWeights oracle_skinning(const CapsuleGeometry& geometry, const Vec& x, double eps_d = 1e-3);

/// Ground-truth LBS: sum_i w_i(x) B_i x with the inverse-distance weights.
Vec oracle_deform(std::span<const Segment> bones, const BoneTransformSet& frame, const Vec& x, double eps_d = 1e-3);

// Inside/outside test for the posed 2D stick. The stick interior is
// triangulated on a canonical lattice, pushed through ground-truth LBS, and
// queries are located with a uniform bin grid. The rigid object, if present,
// follows its bone rigidly and is tested analytically.
class StickOracle {
 public:
  StickOracle(const StickGeometry& geometry, const BoneTransformSet& frame, int lattice_cells = 1000,
              double eps_d = 1e-3);

  bool inside(const Vec& x) const;
  bool inside_stick(const Vec& x) const;
  bool inside_object(const Vec& x) const;
  /// Box around the posed stick and object.
  const Aabb& deformed_bounds() const { return bounds_; }
  /// Points spread uniformly over the canonical outline, mapped to the posed
  /// boundary. Outline length decides how many land on stick versus object.
  Batch sample_boundary(std::mt19937_64& rng, int count) const;

 private:
  StickGeometry geometry_;
  BoneTransformSet frame_;
  std::vector<Segment> bones_;
  double eps_d_;
  bool identity_;
  Aabb bounds_;
  // lattice
  int nx_ = 0;
  int ny_ = 0;
  std::vector<Eigen::Vector2d> vertices_;
  // bins
  Eigen::Vector2d bin_origin_;
  double bin_size_ = 1.0;
  int bins_x_ = 0;
  int bins_y_ = 0;
  std::vector<std::size_t> bin_start_;
  std::vector<int> bin_cells_;

  bool inside_cell(int cell, const Eigen::Vector2d& p) const;
};

// Posed capsule chain: union of each bone's capsule moved rigidly by its
// transform.
class CapsuleOracle {
 public:
  CapsuleOracle(const CapsuleGeometry& geometry, const BoneTransformSet& frame);

  bool inside(const Vec& x) const;
  const Aabb& deformed_bounds() const { return bounds_; }
  /// Uniform samples on the posed union's surface.
  Batch sample_boundary(std::mt19937_64& rng, int count) const;

 private:
  CapsuleGeometry geometry_;
  BoneTransformSet frame_;
  std::vector<Segment> bones_;
  Aabb bounds_;
};

bool oracle_occupancy(const StickGeometry& geometry, const BoneTransformSet& frame, const Vec& x,
                      int lattice_cells = 1000, double eps_d = 1e-3);
bool oracle_occupancy(const CapsuleGeometry& geometry, const BoneTransformSet& frame, const Vec& x);

}  // namespace snarf
