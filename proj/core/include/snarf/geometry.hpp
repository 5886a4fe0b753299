#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "snarf/transform.hpp"
#include "snarf/types.hpp"

namespace snarf {

struct Aabb {
  Vec lo;
  Vec hi;

  Vec center() const { return 0.5 * (lo + hi); }
  double half_diagonal() const { return 0.5 * (hi - lo).norm(); }
  Aabb inflated(double factor) const;
  bool contains(const Vec& x) const;
  void expand(const Vec& x);
};

double segment_distance(const Vec& x, const Vec& a, const Vec& b);

// Axis-aligned box in its own frame, rigidly attached to one bone.
struct RigidObjectSpec {
  Vec half_extents;
  RigidTransform placement;  // canonical pose of the box frame
  int attached_bone = 0;

  bool contains_canonical(const Vec& x) const;
};

// Planar stick made of collinear bones along +x. Bone 0 starts at
// x = -bone_lengths[0], so the first joint sits at the origin.
struct StickGeometry {
  std::vector<double> bone_lengths{1.0, 1.0};
  double half_width = 0.1;
  std::optional<RigidObjectSpec> rigid_object{};

  static RigidObjectSpec default_object();

  int bone_count() const { return static_cast<int>(bone_lengths.size()); }
  int joint_count() const { return bone_count() - 1; }
  double start() const { return -bone_lengths.front(); }
  double end() const;
  Vec joint(int j) const;
  std::pair<Vec, Vec> bone_segment(int i) const;
  /// Pairs of bones meeting at each joint.
  std::vector<std::pair<int, int>> joint_bones() const;

  bool inside_stick_canonical(const Vec& x) const;
  bool inside_canonical(const Vec& x) const;
  Aabb canonical_bounds() const;
  double stick_area() const;

  void validate() const;
};

// Chain of capsules along +x in 3D; joints bend about `bend_axis`.
struct CapsuleGeometry {
  std::vector<double> bone_lengths{1.0, 1.0};
  double radius = 0.25;
  Vec bend_axis = Vec::Unit(3, 2);

  int bone_count() const { return static_cast<int>(bone_lengths.size()); }
  int joint_count() const { return bone_count() - 1; }
  double start() const { return -bone_lengths.front(); }
  Vec joint(int j) const;
  std::pair<Vec, Vec> bone_segment(int i) const;
  std::vector<std::pair<int, int>> joint_bones() const;
  bool inside_canonical(const Vec& x) const;
  Aabb canonical_bounds() const;

  void validate() const;
};

}  // namespace snarf
