#pragma once

#include <optional>
#include <vector>

#include "snarf/nn.hpp"
#include "snarf/skeleton.hpp"
#include "snarf/types.hpp"

namespace snarf {

enum class BroydenUpdate { good, bad };

struct SolverSettings {
  double epsilon = 1e-5;  // convergence threshold on |d(x) - x'|
  int max_iters = 50;
  double divergence_radius = 30.0;  // measured from domain_center
  Vec domain_center{};              // empty means the origin
  double dedup_radius = 1e-3;
  double jacobian_damping = 1e-6;
  BroydenUpdate update = BroydenUpdate::good;

  /// divergence_radius = 10x the half-diagonal of the canonical bounds.
  static SolverSettings for_bounds(const Aabb& canonical_bounds);
  void validate() const;
};

struct RootCandidate {
  Vec x_star;
  double residual = 0.0;
  bool converged = false;
  Mat jacobian;  // Broyden estimate of d(d)/dx at x_star
  int source_bone = -1;
  int iterations = 0;
};

struct CorrespondenceSet {
  std::vector<RootCandidate> roots;         // converged, pairwise >= dedup_radius apart
  std::optional<RootCandidate> fallback{};  // best candidate when nothing converged
};

/// Quasi-Newton solve of lbs_deform(x) = x_query from x0, with rank-1 updates of
/// the inverse Jacobian estimate seeded by (J0 + lambda I)^-1.
RootCandidate broyden_solve(const MlpParams& sigma_w, const BoneTransformSet& bones, const Vec& x_query,
                            const Vec& x0, const Mat& J0, const SolverSettings& settings);

/// Runs one solve per bone from x_i = B_i^-1 x_query, J_i = dd/dx(x_i).
CorrespondenceSet find_correspondences(const MlpParams& sigma_w, const BoneTransformSet& bones,
                                       const Vec& x_query, const SolverSettings& settings);

// Batched forms: all solves advance in lockstep, one network evaluation per
// iteration over every still-active solve.
struct SolveRequest {
  Vec x_query;
  Vec x0;
  Mat J0;
  const BoneTransformSet* frame = nullptr;
  int source_bone = -1;
};

std::vector<RootCandidate> broyden_solve_batch(const MlpParams& sigma_w, std::span<const SolveRequest> requests,
                                               const SolverSettings& settings);

std::vector<CorrespondenceSet> find_correspondences_batch(const MlpParams& sigma_w, const Batch& queries,
                                                          FrameRefs frames, const SolverSettings& settings);

/// Keeps converged candidates, merging those closer than dedup_radius in favour
/// of the smaller residual; records the best non-converged one if none converged.
CorrespondenceSet select_roots(std::vector<RootCandidate> candidates, const SolverSettings& settings);

}  // namespace snarf
