#include "snarf/rootfind.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <Eigen/LU>

namespace snarf {

namespace {

constexpr int kIncreasesBeforeHalving = 5;

struct SolveState {
  Vec x;
  Vec g;
  Mat inv_jacobian;
  Vec best_x;
  double best_residual = std::numeric_limits<double>::infinity();
  Mat best_inv_jacobian;
  Vec staged_x;
  double step_scale = 1.0;
  int iterations = 0;
  int increases = 0;
  bool done = false;
  bool converged = false;
};

bool invert(const Mat& m, Mat& out) {
  const double det = m.determinant();
  if (!std::isfinite(det) || std::abs(det) < 1e-300) return false;
  out = m.inverse();
  return out.allFinite();
}

// Residuals d(x_k) - x'_k for the listed solves.
void evaluate_residuals(const MlpParams& sigma_w, std::span<const SolveRequest> requests,
                        std::vector<SolveState>& states, const std::vector<std::size_t>& which,
                        bool staged, std::vector<Vec>& out) {
  if (which.empty()) return;
  const int d = static_cast<int>(requests[which.front()].x_query.size());
  Batch x(d, static_cast<Eigen::Index>(which.size()));
  std::vector<const BoneTransformSet*> frames(which.size());
  for (std::size_t k = 0; k < which.size(); ++k) {
    x.col(static_cast<Eigen::Index>(k)) = staged ? states[which[k]].staged_x : states[which[k]].x;
    frames[k] = requests[which[k]].frame;
  }
  const LbsBatch lbs = lbs_deform_batch(sigma_w, x, frames);
  out.resize(which.size());
  for (std::size_t k = 0; k < which.size(); ++k) {
    out[k] = lbs.deformed.col(static_cast<Eigen::Index>(k)) - requests[which[k]].x_query;
  }
}

}  // namespace

SolverSettings SolverSettings::for_bounds(const Aabb& canonical_bounds) {
  SolverSettings s;
  s.domain_center = canonical_bounds.center();
  s.divergence_radius = 10.0 * canonical_bounds.half_diagonal();
  return s;
}

void SolverSettings::validate() const {
  if (!(epsilon > 0.0)) throw std::invalid_argument("solver: epsilon must be > 0");
  if (max_iters < 1) throw std::invalid_argument("solver: max_iters must be >= 1");
  if (!(dedup_radius > epsilon)) throw std::invalid_argument("solver: dedup_radius must exceed epsilon");
  if (!(divergence_radius > 0.0)) throw std::invalid_argument("solver: divergence_radius must be > 0");
  if (!(jacobian_damping >= 0.0)) throw std::invalid_argument("solver: jacobian_damping must be >= 0");
}

std::vector<RootCandidate> broyden_solve_batch(const MlpParams& sigma_w, std::span<const SolveRequest> requests,
                                               const SolverSettings& settings) {
  settings.validate();
  const std::size_t n = requests.size();
  std::vector<SolveState> states(n);
  std::vector<std::size_t> active;
  active.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    const SolveRequest& r = requests[k];
    if (r.frame == nullptr) throw std::invalid_argument("broyden: request without bone transforms");
    const int d = static_cast<int>(r.x_query.size());
    if (r.x0.size() != d || r.J0.rows() != d || r.J0.cols() != d) {
      throw std::invalid_argument("broyden: inconsistent dimensions");
    }
    SolveState& s = states[k];
    s.x = r.x0;
    s.best_x = r.x0;
    const Mat damped = r.J0 + settings.jacobian_damping * Mat::Identity(d, d);
    if (!invert(damped, s.inv_jacobian)) s.inv_jacobian = Mat::Identity(d, d), s.done = true;
    s.best_inv_jacobian = s.inv_jacobian;
    active.push_back(k);
  }

  const Vec center = settings.domain_center.size() > 0
                         ? settings.domain_center
                         : Vec(Vec::Zero(n > 0 ? requests[0].x_query.size() : 1));
  std::vector<Vec> residuals;
  evaluate_residuals(sigma_w, requests, states, active, false, residuals);
  for (std::size_t k = 0; k < active.size(); ++k) states[active[k]].g = residuals[k];

  std::vector<std::size_t> staged;
  while (!active.empty()) {
    staged.clear();
    for (std::size_t idx : active) {
      SolveState& s = states[idx];
      const double residual = s.g.norm();
      if (residual < s.best_residual || !std::isfinite(s.best_residual)) {
        if (std::isfinite(residual)) {
          s.best_residual = residual;
          s.best_x = s.x;
          s.best_inv_jacobian = s.inv_jacobian;
        }
      }
      if (residual < settings.epsilon) {
        s.converged = true;
        s.done = true;
        continue;
      }
      if (s.done || s.iterations >= settings.max_iters || !std::isfinite(residual)) {
        s.done = true;
        continue;
      }
      s.staged_x = s.x - s.step_scale * (s.inv_jacobian * s.g);
      if (!s.staged_x.allFinite() || (s.staged_x - center).norm() > settings.divergence_radius) {
        s.done = true;
        continue;
      }
      staged.push_back(idx);
    }
    if (staged.empty()) break;

    evaluate_residuals(sigma_w, requests, states, staged, true, residuals);
    for (std::size_t k = 0; k < staged.size(); ++k) {
      SolveState& s = states[staged[k]];
      const Vec dx = s.staged_x - s.x;
      const Vec dg = residuals[k] - s.g;
      const Vec h_dg = s.inv_jacobian * dg;
      if (settings.update == BroydenUpdate::good) {
        const Eigen::RowVectorXd dx_h = dx.transpose() * s.inv_jacobian;
        const double denom = dx_h.dot(dg);
        if (std::abs(denom) > 1e-300) s.inv_jacobian += (dx - h_dg) * dx_h / denom;
      } else {
        const double denom = dg.squaredNorm();
        if (denom > 1e-300) s.inv_jacobian += (dx - h_dg) * dg.transpose() / denom;
      }
      if (residuals[k].norm() > s.g.norm()) {
        if (++s.increases >= kIncreasesBeforeHalving) {
          s.step_scale *= 0.5;
          s.increases = 0;
        }
      } else {
        s.increases = 0;
      }
      s.x = s.staged_x;
      s.g = residuals[k];
      ++s.iterations;
    }
    std::erase_if(active, [&states](std::size_t idx) { return states[idx].done; });
  }

  std::vector<RootCandidate> out(n);
  for (std::size_t k = 0; k < n; ++k) {
    const SolveState& s = states[k];
    RootCandidate& c = out[k];
    c.converged = s.converged;
    c.x_star = s.converged ? s.x : s.best_x;
    c.residual = s.converged ? s.g.norm() : s.best_residual;
    const Mat& inv = s.converged ? s.inv_jacobian : s.best_inv_jacobian;
    if (!invert(inv, c.jacobian)) c.jacobian = Mat::Zero(inv.rows(), inv.cols());
    c.source_bone = requests[k].source_bone;
    c.iterations = s.iterations;
  }
  return out;
}

CorrespondenceSet select_roots(std::vector<RootCandidate> candidates, const SolverSettings& settings) {
  CorrespondenceSet set;
  std::vector<const RootCandidate*> converged;
  for (const auto& c : candidates) {
    if (c.converged) converged.push_back(&c);
  }
  std::stable_sort(converged.begin(), converged.end(),
                   [](const RootCandidate* a, const RootCandidate* b) { return a->residual < b->residual; });
  for (const RootCandidate* c : converged) {
    const bool duplicate = std::any_of(set.roots.begin(), set.roots.end(), [&](const RootCandidate& kept) {
      return (kept.x_star - c->x_star).norm() < settings.dedup_radius;
    });
    if (!duplicate) set.roots.push_back(*c);
  }
  if (set.roots.empty() && !candidates.empty()) {
    const auto best = std::min_element(candidates.begin(), candidates.end(),
                                       [](const RootCandidate& a, const RootCandidate& b) {
                                         return a.residual < b.residual;
                                       });
    set.fallback = *best;
  }
  return set;
}

std::vector<CorrespondenceSet> find_correspondences_batch(const MlpParams& sigma_w, const Batch& queries,
                                                          FrameRefs frames, const SolverSettings& settings) {
  const Eigen::Index n = queries.cols();
  if (frames.empty() || (frames.size() != 1 && frames.size() != static_cast<std::size_t>(n))) {
    throw std::invalid_argument("find_correspondences: need one transform set, or one per query");
  }
  if (!queries.allFinite()) throw std::invalid_argument("find_correspondences: non-finite query");
  const int bones = sigma_w.spec().output_dim;
  const int d = static_cast<int>(queries.rows());

  // Rigid initial guesses x_i = B_i^-1 x' for every (query, bone).
  Batch starts(d, n * bones);
  std::vector<const BoneTransformSet*> start_frames(static_cast<std::size_t>(n * bones));
  for (Eigen::Index j = 0; j < n; ++j) {
    const BoneTransformSet* frame = frames.size() == 1 ? frames[0] : frames[static_cast<std::size_t>(j)];
    if (frame->bone_count() != bones) throw std::invalid_argument("find_correspondences: bone count mismatch");
    for (int i = 0; i < bones; ++i) {
      starts.col(j * bones + i) = frame->transforms[i].apply_inverse(queries.col(j));
      start_frames[static_cast<std::size_t>(j * bones + i)] = frame;
    }
  }
  const LbsBatch lbs = lbs_deform_batch(sigma_w, starts, start_frames);
  const std::vector<Mat> jacobians = lbs_spatial_jacobian_batch(sigma_w, lbs, starts, start_frames);

  std::vector<SolveRequest> requests(static_cast<std::size_t>(n * bones));
  for (Eigen::Index j = 0; j < n; ++j) {
    for (int i = 0; i < bones; ++i) {
      const auto k = static_cast<std::size_t>(j * bones + i);
      requests[k] = {queries.col(j), starts.col(static_cast<Eigen::Index>(k)), jacobians[k], start_frames[k], i};
    }
  }
  std::vector<RootCandidate> candidates = broyden_solve_batch(sigma_w, requests, settings);

  std::vector<CorrespondenceSet> out;
  out.reserve(static_cast<std::size_t>(n));
  for (Eigen::Index j = 0; j < n; ++j) {
    const auto first = candidates.begin() + j * bones;
    out.push_back(select_roots(std::vector<RootCandidate>(first, first + bones), settings));
  }
  return out;
}

RootCandidate broyden_solve(const MlpParams& sigma_w, const BoneTransformSet& bones, const Vec& x_query,
                            const Vec& x0, const Mat& J0, const SolverSettings& settings) {
  const SolveRequest request{x_query, x0, J0, &bones, -1};
  return broyden_solve_batch(sigma_w, std::span<const SolveRequest>(&request, 1), settings).front();
}

CorrespondenceSet find_correspondences(const MlpParams& sigma_w, const BoneTransformSet& bones,
                                       const Vec& x_query, const SolverSettings& settings) {
  const BoneTransformSet* frames[] = {&bones};
  return find_correspondences_batch(sigma_w, Batch(x_query), frames, settings).front();
}

}  // namespace snarf
