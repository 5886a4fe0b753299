#pragma once

#include <algorithm>
#include <cstdint>
#include <random>
#include <vector>

#include "snarf/config.hpp"
#include "snarf/losses.hpp"
#include "snarf/oracle.hpp"
#include "snarf/skeleton.hpp"
#include "snarf/trainer.hpp"
#include "test_util.hpp"

namespace snarf::testing {

// Miniature loss problem: two-bone stick, width-8 nets, a random bend and
// queries scattered around the posed stick with oracle labels.
struct MiniProblem {
  ExperimentConfig config;
  ModelParams model;
  BoneTransformSet frame;
  Batch queries;
  std::vector<std::uint8_t> labels;
  Batch bone_points;
  SkeletonLayout layout;
};

inline MiniProblem mini_problem(std::uint64_t seed, ModelKind kind = ModelKind::forward_skinning, int queries = 16) {
  MiniProblem p;
  std::mt19937_64 rng(seed);
  p.config.occupancy_net.hidden_widths = {8, 8};
  p.config.skinning_net.hidden_widths = {8, 8};
  p.config.train.seed = seed;
  p.model = initial_model(p.config, kind);
  p.model.solver.epsilon = 1e-11;
  const double angle = std::uniform_real_distribution<double>(0.3, 1.5)(rng) * (rng() % 2 ? 1.0 : -1.0);
  p.frame = forward_kinematics_stick(std::vector<double>{angle}, p.config.stick);
  const StickOracle oracle(p.config.stick, p.frame, 200);
  const Aabb box = oracle.deformed_bounds().inflated(1.1);
  p.queries.resize(2, queries);
  for (int j = 0; j < queries; ++j) {
    for (int k = 0; k < 2; ++k) {
      p.queries(k, j) = std::uniform_real_distribution<double>(box.lo(k), box.hi(k))(rng);
    }
    p.labels.push_back(oracle.inside(p.queries.col(j)) ? 1 : 0);
  }
  p.layout = SkeletonLayout::from_config(p.config);
  p.bone_points = sample_bone_points(p.layout, 8, rng);
  return p;
}

struct GradCheckResult {
  std::vector<double> rel_errors;  // occupancy parameters first, then skinning
  double worst = 0.0;
  double fraction_below(double tol) const {
    if (rel_errors.empty()) return 1.0;
    const auto n = std::count_if(rel_errors.begin(), rel_errors.end(), [&](double e) { return e < tol; });
    return static_cast<double>(n) / static_cast<double>(rel_errors.size());
  }
};

// Whole-loss gradient (BCE plus both bootstrap terms) against central
// differences that re-run the full forward pass, root finding included.
inline GradCheckResult check_total_loss_gradient(const MiniProblem& p, double step = 1e-5, double floor = 1e-6) {
  const BoneTransformSet* frames[] = {&p.frame};
  BootstrapTerms terms;
  terms.bone_points = &p.bone_points;
  terms.layout = &p.layout;
  terms.joint_frame = &p.frame;
  MlpGrad g_occ(p.model.occupancy);
  MlpGrad g_skin(p.model.skinning);
  total_loss(p.model, p.queries, frames, p.labels, terms, &g_occ, &g_skin);

  GradCheckResult out;
  const auto probe = [&](bool occupancy, std::size_t i, double analytic) {
    ModelParams plus = p.model;
    ModelParams minus = p.model;
    (occupancy ? plus.occupancy : plus.skinning).values()[i] += step;
    (occupancy ? minus.occupancy : minus.skinning).values()[i] -= step;
    const double lp = total_loss(plus, p.queries, frames, p.labels, terms, nullptr, nullptr).total;
    const double lm = total_loss(minus, p.queries, frames, p.labels, terms, nullptr, nullptr).total;
    const double e = rel_err(analytic, (lp - lm) / (2.0 * step), floor);
    out.rel_errors.push_back(e);
    out.worst = std::max(out.worst, e);
  };
  for (std::size_t i = 0; i < g_occ.size(); ++i) probe(true, i, g_occ.values()[i]);
  for (std::size_t i = 0; i < g_skin.size(); ++i) probe(false, i, g_skin.values()[i]);
  return out;
}

}  // namespace snarf::testing
