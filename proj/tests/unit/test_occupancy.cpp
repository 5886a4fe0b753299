#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <random>
#include <vector>

#include "grad_check.hpp"
#include "snarf/levelset.hpp"
#include "snarf/occupancy.hpp"
#include "test_util.hpp"

using namespace snarf;
using namespace snarf::testing;

namespace {

CompositionSettings composition(Aggregation a) {
  CompositionSettings c;
  c.aggregation = a;
  return c;
}

ModelParams stick_model(std::uint64_t seed) {
  ModelParams m = small_model(2, 2, 16, seed);
  m.solver.domain_center = Vec::Zero(2);
  return m;
}

Eigen::VectorXd circle_field(const Batch& x, double r, double sharpness = 10.0) {
  Eigen::VectorXd out(x.cols());
  for (Eigen::Index j = 0; j < x.cols(); ++j) out(j) = 1.0 / (1.0 + std::exp(-sharpness * (r - x.col(j).norm())));
  return out;
}

}  // namespace

TEST(Aggregate, HardMaxAndSingletons) {
  const std::vector<double> two{0.9, 0.1};
  EXPECT_EQ(aggregate_occupancy(two, composition(Aggregation::hard_max)).value, 0.9);
  for (auto a : {Aggregation::hard_max, Aggregation::softmax, Aggregation::weighted_softmax}) {
    const std::vector<double> one{0.37};
    EXPECT_DOUBLE_EQ(aggregate_occupancy(one, composition(a)).value, 0.37);
    EXPECT_EQ(aggregate_occupancy(std::vector<double>{}, composition(a)).value, 0.0);
    const std::vector<double> same{0.6, 0.6, 0.6};
    EXPECT_NEAR(aggregate_occupancy(same, composition(a)).value, 0.6, 1e-15);
  }
}

TEST(Aggregate, WeightedSoftmaxHandFormula) {
  const std::vector<double> o{0.9, 0.1};
  const double e1 = std::exp(20 * 0.9), e2 = std::exp(20 * 0.1);
  const double expect = (e1 * 0.9 + e2 * 0.1) / (e1 + e2);
  EXPECT_NEAR(aggregate_occupancy(o, composition(Aggregation::weighted_softmax)).value, expect, 1e-15);
  const double ratio = std::exp(-16.0);
  EXPECT_NEAR(expect, 0.9 - 0.8 * ratio / (1.0 + ratio), 1e-15);
}

TEST(Aggregate, SmoothMaxHandFormula) {
  const std::vector<double> o{0.9, 0.1};
  const double expect = std::log(0.5 * (std::exp(20 * 0.9) + std::exp(20 * 0.1))) / 20;
  EXPECT_NEAR(aggregate_occupancy(o, composition(Aggregation::softmax)).value, expect, 1e-14);
}

TEST(Aggregate, PartialsMatchFiniteDifferences) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (auto a : {Aggregation::softmax, Aggregation::weighted_softmax}) {
    for (int t = 0; t < 50; ++t) {
      std::vector<double> o{u(rng), u(rng), u(rng)};
      const auto r = aggregate_occupancy(o, composition(a));
      for (std::size_t i = 0; i < o.size(); ++i) {
        auto p = o, m = o;
        p[i] += 1e-6;
        m[i] -= 1e-6;
        const double fd = (aggregate_occupancy(p, composition(a)).value -
                           aggregate_occupancy(m, composition(a)).value) / 2e-6;
        EXPECT_NEAR(r.partials[i], fd, 1e-6);
      }
    }
  }
}

TEST(Aggregate, SmoothMaxIsMonotoneAndBounded) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (auto a : {Aggregation::hard_max, Aggregation::softmax}) {
    for (int t = 0; t < 10000; ++t) {
      const int n = 1 + static_cast<int>(rng() % 4);
      std::vector<double> o(n);
      for (double& v : o) v = u(rng);
      const double base = aggregate_occupancy(o, composition(a)).value;
      const double lo = *std::min_element(o.begin(), o.end());
      const double hi = *std::max_element(o.begin(), o.end());
      EXPECT_GE(base, lo);
      EXPECT_LE(base, hi);
      if (a == Aggregation::hard_max) {
        EXPECT_EQ(base, hi);
      }
      auto up = o;
      up[rng() % n] += u(rng) * (1.0 - hi);
      EXPECT_GE(aggregate_occupancy(up, composition(a)).value, base);
      for (double p : aggregate_occupancy(o, composition(a)).partials) EXPECT_GE(p, 0.0);
    }
  }
}

TEST(Aggregate, WeightedSoftmaxIsNotMonotone) {
  // Raising the smaller value pulls blend weight towards it and lowers the result.
  const auto c = composition(Aggregation::weighted_softmax);
  const double base = aggregate_occupancy(std::vector<double>{0.9, 0.5}, c).value;
  const double raised = aggregate_occupancy(std::vector<double>{0.9, 0.55}, c).value;
  EXPECT_LT(raised, base);
  EXPECT_LT(aggregate_occupancy(std::vector<double>{0.9, 0.5}, c).partials[1], 0.0);
  // Still bounded by the inputs.
  EXPECT_GE(base, 0.5);
  EXPECT_LE(base, 0.9);
}

TEST(Occupancy, CanonicalZeroNetIsHalf) {
  ModelParams m = stick_model(1);
  m.occupancy.set_zero();
  EXPECT_DOUBLE_EQ(occupancy_canonical(m, Eigen::Vector2d(3.0, -1.0), Eigen::VectorXd()), 0.5);
  EXPECT_THROW(occupancy_canonical(m.occupancy, Eigen::Vector3d(0, 0, 0), Eigen::VectorXd()),
               std::invalid_argument);
}

TEST(Occupancy, ConstantFieldGivesConstant) {
  std::mt19937_64 rng(3);
  for (auto a : {Aggregation::hard_max, Aggregation::softmax, Aggregation::weighted_softmax}) {
    ModelParams m = stick_model(2);
    m.composition.aggregation = a;
    m.occupancy = constant_occupancy(2, 0.7);
    const BoneTransformSet b = forward_kinematics_stick(std::vector<double>{0.9}, StickGeometry{});
    for (int t = 0; t < 30; ++t) {
      const Vec q = random_vec(rng, 2);
      const auto r = occupancy_deformed(m, q, Eigen::VectorXd(), b);
      if (r.correspondences.roots.empty()) continue;
      EXPECT_NEAR(r.occupancy, 0.7, 1e-12);
    }
  }
}

TEST(Occupancy, RigidConsistencyWithOneHotWeights) {
  std::mt19937_64 rng(4);
  for (int hot = 0; hot < 2; ++hot) {
    ModelParams m = stick_model(5);
    m.skinning = one_hot_skinning(2, 2, hot);
    for (int t = 0; t < 50; ++t) {
      const BoneTransformSet b = random_frame(rng, 2, 2);
      const Vec q = random_vec(rng, 2);
      const double o = occupancy_deformed(m, q, Eigen::VectorXd(), b).occupancy;
      const double expect = occupancy_canonical(m, b.transforms[hot].apply_inverse(q), Eigen::VectorXd());
      EXPECT_NEAR(o, expect, 1e-4);
    }
  }
}

TEST(Occupancy, EmptyRootSetIsUnoccupied) {
  ModelParams m = stick_model(6);
  m.skinning = sigmoid_skinning(2, 200.0);
  m.occupancy = constant_occupancy(2, 0.9);
  const BoneTransformSet b = forward_kinematics_stick(std::vector<double>{M_PI}, StickGeometry{});
  const auto r = occupancy_deformed(m, Eigen::Vector2d(20.0, 0.0), Eigen::VectorXd(), b);
  EXPECT_TRUE(r.correspondences.roots.empty());
  EXPECT_EQ(r.occupancy, 0.0);
}

TEST(Occupancy, BackwardDegenerateCases) {
  const ModelParams m = stick_model(7);
  const BoneTransformSet b = forward_kinematics_stick(std::vector<double>{0.6}, StickGeometry{});
  const Vec q = Eigen::Vector2d(0.5, 0.3);
  const auto zero = occupancy_backward(m, q, Eigen::VectorXd(), b, 0.0);
  EXPECT_EQ(zero.occupancy.max_abs(), 0.0);
  EXPECT_EQ(zero.skinning.max_abs(), 0.0);

  const BoneTransformSet id = BoneTransformSet::identity(2, 2, 1);
  const auto g = occupancy_backward(m, q, Eigen::VectorXd(), id, 1.0);
  EXPECT_GT(g.occupancy.max_abs(), 0.0);
  EXPECT_LT(g.skinning.max_abs(), 1e-14);
}

TEST(Occupancy, SingleQueryBackwardMatchesFiniteDifferences) {
  ModelParams m = stick_model(8);
  m.solver.epsilon = 1e-11;
  const BoneTransformSet b = forward_kinematics_stick(std::vector<double>{0.8}, StickGeometry{});
  const Vec q = Eigen::Vector2d(0.4, 0.5);
  const auto g = occupancy_backward(m, q, Eigen::VectorXd(), b, 1.0);
  const double h = 1e-5;
  int bad = 0;
  for (bool occ : {true, false}) {
    const std::size_t n = occ ? m.occupancy.size() : m.skinning.size();
    for (std::size_t i = 0; i < n; ++i) {
      ModelParams p = m, mm = m;
      (occ ? p.occupancy : p.skinning).values()[i] += h;
      (occ ? mm.occupancy : mm.skinning).values()[i] -= h;
      const double fd = (occupancy_deformed(p, q, Eigen::VectorXd(), b).occupancy -
                         occupancy_deformed(mm, q, Eigen::VectorXd(), b).occupancy) / (2 * h);
      const double an = (occ ? g.occupancy : g.skinning).values()[i];
      bad += rel_err(an, fd, 1e-6) > 1e-3;
    }
  }
  EXPECT_EQ(bad, 0);
}

TEST(Occupancy, EndToEndLossGradientOnTwentyConfigurations) {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const MiniProblem p = mini_problem(seed);
    const GradCheckResult r = check_total_loss_gradient(p);
    EXPECT_GE(r.fraction_below(1e-3), 0.95) << "seed " << seed;
    EXPECT_LT(r.worst, 1e-2) << "seed " << seed;
  }
}

TEST(LevelSet, CircleContour) {
  const double r = 0.5;
  const GridSpec grid = GridSpec::uniform(Eigen::Vector2d(-1, -1), Eigen::Vector2d(1, 1), 64);
  const LevelSet ls = extract_levelset(grid, [&](const Batch& x) { return circle_field(x, r); });
  ASSERT_FALSE(ls.contour.empty());
  const double cell = 2.0 / 64;
  for (const Vec& v : ls.contour.vertices) EXPECT_NEAR(v.norm(), r, cell);
  // One closed loop.
  const auto lines = ls.contour.polylines();
  ASSERT_EQ(lines.size(), 1u);
  EXPECT_EQ(lines[0].front(), lines[0].back());
}

TEST(LevelSet, VerticesReevaluateNearHalf) {
  const GridSpec grid = GridSpec::uniform(Eigen::Vector2d(-1, -1), Eigen::Vector2d(1, 1), 256);
  const auto field = [](const Batch& x) { return circle_field(x, 0.6, 25.0); };
  const LevelSet ls = extract_levelset(grid, field);
  ASSERT_FALSE(ls.contour.empty());
  Batch v(2, static_cast<Eigen::Index>(ls.contour.vertices.size()));
  for (std::size_t i = 0; i < ls.contour.vertices.size(); ++i) v.col(static_cast<Eigen::Index>(i)) = ls.contour.vertices[i];
  EXPECT_LT((field(v).array() - 0.5).abs().maxCoeff(), 0.05);
}

TEST(LevelSet, ConstantFieldIsEmpty) {
  const GridSpec grid = GridSpec::uniform(Eigen::Vector2d(-1, -1), Eigen::Vector2d(1, 1), 16);
  const auto field = [](const Batch& x) { return Eigen::VectorXd::Constant(x.cols(), 0.2); };
  EXPECT_TRUE(extract_levelset(grid, field).contour.empty());
  const GridSpec grid3 = GridSpec::uniform(Eigen::Vector3d(-1, -1, -1), Eigen::Vector3d(1, 1, 1), 8);
  EXPECT_TRUE(extract_levelset(grid3, field).mesh.empty());
}

TEST(LevelSet, SphereMesh) {
  const GridSpec grid = GridSpec::uniform(Eigen::Vector3d(-1, -1, -1), Eigen::Vector3d(1, 1, 1), 32);
  const LevelSet ls = extract_levelset(grid, [](const Batch& x) { return circle_field(x, 0.6); });
  ASSERT_FALSE(ls.mesh.empty());
  for (const Vec& v : ls.mesh.vertices) EXPECT_NEAR(v.norm(), 0.6, 2.0 / 32);
  // Closed surface: every edge is shared by exactly two triangles.
  std::map<std::pair<int, int>, int> edges;
  for (const auto& t : ls.mesh.triangles) {
    for (int k = 0; k < 3; ++k) {
      const int a = t[k], b = t[(k + 1) % 3];
      ++edges[{std::min(a, b), std::max(a, b)}];
    }
  }
  for (const auto& [edge, count] : edges) EXPECT_EQ(count, 2);
}

TEST(LevelSet, GridValidation) {
  EXPECT_THROW(GridSpec::uniform(Eigen::Vector2d(-1, -1), Eigen::Vector2d(1, 1), 1).validate(),
               std::invalid_argument);
}

TEST(LevelSet, ModelPosedAndCanonical) {
  const ModelParams m = stick_model(9);
  const GridSpec grid = GridSpec::uniform(Eigen::Vector2d(-2, -2), Eigen::Vector2d(2, 2), 32);
  const LevelSet canonical = extract_levelset(m, nullptr, grid);
  const BoneTransformSet id = BoneTransformSet::identity(2, 2, 1);
  const LevelSet posed = extract_levelset(m, &id, grid);
  EXPECT_EQ(canonical.values.size(), static_cast<Eigen::Index>(grid.vertex_count()));
  EXPECT_LT((canonical.values - posed.values).cwiseAbs().maxCoeff(), 1e-12);
}
