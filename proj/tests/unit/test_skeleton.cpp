#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include <Eigen/LU>

#include "snarf/geometry.hpp"
#include "snarf/skeleton.hpp"
#include "test_util.hpp"

using namespace snarf;
using snarf::testing::random_frame;
using snarf::testing::random_vec;
using snarf::testing::rel_err;

namespace {

MlpParams random_skinning(int dim, int bones, int width, std::uint64_t seed) {
  return MlpParams::glorot_uniform(
      MlpSpec{dim, bones, {width, width}, HiddenActivation::softplus, OutputActivation::softmax}, seed);
}

}  // namespace

TEST(Transform, RigidHelpers) {
  const RigidTransform t = RigidTransform::about_pivot(rotation_2d(0.7), Vec(Eigen::Vector2d(1.0, 2.0)));
  EXPECT_TRUE(t.is_rigid());
  const Vec x = Eigen::Vector2d(0.3, -0.4);
  EXPECT_NEAR((t.apply_inverse(t.apply(x)) - x).norm(), 0.0, 1e-15);
  EXPECT_NEAR((t.inverse().apply(t.apply(x)) - x).norm(), 0.0, 1e-15);
  EXPECT_NEAR((RigidTransform::from_homogeneous(t.homogeneous()).apply(x) - t.apply(x)).norm(), 0.0, 1e-15);
  const Mat r3 = rotation_axis_angle(Vec(Eigen::Vector3d(1, 2, 3).normalized()), 1.1);
  EXPECT_NEAR((r3.transpose() * r3 - Mat::Identity(3, 3)).norm(), 0.0, 1e-12);
  EXPECT_NEAR(r3.determinant(), 1.0, 1e-12);
}

TEST(Skeleton, ZeroNetGivesUniformWeights) {
  MlpParams w(MlpSpec{2, 3, {4}, HiddenActivation::softplus, OutputActivation::softmax});
  const auto s = skin_weights(w, Eigen::Vector2d(0.5, 0.1));
  for (int i = 0; i < 3; ++i) EXPECT_DOUBLE_EQ(s.w(i), 1.0 / 3.0);
}

TEST(Skeleton, WeightsOnSimplex) {
  std::mt19937_64 rng(1);
  const MlpParams w = random_skinning(2, 4, 16, 3);
  Batch x(2, 100000);
  for (Eigen::Index j = 0; j < x.cols(); ++j) x.col(j) = random_vec(rng, 2, 5.0);
  const auto tape = mlp_forward_batch(w, x);
  EXPECT_GE(tape.output.minCoeff(), 0.0);
  EXPECT_LT((tape.output.colwise().sum().array() - 1.0).abs().maxCoeff(), 1e-9);
  EXPECT_THROW(skin_weights(w, Eigen::Vector2d(INFINITY, 0.0)), std::invalid_argument);
}

TEST(Skeleton, IdentityTransformsAreIdentityMap) {
  std::mt19937_64 rng(2);
  for (int dim : {2, 3}) {
    const MlpParams w = random_skinning(dim, 3, 8, rng());
    const BoneTransformSet id = BoneTransformSet::identity(3, dim);
    for (int t = 0; t < 100; ++t) {
      const Vec x = random_vec(rng, dim, 3.0);
      EXPECT_EQ(lbs_deform(w, x, id), x);
      EXPECT_EQ(lbs_spatial_jacobian(w, x, id), Mat::Identity(dim, dim));
    }
  }
}

TEST(Skeleton, OneHotTranslation) {
  const MlpParams w = snarf::testing::one_hot_skinning(2, 2, 1);
  BoneTransformSet b = BoneTransformSet::identity(2, 2);
  b.transforms[1] = RigidTransform::translate(Eigen::Vector2d(1.0, 0.0));
  const Vec x = Eigen::Vector2d(0.2, 0.3);
  EXPECT_NEAR((lbs_deform(w, x, b) - Vec(Eigen::Vector2d(1.2, 0.3))).norm(), 0.0, 1e-15);
}

TEST(Skeleton, HalfHalfBlend) {
  MlpParams w(MlpSpec{2, 2, {3}, HiddenActivation::softplus, OutputActivation::softmax});
  BoneTransformSet b = BoneTransformSet::identity(2, 2);
  b.transforms[0] = RigidTransform::translate(Eigen::Vector2d(1.0, 0.0));
  b.transforms[1] = RigidTransform::translate(Eigen::Vector2d(0.0, 1.0));
  const Vec d = lbs_deform(w, Eigen::Vector2d::Zero(), b);
  EXPECT_DOUBLE_EQ(d(0), 0.5);
  EXPECT_DOUBLE_EQ(d(1), 0.5);
}

TEST(Skeleton, ConstantWeightsJacobianIsBlendedRotation) {
  MlpParams w(MlpSpec{2, 2, {3}, HiddenActivation::softplus, OutputActivation::softmax});
  w.bias(1) << 0.3, -0.4;
  std::mt19937_64 rng(5);
  const BoneTransformSet b = random_frame(rng, 2, 2);
  const Eigen::VectorXd wt = skin_weights(w, Eigen::Vector2d::Zero()).w;
  const Mat expect = wt(0) * b.transforms[0].rotation + wt(1) * b.transforms[1].rotation;
  EXPECT_NEAR((lbs_spatial_jacobian(w, Eigen::Vector2d(0.4, 0.9), b) - expect).norm(), 0.0, 1e-14);
}

TEST(Skeleton, SpatialJacobianMatchesFiniteDifferences) {
  std::mt19937_64 rng(6);
  int bad = 0;
  for (int t = 0; t < 100; ++t) {
    const int dim = t % 2 == 0 ? 2 : 3;
    const MlpParams w = random_skinning(dim, 3, 8, rng());
    const BoneTransformSet b = random_frame(rng, 3, dim);
    const Vec x = random_vec(rng, dim);
    const Mat jac = lbs_spatial_jacobian(w, x, b);
    const double h = 1e-6;
    for (int k = 0; k < dim; ++k) {
      Vec xp = x, xm = x;
      xp(k) += h;
      xm(k) -= h;
      const Vec fd = (lbs_deform(w, xp, b) - lbs_deform(w, xm, b)) / (2 * h);
      for (int i = 0; i < dim; ++i) bad += rel_err(jac(i, k), fd(i), 1e-6) > 1e-5;
    }
  }
  EXPECT_EQ(bad, 0);
}

TEST(Skeleton, ParamGradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(7);
  int bad = 0;
  for (int t = 0; t < 100; ++t) {
    const int dim = t % 2 == 0 ? 2 : 3;
    const MlpParams w = random_skinning(dim, 2, 8, rng());
    const BoneTransformSet b = random_frame(rng, 2, dim);
    const Vec x = random_vec(rng, dim);
    const Vec up = random_vec(rng, dim);
    const MlpGrad g = lbs_param_gradient(w, x, b, up);
    const double h = 1e-6;
    for (std::size_t i = 0; i < w.size(); i += 7) {
      MlpParams plus = w, minus = w;
      plus.values()[i] += h;
      minus.values()[i] -= h;
      const double fd = up.dot(lbs_deform(plus, x, b) - lbs_deform(minus, x, b)) / (2 * h);
      bad += rel_err(g.values()[i], fd, 1e-4) > 1e-5;
    }
  }
  EXPECT_EQ(bad, 0);
}

TEST(Skeleton, ParamGradientVanishesInDegenerateCases) {
  std::mt19937_64 rng(8);
  const MlpParams w = random_skinning(2, 3, 8, 1);
  const BoneTransformSet b = random_frame(rng, 3, 2);
  const Vec x = Eigen::Vector2d(0.2, 0.1);
  EXPECT_EQ(lbs_param_gradient(w, x, b, Vec::Zero(2)).max_abs(), 0.0);
  BoneTransformSet same = b;
  same.transforms.assign(3, b.transforms[0]);
  EXPECT_LT(lbs_param_gradient(w, x, same, Eigen::Vector2d(1.0, -2.0)).max_abs(), 1e-14);
}

TEST(Skeleton, WeightsIgnorePose) {
  // The weight field API has no pose argument; deforming under two frames
  // uses the same weights, so d = sum w_i B_i x can be reconstructed.
  std::mt19937_64 rng(9);
  const MlpParams w = random_skinning(2, 2, 8, 4);
  const Vec x = Eigen::Vector2d(0.3, 0.2);
  const Eigen::VectorXd wt = skin_weights(w, x).w;
  for (int t = 0; t < 5; ++t) {
    const BoneTransformSet b = random_frame(rng, 2, 2);
    const Vec expect = wt(0) * b.transforms[0].apply(x) + wt(1) * b.transforms[1].apply(x);
    EXPECT_NEAR((lbs_deform(w, x, b) - expect).norm(), 0.0, 1e-14);
  }
}

TEST(Skeleton, StickKinematics) {
  const StickGeometry g;
  const std::vector<double> zero{0.0};
  EXPECT_TRUE(forward_kinematics_stick(zero, g).is_identity());

  const std::vector<double> right{M_PI / 2};
  const BoneTransformSet b = forward_kinematics_stick(right, g);
  const Vec pivot = g.joint(0);
  EXPECT_NEAR((b.transforms[1].apply(pivot) - pivot).norm(), 0.0, 1e-15);
  EXPECT_EQ(b.transforms[0].rotation, Mat::Identity(2, 2));
  EXPECT_EQ(b.transforms[0].translation, Vec::Zero(2));
}

TEST(Skeleton, ChordLength) {
  const StickGeometry g;
  const Vec p = g.joint(0) + Vec(Eigen::Vector2d(1.0, 0.0));
  for (double theta : {0.1, 0.5, 1.0, 2.0, -1.3, 3.0}) {
    const std::vector<double> a{theta};
    const BoneTransformSet b = forward_kinematics_stick(a, g);
    EXPECT_NEAR((b.transforms[1].apply(p) - p).norm(), 2.0 * std::sin(std::abs(theta) / 2.0), 1e-14);
  }
}

TEST(Skeleton, CapsuleKinematicsComposeDownChain) {
  CapsuleGeometry g;
  g.bone_lengths = {1.0, 1.0, 1.0};
  const std::vector<double> a{0.4, -0.9};
  const BoneTransformSet b = forward_kinematics_capsule(a, g);
  ASSERT_EQ(b.bone_count(), 3);
  for (const auto& t : b.transforms) EXPECT_TRUE(t.is_rigid());
  // The second joint moves with bone 1 and stays fixed under bone 2's transform.
  EXPECT_NEAR((b.transforms[1].apply(g.joint(1)) - b.transforms[2].apply(g.joint(1))).norm(), 0.0, 1e-14);
  EXPECT_NEAR((b.transforms[0].apply(g.joint(0)) - b.transforms[1].apply(g.joint(0))).norm(), 0.0, 1e-14);
}
