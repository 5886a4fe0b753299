#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <vector>

#include "grad_check.hpp"
#include "snarf/baseline.hpp"
#include "snarf/dataset.hpp"
#include "snarf/losses.hpp"
#include "snarf/occupancy.hpp"
#include "snarf/optimizer.hpp"
#include "snarf/trainer.hpp"
#include "test_util.hpp"

using namespace snarf;
using namespace snarf::testing;

namespace {

std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("snarf_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

ExperimentConfig tiny_config() {
  ExperimentConfig c;
  c.frames = 1;
  c.test_frames = 1;
  c.samples_per_frame = 500;
  c.oracle_lattice_cells = 400;
  c.occupancy_net.hidden_widths = {32, 32, 32};
  c.occupancy_net.softplus_beta = 10.0;
  c.skinning_net.hidden_widths = {16, 16};
  c.train.learning_rate = 1e-3;
  c.train.batch_size = 100;
  c.train.epochs = 5;
  return c;
}

std::string file_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace

TEST(Losses, Bce) {
  EXPECT_NEAR(loss_bce(0.5, true), std::log(2.0), 1e-15);
  EXPECT_LE(loss_bce(1.0, true), 1e-6);
  EXPECT_LE(loss_bce(0.0, false), 1e-6);
  EXPECT_GE(loss_bce(0.3, false), 0.0);
  const std::vector<std::uint8_t> labels{1, 0};
  const BatchLoss b = loss_bce_batch(Eigen::Vector2d(0.9, 0.2), labels);
  EXPECT_NEAR(b.value, 0.5 * (-std::log(0.9) - std::log(0.8)), 1e-15);
  EXPECT_NEAR(b.value, 0.164252, 1e-6);
  EXPECT_NEAR(b.grad(0), -0.5 / 0.9, 1e-15);
  EXPECT_NEAR(b.grad(1), 0.5 / 0.8, 1e-15);
}

TEST(Losses, BootstrapBoneStubs) {
  ExperimentConfig c;
  const SkeletonLayout layout = SkeletonLayout::from_config(c);
  std::mt19937_64 rng(1);
  const Batch pts = sample_bone_points(layout, 64, rng);
  for (Eigen::Index j = 0; j < pts.cols(); ++j) {
    EXPECT_NEAR(pts(1, j), 0.0, 1e-15);
    EXPECT_GE(pts(0, j), -1.0);
    EXPECT_LE(pts(0, j), 1.0);
  }
  ModelParams m = small_model(2, 2, 8, 1);
  m.occupancy = constant_occupancy(2, 0.5);
  EXPECT_NEAR(loss_bootstrap_bone(m, pts), std::log(2.0), 1e-15);
  m.occupancy.bias(1)(0) = 60.0;
  EXPECT_LT(loss_bootstrap_bone(m, pts), 1e-6);
}

TEST(Losses, BootstrapBoneDecreasesUnderAdam) {
  ExperimentConfig c;
  const SkeletonLayout layout = SkeletonLayout::from_config(c);
  ModelParams m = small_model(2, 2, 16, 3);
  std::mt19937_64 rng(2);
  const Batch pts = sample_bone_points(layout, 128, rng);
  Adam adam(m.occupancy.size(), AdamSettings{1e-3});
  double prev = loss_bootstrap_bone(m, pts);
  for (int step = 0; step < 50; ++step) {
    MlpGrad g(m.occupancy);
    loss_bootstrap_bone(m, pts, &g);
    adam.step(m.occupancy.values(), g.values());
    const double now = loss_bootstrap_bone(m, pts);
    EXPECT_LT(now, prev) << "step " << step;
    prev = now;
  }
}

TEST(Losses, BootstrapJointStubs) {
  ExperimentConfig c;
  SkeletonLayout layout = SkeletonLayout::from_config(c);
  ModelParams m = small_model(2, 2, 8, 1);
  m.skinning.set_zero();
  EXPECT_EQ(loss_bootstrap_joint(m, layout), 0.0);

  ExperimentConfig c3;
  c3.stick.bone_lengths = {1.0, 1.0, 1.0};
  layout = SkeletonLayout::from_config(c3);
  ASSERT_EQ(layout.joints.size(), 2u);
  ModelParams m3 = small_model(2, 3, 8, 1);
  m3.skinning.set_zero();
  const double expect = (std::pow(1.0 / 3 - 0.5, 2) * 2 + std::pow(1.0 / 3, 2)) / 3.0;
  EXPECT_NEAR(loss_bootstrap_joint(m3, layout), expect, 1e-15);
  EXPECT_NEAR(expect, 0.055556, 1e-6);
}

TEST(Losses, BootstrapJointGradient) {
  ExperimentConfig c;
  const SkeletonLayout layout = SkeletonLayout::from_config(c);
  const ModelParams m = small_model(2, 2, 8, 4);
  MlpGrad g(m.skinning);
  loss_bootstrap_joint(m, layout, nullptr, &g);
  const double h = 1e-6;
  for (std::size_t i = 0; i < m.skinning.size(); ++i) {
    ModelParams p = m, q = m;
    p.skinning.values()[i] += h;
    q.skinning.values()[i] -= h;
    const double fd = (loss_bootstrap_joint(p, layout) - loss_bootstrap_joint(q, layout)) / (2 * h);
    EXPECT_LT(rel_err(g.values()[i], fd, 1e-6), 1e-5);
  }
}

TEST(Adam, MatchesHandComputation) {
  std::vector<double> p{1.0, -2.0};
  Adam adam(2, AdamSettings{0.1, 0.9, 0.999, 1e-8});
  const std::vector<double> g{0.5, -3.0};
  adam.step(p, g);
  // First step: m_hat = g and v_hat = g^2, so the step is lr * sign(g).
  EXPECT_NEAR(p[0], 1.0 - 0.1 * 0.5 / (0.5 + 1e-8), 1e-15);
  EXPECT_NEAR(p[1], -2.0 + 0.1 * 3.0 / (3.0 + 1e-8), 1e-15);
  double m = 0.1 * 0.5, v = 0.001 * 0.25;
  const std::vector<double> g2{0.25, 0.0};
  const double before = p[0];
  adam.step(p, g2);
  m = 0.9 * m + 0.1 * 0.25;
  v = 0.999 * v + 0.001 * 0.0625;
  const double step = 0.1 * (m / (1 - 0.81)) / (std::sqrt(v / (1 - 0.999 * 0.999)) + 1e-8);
  EXPECT_NEAR(p[0], before - step, 1e-15);
  EXPECT_EQ(adam.steps(), 2);
}

TEST(Trainer, ZeroEpochsReturnsInitialModel) {
  ExperimentConfig c = tiny_config();
  c.train.epochs = 0;
  const Dataset data = generate_dataset(c, Split::train);
  const TrainResult r = train(data, c, ModelKind::forward_skinning);
  EXPECT_TRUE(r.model == initial_model(c, ModelKind::forward_skinning));
  EXPECT_TRUE(r.metrics.empty());
  EXPECT_FALSE(r.aborted);
}

TEST(Trainer, BootstrapOnlyInFirstEpochs) {
  ExperimentConfig c = tiny_config();
  c.train.epochs = 3;
  c.train.bootstrap_epochs = 1;
  const Dataset data = generate_dataset(c, Split::train);
  const TrainResult r = train(data, c, ModelKind::forward_skinning);
  ASSERT_EQ(r.metrics.size(), 3u);
  EXPECT_GT(r.metrics[0].loss_bone, 0.0);
  EXPECT_GT(r.metrics[0].loss_joint, 0.0);
  for (std::size_t e = 1; e < 3; ++e) {
    EXPECT_EQ(r.metrics[e].loss_bone, 0.0);
    EXPECT_EQ(r.metrics[e].loss_joint, 0.0);
  }
}

TEST(Trainer, SeedDeterministicAcrossThreadCounts) {
  ExperimentConfig c = tiny_config();
  c.train.epochs = 2;
  const Dataset data = generate_dataset(c, Split::train);
  const auto dir_a = scratch_dir("det_a");
  const auto dir_b = scratch_dir("det_b");
  setenv("SNARF_THREADS", "1", 1);
  const TrainResult a = train(data, c, ModelKind::forward_skinning, TrainOptions{dir_a});
  setenv("SNARF_THREADS", "3", 1);
  const TrainResult b = train(data, c, ModelKind::forward_skinning, TrainOptions{dir_b});
  unsetenv("SNARF_THREADS");
  EXPECT_TRUE(a.model == b.model);
  EXPECT_EQ(file_bytes(dir_a / "model.snrf"), file_bytes(dir_b / "model.snrf"));
  EXPECT_EQ(file_bytes(dir_a / "metrics.csv"), file_bytes(dir_b / "metrics.csv"));
  c.train.seed = 1;
  const TrainResult other = train(data, c, ModelKind::forward_skinning);
  EXPECT_FALSE(other.model == a.model);
}

TEST(Trainer, WritesArtifacts) {
  ExperimentConfig c = tiny_config();
  c.train.epochs = 2;
  const Dataset data = generate_dataset(c, Split::train);
  const Dataset test = generate_dataset(c, Split::test);
  const auto dir = scratch_dir("artifacts");
  int calls = 0;
  const TrainResult r = train(data, c, ModelKind::forward_skinning,
                              TrainOptions{dir, &test, [&](const EpochMetrics&) { ++calls; }});
  EXPECT_EQ(calls, 2);
  EXPECT_TRUE(std::filesystem::exists(dir / "checkpoint.snrf"));
  EXPECT_TRUE(std::filesystem::exists(dir / "metrics.csv"));
  const Checkpoint saved = load_checkpoint(dir / "model.snrf");
  EXPECT_TRUE(from_checkpoint(saved) == r.model);
  const auto stored = checkpoint_config(saved);
  ASSERT_TRUE(stored.has_value());
  EXPECT_EQ(config_to_json_text(*stored), config_to_json_text(c));
  std::ifstream csv(dir / "metrics.csv");
  std::string header;
  std::getline(csv, header);
  EXPECT_EQ(header, "epoch,loss_bce,loss_bone,loss_joint,val_iou_bbox,val_iou_surface");
  EXPECT_TRUE(std::isfinite(r.metrics.back().val_iou_bbox));
}

TEST(Trainer, NonFiniteLossAbortsAndKeepsLastGood) {
  ExperimentConfig c = tiny_config();
  c.train.epochs = 3;
  c.train.learning_rate = 1e300;
  const Dataset data = generate_dataset(c, Split::train);
  const auto dir = scratch_dir("abort");
  const TrainResult r = train(data, c, ModelKind::forward_skinning, TrainOptions{dir});
  EXPECT_TRUE(r.aborted);
  EXPECT_FALSE(r.message.empty());
  EXPECT_TRUE(r.model.occupancy.all_finite());
  EXPECT_TRUE(r.model.skinning.all_finite());
  EXPECT_FALSE(std::filesystem::exists(dir / "model.snrf"));
  if (std::filesystem::exists(dir / "checkpoint.snrf")) {
    EXPECT_TRUE(from_checkpoint(load_checkpoint(dir / "checkpoint.snrf")) == r.model);
  }
}

TEST(Trainer, OverfitsOneFrame) {
  ExperimentConfig c = tiny_config();
  c.train.epochs = 400;
  c.train.learning_rate = 5e-3;
  const Dataset data = generate_dataset(c, Split::train);
  const TrainResult r = train(data, c, ModelKind::forward_skinning);
  ASSERT_FALSE(r.aborted);
  EXPECT_LT(r.metrics.back().loss_bce, 0.2 * r.metrics.front().loss_bce);
  EXPECT_LT(r.metrics.back().loss_bce, 0.12);
}

TEST(Baseline, ReducesToCanonicalOccupancy) {
  std::mt19937_64 rng(5);
  ModelParams m = small_model(2, 2, 8, 6, ModelKind::backward_lbs);
  const Eigen::VectorXd pose = Eigen::VectorXd::Zero(1);
  const BoneTransformSet id = BoneTransformSet::identity(2, 2, 1);
  for (int t = 0; t < 20; ++t) {
    const Vec q = random_vec(rng, 2);
    EXPECT_NEAR(baseline_backlbs_forward(m, q, pose, id), occupancy_canonical(m, q, pose), 1e-15);
  }
  for (int hot = 0; hot < 2; ++hot) {
    m.skinning = one_hot_skinning(3, 2, hot);
    for (int t = 0; t < 20; ++t) {
      const BoneTransformSet b = random_frame(rng, 2, 2);
      const Vec q = random_vec(rng, 2);
      EXPECT_NEAR(baseline_backlbs_forward(m, q, pose, b),
                  occupancy_canonical(m, b.transforms[hot].apply_inverse(q), pose), 1e-12);
    }
  }
}

TEST(Baseline, LossGradientMatchesFiniteDifferences) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const GradCheckResult r = check_total_loss_gradient(mini_problem(seed, ModelKind::backward_lbs));
    EXPECT_GE(r.fraction_below(1e-3), 0.99);
    EXPECT_LT(r.worst, 1e-2);
  }
}

TEST(Model, CheckpointRoundTripIsExact) {
  const ModelParams m = small_model(3, 2, 8, 9);
  std::ostringstream a;
  write_checkpoint(a, to_checkpoint(m));
  std::istringstream in(a.str());
  const ModelParams back = from_checkpoint(read_checkpoint(in));
  EXPECT_TRUE(back == m);
  std::ostringstream b;
  write_checkpoint(b, to_checkpoint(back));
  EXPECT_EQ(a.str(), b.str());
}
