#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "snarf/config.hpp"
#include "snarf/dataset.hpp"
#include "snarf/oracle.hpp"
#include "snarf/skeleton.hpp"
#include "test_util.hpp"

using namespace snarf;
using snarf::testing::random_vec;

namespace {

ExperimentConfig small_stick(int frames = 3, int samples = 200) {
  ExperimentConfig c;
  c.frames = frames;
  c.test_frames = 2;
  c.samples_per_frame = samples;
  c.oracle_lattice_cells = 200;
  return c;
}

std::string dataset_bytes(const Dataset& d) {
  std::ostringstream out(std::ios::binary);
  write_dataset(out, d);
  return out.str();
}

// Pixel-center rasterization of the forward-deformed canonical stick: the
// interior is split into small triangles whose corners go through
// ground-truth LBS.
class Raster {
 public:
  Raster(const StickGeometry& g, const BoneTransformSet& frame, const Aabb& box, int pixels)
      : lo_(box.lo), n_(pixels), filled_(static_cast<std::size_t>(pixels) * pixels, 0) {
    size_ = std::max(box.hi(0) - box.lo(0), box.hi(1) - box.lo(1)) / pixels;
    const auto bones = bone_segments(g);
    const int nx = 2000, ny = 200;
    std::vector<Eigen::Vector2d> v((nx + 1) * (ny + 1));
    for (int i = 0; i <= nx; ++i) {
      for (int j = 0; j <= ny; ++j) {
        const Eigen::Vector2d c(g.start() + (g.end() - g.start()) * i / nx, -g.half_width + 2 * g.half_width * j / ny);
        v[i * (ny + 1) + j] = oracle_deform(bones, frame, c);
      }
    }
    for (int i = 0; i < nx; ++i) {
      for (int j = 0; j < ny; ++j) {
        const auto& a = v[i * (ny + 1) + j];
        const auto& b = v[(i + 1) * (ny + 1) + j];
        const auto& c = v[(i + 1) * (ny + 1) + j + 1];
        const auto& d = v[i * (ny + 1) + j + 1];
        fill(a, b, c);
        fill(a, c, d);
      }
    }
  }

  bool at(const Vec& x) const {
    const int i = static_cast<int>(std::floor((x(0) - lo_(0)) / size_));
    const int j = static_cast<int>(std::floor((x(1) - lo_(1)) / size_));
    if (i < 0 || j < 0 || i >= n_ || j >= n_) return false;
    return filled_[static_cast<std::size_t>(j) * n_ + i] != 0;
  }

 private:
  static double cross(const Eigen::Vector2d& a, const Eigen::Vector2d& b, const Eigen::Vector2d& p) {
    return (b(0) - a(0)) * (p(1) - a(1)) - (b(1) - a(1)) * (p(0) - a(0));
  }

  void fill(const Eigen::Vector2d& a, const Eigen::Vector2d& b, const Eigen::Vector2d& c) {
    const double area = cross(a, b, c);
    if (area == 0.0) return;
    const auto pix = [&](double v, int k) { return (v - lo_(k)) / size_; };
    const int i0 = std::max(0, static_cast<int>(std::floor(std::min({pix(a(0), 0), pix(b(0), 0), pix(c(0), 0)}))));
    const int i1 = std::min(n_ - 1, static_cast<int>(std::ceil(std::max({pix(a(0), 0), pix(b(0), 0), pix(c(0), 0)}))));
    const int j0 = std::max(0, static_cast<int>(std::floor(std::min({pix(a(1), 1), pix(b(1), 1), pix(c(1), 1)}))));
    const int j1 = std::min(n_ - 1, static_cast<int>(std::ceil(std::max({pix(a(1), 1), pix(b(1), 1), pix(c(1), 1)}))));
    for (int j = j0; j <= j1; ++j) {
      for (int i = i0; i <= i1; ++i) {
        const Eigen::Vector2d p(lo_(0) + (i + 0.5) * size_, lo_(1) + (j + 0.5) * size_);
        const double u = cross(a, b, p) / area, v = cross(b, c, p) / area, w = cross(c, a, p) / area;
        if (u >= 0 && v >= 0 && w >= 0) filled_[static_cast<std::size_t>(j) * n_ + i] = 1;
      }
    }
  }

  Vec lo_;
  int n_;
  double size_ = 0.0;
  std::vector<std::uint8_t> filled_;
};

}  // namespace

TEST(OracleSkinning, SimplexEverywhere) {
  std::mt19937_64 rng(1);
  const StickGeometry stick;
  CapsuleGeometry capsule;
  int bad = 0;
  for (int t = 0; t < 1000000; ++t) {
    const bool two_d = t % 2 == 0;
    const Vec x = random_vec(rng, two_d ? 2 : 3, 3.0);
    const Eigen::VectorXd w = two_d ? oracle_skinning(stick, x).w : oracle_skinning(capsule, x).w;
    bad += w.minCoeff() < 0.0 || std::abs(w.sum() - 1.0) > 1e-12;
  }
  EXPECT_EQ(bad, 0);
}

TEST(OracleSkinning, Examples) {
  const StickGeometry g;
  // The joint bisector x = 0 is equidistant from both bones.
  for (double y : {0.05, 0.3, 2.0, -1.0}) {
    const auto w = oracle_skinning(g, Eigen::Vector2d(0.0, y)).w;
    EXPECT_NEAR(w(0), 0.5, 1e-15);
    EXPECT_NEAR(w(1), 0.5, 1e-15);
  }
  // On bone 1's segment at distance d2 from bone 0.
  const double eps = 1e-3;
  for (double d2 : {0.1, 0.5, 0.9}) {
    const auto w = oracle_skinning(g, Eigen::Vector2d(d2, 0.0), eps).w;
    const double expect = (1.0 / eps) / (1.0 / eps + 1.0 / (d2 + eps));
    EXPECT_NEAR(w(1), expect, 1e-12);
    EXPECT_GT(w(1), 0.99);
  }
}

TEST(StickOracle, CanonicalPoseMatchesAnalyticTest) {
  std::mt19937_64 rng(2);
  for (bool object : {false, true}) {
    StickGeometry g;
    if (object) g.rigid_object = StickGeometry::default_object();
    const StickOracle oracle(g, forward_kinematics_stick(std::vector<double>{0.0}, g), 300);
    int bad = 0;
    for (int t = 0; t < 20000; ++t) {
      const Vec x = Eigen::Vector2d(std::uniform_real_distribution<double>(-1.2, 1.2)(rng),
                                    std::uniform_real_distribution<double>(-0.3, 0.7)(rng));
      bad += oracle.inside(x) != g.inside_canonical(x);
    }
    EXPECT_EQ(bad, 0);
    EXPECT_TRUE(oracle.inside(Eigen::Vector2d::Zero()));
  }
}

TEST(StickOracle, FarPointIsOutside) {
  StickGeometry g;
  g.rigid_object = StickGeometry::default_object();
  for (double deg : {-120.0, -45.0, 0.0, 90.0}) {
    const std::vector<double> a{deg * M_PI / 180.0};
    const BoneTransformSet frame = forward_kinematics_stick(a, g);
    const StickOracle oracle(g, frame, 200);
    const double r = oracle.deformed_bounds().half_diagonal();
    EXPECT_FALSE(oracle.inside(oracle.deformed_bounds().center() + Vec(Eigen::Vector2d(10 * r, 0.0))));
    EXPECT_FALSE(oracle_occupancy(g, frame, Vec(Eigen::Vector2d(-7 * r, 10 * r)), 200));
  }
}

TEST(StickOracle, AgreesWithRasterizationAt45Degrees) {
  const StickGeometry g;
  const BoneTransformSet frame = forward_kinematics_stick(std::vector<double>{M_PI / 4}, g);
  const StickOracle oracle(g, frame);
  const Aabb box = oracle.deformed_bounds().inflated(1.1);
  const Raster raster(g, frame, box, 2000);
  std::mt19937_64 rng(3);
  int agree = 0, inside = 0;
  const int n = 10000;
  for (int t = 0; t < n; ++t) {
    const Vec x = Eigen::Vector2d(std::uniform_real_distribution<double>(box.lo(0), box.hi(0))(rng),
                                  std::uniform_real_distribution<double>(box.lo(1), box.hi(1))(rng));
    const bool o = oracle.inside(x);
    agree += o == raster.at(x);
    inside += o;
  }
  EXPECT_GE(agree, 0.999 * n);
  EXPECT_GT(inside, 500);
}

TEST(CapsuleOracle, Examples) {
  ExperimentConfig c;
  c.shape = ShapeKind::capsule3d;
  c.train_angle_range = {{-60.0, 60.0}};
  const std::vector<double> rest{0.0};
  const CapsuleOracle canonical(c.capsule, pose_frame(c, rest));
  EXPECT_TRUE(canonical.inside(Eigen::Vector3d(-0.5, 0.0, 0.0)));
  EXPECT_TRUE(canonical.inside(Eigen::Vector3d(0.5, 0.0, 0.0)));
  EXPECT_FALSE(canonical.inside(Eigen::Vector3d(0.0, 0.3, 0.0)));
  EXPECT_FALSE(canonical.inside(Eigen::Vector3d(20.0, -15.0, 9.0)));

  // Bent 90 degrees about z: the child axis runs from the joint along +y.
  const std::vector<double> bent{90.0};
  const CapsuleOracle oracle(c.capsule, pose_frame(c, bent));
  const Eigen::Vector3d p(0.05, 0.5, 0.1);
  EXPECT_LT(std::hypot(p(0), p(2)), c.capsule.radius);
  EXPECT_TRUE(oracle.inside(p));
  EXPECT_FALSE(oracle.inside(Eigen::Vector3d(0.5, 0.0, 0.0)));
  EXPECT_FALSE(oracle.inside(Eigen::Vector3d(0.0, 1.3, 0.0)));
  EXPECT_TRUE(oracle.inside(Eigen::Vector3d(0.0, 1.2, 0.0)));
}

TEST(Dataset, EmptyWhenNoFrames) {
  ExperimentConfig c = small_stick(0);
  const Dataset d = generate_dataset(c, Split::train);
  EXPECT_TRUE(d.frames.empty());
  EXPECT_EQ(d.manifest.frame_count, 0u);
  EXPECT_EQ(d.manifest.split, "train");
  std::istringstream in(dataset_bytes(d));
  EXPECT_TRUE(read_dataset(in) == d);
}

TEST(Dataset, RoundTripAndSeedDeterminism) {
  const ExperimentConfig c = small_stick();
  const Dataset a = generate_dataset(c, Split::train);
  const Dataset b = generate_dataset(c, Split::train);
  ASSERT_EQ(a.frames.size(), 3u);
  EXPECT_EQ(a.sample_count(), 600u);
  const std::string bytes = dataset_bytes(a);
  EXPECT_EQ(bytes, dataset_bytes(b));
  std::istringstream in(bytes);
  const Dataset back = read_dataset(in);
  EXPECT_TRUE(back == a);
  EXPECT_EQ(dataset_bytes(back), bytes);

  ExperimentConfig other = c;
  other.seed = 9;
  EXPECT_NE(dataset_bytes(generate_dataset(other, Split::train)), bytes);

  const auto dir = std::filesystem::temp_directory_path() / "snarf_test_dataset";
  std::filesystem::remove_all(dir);
  save_dataset(dir, "train", a);
  EXPECT_TRUE(load_dataset(dir / "train.snrd") == a);
  EXPECT_TRUE(std::filesystem::exists(dir / "train.manifest.json"));
}

TEST(Dataset, RejectsCorruptFiles) {
  const Dataset d = generate_dataset(small_stick(2, 50), Split::train);
  const std::string bytes = dataset_bytes(d);

  std::string bad_magic = bytes;
  bad_magic[0] = 'X';
  std::istringstream in1(bad_magic);
  EXPECT_THROW(read_dataset(in1), std::runtime_error);

  std::istringstream in2(bytes.substr(0, bytes.size() - 7));
  try {
    read_dataset(in2);
    ADD_FAILURE() << "truncated file accepted";
  } catch (const std::runtime_error& e) {
    EXPECT_NE(std::string(e.what()).find("byte offset"), std::string::npos) << e.what();
  }

  // Manifest claims two frames, payload has one.
  Dataset one = d;
  one.frames.pop_back();
  one.manifest.frame_count = 1;
  const std::string one_bytes = dataset_bytes(one);
  const std::size_t header = 16 + d.manifest.to_json_text().size();
  ASSERT_EQ(one.manifest.to_json_text().size(), d.manifest.to_json_text().size());
  std::istringstream in3(bytes.substr(0, header) + one_bytes.substr(header));
  EXPECT_THROW(read_dataset(in3), std::runtime_error);
  // And the reverse: one frame declared, two present.
  std::istringstream in4(one_bytes.substr(0, header) + bytes.substr(header));
  EXPECT_THROW(read_dataset(in4), std::runtime_error);

  Dataset mismatch = d;
  mismatch.manifest.frame_count = 5;
  std::ostringstream sink;
  EXPECT_THROW(write_dataset(sink, mismatch), std::invalid_argument);
}

TEST(Dataset, UniformPrevalenceMatchesAreaRatio) {
  ExperimentConfig c = small_stick(1, 40000);
  const BoneTransformSet rest = pose_frame(c, std::vector<double>{0.0});
  const FrameSample f = sample_frame(c, rest, 17);
  int uniform = 0, inside = 0;
  for (Eigen::Index k = 0; k < f.size(); ++k) {
    if (f.kinds[k] != SampleKind::uniform) continue;
    ++uniform;
    inside += f.labels[k];
  }
  // Stick 2 x 0.2 inside its bounding box inflated by 1.1 in each direction.
  const double ratio = (2.0 * 0.2) / (2.0 * 1.1 * 0.2 * 1.1);
  EXPECT_EQ(uniform, 20000);
  EXPECT_NEAR(static_cast<double>(inside) / uniform, ratio, 0.02);
}

TEST(Dataset, NearSurfaceSamplesHugBoundary) {
  ExperimentConfig c = small_stick(1, 4000);
  c.regime = Regime::topology;
  const double sigma = c.near_surface_sigma;
  const BoneTransformSet frame = pose_frame(c, std::vector<double>{50.0});
  const FrameSample f = sample_frame(c, frame, 5);
  const StickOracle oracle(c.effective_stick(), frame, c.oracle_lattice_cells);
  std::mt19937_64 rng(6);
  int near = 0, close = 0;
  for (Eigen::Index k = 0; k < f.size(); ++k) {
    if (f.kinds[k] != SampleKind::near_surface) continue;
    ++near;
    const Vec p = f.points.col(k);
    EXPECT_EQ(f.labels[k], oracle.inside(p) ? 1 : 0);
    // A label change inside the 3-sigma disc means the boundary crosses it.
    bool flip = false;
    for (int s = 0; s < 256 && !flip; ++s) {
      const double r = 3 * sigma * std::sqrt((s + 0.5) / 256.0);
      const double a = 2.399963229728653 * s;
      flip = oracle.inside(p + Vec(Eigen::Vector2d(r * std::cos(a), r * std::sin(a)))) != oracle.inside(p);
    }
    close += flip;
  }
  EXPECT_EQ(near, 2000);
  EXPECT_GE(close, 0.95 * near);
}

TEST(Dataset, RegimesAndAngles) {
  ExperimentConfig c = small_stick(7);
  c.regime = Regime::interpolation;
  c.train_step_deg = 40.0;
  const auto lattice = split_angles_deg(c, Split::train);
  ASSERT_EQ(lattice.size(), 7u);
  for (const auto& a : lattice) {
    const double k = (a[0] + 60.0) / 40.0;
    EXPECT_NEAR(k, std::round(k), 1e-12);
  }
  c.frames_per_train_pose = 2;
  EXPECT_EQ(split_angles_deg(c, Split::train).size(), 8u);
  c.train_step_deg = 10.0;
  EXPECT_EQ(split_angles_deg(c, Split::train).size(), 26u);
  c.frames_per_train_pose = 0;
  c.regime = Regime::extrapolation;
  for (const auto& a : split_angles_deg(c, Split::test)) EXPECT_GE(std::abs(a[0]), 60.0);
  for (const auto& a : split_angles_deg(c, Split::train)) EXPECT_LE(std::abs(a[0]), 60.0);
  c.regime = Regime::topology;
  EXPECT_TRUE(generate_dataset(c, Split::train).manifest.rigid_object);
}

TEST(Config, RejectsBadFields) {
  const ExperimentConfig ok = config_from_json_text(R"({"regime":"interpolation","train_step_deg":20})");
  EXPECT_EQ(ok.regime, Regime::interpolation);
  EXPECT_TRUE(config_from_json_text(config_to_json_text(ok)).train_step_deg == 20.0);
  EXPECT_THROW(config_from_json_text(R"({"regime":"sideways"})"), ConfigError);
  EXPECT_THROW(config_from_json_text(R"({"train_step_deg":0})"), ConfigError);
  EXPECT_THROW(config_from_json_text(R"({"train_angle_range":[[30,-30]]})"), ConfigError);
  EXPECT_THROW(config_from_json_text(R"({"frames":-1})"), ConfigError);
  EXPECT_THROW(config_from_json_text(R"({"no_such_field":1})"), ConfigError);
  EXPECT_THROW(config_from_json_text(R"({"stick":{"half_width":-0.1}})"), ConfigError);
  EXPECT_THROW(config_from_json_text("{not json"), ConfigError);
}
