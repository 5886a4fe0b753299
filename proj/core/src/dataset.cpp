#include "snarf/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <set>
#include <stdexcept>

#include <json.hpp>

#include "detail/binary_io.hpp"
#include "snarf/oracle.hpp"
#include "snarf/parallel.hpp"
#include "snarf/skeleton.hpp"

namespace snarf {

using nlohmann::json;

namespace {

constexpr char kMagic[4] = {'S', 'N', 'R', 'D'};

std::mt19937_64 make_rng(std::uint64_t seed, Split split, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(split == Split::train ? 0x7a11 : 0x7e57),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
  return std::mt19937_64(seq);
}

double draw_from(const std::vector<AngleInterval>& intervals, std::mt19937_64& rng) {
  double total = 0.0;
  for (const auto& i : intervals) total += i.hi_deg - i.lo_deg;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  double s = unit(rng) * total;
  for (const auto& i : intervals) {
    const double len = i.hi_deg - i.lo_deg;
    if (s <= len) return i.lo_deg + s;
    s -= len;
  }
  return intervals.back().hi_deg;
}

std::vector<double> lattice(const std::vector<AngleInterval>& intervals, double step) {
  std::set<double> values;
  for (const auto& i : intervals) {
    const auto count = static_cast<long>(std::floor((i.hi_deg - i.lo_deg) / step + 1e-9));
    for (long k = 0; k <= count; ++k) values.insert(i.lo_deg + static_cast<double>(k) * step);
  }
  return {values.begin(), values.end()};
}

}  // namespace

void FrameSample::validate() const {
  transforms.validate();
  if (points.rows() != transforms.dim()) throw std::invalid_argument("frame: point dimension does not match transforms");
  if (labels.size() != static_cast<std::size_t>(points.cols()) || kinds.size() != labels.size()) {
    throw std::invalid_argument("frame: points, labels and kinds differ in length");
  }
}

bool FrameSample::operator==(const FrameSample& o) const {
  if (transforms.bone_count() != o.transforms.bone_count() || transforms.pose != o.transforms.pose) return false;
  for (int i = 0; i < transforms.bone_count(); ++i) {
    if (transforms.transforms[i].rotation != o.transforms.transforms[i].rotation ||
        transforms.transforms[i].translation != o.transforms.transforms[i].translation) {
      return false;
    }
  }
  return points.rows() == o.points.rows() && points.cols() == o.points.cols() && points == o.points &&
         labels == o.labels && kinds == o.kinds;
}

std::string DatasetManifest::to_json_text() const {
  json j;
  j["name"] = name;
  j["split"] = split;
  j["config"] = config.empty() ? json(nullptr) : json::parse(config);
  j["frame_count"] = frame_count;
  j["dim"] = dim;
  j["bones"] = bones;
  j["pose_dim"] = pose_dim;
  j["rigid_object"] = rigid_object;
  return j.dump(2);
}

DatasetManifest DatasetManifest::from_json_text(const std::string& text) {
  DatasetManifest m;
  try {
    const json j = json::parse(text);
    m.name = j.at("name").get<std::string>();
    m.split = j.at("split").get<std::string>();
    m.config = j.at("config").is_null() ? std::string() : j.at("config").dump();
    m.frame_count = j.at("frame_count").get<std::uint64_t>();
    m.dim = j.at("dim").get<int>();
    m.bones = j.at("bones").get<int>();
    m.pose_dim = j.at("pose_dim").get<int>();
    m.rigid_object = j.at("rigid_object").get<bool>();
  } catch (const json::exception& e) {
    throw std::runtime_error(std::string("dataset manifest: ") + e.what());
  }
  if (m.dim < 1 || m.dim > kMaxDim || m.bones < 1 || m.pose_dim < 0) {
    throw std::runtime_error("dataset manifest: invalid dimensions");
  }
  return m;
}

std::size_t Dataset::sample_count() const {
  std::size_t n = 0;
  for (const auto& f : frames) n += static_cast<std::size_t>(f.size());
  return n;
}

std::vector<std::vector<double>> split_angles_deg(const ExperimentConfig& config, Split split) {
  const int joints = config.joint_count();
  std::vector<std::vector<double>> out;
  if (split == Split::train && config.regime == Regime::interpolation) {
    const std::vector<double> values = lattice(config.train_angle_range, config.train_step_deg);
    std::vector<std::vector<double>> grid{{}};
    for (int j = 0; j < joints; ++j) {
      std::vector<std::vector<double>> next;
      for (const auto& prefix : grid) {
        for (double v : values) {
          auto p = prefix;
          p.push_back(v);
          next.push_back(std::move(p));
        }
      }
      grid = std::move(next);
    }
    const std::size_t count = config.frames_per_train_pose > 0
                                  ? grid.size() * static_cast<std::size_t>(config.frames_per_train_pose)
                                  : static_cast<std::size_t>(config.frames);
    for (std::size_t k = 0; k < count; ++k) out.push_back(grid[k % grid.size()]);
    return out;
  }
  const bool train = split == Split::train;
  const auto& range =
      train || config.regime == Regime::interpolation ? config.train_angle_range : config.test_angle_range;
  const int count = train ? config.frames : config.test_frames;
  std::mt19937_64 rng = make_rng(config.seed, split, ~0ull);
  for (int k = 0; k < count; ++k) {
    std::vector<double> angles;
    for (int j = 0; j < joints; ++j) angles.push_back(draw_from(range, rng));
    out.push_back(std::move(angles));
  }
  return out;
}

BoneTransformSet pose_frame(const ExperimentConfig& config, std::span<const double> angles_deg) {
  std::vector<double> radians;
  for (double a : angles_deg) radians.push_back(a * std::numbers::pi / 180.0);
  return config.shape == ShapeKind::stick ? forward_kinematics_stick(radians, config.effective_stick())
                                          : forward_kinematics_capsule(radians, config.capsule);
}

FrameSample sample_frame(const ExperimentConfig& config, const BoneTransformSet& frame, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const int n = config.samples_per_frame;
  const int n_uniform = n / 2;
  const int n_near = n - n_uniform;
  const int d = config.dim();

  std::optional<StickOracle> stick;
  std::optional<CapsuleOracle> capsule;
  Aabb box;
  Batch boundary;
  if (config.shape == ShapeKind::stick) {
    stick.emplace(config.effective_stick(), frame, config.oracle_lattice_cells, config.oracle_weight_eps);
    box = stick->deformed_bounds().inflated(config.bbox_inflation);
  } else {
    capsule.emplace(config.capsule, frame);
    box = capsule->deformed_bounds().inflated(config.bbox_inflation);
  }

  FrameSample out;
  out.transforms = frame;
  out.points.resize(d, n);
  out.labels.resize(n);
  out.kinds.resize(n);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int k = 0; k < n_uniform; ++k) {
    for (int r = 0; r < d; ++r) out.points(r, k) = box.lo(r) + unit(rng) * (box.hi(r) - box.lo(r));
    out.kinds[k] = SampleKind::uniform;
  }
  boundary = stick ? stick->sample_boundary(rng, n_near) : capsule->sample_boundary(rng, n_near);
  std::normal_distribution<double> noise(0.0, config.near_surface_sigma);
  for (int k = 0; k < n_near; ++k) {
    for (int r = 0; r < d; ++r) out.points(r, n_uniform + k) = boundary(r, k) + noise(rng);
    out.kinds[n_uniform + k] = SampleKind::near_surface;
  }
  for (int k = 0; k < n; ++k) {
    const Vec p = out.points.col(k);
    out.labels[k] = (stick ? stick->inside(p) : capsule->inside(p)) ? 1 : 0;
  }
  return out;
}

Dataset generate_dataset(const ExperimentConfig& config, Split split) {
  config.validate();
  Dataset data;
  data.manifest.name = config.name;
  data.manifest.split = split == Split::train ? "train" : "test";
  data.manifest.config = json::parse(config_to_json_text(config)).dump();
  data.manifest.dim = config.dim();
  data.manifest.bones = config.bone_count();
  data.manifest.pose_dim = config.joint_count();
  data.manifest.rigid_object = config.has_rigid_object();

  const auto angles = split_angles_deg(config, split);
  data.frames.resize(angles.size());
  parallel_for(angles.size(), [&](std::size_t k) {
    const BoneTransformSet frame = pose_frame(config, angles[k]);
    std::mt19937_64 seeder = make_rng(config.seed, split, k);
    data.frames[k] = sample_frame(config, frame, seeder());
  });
  data.manifest.frame_count = data.frames.size();
  return data;
}

void write_dataset(std::ostream& out, const Dataset& dataset) {
  if (dataset.manifest.frame_count != dataset.frames.size()) {
    throw std::invalid_argument("write_dataset: manifest frame count does not match frames");
  }
  detail::BinaryWriter w(out);
  w.bytes(kMagic, 4);
  w.u32(kDatasetVersion);
  w.string(dataset.manifest.to_json_text());
  for (const auto& f : dataset.frames) {
    f.validate();
    const int d = f.transforms.dim();
    w.u32(static_cast<std::uint32_t>(f.transforms.bone_count()));
    w.u32(static_cast<std::uint32_t>(d));
    for (const auto& t : f.transforms.transforms) {
      for (int r = 0; r < d; ++r) {
        for (int c = 0; c < d; ++c) w.f64(t.rotation(r, c));
      }
      for (int r = 0; r < d; ++r) w.f64(t.translation(r));
    }
    w.u32(static_cast<std::uint32_t>(f.transforms.pose.size()));
    for (Eigen::Index i = 0; i < f.transforms.pose.size(); ++i) w.f64(f.transforms.pose(i));
    w.u64(static_cast<std::uint64_t>(f.size()));
    for (Eigen::Index k = 0; k < f.size(); ++k) {
      for (int r = 0; r < d; ++r) w.f64(f.points(r, k));
    }
    w.bytes(f.labels.data(), f.labels.size());
    w.bytes(f.kinds.data(), f.kinds.size());
  }
  if (!out) throw std::runtime_error("write_dataset: stream error");
}

Dataset read_dataset(std::istream& in) {
  detail::BinaryReader r(in, "dataset");
  char magic[4];
  r.bytes(magic, 4);
  if (!std::equal(magic, magic + 4, kMagic)) r.fail("bad magic (expected SNRD)");
  const std::uint32_t version = r.u32();
  if (version != kDatasetVersion) r.fail("unsupported version " + std::to_string(version));
  Dataset data;
  try {
    data.manifest = DatasetManifest::from_json_text(r.string());
  } catch (const std::runtime_error& e) {
    r.fail(e.what());
  }
  const auto& m = data.manifest;
  for (std::uint64_t k = 0; k < m.frame_count; ++k) {
    if (in.peek() == std::char_traits<char>::eof()) {
      r.fail("manifest declares " + std::to_string(m.frame_count) + " frames but payload holds " + std::to_string(k));
    }
    FrameSample f;
    const std::uint32_t bones = r.u32();
    const std::uint32_t d = r.u32();
    if (bones != static_cast<std::uint32_t>(m.bones) || d != static_cast<std::uint32_t>(m.dim)) {
      r.fail("frame " + std::to_string(k) + " shape disagrees with manifest");
    }
    for (std::uint32_t b = 0; b < bones; ++b) {
      RigidTransform t{Mat(d, d), Vec(d)};
      for (std::uint32_t i = 0; i < d; ++i) {
        for (std::uint32_t c = 0; c < d; ++c) t.rotation(i, c) = r.f64();
      }
      for (std::uint32_t i = 0; i < d; ++i) t.translation(i) = r.f64();
      f.transforms.transforms.push_back(std::move(t));
    }
    const std::uint32_t pose = r.u32();
    if (pose != static_cast<std::uint32_t>(m.pose_dim)) r.fail("frame " + std::to_string(k) + " pose length disagrees with manifest");
    f.transforms.pose.resize(pose);
    for (std::uint32_t i = 0; i < pose; ++i) f.transforms.pose(i) = r.f64();
    const std::uint64_t n = r.u64();
    if (n > (1ull << 32)) r.fail("implausible point count " + std::to_string(n));
    f.points.resize(d, static_cast<Eigen::Index>(n));
    for (std::uint64_t p = 0; p < n; ++p) {
      for (std::uint32_t i = 0; i < d; ++i) f.points(i, static_cast<Eigen::Index>(p)) = r.f64();
    }
    f.labels.resize(n);
    r.bytes(f.labels.data(), n);
    f.kinds.resize(n);
    r.bytes(f.kinds.data(), n);
    for (std::uint64_t p = 0; p < n; ++p) {
      if (f.labels[p] > 1) r.fail("label out of range in frame " + std::to_string(k));
      if (static_cast<std::uint8_t>(f.kinds[p]) > 1) r.fail("sample kind out of range in frame " + std::to_string(k));
    }
    data.frames.push_back(std::move(f));
  }
  if (in.peek() != std::char_traits<char>::eof()) {
    r.fail("payload holds more than the " + std::to_string(m.frame_count) + " frames declared in the manifest");
  }
  return data;
}

void save_dataset(const std::filesystem::path& dir, const std::string& stem, const Dataset& dataset) {
  std::filesystem::create_directories(dir);
  const auto file = dir / (stem + ".snrd");
  const auto tmp = dir / (stem + ".snrd.tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    write_dataset(out, dataset);
  }
  std::filesystem::rename(tmp, file);
  std::ofstream manifest(dir / (stem + ".manifest.json"), std::ios::trunc);
  manifest << dataset.manifest.to_json_text() << '\n';
  if (!manifest) throw std::runtime_error("cannot write manifest in " + dir.string());
}

Dataset load_dataset(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open dataset " + file.string());
  return read_dataset(in);
}

}  // namespace snarf
