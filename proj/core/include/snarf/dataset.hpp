#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "snarf/config.hpp"
#include "snarf/transform.hpp"
#include "snarf/types.hpp"

namespace snarf {

enum class SampleKind : std::uint8_t { uniform = 0, near_surface = 1 };
enum class Split { train, test };

struct FrameSample {
  BoneTransformSet transforms;  // pose lives in transforms.pose
  Batch points;                 // d x n, deformed space
  std::vector<std::uint8_t> labels;
  std::vector<SampleKind> kinds;

  Eigen::Index size() const { return points.cols(); }
  void validate() const;
  bool operator==(const FrameSample& other) const;
};

struct DatasetManifest {
  std::string name;
  std::string split;     // "train" or "test"
  std::string config;    // JSON text of the generating config
  std::uint64_t frame_count = 0;
  int dim = 2;
  int bones = 2;
  int pose_dim = 1;
  bool rigid_object = false;

  std::string to_json_text() const;
  static DatasetManifest from_json_text(const std::string& text);
  bool operator==(const DatasetManifest&) const = default;
};

struct Dataset {
  DatasetManifest manifest;
  std::vector<FrameSample> frames;

  std::size_t sample_count() const;
  bool operator==(const Dataset&) const = default;
};

/// Joint-angle vectors (degrees) for a split. Training: uniform draws in the
/// training range, or for the interpolation regime a lattice at train_step_deg,
/// either cycled to fill `frames` or repeated frames_per_train_pose times. Test: uniform draws in the test range, or in the
/// training range for the interpolation regime.
std::vector<std::vector<double>> split_angles_deg(const ExperimentConfig& config, Split split);

BoneTransformSet pose_frame(const ExperimentConfig& config, std::span<const double> angles_deg);

/// Labeled samples for one posed frame: half uniform in the posed bounding box
/// inflated by bbox_inflation, half on the posed boundary plus Gaussian noise.
FrameSample sample_frame(const ExperimentConfig& config, const BoneTransformSet& frame, std::uint64_t seed);

Dataset generate_dataset(const ExperimentConfig& config, Split split);

// File layout: "SNRD" | u32 version | u64 length + manifest JSON | frames.
// Each frame: u32 bones, u32 dim, per bone rotation (row-major) + translation
// as f64, u32 pose length + f64 pose, u64 point count, f64 points (d per
// point), u8 labels, u8 kinds. Little-endian.
constexpr std::uint32_t kDatasetVersion = 1;

void write_dataset(std::ostream& out, const Dataset& dataset);
Dataset read_dataset(std::istream& in);

/// Writes `<dir>/<stem>.snrd` and `<dir>/<stem>.manifest.json`.
void save_dataset(const std::filesystem::path& dir, const std::string& stem, const Dataset& dataset);
Dataset load_dataset(const std::filesystem::path& file);

}  // namespace snarf
