#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "snarf/geometry.hpp"
#include "snarf/model.hpp"
#include "snarf/rootfind.hpp"

namespace snarf {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Regime { extrapolation, interpolation, topology };
enum class ShapeKind { stick, capsule3d };

struct AngleInterval {
  double lo_deg = -60.0;
  double hi_deg = 60.0;
};

struct TrainSettings {
  double learning_rate = 1e-4;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  int batch_size = 512;
  int epochs = 200;
  int bootstrap_epochs = 1;
  int bootstrap_bone_samples = 128;
  double bootstrap_bone_weight = 1.0;
  double bootstrap_joint_weight = 1.0;
  std::uint64_t seed = 0;
  int validation_interval = 0;  // epochs between validation IoU; 0 = last epoch only

  void validate() const;
};

struct ExperimentConfig {
  std::string name = "experiment";
  Regime regime = Regime::extrapolation;
  ShapeKind shape = ShapeKind::stick;

  std::vector<AngleInterval> train_angle_range{{-60.0, 60.0}};
  std::vector<AngleInterval> test_angle_range{{-120.0, -60.0}, {60.0, 120.0}};
  double train_step_deg = 10.0;  // interpolation lattice spacing
  int frames = 100;              // training frames (extrapolation / topology)
  int frames_per_train_pose = 0;  // interpolation: frames per lattice pose; 0 cycles the lattice to `frames`
  int test_frames = 20;
  int samples_per_frame = 2000;
  double near_surface_sigma = 0.01;
  double bbox_inflation = 1.1;

  StickGeometry stick{};
  CapsuleGeometry capsule{};
  int oracle_lattice_cells = 1000;  // along the longest canonical axis
  double oracle_weight_eps = 1e-3;

  NetShape occupancy_net{};
  NetShape skinning_net{};
  bool pose_conditioning = false;
  bool positional_encoding = false;  // reserved; must stay false

  TrainSettings train{};
  SolverSettings solver{};  // divergence_radius <= 0 means "10x canonical half-diagonal"
  CompositionSettings composition{};

  // Interpolation sweep (train_step values) and seeds averaged per point.
  std::vector<double> sweep_steps_deg{10.0, 20.0, 40.0};
  std::vector<std::uint64_t> sweep_seeds{0, 1, 2};
  std::vector<std::vector<double>> gallery_poses_deg{{-120.0}, {-60.0}, {0.0}, {60.0}, {120.0}};

  std::uint64_t seed = 0;

  int dim() const { return shape == ShapeKind::stick ? 2 : 3; }
  int bone_count() const;
  int joint_count() const { return bone_count() - 1; }
  bool has_rigid_object() const;
  /// Stick geometry with the rigid object switched on for the topology regime.
  StickGeometry effective_stick() const;
  Aabb canonical_bounds() const;
  SolverSettings resolved_solver() const;

  void validate() const;
};

ExperimentConfig config_from_json_text(const std::string& text);
ExperimentConfig load_config(const std::filesystem::path& path);
std::string config_to_json_text(const ExperimentConfig& config);

std::string to_string(Regime regime);
Regime regime_from_string(const std::string& s);

}  // namespace snarf
