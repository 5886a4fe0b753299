#include <cmath>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "snarf/checkpoint.hpp"
#include "snarf/config.hpp"
#include "snarf/dataset.hpp"
#include "snarf/evaluation.hpp"
#include "snarf/experiment.hpp"
#include "snarf/oracle.hpp"
#include "snarf/render.hpp"
#include "snarf/trainer.hpp"

namespace fs = std::filesystem;
using namespace snarf;

namespace {

std::vector<double> parse_angles(const std::string& text) {
  std::vector<double> out;
  std::stringstream s(text);
  std::string item;
  while (std::getline(s, item, ',')) {
    std::size_t used = 0;
    const double v = std::stod(item, &used);
    if (used != item.size() || !std::isfinite(v)) throw std::invalid_argument("bad angle '" + item + "'");
    out.push_back(v);
  }
  return out;
}

fs::path dataset_file(const fs::path& data, const std::string& stem) {
  return fs::is_directory(data) ? data / (stem + ".snrd") : data;
}

int cmd_generate(const fs::path& config_path, const fs::path& out) {
  const ExperimentConfig config = load_config(config_path);
  for (const Split split : {Split::train, Split::test}) {
    const Dataset data = generate_dataset(config, split);
    const std::string stem = split == Split::train ? "train" : "test";
    save_dataset(out, stem, data);
    std::cout << stem << ": " << data.frames.size() << " frames, " << data.sample_count() << " samples -> "
              << (out / (stem + ".snrd")).string() << '\n';
  }
  return 0;
}

int cmd_train(const fs::path& config_path, const fs::path& data_dir, const fs::path& out, bool baseline) {
  const ExperimentConfig config = load_config(config_path);
  const Dataset train_data = load_dataset(dataset_file(data_dir, "train"));
  std::optional<Dataset> test_data;
  if (fs::is_directory(data_dir) && fs::exists(data_dir / "test.snrd")) test_data = load_dataset(data_dir / "test.snrd");
  TrainOptions options;
  options.out_dir = out;
  options.validation = test_data ? &*test_data : nullptr;
  options.on_epoch = [](const EpochMetrics& m) {
    std::cout << "epoch " << m.epoch << " bce " << m.loss_bce << " bone " << m.loss_bone << " joint " << m.loss_joint;
    if (std::isfinite(m.val_iou_bbox)) std::cout << " val_iou_bbox " << m.val_iou_bbox << " val_iou_surface " << m.val_iou_surface;
    std::cout << std::endl;
  };
  const TrainResult result =
      train(train_data, config, baseline ? ModelKind::backward_lbs : ModelKind::forward_skinning, options);
  if (result.aborted) {
    std::cerr << "error: training aborted: " << result.message << '\n';
    return 3;
  }
  std::cout << "model written to " << (out / "model.snrf").string() << '\n';
  return 0;
}

int cmd_eval(const fs::path& model_path, const fs::path& data, const fs::path& out) {
  const ModelParams model = from_checkpoint(load_checkpoint(model_path));
  const Dataset test = load_dataset(dataset_file(data, "test"));
  const IouReport report = compute_iou(model, test);
  fs::create_directories(out);
  write_iou_report(out / "iou.json", out / "iou.csv", report);
  std::cout << "iou_bbox " << report.iou_bbox << " iou_surface " << report.iou_surface
            << (report.warning ? " (some frames had an empty union)" : "") << '\n';
  return 0;
}

int cmd_experiment(const fs::path& config_path, const fs::path& out, bool quiet) {
  ExperimentOptions options;
  options.log = quiet ? nullptr : &std::cout;
  const ExperimentSummary summary = run_experiment(config_path, out, options);
  std::cout << "forward iou_bbox " << summary.main.forward.iou_bbox << " iou_surface "
            << summary.main.forward.iou_surface << "\nbaseline iou_bbox " << summary.main.baseline.iou_bbox
            << " iou_surface " << summary.main.baseline.iou_surface << '\n';
  for (const auto& p : summary.sweep) {
    std::cout << "step " << p.train_step_deg << " forward " << p.forward_mean << " baseline " << p.baseline_mean
              << " gap " << p.gap() << '\n';
  }
  if (summary.aborted) {
    std::cerr << "error: " << summary.message;
    return 3;
  }
  return 0;
}

int cmd_render(const fs::path& model_path, const std::string& pose_text, const fs::path& out,
               const std::string& config_path, int cells, bool canonical) {
  const Checkpoint checkpoint = load_checkpoint(model_path);
  const ModelParams model = from_checkpoint(checkpoint);
  std::optional<ExperimentConfig> config =
      config_path.empty() ? checkpoint_config(checkpoint) : std::optional<ExperimentConfig>(load_config(config_path));
  if (!config) throw ConfigError("checkpoint carries no config; pass --config");
  const std::vector<double> angles = parse_angles(pose_text);
  if (static_cast<int>(angles.size()) != config->joint_count()) {
    throw std::invalid_argument("--pose needs " + std::to_string(config->joint_count()) + " angle(s)");
  }
  const BoneTransformSet frame = pose_frame(*config, angles);
  Aabb box = config->shape == ShapeKind::stick
                 ? StickOracle(config->effective_stick(), frame, 50, config->oracle_weight_eps).deformed_bounds()
                 : CapsuleOracle(config->capsule, frame).deformed_bounds();
  if (canonical) box = config->canonical_bounds();
  box = box.inflated(1.2);
  const Vec lo = box.lo.head(2);
  const Vec hi = box.hi.head(2);
  const int rows = std::max(2, static_cast<int>(std::lround(cells * (hi(1) - lo(1)) / (hi(0) - lo(0)))));
  const GridSpec grid{lo, hi, {cells, rows}};
  render_occupancy_image(model, canonical ? nullptr : &frame, grid, out);
  std::cout << "wrote " << out.string() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"snarf: forward skinning for articulated implicit shapes"};
  app.require_subcommand(1);

  std::string config, out, data, model, pose, render_config;
  bool baseline = false;
  bool quiet = false;
  bool canonical = false;
  int cells = 256;

  auto* generate = app.add_subcommand("generate", "generate train/test datasets");
  generate->add_option("--config", config, "experiment config (JSON)")->required()->check(CLI::ExistingFile);
  generate->add_option("--out", out, "output directory")->required();

  auto* train_cmd = app.add_subcommand("train", "train a model on a generated dataset");
  train_cmd->add_option("--config", config, "experiment config (JSON)")->required()->check(CLI::ExistingFile);
  train_cmd->add_option("--data", data, "dataset directory (train.snrd, optional test.snrd) or .snrd file")
      ->required()
      ->check(CLI::ExistingPath);
  train_cmd->add_option("--out", out, "output directory")->required();
  train_cmd->add_flag("--baseline", baseline, "train the backward-LBS baseline instead");

  auto* eval = app.add_subcommand("eval", "IoU of a checkpoint on a test split");
  eval->add_option("--model", model, "checkpoint (.snrf)")->required()->check(CLI::ExistingFile);
  eval->add_option("--data", data, "dataset directory (test.snrd) or .snrd file")->required()->check(CLI::ExistingPath);
  eval->add_option("--out", out, "output directory")->required();

  auto* experiment = app.add_subcommand("experiment", "generate, train both models, evaluate and plot");
  experiment->add_option("--config", config, "experiment config (JSON)")->required()->check(CLI::ExistingFile);
  experiment->add_option("--out", out, "output directory")->required();
  experiment->add_flag("--quiet", quiet, "suppress progress output");

  auto* render = app.add_subcommand("render", "render posed occupancy with its 0.5 contour to PNG");
  render->add_option("--model", model, "checkpoint (.snrf)")->required()->check(CLI::ExistingFile);
  render->add_option("--pose", pose, "joint angles in degrees, comma separated")->required();
  render->add_option("--out", out, "output PNG")->required();
  render->add_option("--config", render_config, "config for the skeleton (default: the one stored in the checkpoint)");
  render->add_option("--cells", cells, "horizontal resolution in pixels")->check(CLI::Range(2, 8192));
  render->add_flag("--canonical", canonical, "render the canonical occupancy instead");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*generate) return cmd_generate(config, out);
    if (*train_cmd) return cmd_train(config, data, out, baseline);
    if (*eval) return cmd_eval(model, data, out);
    if (*experiment) return cmd_experiment(config, out, quiet);
    if (*render) return cmd_render(model, pose, out, render_config, cells, canonical);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
