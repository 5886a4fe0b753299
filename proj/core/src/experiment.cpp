#include "snarf/experiment.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "snarf/oracle.hpp"
#include "snarf/render.hpp"
#include "snarf/trainer.hpp"

namespace snarf {

namespace {

std::string pose_tag(const std::vector<double>& angles) {
  std::ostringstream s;
  for (std::size_t i = 0; i < angles.size(); ++i) s << (i ? "_" : "") << std::lround(angles[i]);
  return s.str();
}

Aabb posed_bounds(const ExperimentConfig& config, const BoneTransformSet& frame) {
  if (config.shape == ShapeKind::stick) {
    return StickOracle(config.effective_stick(), frame, 50, config.oracle_weight_eps).deformed_bounds();
  }
  return CapsuleOracle(config.capsule, frame).deformed_bounds();
}

void log_epoch(std::ostream* log, const std::string& label, const EpochMetrics& m) {
  if (log == nullptr) return;
  *log << label << " epoch " << m.epoch << " bce " << m.loss_bce;
  if (std::isfinite(m.val_iou_bbox)) *log << " val_iou_bbox " << m.val_iou_bbox << " val_iou_surface " << m.val_iou_surface;
  *log << std::endl;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  out << text << '\n';
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

}  // namespace

std::pair<Dataset, Dataset> prepare_data(const ExperimentConfig& config, const std::filesystem::path& data_dir,
                                         bool reuse) {
  const std::string expected = nlohmann::json::parse(config_to_json_text(config)).dump();
  if (reuse && !data_dir.empty() && std::filesystem::exists(data_dir / "train.snrd") &&
      std::filesystem::exists(data_dir / "test.snrd")) {
    try {
      Dataset train = load_dataset(data_dir / "train.snrd");
      Dataset test = load_dataset(data_dir / "test.snrd");
      if (train.manifest.config == expected && test.manifest.config == expected) return {std::move(train), std::move(test)};
    } catch (const std::exception&) {
      // regenerate below
    }
  }
  Dataset train = generate_dataset(config, Split::train);
  Dataset test = generate_dataset(config, Split::test);
  if (!data_dir.empty()) {
    save_dataset(data_dir, "train", train);
    save_dataset(data_dir, "test", test);
  }
  return {std::move(train), std::move(test)};
}

ModelComparison compare_models(const ExperimentConfig& config, const Dataset& train_data, const Dataset& test_data,
                               const std::filesystem::path& out_dir, std::ostream* log, bool* aborted,
                               std::string* message) {
  ModelComparison out;
  for (const ModelKind kind : {ModelKind::forward_skinning, ModelKind::backward_lbs}) {
    const bool forward = kind == ModelKind::forward_skinning;
    const std::string label = forward ? "forward" : "baseline";
    TrainOptions options;
    if (!out_dir.empty()) options.out_dir = out_dir / label;
    options.validation = &test_data;
    options.on_epoch = [&](const EpochMetrics& m) { log_epoch(log, label, m); };
    const TrainResult trained = train(train_data, config, kind, options);
    if (trained.aborted) {
      if (aborted != nullptr) *aborted = true;
      if (message != nullptr) *message += label + ": " + trained.message + "\n";
      if (log != nullptr) *log << label << " training aborted: " << trained.message << std::endl;
    }
    const IouReport report = compute_iou(trained.model, test_data);
    if (!out_dir.empty()) write_iou_report(out_dir / label / "iou.json", out_dir / label / "iou.csv", report);
    (forward ? out.forward : out.baseline) = report;
    if (log != nullptr) {
      *log << label << " test iou_bbox " << report.iou_bbox << " iou_surface " << report.iou_surface << std::endl;
    }
  }
  return out;
}

std::vector<SweepPoint> interpolation_sweep(const ExperimentConfig& config, std::ostream* log) {
  std::vector<SweepPoint> sweep;
  for (double step : config.sweep_steps_deg) {
    SweepPoint point;
    point.train_step_deg = step;
    for (std::uint64_t seed : config.sweep_seeds) {
      ExperimentConfig c = config;
      c.regime = Regime::interpolation;
      c.train_step_deg = step;
      c.seed = seed;
      c.train.seed = seed;
      c.train.validation_interval = 0;
      const auto [train_data, test_data] = prepare_data(c, {}, false);
      if (log != nullptr) *log << "sweep step " << step << " seed " << seed << std::endl;
      const ModelComparison cmp = compare_models(c, train_data, test_data, {}, nullptr);
      point.forward_iou.push_back(cmp.forward.iou_bbox);
      point.baseline_iou.push_back(cmp.baseline.iou_bbox);
      if (log != nullptr) {
        *log << "  forward " << cmp.forward.iou_bbox << " baseline " << cmp.baseline.iou_bbox << std::endl;
      }
    }
    const auto mean = [](const std::vector<double>& v) {
      double s = 0.0;
      for (double x : v) s += x;
      return v.empty() ? 0.0 : s / static_cast<double>(v.size());
    };
    point.forward_mean = mean(point.forward_iou);
    point.baseline_mean = mean(point.baseline_iou);
    sweep.push_back(std::move(point));
  }
  return sweep;
}

void write_sweep_csv(const std::filesystem::path& path, const std::vector<SweepPoint>& sweep) {
  std::ofstream out(path, std::ios::trunc);
  out << std::setprecision(10) << "train_step_deg,seed,forward_iou_bbox,baseline_iou_bbox,gap\n";
  for (const auto& p : sweep) {
    for (std::size_t s = 0; s < p.forward_iou.size(); ++s) {
      out << p.train_step_deg << ',' << s << ',' << p.forward_iou[s] << ',' << p.baseline_iou[s] << ','
          << p.forward_iou[s] - p.baseline_iou[s] << '\n';
    }
    out << p.train_step_deg << ",mean," << p.forward_mean << ',' << p.baseline_mean << ',' << p.gap() << '\n';
  }
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

ExperimentSummary run_experiment(const ExperimentConfig& config, const std::filesystem::path& out_dir,
                                 const ExperimentOptions& options) {
  config.validate();
  std::filesystem::create_directories(out_dir);
  write_text(out_dir / "config.json", config_to_json_text(config));
  ExperimentSummary summary;

  const auto [train_data, test_data] = prepare_data(config, out_dir / "data", options.reuse_data);
  if (options.log != nullptr) {
    *options.log << "data: " << train_data.frames.size() << " train frames, " << test_data.frames.size()
                 << " test frames" << std::endl;
  }
  summary.main = compare_models(config, train_data, test_data, out_dir, options.log, &summary.aborted, &summary.message);

  nlohmann::json j;
  j["name"] = config.name;
  j["regime"] = to_string(config.regime);
  j["forward"] = {{"iou_bbox", summary.main.forward.iou_bbox}, {"iou_surface", summary.main.forward.iou_surface}};
  j["baseline"] = {{"iou_bbox", summary.main.baseline.iou_bbox}, {"iou_surface", summary.main.baseline.iou_surface}};
  j["aborted"] = summary.aborted;
  {
    std::ofstream csv(out_dir / "summary.csv", std::ios::trunc);
    csv << std::setprecision(10) << "model,iou_bbox,iou_surface\n"
        << "forward," << summary.main.forward.iou_bbox << ',' << summary.main.forward.iou_surface << '\n'
        << "baseline," << summary.main.baseline.iou_bbox << ',' << summary.main.baseline.iou_surface << '\n';
  }
  if (summary.aborted) {
    j["message"] = summary.message;
    write_text(out_dir / "summary.json", j.dump(2));
    return summary;
  }

  if (options.gallery && !config.gallery_poses_deg.empty()) {
    const auto gallery_dir = out_dir / "gallery";
    std::filesystem::create_directories(gallery_dir);
    Aabb box;
    std::vector<BoneTransformSet> frames;
    for (const auto& pose : config.gallery_poses_deg) {
      frames.push_back(pose_frame(config, pose));
      const Aabb b = posed_bounds(config, frames.back());
      box.expand(b.lo);
      box.expand(b.hi);
    }
    box = box.inflated(1.15);
    Vec lo = box.lo.head(2);
    Vec hi = box.hi.head(2);
    const double w = hi(0) - lo(0);
    const double h = hi(1) - lo(1);
    const int cells = 256;
    GridSpec grid{lo, hi, {cells, std::max(2, static_cast<int>(std::lround(cells * h / w)))}};
    for (const ModelKind kind : {ModelKind::forward_skinning, ModelKind::backward_lbs}) {
      const std::string label = kind == ModelKind::forward_skinning ? "forward" : "baseline";
      const ModelParams model = from_checkpoint(load_checkpoint(out_dir / label / "model.snrf"));
      for (std::size_t k = 0; k < frames.size(); ++k) {
        render_occupancy_image(model, &frames[k], grid,
                               gallery_dir / (label + "_pose_" + pose_tag(config.gallery_poses_deg[k]) + ".png"));
      }
    }
  }

  if (config.regime == Regime::interpolation && options.sweep) {
    summary.sweep = interpolation_sweep(config, options.log);
    write_sweep_csv(out_dir / "interpolation_curve.csv", summary.sweep);
    nlohmann::json curve = nlohmann::json::array();
    for (const auto& p : summary.sweep) {
      curve.push_back({{"train_step_deg", p.train_step_deg},
                       {"forward_iou_bbox", p.forward_mean},
                       {"baseline_iou_bbox", p.baseline_mean},
                       {"gap", p.gap()}});
    }
    j["interpolation_curve"] = curve;
  }
  write_text(out_dir / "summary.json", j.dump(2));
  return summary;
}

ExperimentSummary run_experiment(const std::filesystem::path& config_path, const std::filesystem::path& out_dir,
                                 const ExperimentOptions& options) {
  return run_experiment(load_config(config_path), out_dir, options);
}

}  // namespace snarf
