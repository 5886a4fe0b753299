#include "snarf/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <random>
#include <stdexcept>

#include <json.hpp>

#include "snarf/baseline.hpp"
#include "snarf/evaluation.hpp"
#include "snarf/occupancy.hpp"
#include "snarf/optimizer.hpp"
#include "snarf/parallel.hpp"

namespace snarf {

namespace {

constexpr Eigen::Index kBlock = 256;

struct BlockResult {
  double bce = 0.0;
  MlpGrad occupancy;
  MlpGrad skinning;
};

bool grads_finite(const MlpGrad& a, const MlpGrad& b) { return a.all_finite() && b.all_finite(); }

}  // namespace

ModelParams initial_model(const ExperimentConfig& config, ModelKind kind) {
  ModelParams m = ModelParams::create(kind, config.dim(), config.bone_count(), config.joint_count(),
                                      config.pose_conditioning, config.occupancy_net, config.skinning_net,
                                      config.train.seed);
  m.composition = config.composition;
  m.solver = config.resolved_solver();
  m.validate();
  return m;
}

LossBreakdown total_loss(const ModelParams& model, const Batch& queries, FrameRefs frames,
                         std::span<const std::uint8_t> labels, const BootstrapTerms& bootstrap,
                         MlpGrad* grad_occupancy, MlpGrad* grad_skinning) {
  const Eigen::Index n = queries.cols();
  if (labels.size() != static_cast<std::size_t>(n)) throw std::invalid_argument("total_loss: label count mismatch");
  if (frames.size() != 1 && frames.size() != static_cast<std::size_t>(n)) {
    throw std::invalid_argument("total_loss: need one frame or one frame per query");
  }
  const bool want_grad = grad_occupancy != nullptr && grad_skinning != nullptr;
  LossBreakdown out;
  const auto blocks = static_cast<std::size_t>((n + kBlock - 1) / kBlock);
  std::vector<BlockResult> results(blocks);
  const double inv_n = n > 0 ? 1.0 / static_cast<double>(n) : 0.0;
  parallel_for(blocks, [&](std::size_t b) {
    const Eigen::Index begin = static_cast<Eigen::Index>(b) * kBlock;
    const Eigen::Index m = std::min(kBlock, n - begin);
    const Batch q = queries.middleCols(begin, m);
    const FrameRefs sub = frames.size() == 1 ? frames : frames.subspan(static_cast<std::size_t>(begin), m);
    const auto lab = labels.subspan(static_cast<std::size_t>(begin), static_cast<std::size_t>(m));
    BlockResult& r = results[b];
    Eigen::VectorXd upstream;
    if (model.kind == ModelKind::forward_skinning) {
      const DeformedBatch fwd = occupancy_deformed_batch(model, q, sub);
      const BatchLoss loss = loss_bce_batch(fwd.occupancy, lab);
      r.bce = loss.value * static_cast<double>(m) * inv_n;
      if (!want_grad) return;
      r.occupancy = MlpGrad(model.occupancy);
      r.skinning = MlpGrad(model.skinning);
      upstream = loss.grad * (static_cast<double>(m) * inv_n);
      occupancy_backward_batch(model, fwd, sub, upstream, r.occupancy, r.skinning);
    } else {
      const BackLbsBatch fwd = backlbs_forward_batch(model, q, sub);
      const BatchLoss loss = loss_bce_batch(fwd.occupancy, lab);
      r.bce = loss.value * static_cast<double>(m) * inv_n;
      if (!want_grad) return;
      r.occupancy = MlpGrad(model.occupancy);
      r.skinning = MlpGrad(model.skinning);
      upstream = loss.grad * (static_cast<double>(m) * inv_n);
      backlbs_backward_batch(model, fwd, q, sub, upstream, r.occupancy, r.skinning);
    }
  });
  for (const BlockResult& r : results) {
    out.bce += r.bce;
    if (want_grad) {
      *grad_occupancy += r.occupancy;
      *grad_skinning += r.skinning;
    }
  }
  if (bootstrap.bone_points != nullptr) {
    out.bone = loss_bootstrap_bone(model, *bootstrap.bone_points, want_grad ? grad_occupancy : nullptr,
                                   bootstrap.bone_weight);
  }
  if (bootstrap.layout != nullptr) {
    out.joint = loss_bootstrap_joint(model, *bootstrap.layout, bootstrap.joint_frame,
                                     want_grad ? grad_skinning : nullptr, bootstrap.joint_weight);
  }
  out.total = out.bce + bootstrap.bone_weight * out.bone + bootstrap.joint_weight * out.joint;
  return out;
}

Checkpoint training_checkpoint(const ModelParams& model, const ExperimentConfig& config) {
  Checkpoint c = to_checkpoint(model);
  nlohmann::json meta = nlohmann::json::parse(c.metadata);
  meta["config"] = nlohmann::json::parse(config_to_json_text(config));
  c.metadata = meta.dump();
  return c;
}

std::optional<ExperimentConfig> checkpoint_config(const Checkpoint& checkpoint) {
  const nlohmann::json meta = nlohmann::json::parse(checkpoint.metadata, nullptr, false);
  if (meta.is_discarded() || !meta.contains("config")) return std::nullopt;
  return config_from_json_text(meta.at("config").dump());
}

void write_metrics_csv(const std::filesystem::path& path, const std::vector<EpochMetrics>& metrics) {
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::trunc);
    out << std::setprecision(10) << "epoch,loss_bce,loss_bone,loss_joint,val_iou_bbox,val_iou_surface\n";
    for (const auto& m : metrics) {
      out << m.epoch << ',' << m.loss_bce << ',' << m.loss_bone << ',' << m.loss_joint << ',' << m.val_iou_bbox << ','
          << m.val_iou_surface << '\n';
    }
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

TrainResult train(const Dataset& data, const ExperimentConfig& config, ModelKind kind, const TrainOptions& options) {
  config.validate();
  const TrainSettings& ts = config.train;
  if (data.manifest.dim != config.dim() || data.manifest.bones != config.bone_count()) {
    throw std::invalid_argument("train: dataset does not match the config's skeleton");
  }
  TrainResult result{initial_model(config, kind), {}, false, {}};
  ModelParams& model = result.model;
  if (!options.out_dir.empty()) std::filesystem::create_directories(options.out_dir);
  const auto save = [&](const char* name) {
    if (!options.out_dir.empty()) save_checkpoint(options.out_dir / name, training_checkpoint(model, config));
  };

  std::vector<std::pair<std::uint32_t, std::uint32_t>> index;
  for (std::size_t f = 0; f < data.frames.size(); ++f) {
    for (Eigen::Index k = 0; k < data.frames[f].size(); ++k) {
      index.emplace_back(static_cast<std::uint32_t>(f), static_cast<std::uint32_t>(k));
    }
  }
  const SkeletonLayout layout = SkeletonLayout::from_config(config);
  const AdamSettings adam{ts.learning_rate, ts.adam_beta1, ts.adam_beta2, ts.adam_eps};
  Adam opt_occupancy(model.occupancy.size(), adam);
  Adam opt_skinning(model.skinning.size(), adam);
  std::seed_seq seq{static_cast<std::uint32_t>(ts.seed), static_cast<std::uint32_t>(ts.seed >> 32), 0x5eedu};
  std::mt19937_64 rng(seq);

  for (int epoch = 1; epoch <= ts.epochs; ++epoch) {
    const ModelParams last_good = model;
    std::shuffle(index.begin(), index.end(), rng);
    const bool bootstrap = epoch <= ts.bootstrap_epochs;
    EpochMetrics metrics;
    metrics.epoch = epoch;
    double seen = 0.0;
    int steps = 0;
    bool failed = false;
    for (std::size_t start = 0; start < index.size(); start += static_cast<std::size_t>(ts.batch_size)) {
      const std::size_t end = std::min(index.size(), start + static_cast<std::size_t>(ts.batch_size));
      const auto m = static_cast<Eigen::Index>(end - start);
      Batch queries(model.dim, m);
      std::vector<const BoneTransformSet*> frames(static_cast<std::size_t>(m));
      std::vector<std::uint8_t> labels(static_cast<std::size_t>(m));
      for (Eigen::Index j = 0; j < m; ++j) {
        const auto [f, k] = index[start + static_cast<std::size_t>(j)];
        const FrameSample& frame = data.frames[f];
        queries.col(j) = frame.points.col(k);
        frames[static_cast<std::size_t>(j)] = &frame.transforms;
        labels[static_cast<std::size_t>(j)] = frame.labels[k];
      }
      Batch bone_points;
      BootstrapTerms terms;
      if (bootstrap) {
        bone_points = sample_bone_points(layout, ts.bootstrap_bone_samples, rng);
        terms = {&bone_points, &layout, frames.front(), ts.bootstrap_bone_weight, ts.bootstrap_joint_weight};
      }
      MlpGrad g_occ(model.occupancy);
      MlpGrad g_skin(model.skinning);
      const LossBreakdown loss = total_loss(model, queries, frames, labels, terms, &g_occ, &g_skin);
      if (!std::isfinite(loss.total) || !grads_finite(g_occ, g_skin)) {
        failed = true;
        break;
      }
      opt_occupancy.step(model.occupancy.values(), g_occ.values());
      opt_skinning.step(model.skinning.values(), g_skin.values());
      if (!model.occupancy.all_finite() || !model.skinning.all_finite()) {
        failed = true;
        break;
      }
      metrics.loss_bce += loss.bce * static_cast<double>(m);
      seen += static_cast<double>(m);
      metrics.loss_bone += loss.bone;
      metrics.loss_joint += loss.joint;
      ++steps;
    }
    if (failed) {
      model = last_good;
      result.aborted = true;
      result.message = "non-finite loss or gradient in epoch " + std::to_string(epoch) +
                       "; keeping the parameters from the end of epoch " + std::to_string(epoch - 1);
      break;
    }
    if (seen > 0) metrics.loss_bce /= seen;
    if (steps > 0) {
      metrics.loss_bone /= steps;
      metrics.loss_joint /= steps;
    }
    const bool validate_now = options.validation != nullptr &&
                              ((ts.validation_interval > 0 && epoch % ts.validation_interval == 0) ||
                               epoch == ts.epochs);
    if (validate_now) {
      const IouReport report = compute_iou(model, *options.validation);
      metrics.val_iou_bbox = report.iou_bbox;
      metrics.val_iou_surface = report.iou_surface;
    }
    result.metrics.push_back(metrics);
    save("checkpoint.snrf");
    if (!options.out_dir.empty()) write_metrics_csv(options.out_dir / "metrics.csv", result.metrics);
    if (options.on_epoch) options.on_epoch(metrics);
  }
  if (!options.out_dir.empty()) {
    write_metrics_csv(options.out_dir / "metrics.csv", result.metrics);
    if (!result.aborted) save("model.snrf");
  }
  return result;
}

}  // namespace snarf
