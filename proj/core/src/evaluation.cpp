#include "snarf/evaluation.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "snarf/baseline.hpp"
#include "snarf/occupancy.hpp"
#include "snarf/parallel.hpp"

namespace snarf {

namespace {

constexpr Eigen::Index kBlock = 256;

}  // namespace

Eigen::VectorXd predict_occupancy(const ModelParams& model, const Batch& queries, FrameRefs frames) {
  const Eigen::Index n = queries.cols();
  if (frames.size() != 1 && frames.size() != static_cast<std::size_t>(n)) {
    throw std::invalid_argument("predict_occupancy: need one frame or one frame per query");
  }
  Eigen::VectorXd out(n);
  const auto blocks = static_cast<std::size_t>((n + kBlock - 1) / kBlock);
  parallel_for(blocks, [&](std::size_t b) {
    const Eigen::Index begin = static_cast<Eigen::Index>(b) * kBlock;
    const Eigen::Index m = std::min(kBlock, n - begin);
    const Batch block = queries.middleCols(begin, m);
    const FrameRefs sub = frames.size() == 1 ? frames : frames.subspan(static_cast<std::size_t>(begin), m);
    if (model.kind == ModelKind::forward_skinning) {
      out.segment(begin, m) = occupancy_deformed_batch(model, block, sub).occupancy;
    } else {
      out.segment(begin, m) = backlbs_forward_batch(model, block, sub).occupancy;
    }
  });
  return out;
}

Eigen::VectorXd canonical_occupancy(const ModelParams& model, const Batch& points, const Eigen::VectorXd& pose) {
  BoneTransformSet frame = BoneTransformSet::identity(model.bones, model.dim, model.pose_dim);
  if (pose.size() == model.pose_dim) frame.pose = pose;
  const BoneTransformSet* frames[] = {&frame};
  return mlp_forward_batch(model.occupancy, occupancy_inputs(model, points, frames)).output.row(0).transpose();
}

IouValue binary_iou(std::span<const std::uint8_t> pred, std::span<const std::uint8_t> gt) {
  if (pred.size() != gt.size()) throw std::invalid_argument("binary_iou: length mismatch");
  std::size_t inter = 0;
  std::size_t uni = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    inter += (pred[i] && gt[i]) ? 1 : 0;
    uni += (pred[i] || gt[i]) ? 1 : 0;
  }
  if (uni == 0) return {1.0, true};
  return {static_cast<double>(inter) / static_cast<double>(uni), false};
}

IouReport iou_from_predictions(const Dataset& data, const std::vector<Eigen::VectorXd>& predictions,
                               double threshold) {
  if (predictions.size() != data.frames.size()) throw std::invalid_argument("iou: one prediction vector per frame");
  IouReport report;
  report.iou_bbox = 0.0;
  report.iou_surface = 0.0;
  for (std::size_t f = 0; f < data.frames.size(); ++f) {
    const FrameSample& frame = data.frames[f];
    if (predictions[f].size() != frame.size()) throw std::invalid_argument("iou: prediction length mismatch");
    std::vector<std::uint8_t> pred[2];
    std::vector<std::uint8_t> gt[2];
    for (Eigen::Index k = 0; k < frame.size(); ++k) {
      const int kind = frame.kinds[static_cast<std::size_t>(k)] == SampleKind::uniform ? 0 : 1;
      pred[kind].push_back(predictions[f](k) >= threshold ? 1 : 0);
      gt[kind].push_back(frame.labels[static_cast<std::size_t>(k)]);
    }
    const IouValue bbox = binary_iou(pred[0], gt[0]);
    const IouValue surface = binary_iou(pred[1], gt[1]);
    report.per_frame.push_back(
        {bbox.iou, surface.iou, pred[0].size(), pred[1].size(), bbox.empty_union, surface.empty_union});
    report.uniform_count += pred[0].size();
    report.surface_count += pred[1].size();
    report.warning = report.warning || bbox.empty_union || surface.empty_union;
    report.iou_bbox += bbox.iou;
    report.iou_surface += surface.iou;
  }
  if (report.per_frame.empty()) {
    report.iou_bbox = report.iou_surface = 1.0;
    report.warning = true;
  } else {
    report.iou_bbox /= static_cast<double>(report.per_frame.size());
    report.iou_surface /= static_cast<double>(report.per_frame.size());
  }
  return report;
}

IouReport compute_iou(const ModelParams& model, const Dataset& data, double threshold) {
  std::vector<Eigen::VectorXd> predictions;
  for (const FrameSample& frame : data.frames) {
    const BoneTransformSet* frames[] = {&frame.transforms};
    predictions.push_back(predict_occupancy(model, frame.points, frames));
  }
  return iou_from_predictions(data, predictions, threshold);
}

std::string iou_report_json(const IouReport& report) {
  nlohmann::json j;
  j["iou_bbox"] = report.iou_bbox;
  j["iou_surface"] = report.iou_surface;
  j["uniform_count"] = report.uniform_count;
  j["surface_count"] = report.surface_count;
  j["warning"] = report.warning;
  j["per_frame"] = nlohmann::json::array();
  for (const auto& f : report.per_frame) {
    j["per_frame"].push_back({{"iou_bbox", f.iou_bbox},
                              {"iou_surface", f.iou_surface},
                              {"uniform_count", f.uniform_count},
                              {"surface_count", f.surface_count},
                              {"bbox_empty_union", f.bbox_empty_union},
                              {"surface_empty_union", f.surface_empty_union}});
  }
  return j.dump(2);
}

void write_iou_report(const std::filesystem::path& json_path, const std::filesystem::path& csv_path,
                      const IouReport& report) {
  std::ofstream json(json_path, std::ios::trunc);
  json << iou_report_json(report) << '\n';
  std::ofstream csv(csv_path, std::ios::trunc);
  csv << std::setprecision(17) << "frame,iou_bbox,iou_surface,uniform_count,surface_count\n";
  for (std::size_t f = 0; f < report.per_frame.size(); ++f) {
    const auto& r = report.per_frame[f];
    csv << f << ',' << r.iou_bbox << ',' << r.iou_surface << ',' << r.uniform_count << ',' << r.surface_count << '\n';
  }
  csv << "mean," << report.iou_bbox << ',' << report.iou_surface << ',' << report.uniform_count << ','
      << report.surface_count << '\n';
  if (!json || !csv) throw std::runtime_error("cannot write IoU report to " + json_path.parent_path().string());
}

}  // namespace snarf
