#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "snarf/dataset.hpp"
#include "snarf/model.hpp"
#include "snarf/skeleton.hpp"

namespace snarf {

/// Posed occupancy of either model kind, evaluated in fixed-size blocks that
/// may run concurrently. Results do not depend on the thread count.
Eigen::VectorXd predict_occupancy(const ModelParams& model, const Batch& queries, FrameRefs frames);

/// Canonical occupancy; `pose` is used only by pose-conditioned models.
Eigen::VectorXd canonical_occupancy(const ModelParams& model, const Batch& points, const Eigen::VectorXd& pose);

struct IouValue {
  double iou = 1.0;
  bool empty_union = false;  // both sets empty: defined as 1
};

/// |pred & gt| / |pred | gt| for binary vectors of equal length.
IouValue binary_iou(std::span<const std::uint8_t> pred, std::span<const std::uint8_t> gt);

struct FrameIou {
  double iou_bbox = 1.0;
  double iou_surface = 1.0;
  std::size_t uniform_count = 0;
  std::size_t surface_count = 0;
  bool bbox_empty_union = false;
  bool surface_empty_union = false;
};

struct IouReport {
  double iou_bbox = 1.0;     // mean over frames, uniform samples
  double iou_surface = 1.0;  // mean over frames, near-surface samples
  std::vector<FrameIou> per_frame;
  std::size_t uniform_count = 0;
  std::size_t surface_count = 0;
  bool warning = false;  // some frame had an empty union
};

/// Scores binarized predictions (o >= threshold), one vector per frame.
IouReport iou_from_predictions(const Dataset& data, const std::vector<Eigen::VectorXd>& predictions,
                               double threshold = 0.5);

IouReport compute_iou(const ModelParams& model, const Dataset& data, double threshold = 0.5);

std::string iou_report_json(const IouReport& report);
void write_iou_report(const std::filesystem::path& json_path, const std::filesystem::path& csv_path,
                      const IouReport& report);

}  // namespace snarf
