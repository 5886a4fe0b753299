#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "snarf/levelset.hpp"
#include "snarf/model.hpp"

namespace snarf {

struct Image {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> rgb;  // row-major, top row first
};

/// Gray raster of a 2D field sampled on `grid` (one pixel per grid vertex, y
/// up) with the contour drawn in red.
Image occupancy_image(const GridSpec& grid, const Eigen::VectorXd& values, const Contour& contour);

/// 8-bit RGB PNG without timestamps or other variable chunks.
std::vector<std::uint8_t> encode_png(const Image& image);
void write_png(const std::filesystem::path& path, const Image& image);

/// Occupancy of `model` on a 2D grid: posed under `frame`, or canonical when
/// `frame` is null. 3D models are sliced at z = 0.
Image render_occupancy_image(const ModelParams& model, const BoneTransformSet* frame, const GridSpec& grid);
void render_occupancy_image(const ModelParams& model, const BoneTransformSet* frame, const GridSpec& grid,
                            const std::filesystem::path& out);

}  // namespace snarf
