#include "snarf/render.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include <png.h>

#include "snarf/evaluation.hpp"

namespace snarf {

namespace {

void put_red(Image& img, long x, long y) {
  if (x < 0 || y < 0 || x >= img.width || y >= img.height) return;
  const std::size_t o = (static_cast<std::size_t>(y) * img.width + static_cast<std::size_t>(x)) * 3;
  img.rgb[o] = 255;
  img.rgb[o + 1] = 0;
  img.rgb[o + 2] = 0;
}

void png_append(png_structp png, png_bytep data, png_size_t length) {
  auto* out = static_cast<std::vector<std::uint8_t>*>(png_get_io_ptr(png));
  out->insert(out->end(), data, data + length);
}

void png_flush_noop(png_structp) {}

}  // namespace

Image occupancy_image(const GridSpec& grid, const Eigen::VectorXd& values, const Contour& contour) {
  grid.validate();
  if (grid.dim() != 2) throw std::invalid_argument("occupancy_image: 2D grid required");
  if (static_cast<std::size_t>(values.size()) != grid.vertex_count()) {
    throw std::invalid_argument("occupancy_image: one value per grid vertex required");
  }
  Image img;
  img.width = grid.cells[0] + 1;
  img.height = grid.cells[1] + 1;
  img.rgb.resize(static_cast<std::size_t>(img.width) * img.height * 3);
  for (int j = 0; j < img.height; ++j) {
    for (int i = 0; i < img.width; ++i) {
      const double v = std::clamp(values(static_cast<Eigen::Index>(j) * img.width + i), 0.0, 1.0);
      const auto g = static_cast<std::uint8_t>(std::lround(255.0 * v));
      const std::size_t o = (static_cast<std::size_t>(img.height - 1 - j) * img.width + i) * 3;
      img.rgb[o] = img.rgb[o + 1] = img.rgb[o + 2] = g;
    }
  }
  const auto to_pixel = [&](const Vec& p) {
    const double px = (p(0) - grid.lo(0)) / (grid.hi(0) - grid.lo(0)) * grid.cells[0];
    const double py = (p(1) - grid.lo(1)) / (grid.hi(1) - grid.lo(1)) * grid.cells[1];
    return Eigen::Vector2d(px, (img.height - 1) - py);
  };
  for (const auto& s : contour.segments) {
    const Eigen::Vector2d a = to_pixel(contour.vertices[static_cast<std::size_t>(s[0])]);
    const Eigen::Vector2d b = to_pixel(contour.vertices[static_cast<std::size_t>(s[1])]);
    const int steps = static_cast<int>(std::ceil(2.0 * (b - a).cwiseAbs().maxCoeff())) + 1;
    for (int k = 0; k <= steps; ++k) {
      const Eigen::Vector2d p = a + (b - a) * (static_cast<double>(k) / steps);
      put_red(img, std::lround(p.x()), std::lround(p.y()));
    }
  }
  return img;
}

std::vector<std::uint8_t> encode_png(const Image& image) {
  if (image.width <= 0 || image.height <= 0 ||
      image.rgb.size() != static_cast<std::size_t>(image.width) * image.height * 3) {
    throw std::invalid_argument("encode_png: bad image dimensions");
  }
  std::vector<std::uint8_t> out;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (png == nullptr) throw std::runtime_error("encode_png: libpng init failed");
  png_infop info = png_create_info_struct(png);
  if (info == nullptr || setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw std::runtime_error("encode_png: libpng error");
  }
  png_set_write_fn(png, &out, png_append, png_flush_noop);
  png_set_IHDR(png, info, static_cast<png_uint_32>(image.width), static_cast<png_uint_32>(image.height), 8,
               PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int r = 0; r < image.height; ++r) {
    png_write_row(png, const_cast<png_bytep>(image.rgb.data() + static_cast<std::size_t>(r) * image.width * 3));
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return out;
}

void write_png(const std::filesystem::path& path, const Image& image) {
  const std::vector<std::uint8_t> bytes = encode_png(image);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

Image render_occupancy_image(const ModelParams& model, const BoneTransformSet* frame, const GridSpec& grid) {
  if (grid.dim() != 2) throw std::invalid_argument("render: 2D grid required");
  if (model.dim != 2 && model.dim != 3) throw std::invalid_argument("render: model must be 2D or 3D");
  const FieldFunction field = [&](const Batch& x2) -> Eigen::VectorXd {
    Batch x = Batch::Zero(model.dim, x2.cols());
    x.topRows(2) = x2;
    if (frame == nullptr) return canonical_occupancy(model, x, Eigen::VectorXd::Zero(model.pose_dim));
    const BoneTransformSet* frames[] = {frame};
    return predict_occupancy(model, x, frames);
  };
  const LevelSet level = extract_levelset(grid, field);
  return occupancy_image(grid, level.values, level.contour);
}

void render_occupancy_image(const ModelParams& model, const BoneTransformSet* frame, const GridSpec& grid,
                            const std::filesystem::path& out) {
  write_png(out, render_occupancy_image(model, frame, grid));
}

}  // namespace snarf
