#pragma once

#include <array>
#include <filesystem>
#include <functional>
#include <vector>

#include "snarf/model.hpp"
#include "snarf/transform.hpp"
#include "snarf/types.hpp"

namespace snarf {

// Regular grid given by its corners and the number of cells per axis. Vertex
// (i0, i1, i2) has flat index i0 + n0 * (i1 + n1 * i2) with n_k = cells[k] + 1.
struct GridSpec {
  Vec lo;
  Vec hi;
  std::vector<int> cells;

  static GridSpec uniform(const Vec& lo, const Vec& hi, int cells_per_axis);

  int dim() const { return static_cast<int>(cells.size()); }
  std::size_t vertex_count() const;
  Vec vertex(std::size_t index) const;
  Batch vertices() const;
  void validate() const;
};

struct Contour {
  std::vector<Vec> vertices;
  std::vector<std::array<int, 2>> segments;

  bool empty() const { return segments.empty(); }
  /// Segments chained into vertex index paths; closed loops repeat their first vertex.
  std::vector<std::vector<int>> polylines() const;
};

struct TriMesh {
  std::vector<Vec> vertices;
  std::vector<std::array<int, 3>> triangles;

  bool empty() const { return triangles.empty(); }
};

/// `values` holds one sample per grid vertex. Vertices are interpolated
/// linearly along cell edges and shared between neighbouring cells.
Contour marching_squares(const GridSpec& grid, const Eigen::VectorXd& values, double iso = 0.5);
TriMesh marching_cubes(const GridSpec& grid, const Eigen::VectorXd& values, double iso = 0.5);

using FieldFunction = std::function<Eigen::VectorXd(const Batch&)>;
Eigen::VectorXd sample_field(const GridSpec& grid, const FieldFunction& field);

struct LevelSet {
  Eigen::VectorXd values;  // field sampled at grid vertices
  Contour contour;         // 2D grids
  TriMesh mesh;            // 3D grids
};

LevelSet extract_levelset(const GridSpec& grid, const FieldFunction& field, double iso = 0.5);

/// 0.5 level set of a model. With `frame` null the canonical occupancy is
/// used; otherwise the posed occupancy under that frame.
LevelSet extract_levelset(const ModelParams& model, const BoneTransformSet* frame, const GridSpec& grid);

void write_svg(const std::filesystem::path& path, const Contour& contour, const GridSpec& grid);
void write_contour_csv(const std::filesystem::path& path, const Contour& contour);
void write_obj(const std::filesystem::path& path, const TriMesh& mesh);

}  // namespace snarf
