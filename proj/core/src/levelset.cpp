#include "snarf/levelset.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <stdexcept>
#include <unordered_map>

#include "detail/mc_tables.hpp"
#include "snarf/evaluation.hpp"

namespace snarf {

namespace {

// Vertices shared between cells, keyed by the grid edge they lie on.
template <typename Geometry>
class EdgeVertices {
 public:
  EdgeVertices(const GridSpec& grid, const Eigen::VectorXd& values, double iso, Geometry& out)
      : grid_(grid), values_(values), iso_(iso), out_(out) {}

  // Edge from vertex a along axis k (b is the neighbour).
  int get(std::size_t a, std::size_t b, int axis) {
    const std::size_t key = a * 3 + static_cast<std::size_t>(axis);
    if (auto it = index_.find(key); it != index_.end()) return it->second;
    const double va = values_(static_cast<Eigen::Index>(a));
    const double vb = values_(static_cast<Eigen::Index>(b));
    const double t = va == vb ? 0.5 : std::clamp((iso_ - va) / (vb - va), 0.0, 1.0);
    const Vec pa = grid_.vertex(a);
    const Vec pb = grid_.vertex(b);
    out_.vertices.push_back(pa + t * (pb - pa));
    const int id = static_cast<int>(out_.vertices.size()) - 1;
    index_.emplace(key, id);
    return id;
  }

 private:
  const GridSpec& grid_;
  const Eigen::VectorXd& values_;
  double iso_;
  Geometry& out_;
  std::unordered_map<std::size_t, int> index_;
};

void check_values(const GridSpec& grid, const Eigen::VectorXd& values, int dim) {
  grid.validate();
  if (grid.dim() != dim) throw std::invalid_argument("level set: grid has the wrong dimension");
  if (static_cast<std::size_t>(values.size()) != grid.vertex_count()) {
    throw std::invalid_argument("level set: one value per grid vertex required");
  }
}

}  // namespace

GridSpec GridSpec::uniform(const Vec& lo, const Vec& hi, int cells_per_axis) {
  return {lo, hi, std::vector<int>(static_cast<std::size_t>(lo.size()), cells_per_axis)};
}

std::size_t GridSpec::vertex_count() const {
  std::size_t n = 1;
  for (int c : cells) n *= static_cast<std::size_t>(c + 1);
  return n;
}

Vec GridSpec::vertex(std::size_t index) const {
  Vec p(dim());
  for (int k = 0; k < dim(); ++k) {
    const auto n = static_cast<std::size_t>(cells[k] + 1);
    const auto i = index % n;
    index /= n;
    p(k) = lo(k) + (hi(k) - lo(k)) * static_cast<double>(i) / cells[k];
  }
  return p;
}

Batch GridSpec::vertices() const {
  Batch out(dim(), static_cast<Eigen::Index>(vertex_count()));
  for (std::size_t v = 0; v < vertex_count(); ++v) out.col(static_cast<Eigen::Index>(v)) = vertex(v);
  return out;
}

void GridSpec::validate() const {
  if (cells.empty() || cells.size() > static_cast<std::size_t>(kMaxDim)) throw std::invalid_argument("grid: dimension must be 1 to 3");
  if (lo.size() != dim() || hi.size() != dim()) throw std::invalid_argument("grid: corner dimension mismatch");
  for (int k = 0; k < dim(); ++k) {
    if (cells[k] < 2) throw std::invalid_argument("grid: need at least 2 cells per axis");
    if (!(hi(k) > lo(k))) throw std::invalid_argument("grid: hi must exceed lo on every axis");
  }
}

std::vector<std::vector<int>> Contour::polylines() const {
  std::vector<std::vector<int>> adjacency(vertices.size());
  for (const auto& s : segments) {
    adjacency[s[0]].push_back(s[1]);
    adjacency[s[1]].push_back(s[0]);
  }
  std::vector<char> used(segments.size(), 0);
  std::unordered_map<long long, std::vector<int>> segs_at;
  for (std::size_t i = 0; i < segments.size(); ++i) {
    segs_at[segments[i][0]].push_back(static_cast<int>(i));
    segs_at[segments[i][1]].push_back(static_cast<int>(i));
  }
  const auto walk = [&](int start) {
    std::vector<int> path{start};
    int current = start;
    for (;;) {
      int next_seg = -1;
      for (int s : segs_at[current]) {
        if (!used[s]) {
          next_seg = s;
          break;
        }
      }
      if (next_seg < 0) break;
      used[next_seg] = 1;
      current = segments[next_seg][0] == current ? segments[next_seg][1] : segments[next_seg][0];
      path.push_back(current);
    }
    return path;
  };
  std::vector<std::vector<int>> out;
  // Open chains start at vertices of odd degree; whatever remains is closed loops.
  for (std::size_t v = 0; v < vertices.size(); ++v) {
    if (adjacency[v].size() % 2 == 1) {
      auto path = walk(static_cast<int>(v));
      if (path.size() > 1) out.push_back(std::move(path));
    }
  }
  for (std::size_t i = 0; i < segments.size(); ++i) {
    if (!used[i]) out.push_back(walk(segments[i][0]));
  }
  return out;
}

Contour marching_squares(const GridSpec& grid, const Eigen::VectorXd& values, double iso) {
  check_values(grid, values, 2);
  Contour out;
  EdgeVertices<Contour> edges(grid, values, iso, out);
  const auto nx = static_cast<std::size_t>(grid.cells[0] + 1);
  for (int j = 0; j < grid.cells[1]; ++j) {
    for (int i = 0; i < grid.cells[0]; ++i) {
      const std::size_t c0 = static_cast<std::size_t>(j) * nx + i;
      const std::size_t c1 = c0 + 1;
      const std::size_t c3 = c0 + nx;
      const std::size_t c2 = c3 + 1;
      const double v[4] = {values(static_cast<Eigen::Index>(c0)), values(static_cast<Eigen::Index>(c1)),
                           values(static_cast<Eigen::Index>(c2)), values(static_cast<Eigen::Index>(c3))};
      int code = 0;
      for (int k = 0; k < 4; ++k) code |= (v[k] >= iso ? 1 : 0) << k;
      if (code == 0 || code == 15) continue;
      // Edges: 0 bottom, 1 right, 2 top, 3 left.
      const auto e = [&](int k) {
        switch (k) {
          case 0: return edges.get(c0, c1, 0);
          case 1: return edges.get(c1, c2, 1);
          case 2: return edges.get(c3, c2, 0);
          default: return edges.get(c0, c3, 1);
        }
      };
      const auto seg = [&](int a, int b) { out.segments.push_back({e(a), e(b)}); };
      const bool center_inside = (v[0] + v[1] + v[2] + v[3]) / 4.0 >= iso;
      switch (code) {
        case 1: case 14: seg(3, 0); break;
        case 2: case 13: seg(0, 1); break;
        case 3: case 12: seg(3, 1); break;
        case 4: case 11: seg(1, 2); break;
        case 6: case 9: seg(0, 2); break;
        case 7: case 8: seg(3, 2); break;
        case 5:
          if (center_inside) {
            seg(0, 1);
            seg(2, 3);
          } else {
            seg(3, 0);
            seg(1, 2);
          }
          break;
        case 10:
          if (center_inside) {
            seg(3, 0);
            seg(1, 2);
          } else {
            seg(0, 1);
            seg(2, 3);
          }
          break;
        default: break;
      }
    }
  }
  return out;
}

TriMesh marching_cubes(const GridSpec& grid, const Eigen::VectorXd& values, double iso) {
  check_values(grid, values, 3);
  TriMesh out;
  EdgeVertices<TriMesh> edges(grid, values, iso, out);
  const auto nx = static_cast<std::size_t>(grid.cells[0] + 1);
  const auto ny = static_cast<std::size_t>(grid.cells[1] + 1);
  static constexpr int kCorner[8][3] = {{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0},
                                        {0, 0, 1}, {1, 0, 1}, {1, 1, 1}, {0, 1, 1}};
  static constexpr int kEdge[12][2] = {{0, 1}, {1, 2}, {3, 2}, {0, 3}, {4, 5}, {5, 6},
                                       {7, 6}, {4, 7}, {0, 4}, {1, 5}, {2, 6}, {3, 7}};
  for (int k = 0; k < grid.cells[2]; ++k) {
    for (int j = 0; j < grid.cells[1]; ++j) {
      for (int i = 0; i < grid.cells[0]; ++i) {
        std::size_t corner[8];
        int code = 0;
        for (int c = 0; c < 8; ++c) {
          corner[c] = (static_cast<std::size_t>(k + kCorner[c][2]) * ny + j + kCorner[c][1]) * nx + i + kCorner[c][0];
          if (values(static_cast<Eigen::Index>(corner[c])) < iso) code |= 1 << c;
        }
        if (detail::kMcEdgeTable[code] == 0) continue;
        int vert[12];
        for (int e = 0; e < 12; ++e) {
          if (!(detail::kMcEdgeTable[code] & (1 << e))) continue;
          const int a = kEdge[e][0];
          const int b = kEdge[e][1];
          int axis = 0;
          while (kCorner[a][axis] == kCorner[b][axis]) ++axis;
          vert[e] = edges.get(corner[a], corner[b], axis);
        }
        for (int t = 0; detail::kMcTriTable[code][t] != -1; t += 3) {
          out.triangles.push_back({vert[detail::kMcTriTable[code][t]], vert[detail::kMcTriTable[code][t + 1]],
                                   vert[detail::kMcTriTable[code][t + 2]]});
        }
      }
    }
  }
  return out;
}

Eigen::VectorXd sample_field(const GridSpec& grid, const FieldFunction& field) {
  grid.validate();
  const Eigen::VectorXd values = field(grid.vertices());
  if (static_cast<std::size_t>(values.size()) != grid.vertex_count()) {
    throw std::invalid_argument("sample_field: field returned the wrong number of values");
  }
  return values;
}

LevelSet extract_levelset(const GridSpec& grid, const FieldFunction& field, double iso) {
  LevelSet out;
  out.values = sample_field(grid, field);
  if (grid.dim() == 2) {
    out.contour = marching_squares(grid, out.values, iso);
  } else if (grid.dim() == 3) {
    out.mesh = marching_cubes(grid, out.values, iso);
  } else {
    throw std::invalid_argument("extract_levelset: grid must be 2D or 3D");
  }
  return out;
}

LevelSet extract_levelset(const ModelParams& model, const BoneTransformSet* frame, const GridSpec& grid) {
  if (grid.dim() != model.dim) throw std::invalid_argument("extract_levelset: grid and model dimensions differ");
  if (frame == nullptr) {
    const Eigen::VectorXd pose = Eigen::VectorXd::Zero(model.pose_dim);
    return extract_levelset(grid, [&](const Batch& x) { return canonical_occupancy(model, x, pose); });
  }
  const BoneTransformSet* frames[] = {frame};
  return extract_levelset(grid, [&](const Batch& x) { return predict_occupancy(model, x, frames); });
}

void write_svg(const std::filesystem::path& path, const Contour& contour, const GridSpec& grid) {
  if (grid.dim() != 2) throw std::invalid_argument("write_svg: 2D grid required");
  std::ofstream out(path, std::ios::trunc);
  const double w = grid.hi(0) - grid.lo(0);
  const double h = grid.hi(1) - grid.lo(1);
  out << std::setprecision(9);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"" << grid.lo(0) << ' ' << -grid.hi(1) << ' ' << w
      << ' ' << h << "\" width=\"800\" height=\"" << static_cast<int>(800.0 * h / w) << "\">\n";
  out << "<g transform=\"scale(1,-1)\" fill=\"none\" stroke=\"black\" stroke-width=\"" << w / 400.0 << "\">\n";
  for (const auto& line : contour.polylines()) {
    out << "<polyline points=\"";
    for (std::size_t k = 0; k < line.size(); ++k) {
      const Vec& p = contour.vertices[static_cast<std::size_t>(line[k])];
      out << (k ? " " : "") << p(0) << ',' << p(1);
    }
    out << "\"/>\n";
  }
  out << "</g>\n</svg>\n";
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

void write_contour_csv(const std::filesystem::path& path, const Contour& contour) {
  std::ofstream out(path, std::ios::trunc);
  out << std::setprecision(17) << "polyline,vertex,x,y\n";
  const auto lines = contour.polylines();
  for (std::size_t l = 0; l < lines.size(); ++l) {
    for (std::size_t k = 0; k < lines[l].size(); ++k) {
      const Vec& p = contour.vertices[static_cast<std::size_t>(lines[l][k])];
      out << l << ',' << k << ',' << p(0) << ',' << p(1) << '\n';
    }
  }
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

void write_obj(const std::filesystem::path& path, const TriMesh& mesh) {
  std::ofstream out(path, std::ios::trunc);
  out << std::setprecision(17);
  for (const Vec& v : mesh.vertices) out << "v " << v(0) << ' ' << v(1) << ' ' << v(2) << '\n';
  for (const auto& t : mesh.triangles) out << "f " << t[0] + 1 << ' ' << t[1] + 1 << ' ' << t[2] + 1 << '\n';
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

}  // namespace snarf
