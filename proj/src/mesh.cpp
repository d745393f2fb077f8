#include "mlafem/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace mlafem {

GridHierarchy::GridHierarchy(int coarse_nodes_per_side, int levels) {
  if (coarse_nodes_per_side < 3)
    throw ConfigError("coarse_nodes_per_side must be >= 3, got " + std::to_string(coarse_nodes_per_side));
  if (levels < 1) throw ConfigError("levels must be >= 1, got " + std::to_string(levels));
  if (levels > 12) throw ConfigError("levels must be <= 12, got " + std::to_string(levels));
  n_.push_back(coarse_nodes_per_side);
  for (int k = 1; k < levels; ++k) n_.push_back(2 * n_.back() - 1);
}

int GridHierarchy::nodes_per_side(int k) const {
  check_level(k);
  return n_[static_cast<std::size_t>(k)];
}

void GridHierarchy::check_level(int k) const {
  if (k < 0 || k >= levels())
    throw ShapeError("level " + std::to_string(k) + " outside hierarchy of " + std::to_string(levels()));
}

Point GridHierarchy::coordinate(int k, Index2 i) const {
  const double h = mesh_size(k);
  return {i.i1 * h, i.i2 * h};
}

bool GridHierarchy::is_node(int k, Index2 i) const {
  const int n = nodes_per_side(k);
  return i.i1 >= 0 && i.i2 >= 0 && i.i1 < n && i.i2 < n;
}

bool GridHierarchy::is_interior(int k, Index2 i) const {
  const int n = nodes_per_side(k);
  return i.i1 > 0 && i.i2 > 0 && i.i1 < n - 1 && i.i2 < n - 1;
}

bool GridHierarchy::owns_triangles(int k, Index2 i) const {
  const int n = nodes_per_side(k);
  return i.i1 >= 0 && i.i2 >= 0 && i.i1 < n - 1 && i.i2 < n - 1;
}

void GridHierarchy::check_triangle(const TriangleId& t) const {
  check_level(t.level);
  if (!owns_triangles(t.level, t.owner))
    throw ShapeError("triangle owner (" + std::to_string(t.owner.i1) + "," + std::to_string(t.owner.i2) +
                     ") invalid on level " + std::to_string(t.level));
}

Mask GridHierarchy::interior_mask(int k) const {
  const int n = nodes_per_side(k);
  Mask m(n);
  for (int a = 1; a < n - 1; ++a)
    for (int b = 1; b < n - 1; ++b) m(a, b) = 1;
  return m;
}

GridHierarchy build_hierarchy(int coarse_nodes_per_side, int levels) {
  return GridHierarchy(coarse_nodes_per_side, levels);
}

std::array<Index2, 3> triangle_vertex_offsets(Half half) {
  if (half == Half::upper) return {Index2{0, 0}, Index2{1, 1}, Index2{0, 1}};
  return {Index2{0, 0}, Index2{1, 0}, Index2{1, 1}};
}

std::array<Index2, 3> triangle_vertices(const TriangleId& t) {
  auto v = triangle_vertex_offsets(t.half);
  for (auto& p : v) p = p + t.owner;
  return v;
}

std::array<TriangleId, 4> children_of_triangle(const GridHierarchy& grid, const TriangleId& t) {
  grid.check_triangle(t);
  if (t.level + 1 >= grid.levels()) throw ShapeError("triangle on the finest level has no children");
  const int k = t.level + 1;
  const Index2 o = 2 * t.owner;
  if (t.half == Half::upper)
    return {TriangleId{k, o, Half::upper}, TriangleId{k, o + Index2{1, 1}, Half::upper},
            TriangleId{k, o + Index2{0, 1}, Half::upper}, TriangleId{k, o + Index2{0, 1}, Half::lower}};
  return {TriangleId{k, o, Half::lower}, TriangleId{k, o + Index2{1, 1}, Half::lower},
          TriangleId{k, o + Index2{1, 0}, Half::upper}, TriangleId{k, o + Index2{1, 0}, Half::lower}};
}

const std::array<Index2, 7>& hat_overlap_offsets() {
  static const std::array<Index2, 7> p = {Index2{0, 0},  Index2{1, 0}, Index2{-1, 0}, Index2{0, 1},
                                          Index2{0, -1}, Index2{1, 1}, Index2{-1, -1}};
  return p;
}

const std::array<PatchTriangle, 6>& node_patch() {
  static const std::array<PatchTriangle, 6> patch = {
      PatchTriangle{{0, 0}, Half::lower},   PatchTriangle{{0, 0}, Half::upper},
      PatchTriangle{{-1, 0}, Half::lower},  PatchTriangle{{-1, -1}, Half::upper},
      PatchTriangle{{-1, -1}, Half::lower}, PatchTriangle{{0, -1}, Half::upper}};
  return patch;
}

TriangleId locate(const GridHierarchy& grid, int k, Point x) {
  if (!(x.x >= 0.0 && x.x <= 1.0 && x.y >= 0.0 && x.y <= 1.0))
    throw ShapeError("point outside the unit square");
  const int n = grid.nodes_per_side(k);
  const double h = grid.mesh_size(k);
  const double sx = x.x / h;
  const double sy = x.y / h;
  const int o1 = std::clamp(static_cast<int>(std::floor(sx)), 0, n - 2);
  const int o2 = std::clamp(static_cast<int>(std::floor(sy)), 0, n - 2);
  const Half half = (sy - o2) > (sx - o1) ? Half::upper : Half::lower;
  return {k, {o1, o2}, half};
}

std::array<double, 3> barycentric(const GridHierarchy& grid, const TriangleId& t, Point x) {
  const double h = grid.mesh_size(t.level);
  const double s = x.x / h - t.owner.i1;
  const double r = x.y / h - t.owner.i2;
  if (t.half == Half::upper) return {1.0 - r, s, r - s};
  return {1.0 - s, s - r, r};
}

double hat_value(const GridHierarchy& grid, int k, Index2 i, Point x) {
  const double h = grid.mesh_size(k);
  const double s = x.x / h - i.i1;
  const double t = x.y / h - i.i2;
  const double v = s * t >= 0.0 ? 1.0 - std::max(std::abs(s), std::abs(t)) : 1.0 - std::abs(s) - std::abs(t);
  return std::max(0.0, v);
}

std::array<Index2, 6> fine_nodes_of_triangle(const TriangleId& t) {
  const auto v = triangle_vertices(t);
  std::array<Index2, 6> r;
  for (int a = 0; a < 3; ++a) r[a] = 2 * v[a];
  for (int a = 0; a < 3; ++a) r[3 + a] = v[a] + v[(a + 1) % 3];
  return r;
}

const std::array<EdgeNeighbor, 3>& edge_neighbors(Half half) {
  static const std::array<EdgeNeighbor, 3> up = {EdgeNeighbor{0, 1, {0, 0}, Half::lower},
                                                 EdgeNeighbor{1, 2, {0, 1}, Half::lower},
                                                 EdgeNeighbor{2, 0, {-1, 0}, Half::lower}};
  static const std::array<EdgeNeighbor, 3> lo = {EdgeNeighbor{0, 1, {0, -1}, Half::upper},
                                                 EdgeNeighbor{1, 2, {1, 0}, Half::upper},
                                                 EdgeNeighbor{2, 0, {0, 0}, Half::upper}};
  return half == Half::upper ? up : lo;
}

}  // namespace mlafem
