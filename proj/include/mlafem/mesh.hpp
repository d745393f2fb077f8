#pragma once

#include <array>
#include <compare>
#include <vector>

#include "mlafem/lattice.hpp"

namespace mlafem {

struct Index2 {
  int i1 = 0;
  int i2 = 0;
  friend auto operator<=>(const Index2&, const Index2&) = default;
  friend Index2 operator+(Index2 a, Index2 b) { return {a.i1 + b.i1, a.i2 + b.i2}; }
  friend Index2 operator-(Index2 a, Index2 b) { return {a.i1 - b.i1, a.i2 - b.i2}; }
  friend Index2 operator*(int s, Index2 a) { return {s * a.i1, s * a.i2}; }
};

struct Point {
  double x = 0.0;
  double y = 0.0;
};

// The two triangles of the square whose lower-left corner is the owner node.
// upper: owner, owner+(1,1), owner+(0,1).  lower: owner, owner+(1,0), owner+(1,1).
enum class Half : int { upper = 0, lower = 1 };

struct TriangleId {
  int level = 0;
  Index2 owner;
  Half half = Half::upper;
  friend auto operator<=>(const TriangleId&, const TriangleId&) = default;
};

class GridHierarchy {
 public:
  GridHierarchy(int coarse_nodes_per_side, int levels);

  int levels() const { return static_cast<int>(n_.size()); }
  int finest() const { return levels() - 1; }
  int nodes_per_side(int k) const;
  double mesh_size(int k) const { return 1.0 / (nodes_per_side(k) - 1); }
  double triangle_area(int k) const { return 0.5 * mesh_size(k) * mesh_size(k); }

  Point coordinate(int k, Index2 i) const;
  bool is_node(int k, Index2 i) const;
  bool is_interior(int k, Index2 i) const;
  bool owns_triangles(int k, Index2 i) const;
  void check_level(int k) const;
  void check_triangle(const TriangleId& t) const;

  // Interior-node indicator on level k.
  Mask interior_mask(int k) const;

 private:
  std::vector<int> n_;
};

GridHierarchy build_hierarchy(int coarse_nodes_per_side, int levels);

// Lattice offsets of the vertices of a triangle relative to its owner.
std::array<Index2, 3> triangle_vertex_offsets(Half half);
std::array<Index2, 3> triangle_vertices(const TriangleId& t);

std::array<TriangleId, 4> children_of_triangle(const GridHierarchy& grid, const TriangleId& t);

// p_1..p_7: offsets of hats whose support overlaps the hat at the origin.
const std::array<Index2, 7>& hat_overlap_offsets();

// The six triangles T^1..T^6 around a node i, counter-clockwise starting
// east: T^l = (i + owner_shift, half).
struct PatchTriangle {
  Index2 owner_shift;
  Half half;
};
const std::array<PatchTriangle, 6>& node_patch();

// Triangle of level k containing x (ties resolved towards the lower owner).
TriangleId locate(const GridHierarchy& grid, int k, Point x);
std::array<double, 3> barycentric(const GridHierarchy& grid, const TriangleId& t, Point x);

// Closed-form Courant hat of node i on level k.
double hat_value(const GridHierarchy& grid, int k, Index2 i, Point x);

// Level-(k+1) lattice nodes of the closed triangle: three vertices, then the
// midpoints of edges (v0,v1), (v1,v2), (v2,v0).
std::array<Index2, 6> fine_nodes_of_triangle(const TriangleId& t);

struct EdgeNeighbor {
  int a = 0;  // local vertex indices of the shared edge
  int b = 0;
  Index2 owner_shift;  // neighbor owner relative to this triangle's owner
  Half half;
};
// Edge-adjacent triangles of a triangle of the given half.
const std::array<EdgeNeighbor, 3>& edge_neighbors(Half half);

}  // namespace mlafem
