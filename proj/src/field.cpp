#include "mlafem/field.hpp"

#include <string>

namespace mlafem {

namespace {

// Prolongation weight of the coarse node at offset d from the coincident fine node.
double prolongation_weight(int d1, int d2) {
  if (d1 == 0 && d2 == 0) return 1.0;
  if (d1 * d2 < 0) return 0.0;
  if (d1 < -1 || d1 > 1 || d2 < -1 || d2 > 1) return 0.0;
  return 0.5;
}

int coarse_size_of(int fine) {
  if (fine < 3 || fine % 2 == 0) throw ShapeError("fine lattice size " + std::to_string(fine) + " has no coarse parent");
  return (fine + 1) / 2;
}

}  // namespace

Mask closure_of(const Mask& active) {
  const int n = active.size();
  Mask c(n);
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b) {
      if (!active(a, b)) continue;
      for (const auto& p : hat_overlap_offsets()) {
        if (c.contains(a + p.i1, b + p.i2)) c(a + p.i1, b + p.i2) = 1;
        if (c.contains(a - p.i1, b - p.i2)) c(a - p.i1, b - p.i2) = 1;
      }
    }
  return c;
}

LevelMask make_level_mask(Mask active) {
  const int n = active.size();
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b)
      if (active(a, b) && (a == 0 || b == 0 || a == n - 1 || b == n - 1))
        throw ShapeError("active mask contains a boundary node");
  Mask closure = closure_of(active);
  return {std::move(active), std::move(closure)};
}

LevelMask full_level_mask(const GridHierarchy& grid, int k) { return make_level_mask(grid.interior_mask(k)); }

LevelMask empty_level_mask(const GridHierarchy& grid, int k) {
  return make_level_mask(Mask(grid.nodes_per_side(k)));
}

LevelMasks initial_masks(const GridHierarchy& grid) {
  LevelMasks m;
  for (int k = 0; k < grid.levels(); ++k) m.push_back(k == 0 ? full_level_mask(grid, k) : empty_level_mask(grid, k));
  return m;
}

LevelMasks single_level_masks(const GridHierarchy& grid, int level) {
  LevelMasks m;
  for (int k = 0; k < grid.levels(); ++k)
    m.push_back(k == level ? full_level_mask(grid, k) : empty_level_mask(grid, k));
  return m;
}

void check_masks(const GridHierarchy& grid, const LevelMasks& masks) {
  if (static_cast<int>(masks.size()) != grid.levels()) throw ShapeError("mask count differs from hierarchy depth");
  for (int k = 0; k < grid.levels(); ++k) {
    require_same_size(masks[k].active.size(), grid.nodes_per_side(k), "active mask");
    require_same_size(masks[k].closure.size(), grid.nodes_per_side(k), "closure mask");
  }
}

std::size_t dof_count(const LevelMasks& masks) {
  std::size_t s = 0;
  for (const auto& m : masks) s += count(m.active);
  return s;
}

MultilevelField zero_field(const GridHierarchy& grid, LevelMasks masks) {
  check_masks(grid, masks);
  MultilevelField u;
  for (int k = 0; k < grid.levels(); ++k) u.values.emplace_back(grid.nodes_per_side(k));
  u.masks = std::move(masks);
  return u;
}

void check_field(const GridHierarchy& grid, const MultilevelField& u) {
  check_masks(grid, u.masks);
  if (static_cast<int>(u.values.size()) != grid.levels()) throw ShapeError("field level count differs from hierarchy");
  for (int k = 0; k < grid.levels(); ++k) require_same_size(u.values[k].size(), grid.nodes_per_side(k), "field level");
}

Stack translate(const Image& image, const LevelMask& mask) {
  require_same_size(image.size(), mask.active.size(), "translate");
  const int n = image.size();
  Stack out(hat_overlap_offsets().size(), Image(n));
  for (std::size_t t = 0; t < out.size(); ++t) {
    const Index2 p = hat_overlap_offsets()[t];
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b)
        if (mask.active(a, b)) out[t](a, b) = image.get(a + p.i1, b + p.i2);
  }
  return out;
}

Image prolongate_uniform(const Image& coarse) {
  const int nc = coarse.size();
  const int nf = 2 * nc - 1;
  Image fine(nf);
  for (int a = 0; a < nc; ++a)
    for (int b = 0; b < nc; ++b) {
      const double v = coarse(a, b);
      if (v == 0.0) continue;
      for (int d1 = -1; d1 <= 1; ++d1)
        for (int d2 = -1; d2 <= 1; ++d2) {
          const double w = prolongation_weight(d1, d2);
          if (w != 0.0 && fine.contains(2 * a + d1, 2 * b + d2)) fine(2 * a + d1, 2 * b + d2) += w * v;
        }
    }
  return fine;
}

Image restrict_uniform(const Image& fine) {
  const int nc = coarse_size_of(fine.size());
  Image coarse(nc);
  for (int a = 0; a < nc; ++a)
    for (int b = 0; b < nc; ++b) {
      double s = 0.0;
      for (int d1 = -1; d1 <= 1; ++d1)
        for (int d2 = -1; d2 <= 1; ++d2) s += prolongation_weight(d1, d2) * fine.get(2 * a + d1, 2 * b + d2);
      coarse(a, b) = s;
    }
  return coarse;
}

Image prolongate(const Image& coarse, const Mask& coarse_closure, const Mask& fine_closure) {
  require_same_size(coarse.size(), coarse_closure.size(), "prolongate input");
  require_same_size(2 * coarse.size() - 1, fine_closure.size(), "prolongate output");
  return masked(prolongate_uniform(masked(coarse, coarse_closure)), fine_closure);
}

Image restrict_weighted(const Image& fine, const Mask& fine_closure, const Mask& coarse_closure) {
  require_same_size(fine.size(), fine_closure.size(), "restrict input");
  require_same_size(coarse_size_of(fine.size()), coarse_closure.size(), "restrict output");
  return masked(restrict_uniform(masked(fine, fine_closure)), coarse_closure);
}

std::vector<double> evaluate_field(const GridHierarchy& grid, const MultilevelField& u, const std::vector<Point>& points) {
  check_field(grid, u);
  std::vector<double> out(points.size(), 0.0);
  for (std::size_t p = 0; p < points.size(); ++p) {
    for (int k = 0; k < grid.levels(); ++k) {
      const TriangleId t = locate(grid, k, points[p]);
      const auto lam = barycentric(grid, t, points[p]);
      const auto v = triangle_vertices(t);
      for (int a = 0; a < 3; ++a) out[p] += lam[a] * u.values[k](v[a].i1, v[a].i2);
    }
  }
  return out;
}

Image flatten_to_finest(const GridHierarchy& grid, const MultilevelField& u) {
  check_field(grid, u);
  Image acc = u.values[0];
  for (int k = 1; k < grid.levels(); ++k) acc = prolongate_uniform(acc) + u.values[k];
  return acc;
}

}  // namespace mlafem
