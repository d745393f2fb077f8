#include "mlafem/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace mlafem {

namespace {

std::array<double, 2> gradient(const Image& v, const TriangleId& t, double h) {
  const auto g = barycentric_gradients(t.half);
  const auto vs = triangle_vertices(t);
  std::array<double, 2> out{0.0, 0.0};
  for (int a = 0; a < 3; ++a) {
    const double val = v(vs[a].i1, vs[a].i2);
    out[0] += val * g[a][0] / h;
    out[1] += val * g[a][1] / h;
  }
  return out;
}

}  // namespace

std::pair<Stack, Stack> finest_estimator_images(const GridHierarchy& grid, const Image& u_flat, const Image& f_fine,
                                                const Image& kappa_fine) {
  const int L = grid.finest();
  const int n = grid.nodes_per_side(L);
  require_same_size(u_flat.size(), n, "estimator solution");
  require_same_size(f_fine.size(), n, "estimator load");
  require_same_size(kappa_fine.size(), n, "estimator coefficient");
  const double h = grid.mesh_size(L);
  const double area = grid.triangle_area(L);
  Stack r2(2, Image(n)), j2(2, Image(n));

  for (int a = 0; a + 1 < n; ++a)
    for (int b = 0; b + 1 < n; ++b)
      for (int q = 0; q < 2; ++q) {
        const TriangleId t{L, {a, b}, static_cast<Half>(q)};
        const auto vs = triangle_vertices(t);
        const auto gu = gradient(u_flat, t, h);
        const auto gk = gradient(kappa_fine, t, h);
        const double div = gk[0] * gu[0] + gk[1] * gu[1];
        double fs = 0.0, fsq = 0.0;
        for (const auto& v : vs) {
          fs += f_fine(v.i1, v.i2);
          fsq += f_fine(v.i1, v.i2) * f_fine(v.i1, v.i2);
        }
        const double int_f2 = area / 12.0 * (fs * fs + fsq);
        const double int_f = area / 3.0 * fs;
        r2[q](a, b) = h * h * (int_f2 + 2.0 * div * int_f + div * div * area);

        double jump = 0.0;
        for (const auto& e : edge_neighbors(t.half)) {
          const Index2 other = t.owner + e.owner_shift;
          if (!grid.owns_triangles(L, other)) continue;  // boundary edge
          const auto gn = gradient(u_flat, {L, other, e.half}, h);
          const Index2 pa = vs[e.a], pb = vs[e.b];
          const double tx = (pb.i1 - pa.i1) * h, ty = (pb.i2 - pa.i2) * h;
          const double len = std::sqrt(tx * tx + ty * ty);
          const double d = ((gu[0] - gn[0]) * ty - (gu[1] - gn[1]) * tx) / len;
          const double ka = kappa_fine(pa.i1, pa.i2), kb = kappa_fine(pb.i1, pb.i2);
          jump += d * d * len / 3.0 * (ka * ka + ka * kb + kb * kb);
        }
        j2[q](a, b) = h * jump;
      }
  return {std::move(r2), std::move(j2)};
}

std::pair<Stack, Stack> aggregate_to_level(const GridHierarchy& grid, const Stack& fine_r2, const Stack& fine_j2, int k) {
  grid.check_level(k);
  if (k + 1 >= grid.levels()) throw ShapeError("aggregation target must be coarser than the finest level");
  if (fine_r2.size() != 2 || fine_j2.size() != 2) throw ShapeError("estimator images need two channels");
  require_same_size(fine_r2[0].size(), grid.nodes_per_side(k + 1), "aggregation input");
  require_same_size(fine_j2[0].size(), grid.nodes_per_side(k + 1), "aggregation input");
  const int n = grid.nodes_per_side(k);
  Stack r2(2, Image(n)), j2(2, Image(n));
  for (int a = 0; a + 1 < n; ++a)
    for (int b = 0; b + 1 < n; ++b)
      for (int q = 0; q < 2; ++q) {
        double sr = 0.0, sj = 0.0;
        for (const auto& c : children_of_triangle(grid, {k, {a, b}, static_cast<Half>(q)})) {
          sr += fine_r2[static_cast<int>(c.half)](c.owner.i1, c.owner.i2);
          sj += fine_j2[static_cast<int>(c.half)](c.owner.i1, c.owner.i2);
        }
        r2[q](a, b) = 4.0 * sr;
        j2[q](a, b) = 2.0 * sj;
      }
  return {std::move(r2), std::move(j2)};
}

std::vector<TriangleMask> leaf_triangle_masks(const GridHierarchy& grid, const LevelMasks& masks) {
  check_masks(grid, masks);
  const int L = grid.finest();
  std::vector<TriangleMask> touched(grid.levels()), present(grid.levels()), leaf(grid.levels());
  for (int k = 0; k <= L; ++k) {
    const int n = grid.nodes_per_side(k);
    touched[k] = present[k] = leaf[k] = {Mask(n), Mask(n)};
  }
  // touched: some active hat of a finer level overlaps the triangle.
  for (int k = L - 1; k >= 0; --k) {
    const int n = grid.nodes_per_side(k);
    for (int a = 0; a + 1 < n; ++a)
      for (int b = 0; b + 1 < n; ++b)
        for (int q = 0; q < 2; ++q) {
          const TriangleId t{k, {a, b}, static_cast<Half>(q)};
          bool hit = false;
          for (const auto& f : fine_nodes_of_triangle(t)) hit = hit || masks[k + 1].active(f.i1, f.i2);
          for (const auto& c : children_of_triangle(grid, t))
            hit = hit || touched[k + 1][static_cast<int>(c.half)](c.owner.i1, c.owner.i2);
          touched[k][q](a, b) = hit ? 1 : 0;
        }
  }
  for (int a = 0; a + 1 < grid.nodes_per_side(0); ++a)
    for (int b = 0; b + 1 < grid.nodes_per_side(0); ++b) present[0][0](a, b) = present[0][1](a, b) = 1;
  for (int k = 0; k <= L; ++k) {
    const int n = grid.nodes_per_side(k);
    for (int a = 0; a + 1 < n; ++a)
      for (int b = 0; b + 1 < n; ++b)
        for (int q = 0; q < 2; ++q) {
          if (!present[k][q](a, b)) continue;
          if (!touched[k][q](a, b)) {
            leaf[k][q](a, b) = 1;
            continue;
          }
          for (const auto& c : children_of_triangle(grid, {k, {a, b}, static_cast<Half>(q)}))
            present[k + 1][static_cast<int>(c.half)](c.owner.i1, c.owner.i2) = 1;
        }
  }
  return leaf;
}

EstimatorField masked_estimator(std::vector<Stack> r2, std::vector<Stack> j2, std::vector<TriangleMask> tri_mask) {
  if (r2.size() != j2.size() || r2.size() != tri_mask.size()) throw ShapeError("estimator level count mismatch");
  EstimatorField est;
  for (std::size_t k = 0; k < r2.size(); ++k) {
    Stack eta(2);
    for (int q = 0; q < 2; ++q) {
      r2[k][q] = masked(std::move(r2[k][q]), tri_mask[k][q]);
      j2[k][q] = masked(std::move(j2[k][q]), tri_mask[k][q]);
      eta[q] = r2[k][q] + j2[k][q];
    }
    est.eta2.push_back(std::move(eta));
  }
  est.r2 = std::move(r2);
  est.j2 = std::move(j2);
  est.tri_mask = std::move(tri_mask);
  return est;
}

EstimatorField estimate(const GridHierarchy& grid, const MultilevelField& u, const Image& f_fine,
                        const DiffusionField& diffusion) {
  const int L = grid.finest();
  std::vector<Stack> r2(grid.levels()), j2(grid.levels());
  std::tie(r2[L], j2[L]) = finest_estimator_images(grid, flatten_to_finest(grid, u), f_fine, diffusion.kappa_fine);
  for (int k = L - 1; k >= 0; --k) std::tie(r2[k], j2[k]) = aggregate_to_level(grid, r2[k + 1], j2[k + 1], k);
  return masked_estimator(std::move(r2), std::move(j2), leaf_triangle_masks(grid, u.masks));
}

double total_eta2(const EstimatorField& est) {
  double s = 0.0;
  for (const auto& lvl : est.eta2)
    for (const auto& ch : lvl)
      for (double v : ch.data()) s += v;
  return s;
}

double max_eta2(const EstimatorField& est) {
  double m = 0.0;
  for (const auto& lvl : est.eta2)
    for (const auto& ch : lvl) m = std::max(m, max_abs(ch));
  return m;
}

ReliabilityReport reliability_efficiency(double energy_error, const EstimatorField& est) {
  ReliabilityReport r;
  const double total = total_eta2(est);
  if (!(energy_error > 0.0) || !(total > 0.0)) {
    r.degenerate = true;
    r.c_rel = r.c_eff = std::numeric_limits<double>::quiet_NaN();
    return r;
  }
  r.c_rel = energy_error * energy_error / total;
  r.c_eff = std::sqrt(max_eta2(est)) / energy_error;
  return r;
}

}  // namespace mlafem
