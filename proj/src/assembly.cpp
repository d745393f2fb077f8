#include "mlafem/assembly.hpp"

#include <cmath>
#include <string>

namespace mlafem {

namespace {

constexpr int kPatch = 6;
constexpr int kOverlap = 7;

void check_diffusion(const GridHierarchy& grid, const DiffusionField& d, int k) {
  grid.check_level(k);
  if (static_cast<int>(d.upsilon.size()) != grid.levels()) throw ShapeError("diffusion field depth mismatch");
  require_same_size(d.upsilon[k].front().size(), grid.nodes_per_side(k), "upsilon");
}

// Sum over the patch of Upsilon(l, j) * sum_t K[l][t] * src(j + p_t), written where out_mask is set.
Image patch_stencil(const GridHierarchy& grid, int k, const Image& src, const DiffusionField& d, const Mask& out_mask) {
  const int n = grid.nodes_per_side(k);
  const double inv_area = 1.0 / grid.triangle_area(k);
  const auto& C = reference_stiffness();
  const auto& p = hat_overlap_offsets();
  const auto& ups = d.upsilon[k];
  Image out(n);
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b) {
      if (!out_mask(a, b)) continue;
      std::array<double, kOverlap> shifted;
      for (int t = 0; t < kOverlap; ++t) shifted[t] = src.get(a + p[t].i1, b + p[t].i2);
      double s = 0.0;
      for (int l = 0; l < kPatch; ++l) {
        double inner = 0.0;
        for (int t = 0; t < kOverlap; ++t) inner += C[l][t] * shifted[t];
        s += ups[l](a, b) * inner;
      }
      out(a, b) = s * inv_area;
    }
  return out;
}

}  // namespace

std::array<std::array<double, 2>, 3> barycentric_gradients(Half half) {
  if (half == Half::upper) return {{{0.0, -1.0}, {1.0, 0.0}, {-1.0, 1.0}}};
  return {{{-1.0, 0.0}, {1.0, -1.0}, {0.0, 1.0}}};
}

const StiffnessTable& reference_stiffness() {
  static const StiffnessTable table = [] {
    StiffnessTable c{};
    const auto& p = hat_overlap_offsets();
    for (int l = 0; l < kPatch; ++l) {
      const auto& pt = node_patch()[l];
      const auto verts = triangle_vertex_offsets(pt.half);
      const auto grads = barycentric_gradients(pt.half);
      int self = -1;
      for (int a = 0; a < 3; ++a)
        if (verts[a] + pt.owner_shift == Index2{0, 0}) self = a;
      for (int t = 0; t < kOverlap; ++t)
        for (int b = 0; b < 3; ++b)
          if (verts[b] + pt.owner_shift == p[t])
            c[l][t] = 0.5 * (grads[self][0] * grads[b][0] + grads[self][1] * grads[b][1]);
    }
    return c;
  }();
  return table;
}

DiffusionField compute_upsilon(const GridHierarchy& grid, Image kappa_fine) {
  const int L = grid.finest();
  require_same_size(kappa_fine.size(), grid.nodes_per_side(L), "kappa image");
  for (double v : kappa_fine.data())
    if (!(v > 0.0)) throw NumericalError("diffusion coefficient must be positive at every node");

  DiffusionField d;
  d.triangle_integrals.resize(grid.levels());
  d.upsilon.resize(grid.levels());

  const int nf = grid.nodes_per_side(L);
  Stack fine(2, Image(nf));
  const double third = grid.triangle_area(L) / 3.0;
  for (int a = 0; a + 1 < nf; ++a)
    for (int b = 0; b + 1 < nf; ++b)
      for (int q = 0; q < 2; ++q) {
        double s = 0.0;
        for (const auto& v : triangle_vertices({L, {a, b}, static_cast<Half>(q)})) s += kappa_fine(v.i1, v.i2);
        fine[q](a, b) = third * s;
      }
  d.triangle_integrals[L] = std::move(fine);

  for (int k = L - 1; k >= 0; --k) {
    const int n = grid.nodes_per_side(k);
    Stack coarse(2, Image(n));
    for (int a = 0; a + 1 < n; ++a)
      for (int b = 0; b + 1 < n; ++b)
        for (int q = 0; q < 2; ++q) {
          double s = 0.0;
          for (const auto& c : children_of_triangle(grid, {k, {a, b}, static_cast<Half>(q)}))
            s += d.triangle_integrals[k + 1][static_cast<int>(c.half)](c.owner.i1, c.owner.i2);
          coarse[q](a, b) = s;
        }
    d.triangle_integrals[k] = std::move(coarse);
  }

  for (int k = 0; k <= L; ++k) {
    const int n = grid.nodes_per_side(k);
    Stack ups(kPatch, Image(n));
    for (int l = 0; l < kPatch; ++l) {
      const auto& pt = node_patch()[l];
      for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b) {
          const Index2 o = Index2{a, b} + pt.owner_shift;
          if (grid.owns_triangles(k, o)) ups[l](a, b) = d.triangle_integrals[k][static_cast<int>(pt.half)](o.i1, o.i2);
        }
    }
    d.upsilon[k] = std::move(ups);
  }
  d.kappa_fine = std::move(kappa_fine);
  return d;
}

Image apply_A_level(const GridHierarchy& grid, int k, const Image& v, const DiffusionField& diffusion,
                    const LevelMask& mask) {
  check_diffusion(grid, diffusion, k);
  require_same_size(v.size(), grid.nodes_per_side(k), "apply_A_level input");
  require_same_size(mask.active.size(), grid.nodes_per_side(k), "apply_A_level mask");
  return patch_stencil(grid, k, masked(v, mask.closure), diffusion, mask.active);
}

Image apply_A_level_transpose(const GridHierarchy& grid, int k, const Image& w, const DiffusionField& diffusion,
                              const LevelMask& mask) {
  check_diffusion(grid, diffusion, k);
  require_same_size(w.size(), grid.nodes_per_side(k), "apply_A_level_transpose input");
  require_same_size(mask.active.size(), grid.nodes_per_side(k), "apply_A_level_transpose mask");
  return patch_stencil(grid, k, masked(w, mask.active), diffusion, mask.closure);
}

std::vector<Image> compute_utilde(const GridHierarchy& grid, const MultilevelField& u) {
  check_field(grid, u);
  std::vector<Image> ut;
  ut.emplace_back(grid.nodes_per_side(0));
  for (int k = 1; k < grid.levels(); ++k)
    ut.push_back(prolongate(ut[k - 1] + u.values[k - 1], u.masks[k - 1].closure, u.masks[k].closure));
  return ut;
}

std::vector<Image> compute_ubar(const GridHierarchy& grid, const MultilevelField& u, const DiffusionField& diffusion) {
  check_field(grid, u);
  const int L = grid.finest();
  std::vector<Image> ub(grid.levels());
  ub[L] = Image(grid.nodes_per_side(L));
  for (int k = L - 1; k >= 0; --k) {
    Image up = ub[k + 1] + apply_A_level_transpose(grid, k + 1, u.values[k + 1], diffusion, u.masks[k + 1]);
    ub[k] = restrict_weighted(up, u.masks[k + 1].closure, u.masks[k].closure);
  }
  return ub;
}

std::vector<Image> apply_global(const GridHierarchy& grid, const MultilevelField& u, const DiffusionField& diffusion) {
  const auto ut = compute_utilde(grid, u);
  const auto ub = compute_ubar(grid, u, diffusion);
  std::vector<Image> out;
  for (int k = 0; k < grid.levels(); ++k) {
    Image r = apply_A_level(grid, k, u.values[k] + ut[k], diffusion, u.masks[k]);
    out.push_back(masked(r + ub[k], u.masks[k].active));
  }
  return out;
}

RhsField assemble_rhs(const GridHierarchy& grid, const Image& f_fine) {
  const int L = grid.finest();
  const int nf = grid.nodes_per_side(L);
  require_same_size(f_fine.size(), nf, "load image");
  RhsField rhs;
  for (int k = 0; k <= L; ++k) rhs.emplace_back(grid.nodes_per_side(k));

  const double w = grid.triangle_area(L) / 3.0;
  for (int a = 0; a + 1 < nf; ++a)
    for (int b = 0; b + 1 < nf; ++b)
      for (int q = 0; q < 2; ++q) {
        const TriangleId t{L, {a, b}, static_cast<Half>(q)};
        const auto v = triangle_vertices(t);
        std::array<Point, 3> x;
        for (int i = 0; i < 3; ++i) x[i] = grid.coordinate(L, v[i]);
        const Point centroid{(x[0].x + x[1].x + x[2].x) / 3.0, (x[0].y + x[1].y + x[2].y) / 3.0};
        for (int e = 0; e < 3; ++e) {
          const int e2 = (e + 1) % 3;
          const Point mid{0.5 * (x[e].x + x[e2].x), 0.5 * (x[e].y + x[e2].y)};
          const double fq = 0.5 * (f_fine(v[e].i1, v[e].i2) + f_fine(v[e2].i1, v[e2].i2));
          for (int k = 0; k <= L; ++k) {
            const TriangleId ck = locate(grid, k, centroid);
            const auto lam = barycentric(grid, ck, mid);
            const auto cv = triangle_vertices(ck);
            for (int i = 0; i < 3; ++i)
              if (grid.is_interior(k, cv[i])) rhs[k](cv[i].i1, cv[i].i2) += w * fq * lam[i];
          }
        }
      }
  return rhs;
}

SparseMatrix stiffness_matrix(int n, const Image& kappa) {
  require_same_size(kappa.size(), n, "stiffness kappa");
  const double h = 1.0 / (n - 1);
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(static_cast<std::size_t>(n) * n * 18);
  for (int a = 0; a + 1 < n; ++a)
    for (int b = 0; b + 1 < n; ++b)
      for (int q = 0; q < 2; ++q) {
        const auto v = triangle_vertices({0, {a, b}, static_cast<Half>(q)});
        double px[3], py[3];
        for (int i = 0; i < 3; ++i) {
          px[i] = v[i].i1 * h;
          py[i] = v[i].i2 * h;
        }
        const double det = (px[1] - px[0]) * (py[2] - py[0]) - (px[2] - px[0]) * (py[1] - py[0]);
        const double area = 0.5 * std::abs(det);
        double gx[3], gy[3];
        for (int i = 0; i < 3; ++i) {
          const int j = (i + 1) % 3, m = (i + 2) % 3;
          gx[i] = (py[j] - py[m]) / det;
          gy[i] = (px[m] - px[j]) / det;
        }
        const double kmean = (kappa(v[0].i1, v[0].i2) + kappa(v[1].i1, v[1].i2) + kappa(v[2].i1, v[2].i2)) / 3.0;
        for (int i = 0; i < 3; ++i)
          for (int j = 0; j < 3; ++j)
            trip.emplace_back(v[i].i1 * n + v[i].i2, v[j].i1 * n + v[j].i2,
                              kmean * area * (gx[i] * gx[j] + gy[i] * gy[j]));
      }
  SparseMatrix m(n * n, n * n);
  m.setFromTriplets(trip.begin(), trip.end());
  return m;
}

SparseMatrix mass_matrix(int n) {
  const double area = 0.5 / ((n - 1.0) * (n - 1.0));
  std::vector<Eigen::Triplet<double>> trip;
  for (int a = 0; a + 1 < n; ++a)
    for (int b = 0; b + 1 < n; ++b)
      for (int q = 0; q < 2; ++q) {
        const auto v = triangle_vertices({0, {a, b}, static_cast<Half>(q)});
        for (int i = 0; i < 3; ++i)
          for (int j = 0; j < 3; ++j)
            trip.emplace_back(v[i].i1 * n + v[i].i2, v[j].i1 * n + v[j].i2, area / 12.0 * (i == j ? 2.0 : 1.0));
      }
  SparseMatrix m(n * n, n * n);
  m.setFromTriplets(trip.begin(), trip.end());
  return m;
}

Eigen::VectorXd flat(const Image& image) {
  return Eigen::Map<const Eigen::VectorXd>(image.data().data(), static_cast<Eigen::Index>(image.data().size()));
}

Image unflat(int n, const Eigen::VectorXd& x) {
  if (x.size() != static_cast<Eigen::Index>(n) * n) throw ShapeError("vector length does not match lattice");
  Image img(n);
  for (Eigen::Index i = 0; i < x.size(); ++i) img.data()[static_cast<std::size_t>(i)] = x[i];
  return img;
}

GlobalSystem assemble_global(const GridHierarchy& grid, const LevelMasks& masks, const DiffusionField& diffusion) {
  check_masks(grid, masks);
  const int L = grid.finest();
  const int nf = grid.nodes_per_side(L);
  GlobalSystem sys;
  std::vector<Eigen::Triplet<double>> trip;
  for (int k = 0; k <= L; ++k) {
    const int n = grid.nodes_per_side(k);
    const int ratio = 1 << (L - k);
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b) {
        if (!masks[k].active(a, b)) continue;
        const int col = static_cast<int>(sys.dofs.size());
        sys.dofs.push_back({k, {a, b}});
        for (int f1 = std::max(0, (a - 1) * ratio); f1 <= std::min(nf - 1, (a + 1) * ratio); ++f1)
          for (int f2 = std::max(0, (b - 1) * ratio); f2 <= std::min(nf - 1, (b + 1) * ratio); ++f2) {
            const double v = hat_value(grid, k, {a, b}, grid.coordinate(L, {f1, f2}));
            if (v != 0.0) trip.emplace_back(f1 * nf + f2, col, v);
          }
      }
  }
  sys.basis.resize(nf * nf, static_cast<Eigen::Index>(sys.dofs.size()));
  sys.basis.setFromTriplets(trip.begin(), trip.end());
  sys.fine_stiffness = stiffness_matrix(nf, diffusion.kappa_fine);
  sys.matrix = SparseMatrix(sys.basis.transpose() * (sys.fine_stiffness * sys.basis));
  return sys;
}

Eigen::VectorXd gather(const GlobalSystem& sys, const std::vector<Image>& per_level) {
  Eigen::VectorXd x(static_cast<Eigen::Index>(sys.dofs.size()));
  for (std::size_t i = 0; i < sys.dofs.size(); ++i) {
    const auto& d = sys.dofs[i];
    x[static_cast<Eigen::Index>(i)] = per_level.at(d.level)(d.node.i1, d.node.i2);
  }
  return x;
}

std::vector<Image> scatter(const GridHierarchy& grid, const GlobalSystem& sys, const Eigen::VectorXd& x) {
  std::vector<Image> out;
  for (int k = 0; k < grid.levels(); ++k) out.emplace_back(grid.nodes_per_side(k));
  for (std::size_t i = 0; i < sys.dofs.size(); ++i) {
    const auto& d = sys.dofs[i];
    out[d.level](d.node.i1, d.node.i2) = x[static_cast<Eigen::Index>(i)];
  }
  return out;
}

}  // namespace mlafem
