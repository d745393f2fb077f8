#include "mlafem/metrics.hpp"

#include <cmath>

#include <Eigen/SparseCholesky>

namespace mlafem {

namespace {

std::vector<int> interior_indices(int n) {
  std::vector<int> idx;
  for (int a = 1; a < n - 1; ++a)
    for (int b = 1; b < n - 1; ++b) idx.push_back(a * n + b);
  return idx;
}

SparseMatrix selection(int n, const std::vector<int>& idx) {
  std::vector<Eigen::Triplet<double>> t;
  for (std::size_t i = 0; i < idx.size(); ++i) t.emplace_back(idx[i], static_cast<int>(i), 1.0);
  SparseMatrix s(n * n, static_cast<Eigen::Index>(idx.size()));
  s.setFromTriplets(t.begin(), t.end());
  return s;
}

Eigen::VectorXd ldlt_solve(const SparseMatrix& A, const Eigen::VectorXd& b) {
  Eigen::SimplicialLDLT<SparseMatrix> solver(A);
  if (solver.info() != Eigen::Success) throw NumericalError("factorization failed");
  Eigen::VectorXd x = solver.solve(b);
  if (solver.info() != Eigen::Success) throw NumericalError("triangular solve failed");
  return x;
}

double quad(const SparseMatrix& A, const Eigen::VectorXd& x) { return x.dot(A * x); }

}  // namespace

Image solve_lattice(int n, const Image& kappa, const Image& f) {
  const auto idx = interior_indices(n);
  const SparseMatrix S = selection(n, idx);
  const SparseMatrix K = stiffness_matrix(n, kappa);
  const SparseMatrix A = S.transpose() * K * S;
  const Eigen::VectorXd b = S.transpose() * (mass_matrix(n) * flat(f));
  return unflat(n, S * ldlt_solve(A, b));
}

ReferenceSolution overkill_reference(const Image& kappa_fine, const Image& f_fine, int extra_levels) {
  if (extra_levels < 0) throw ConfigError("extra_levels must be non-negative");
  Image kappa = kappa_fine, f = f_fine;
  for (int l = 0; l < extra_levels; ++l) {
    kappa = prolongate_uniform(kappa);
    f = prolongate_uniform(f);
  }
  ReferenceSolution r;
  r.extra_levels = extra_levels;
  r.n = kappa.size();
  r.u = solve_lattice(r.n, kappa, f);
  r.laplace = stiffness_matrix(r.n, Image(r.n, 1.0));
  r.mass = mass_matrix(r.n);
  r.stiffness = stiffness_matrix(r.n, kappa);
  const Eigen::VectorXd x = flat(r.u);
  r.l2_norm_sq = quad(r.mass, x);
  r.h1_norm_sq = quad(r.laplace, x) + r.l2_norm_sq;
  r.energy_norm_sq = quad(r.stiffness, x);
  return r;
}

ErrorNorms relative_errors(const ReferenceSolution& ref, const Image& u_flat) {
  Image u = u_flat;
  for (int l = 0; l < ref.extra_levels; ++l) u = prolongate_uniform(u);
  require_same_size(u.size(), ref.n, "reference comparison");
  const Eigen::VectorXd e = flat(ref.u - u);
  const double l2 = quad(ref.mass, e);
  const double h1 = quad(ref.laplace, e) + l2;
  const double en = quad(ref.stiffness, e);
  ErrorNorms out;
  out.l2_rel = ref.l2_norm_sq > 0 ? std::sqrt(l2 / ref.l2_norm_sq) : std::sqrt(l2);
  out.h1_rel = ref.h1_norm_sq > 0 ? std::sqrt(h1 / ref.h1_norm_sq) : std::sqrt(h1);
  out.energy_abs = std::sqrt(std::max(0.0, en));
  out.energy_rel = ref.energy_norm_sq > 0 ? out.energy_abs / std::sqrt(ref.energy_norm_sq) : out.energy_abs;
  return out;
}

MultilevelField uniform_solution(const GridHierarchy& grid, int k, const DiffusionField& diffusion, const RhsField& f) {
  const auto masks = single_level_masks(grid, k);
  const GlobalSystem sys = assemble_global(grid, masks, diffusion);
  MultilevelField u = zero_field(grid, masks);
  u.values = scatter(grid, sys, ldlt_solve(sys.matrix, gather(sys, f)));
  return u;
}

}  // namespace mlafem
