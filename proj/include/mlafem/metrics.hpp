#pragma once

#include "mlafem/assembly.hpp"

namespace mlafem {

// Galerkin solution on a uniformly refined lattice carrying the same kappa_h and f_h.
struct ReferenceSolution {
  int extra_levels = 0;
  int n = 0;  // nodes per side
  Image u;
  SparseMatrix laplace;    // unit-coefficient stiffness
  SparseMatrix mass;
  SparseMatrix stiffness;  // kappa_h stiffness
  double h1_norm_sq = 0.0;
  double l2_norm_sq = 0.0;
  double energy_norm_sq = 0.0;
};

// Interior Dirichlet solve on an n x n lattice for nodal kappa and f.
Image solve_lattice(int n, const Image& kappa, const Image& f);

ReferenceSolution overkill_reference(const Image& kappa_fine, const Image& f_fine, int extra_levels = 2);

struct ErrorNorms {
  double h1_rel = 0.0;
  double l2_rel = 0.0;
  double energy_rel = 0.0;
  double energy_abs = 0.0;
};

// Errors of a finest-level nodal function of the hierarchy against the reference.
ErrorNorms relative_errors(const ReferenceSolution& ref, const Image& u_flat);

// Galerkin solution on the full level-k space, as a multilevel field.
MultilevelField uniform_solution(const GridHierarchy& grid, int k, const DiffusionField& diffusion, const RhsField& f);

}  // namespace mlafem
