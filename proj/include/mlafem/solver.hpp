#pragma once

#include <string>
#include <vector>

#include "mlafem/assembly.hpp"

namespace mlafem {

enum class OmegaRule { gershgorin, power_iteration, fixed };

OmegaRule parse_omega_rule(const std::string& name);
std::string to_string(OmegaRule rule);

struct SmootherConfig {
  OmegaRule rule = OmegaRule::gershgorin;
  std::vector<double> omega;  // per level; 0 for a level without DOFs
  bool admissible = true;     // false when a fixed omega exceeds 1 / lambda_max
};

// Largest eigenvalue estimate of the active block of level k after `iterations` power steps.
double power_iteration_lambda(const GridHierarchy& grid, int k, const DiffusionField& diffusion, const LevelMask& mask,
                              int iterations = 50);

SmootherConfig choose_omega(const GridHierarchy& grid, const DiffusionField& diffusion, const LevelMasks& masks,
                            OmegaRule rule, double fixed_omega = 0.0);

struct SolveReport {
  int iterations = 0;
  bool converged = false;
  std::vector<double> residual_history;        // ||f - A u||_2 per sweep, starting with u0
  std::vector<double> energy_error_history;    // ||u - u_ref||_A when a reference is supplied
  std::vector<double> contraction_estimates;   // successive energy error ratios
};

// ||f - A u||_2 over all active DOFs of all levels.
double residual_norm(const GridHierarchy& grid, const MultilevelField& u, const RhsField& f,
                     const DiffusionField& diffusion);
double rhs_norm(const MultilevelField& u, const RhsField& f);

MultilevelField llmg_sweep(const GridHierarchy& grid, const MultilevelField& u, const RhsField& f,
                           const DiffusionField& diffusion, const SmootherConfig& smoother);

struct SolveOptions {
  double tol = 1e-10;
  int max_sweeps = 200;
  const Image* reference_flat = nullptr;  // finest-level nodal values of the exact solution
};

std::pair<MultilevelField, SolveReport> llmg_solve(const GridHierarchy& grid, MultilevelField u0, const RhsField& f,
                                                   const DiffusionField& diffusion, const SmootherConfig& smoother,
                                                   const SolveOptions& options);

// Richardson corrections of the level subspaces in the given order, each using
// the full operator action recomputed from scratch.
MultilevelField ssc_sweep(const GridHierarchy& grid, const MultilevelField& u, const RhsField& f,
                          const DiffusionField& diffusion, const SmootherConfig& smoother,
                          const std::vector<int>& order);
MultilevelField lmg_sweep(const GridHierarchy& grid, const MultilevelField& u, const RhsField& f,
                          const DiffusionField& diffusion, const SmootherConfig& smoother);

// Preconditioned CG on the assembled multilevel system.
MultilevelField reference_solve(const GridHierarchy& grid, const LevelMasks& masks, const DiffusionField& diffusion,
                                const RhsField& f, double tol = 1e-12);

// ||e||_A^2 for a finest-level nodal difference.
double energy_norm_sq(const SparseMatrix& fine_stiffness, const Image& e);

}  // namespace mlafem
