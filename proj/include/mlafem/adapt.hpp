#pragma once

#include <string>
#include <vector>

#include "mlafem/estimator.hpp"
#include "mlafem/metrics.hpp"
#include "mlafem/solver.hpp"

namespace mlafem {

using MarkSet = std::vector<TriangleMask>;

std::size_t mark_count(const MarkSet& marks);

MarkSet mark_threshold(const EstimatorField& est, const std::vector<double>& thresholds);
// delta = theta_thr * max eta^2, the same on every level.
std::vector<double> relative_thresholds(const EstimatorField& est, double theta_thr);
MarkSet mark_doerfler(const EstimatorField& est, double theta);

struct Refinement {
  LevelMasks masks;
  std::size_t dropped = 0;  // marks on the finest level, which cannot be refined
};

Refinement refine(const GridHierarchy& grid, const LevelMasks& masks, const MarkSet& marks);

enum class MarkingStrategy { doerfler, threshold };
MarkingStrategy parse_marking(const std::string& name);
std::string to_string(MarkingStrategy s);

struct MarkingConfig {
  MarkingStrategy strategy = MarkingStrategy::doerfler;
  double theta = 0.1;
};

struct SolverSettings {
  double tol = 1e-10;
  int max_sweeps = 200;
  OmegaRule omega_rule = OmegaRule::gershgorin;
  double omega = 0.0;  // only for the fixed rule
};

struct AfemConfig {
  int iterations = 3;
  MarkingConfig marking;
  SolverSettings solver;
};

struct AfemIteration {
  int iteration = 0;
  std::size_t dofs = 0;
  double eta2_total = 0.0;
  double h1_rel_err = 0.0;
  double l2_rel_err = 0.0;
  std::size_t marked = 0;
  int sweeps = 0;
  bool converged = false;
};

struct AfemSnapshot {
  MultilevelField u;
  EstimatorField estimator;
  MarkSet marks;
};

struct AfemResult {
  MultilevelField u;
  EstimatorField estimator;
  std::vector<AfemIteration> report;
  std::vector<AfemSnapshot> snapshots;
  std::vector<std::string> warnings;
};

MarkSet mark(const EstimatorField& est, const MarkingConfig& config);

// Solve, estimate, mark, refine; errors are NaN without a reference.
AfemResult afem(const GridHierarchy& grid, const DiffusionField& diffusion, const Image& f_fine,
                const AfemConfig& config, const ReferenceSolution* reference = nullptr);

}  // namespace mlafem
