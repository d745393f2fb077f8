#include "mlafem/adapt.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <tuple>

namespace mlafem {

namespace {

MarkSet empty_marks(const EstimatorField& est) {
  MarkSet m;
  for (const auto& lvl : est.tri_mask) m.push_back({Mask(lvl[0].size()), Mask(lvl[1].size())});
  return m;
}

struct Leaf {
  double eta2;
  int level, i1, i2, q;
};

}  // namespace

std::size_t mark_count(const MarkSet& marks) {
  std::size_t s = 0;
  for (const auto& lvl : marks) s += count(lvl[0]) + count(lvl[1]);
  return s;
}

MarkSet mark_threshold(const EstimatorField& est, const std::vector<double>& thresholds) {
  if (thresholds.size() != est.eta2.size()) throw ConfigError("one threshold per level required");
  for (double d : thresholds)
    if (!(d > 0.0)) throw ConfigError("marking thresholds must be positive");
  MarkSet m = empty_marks(est);
  for (std::size_t k = 0; k < est.eta2.size(); ++k)
    for (int q = 0; q < 2; ++q)
      for (std::size_t i = 0; i < est.eta2[k][q].data().size(); ++i)
        if (est.tri_mask[k][q].data()[i] && est.eta2[k][q].data()[i] > thresholds[k]) m[k][q].data()[i] = 1;
  return m;
}

std::vector<double> relative_thresholds(const EstimatorField& est, double theta_thr) {
  if (!(theta_thr > 0.0)) throw ConfigError("threshold fraction must be positive");
  double top = max_eta2(est);
  // Nothing to mark: any positive threshold leaves the marks empty.
  if (!(top > 0.0)) top = std::numeric_limits<double>::min() / theta_thr;
  return std::vector<double>(est.eta2.size(), theta_thr * top);
}

MarkSet mark_doerfler(const EstimatorField& est, double theta) {
  if (!(theta > 0.0 && theta < 1.0)) throw ConfigError("Doerfler theta must lie in (0, 1)");
  std::vector<Leaf> leaves;
  double total = 0.0;
  for (std::size_t k = 0; k < est.eta2.size(); ++k) {
    const int n = est.eta2[k][0].size();
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b)
        for (int q = 0; q < 2; ++q)
          if (est.tri_mask[k][q](a, b)) {
            leaves.push_back({est.eta2[k][q](a, b), static_cast<int>(k), a, b, q});
            total += est.eta2[k][q](a, b);
          }
  }
  MarkSet m = empty_marks(est);
  if (!(total > 0.0)) return m;
  std::sort(leaves.begin(), leaves.end(), [](const Leaf& x, const Leaf& y) {
    if (x.eta2 != y.eta2) return x.eta2 > y.eta2;
    return std::tie(x.level, x.i1, x.i2, x.q) < std::tie(y.level, y.i1, y.i2, y.q);
  });
  double acc = 0.0;
  for (const auto& l : leaves) {
    if (acc >= theta * total) break;
    m[l.level][l.q](l.i1, l.i2) = 1;
    acc += l.eta2;
  }
  return m;
}

Refinement refine(const GridHierarchy& grid, const LevelMasks& masks, const MarkSet& marks) {
  check_masks(grid, masks);
  if (static_cast<int>(marks.size()) != grid.levels()) throw ShapeError("mark set depth mismatch");
  Refinement out;
  std::vector<Mask> active;
  for (const auto& m : masks) active.push_back(m.active);
  for (int k = 0; k < grid.levels(); ++k) {
    const int n = grid.nodes_per_side(k);
    for (int a = 0; a + 1 < n; ++a)
      for (int b = 0; b + 1 < n; ++b)
        for (int q = 0; q < 2; ++q) {
          if (!marks[k][q](a, b)) continue;
          if (k == grid.finest()) {
            ++out.dropped;
            continue;
          }
          for (const auto& f : fine_nodes_of_triangle({k, {a, b}, static_cast<Half>(q)}))
            if (grid.is_interior(k + 1, f)) active[k + 1](f.i1, f.i2) = 1;
        }
  }
  for (auto& a : active) out.masks.push_back(make_level_mask(std::move(a)));
  return out;
}

MarkingStrategy parse_marking(const std::string& name) {
  if (name == "doerfler") return MarkingStrategy::doerfler;
  if (name == "threshold") return MarkingStrategy::threshold;
  throw ConfigError("unknown marking strategy '" + name + "'");
}

std::string to_string(MarkingStrategy s) { return s == MarkingStrategy::doerfler ? "doerfler" : "threshold"; }

MarkSet mark(const EstimatorField& est, const MarkingConfig& config) {
  if (config.strategy == MarkingStrategy::doerfler) return mark_doerfler(est, config.theta);
  return mark_threshold(est, relative_thresholds(est, config.theta));
}

AfemResult afem(const GridHierarchy& grid, const DiffusionField& diffusion, const Image& f_fine,
                const AfemConfig& config, const ReferenceSolution* reference) {
  if (config.iterations < 1) throw ConfigError("AFEM needs at least one iteration");
  const RhsField f = assemble_rhs(grid, f_fine);
  AfemResult res;
  MultilevelField u = zero_field(grid, initial_masks(grid));

  for (int it = 1; it <= config.iterations; ++it) {
    const auto au = apply_global(grid, u, diffusion);
    RhsField r;
    for (int k = 0; k < grid.levels(); ++k) r.push_back(masked(f[k] - au[k], u.masks[k].active));

    const auto smoother =
        choose_omega(grid, diffusion, u.masks, config.solver.omega_rule, config.solver.omega);
    if (!smoother.admissible) res.warnings.push_back("iteration " + std::to_string(it) + ": omega exceeds 1/lambda_max");
    auto [v, rep] = llmg_solve(grid, zero_field(grid, u.masks), r, diffusion, smoother,
                               {config.solver.tol, config.solver.max_sweeps, nullptr});
    for (int k = 0; k < grid.levels(); ++k) axpy(1.0, v.values[k], u.values[k]);
    if (!rep.converged)
      res.warnings.push_back("iteration " + std::to_string(it) + ": solver stopped after " +
                             std::to_string(rep.iterations) + " sweeps");

    EstimatorField est = estimate(grid, u, f_fine, diffusion);
    MarkSet marks = mark(est, config.marking);

    AfemIteration row;
    row.iteration = it;
    row.dofs = dof_count(u.masks);
    row.eta2_total = total_eta2(est);
    row.marked = mark_count(marks);
    row.sweeps = rep.iterations;
    row.converged = rep.converged;
    if (reference) {
      const auto e = relative_errors(*reference, flatten_to_finest(grid, u));
      row.h1_rel_err = e.h1_rel;
      row.l2_rel_err = e.l2_rel;
    } else {
      row.h1_rel_err = row.l2_rel_err = std::numeric_limits<double>::quiet_NaN();
    }
    res.report.push_back(row);

    Refinement next = refine(grid, u.masks, marks);
    if (next.dropped > 0)
      res.warnings.push_back("iteration " + std::to_string(it) + ": " + std::to_string(next.dropped) +
                             " marks on the finest level dropped");
    res.snapshots.push_back({u, est, marks});
    res.estimator = std::move(est);
    if (it < config.iterations) u.masks = std::move(next.masks);
  }
  res.u = std::move(u);
  return res;
}

}  // namespace mlafem
