#include "mlafem/solver.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <Eigen/IterativeLinearSolvers>

namespace mlafem {

namespace {

// Richardson update of level k given Q_k A u at the active nodes.
void smooth_level(MultilevelField& u, int k, const Image& f, const Image& action, double omega) {
  const Mask& act = u.masks[k].active;
  Image& v = u.values[k];
  for (std::size_t i = 0; i < v.data().size(); ++i)
    if (act.data()[i]) v.data()[i] += omega * (f.data()[i] - action.data()[i]);
}

void check_finite(const MultilevelField& u) {
  for (const auto& img : u.values)
    for (double v : img.data())
      if (!std::isfinite(v)) throw NumericalError("non-finite value in iterate");
}

}  // namespace

OmegaRule parse_omega_rule(const std::string& name) {
  if (name == "gershgorin") return OmegaRule::gershgorin;
  if (name == "power-iteration") return OmegaRule::power_iteration;
  if (name == "fixed") return OmegaRule::fixed;
  throw ConfigError("unknown omega rule '" + name + "'");
}

std::string to_string(OmegaRule rule) {
  switch (rule) {
    case OmegaRule::gershgorin: return "gershgorin";
    case OmegaRule::power_iteration: return "power-iteration";
    case OmegaRule::fixed: return "fixed";
  }
  return "?";
}

double power_iteration_lambda(const GridHierarchy& grid, int k, const DiffusionField& diffusion, const LevelMask& mask,
                              int iterations) {
  const int n = grid.nodes_per_side(k);
  if (count(mask.active) == 0) return 0.0;
  Image x(n);
  // Deterministic start with components along every eigenvector.
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b)
      if (mask.active(a, b)) x(a, b) = 1.0 + 0.5 * std::sin(1.7 * a + 0.3 * b * b + 0.1);
  double lambda = 0.0;
  for (int it = 0; it < iterations; ++it) {
    const double nx = std::sqrt(dot(x, x));
    for (double& v : x.data()) v /= nx;
    Image y = apply_A_level(grid, k, masked(x, mask.active), diffusion, mask);
    lambda = dot(x, y);
    x = std::move(y);
  }
  return lambda;
}

SmootherConfig choose_omega(const GridHierarchy& grid, const DiffusionField& diffusion, const LevelMasks& masks,
                            OmegaRule rule, double fixed_omega) {
  check_masks(grid, masks);
  SmootherConfig cfg;
  cfg.rule = rule;
  for (int k = 0; k < grid.levels(); ++k) {
    const LevelMask& m = masks[k];
    if (count(m.active) == 0) {
      cfg.omega.push_back(0.0);
      continue;
    }
    if (rule == OmegaRule::gershgorin) {
      // Row sums of |A| over the active x active block.
      const int n = grid.nodes_per_side(k);
      const auto& C = reference_stiffness();
      const auto& p = hat_overlap_offsets();
      const auto& ups = diffusion.upsilon[k];
      double bound = 0.0;
      for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b) {
          if (!m.active(a, b)) continue;
          double row = 0.0;
          for (std::size_t t = 0; t < p.size(); ++t) {
            if (!m.active.get(a + p[t].i1, b + p[t].i2)) continue;
            double e = 0.0;
            for (int l = 0; l < 6; ++l) e += ups[l](a, b) * C[l][t];
            row += std::abs(e);
          }
          bound = std::max(bound, row / grid.triangle_area(k));
        }
      cfg.omega.push_back(1.0 / bound);
    } else if (rule == OmegaRule::power_iteration) {
      const double lambda = power_iteration_lambda(grid, k, diffusion, m, 50);
      cfg.omega.push_back(1.0 / (lambda * 1.01));
    } else {
      if (!(fixed_omega > 0.0)) throw ConfigError("fixed omega must be positive");
      const double lambda = power_iteration_lambda(grid, k, diffusion, m, 200);
      if (fixed_omega * lambda > 1.0) cfg.admissible = false;
      cfg.omega.push_back(fixed_omega);
    }
  }
  return cfg;
}

double rhs_norm(const MultilevelField& u, const RhsField& f) {
  double s = 0.0;
  for (std::size_t k = 0; k < f.size(); ++k) {
    const Image fm = masked(f[k], u.masks[k].active);
    s += dot(fm, fm);
  }
  return std::sqrt(s);
}

double residual_norm(const GridHierarchy& grid, const MultilevelField& u, const RhsField& f,
                     const DiffusionField& diffusion) {
  const auto au = apply_global(grid, u, diffusion);
  double s = 0.0;
  for (int k = 0; k < grid.levels(); ++k) {
    const Image r = masked(f[k] - au[k], u.masks[k].active);
    s += dot(r, r);
  }
  return std::sqrt(s);
}

MultilevelField llmg_sweep(const GridHierarchy& grid, const MultilevelField& u0, const RhsField& f,
                           const DiffusionField& diffusion, const SmootherConfig& smoother) {
  check_field(grid, u0);
  if (static_cast<int>(f.size()) != grid.levels()) throw ShapeError("rhs depth mismatch");
  if (static_cast<int>(smoother.omega.size()) != grid.levels()) throw ShapeError("omega count mismatch");
  MultilevelField u = u0;
  const int L = grid.finest();
  auto ubar = compute_ubar(grid, u, diffusion);
  auto utilde = compute_utilde(grid, u);

  auto visit = [&](int k) {
    const Image au = apply_A_level(grid, k, u.values[k] + utilde[k], diffusion, u.masks[k]);
    smooth_level(u, k, f[k], au + ubar[k], smoother.omega[k]);
  };

  for (int k = L; k >= 0; --k) {
    visit(k);
    if (k > 0) {
      const Image up = ubar[k] + apply_A_level_transpose(grid, k, u.values[k], diffusion, u.masks[k]);
      ubar[k - 1] = restrict_weighted(up, u.masks[k].closure, u.masks[k - 1].closure);
    }
  }
  utilde[0] = Image(grid.nodes_per_side(0));
  for (int k = 0; k <= L; ++k) {
    visit(k);
    if (k < L) utilde[k + 1] = prolongate(utilde[k] + u.values[k], u.masks[k].closure, u.masks[k + 1].closure);
  }
  check_finite(u);
  return u;
}

MultilevelField ssc_sweep(const GridHierarchy& grid, const MultilevelField& u0, const RhsField& f,
                          const DiffusionField& diffusion, const SmootherConfig& smoother,
                          const std::vector<int>& order) {
  check_field(grid, u0);
  for (int k : order)
    if (k < 0 || k >= grid.levels()) throw ShapeError("invalid level in subspace order");
  MultilevelField u = u0;
  for (int k : order) {
    const auto au = apply_global(grid, u, diffusion);
    smooth_level(u, k, f[k], au[k], smoother.omega[k]);
  }
  check_finite(u);
  return u;
}

MultilevelField lmg_sweep(const GridHierarchy& grid, const MultilevelField& u, const RhsField& f,
                          const DiffusionField& diffusion, const SmootherConfig& smoother) {
  std::vector<int> order;
  for (int k = grid.finest(); k >= 0; --k) order.push_back(k);
  for (int k = 0; k <= grid.finest(); ++k) order.push_back(k);
  return ssc_sweep(grid, u, f, diffusion, smoother, order);
}

double energy_norm_sq(const SparseMatrix& fine_stiffness, const Image& e) {
  const Eigen::VectorXd x = flat(e);
  return x.dot(fine_stiffness * x);
}

std::pair<MultilevelField, SolveReport> llmg_solve(const GridHierarchy& grid, MultilevelField u0, const RhsField& f,
                                                   const DiffusionField& diffusion, const SmootherConfig& smoother,
                                                   const SolveOptions& options) {
  if (!(options.tol > 0.0)) throw ConfigError("solver tolerance must be positive");
  if (options.max_sweeps < 0) throw ConfigError("max_sweeps must be non-negative");
  SolveReport report;
  SparseMatrix stiff;
  auto track_energy = [&](const MultilevelField& u) {
    if (!options.reference_flat) return;
    const Image e = flatten_to_finest(grid, u) - *options.reference_flat;
    const double en = std::sqrt(std::max(0.0, energy_norm_sq(stiff, e)));
    if (!report.energy_error_history.empty()) {
      const double prev = report.energy_error_history.back();
      report.contraction_estimates.push_back(prev > 0.0 ? en / prev : 0.0);
    }
    report.energy_error_history.push_back(en);
  };
  if (options.reference_flat) stiff = stiffness_matrix(grid.nodes_per_side(grid.finest()), diffusion.kappa_fine);

  const double fn = rhs_norm(u0, f);
  MultilevelField u = std::move(u0);
  double r = residual_norm(grid, u, f, diffusion);
  report.residual_history.push_back(r);
  track_energy(u);
  auto done = [&] { return fn == 0.0 ? r == 0.0 : r / fn <= options.tol; };
  while (!done() && report.iterations < options.max_sweeps) {
    u = llmg_sweep(grid, u, f, diffusion, smoother);
    ++report.iterations;
    r = residual_norm(grid, u, f, diffusion);
    report.residual_history.push_back(r);
    track_energy(u);
  }
  report.converged = done();
  return {std::move(u), std::move(report)};
}

MultilevelField reference_solve(const GridHierarchy& grid, const LevelMasks& masks, const DiffusionField& diffusion,
                                const RhsField& f, double tol) {
  const GlobalSystem sys = assemble_global(grid, masks, diffusion);
  MultilevelField u = zero_field(grid, masks);
  if (sys.dofs.empty()) return u;
  const Eigen::VectorXd b = gather(sys, f);
  if (b.norm() == 0.0) return u;
  Eigen::ConjugateGradient<SparseMatrix, Eigen::Lower | Eigen::Upper, Eigen::DiagonalPreconditioner<double>> cg;
  cg.setTolerance(tol);
  cg.setMaxIterations(std::max<Eigen::Index>(1000, 20 * static_cast<Eigen::Index>(sys.dofs.size())));
  cg.compute(sys.matrix);
  const Eigen::VectorXd x = cg.solve(b);
  const double rel = (b - sys.matrix * x).norm() / b.norm();
  if (cg.info() != Eigen::Success || !(rel <= 10.0 * tol)) {
    std::ostringstream os;
    os << "reference CG failed: " << cg.iterations() << " iterations, relative residual " << rel;
    throw NumericalError(os.str());
  }
  u.values = scatter(grid, sys, x);
  return u;
}

}  // namespace mlafem
