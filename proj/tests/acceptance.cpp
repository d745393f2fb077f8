// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <sstream>
#include <string>

#include "mlafem/commands.hpp"
#include "mlafem/convnet.hpp"
#include "mlafem/dataset.hpp"
#include "oracles.hpp"

using namespace mlafem;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double abs_dev(const Image& a, const Image& b) { return max_abs(a - b); }

Outcome operator_equivalence() {
  auto g = build_hierarchy(5, 3);
  const auto bank = build_stencil_bank(g);
  std::mt19937_64 rng(1001);
  double worst = 0.0;
  int cases = 0;
  for (int k = 0; k < g.levels(); ++k)
    for (int c = 0; c < 50; ++c) {
      const auto masks = oracle::random_nested_masks(g, rng, 0.4);
      const auto d = compute_upsilon(g, oracle::random_positive_kappa(g.nodes_per_side(2), rng));
      const auto& m = masks[k];
      const Image v = oracle::random_image(g.nodes_per_side(k), rng);
      worst = std::max(worst, oracle::rel_diff(apply_A_level(g, k, v, d, m),
                                               conv_apply_A(bank, k, conv_translate(bank, masked(v, m.closure), m.active),
                                                            d.upsilon[k], m)));
      worst = std::max(worst, oracle::rel_diff(apply_A_level_transpose(g, k, v, d, m),
                                               conv_apply_A_transpose(
                                                   bank, k, conv_translate(bank, masked(v, m.active), m.closure),
                                                   d.upsilon[k], m)));
      if (k + 1 < g.levels()) {
        const auto& mf = masks[k + 1];
        const Image w = oracle::random_image(g.nodes_per_side(k + 1), rng);
        worst = std::max(worst, oracle::rel_diff(prolongate(v, m.closure, mf.closure),
                                                 conv_prolongate(bank, v, m.closure, mf.closure)));
        worst = std::max(worst, oracle::rel_diff(restrict_weighted(w, mf.closure, m.closure),
                                                 conv_restrict(bank, w, mf.closure, m.closure)));
      }
      ++cases;
    }
  return {worst <= 1e-10, fmt("%d cases, max relative deviation %.3e (tol 1e-10)", cases, worst)};
}

Outcome sweep_equivalence() {
  auto g = build_hierarchy(5, 3);
  const auto bank = build_stencil_bank(g);
  std::mt19937_64 rng(1002);
  double worst = 0.0;
  for (int c = 0; c < 10; ++c) {
    const auto masks = oracle::random_nested_masks(g, rng, 0.4);
    const auto d = compute_upsilon(g, oracle::random_positive_kappa(17, rng));
    auto u = oracle::random_field(g, masks, rng);
    RhsField f;
    for (int k = 0; k < 3; ++k) f.push_back(masked(oracle::random_image(g.nodes_per_side(k), rng), masks[k].active));
    const auto sm = choose_omega(g, d, masks, OmegaRule::gershgorin);
    auto state = conv_state(bank, g, u, f, d, sm);
    for (int s = 0; s < 10; ++s) {
      u = llmg_sweep(g, u, f, d, sm);
      state = conv_llmg_sweep(bank, std::move(state));
      const auto cu = conv_field(state);
      for (int k = 0; k < 3; ++k) worst = std::max(worst, abs_dev(u.values[k], cu.values[k]));
    }
  }
  return {worst <= 1e-11, fmt("10 cases x 10 sweeps, max deviation %.3e (tol 1e-11)", worst)};
}

Outcome llmg_convergence() {
  const auto problem = cookie_problem();
  SampleRng rng(1003);
  const auto ys = sample_parameters(rng, 20);
  bool ok = true;
  int worst_sweeps = 0;
  double worst_rate = 0.0;
  std::string first_failure;
  for (int levels : {2, 3, 4}) {
    auto g = build_hierarchy(5, levels);
    LevelMasks masks;
    for (int k = 0; k < levels; ++k) masks.push_back(full_level_mask(g, k));
    const Image f = discretize_load(problem, g);
    const auto rhs = assemble_rhs(g, f);
    for (std::size_t s = 0; s < ys.size(); ++s) {
      const auto d = compute_upsilon(g, discretize_kappa(problem, ys[s], g));
      const auto K = stiffness_matrix(g.nodes_per_side(g.finest()), d.kappa_fine);
      const Image ref = flatten_to_finest(g, reference_solve(g, masks, d, rhs));
      const double ref_norm = std::sqrt(energy_norm_sq(K, ref));
      const auto sm = choose_omega(g, d, masks, OmegaRule::gershgorin);
      auto u = zero_field(g, masks);
      double prev = 1.0;
      int sweeps = 0;
      bool reached = false;
      while (sweeps < 200) {
        u = llmg_sweep(g, u, rhs, d, sm);
        ++sweeps;
        const double e = std::sqrt(energy_norm_sq(K, flatten_to_finest(g, u) - ref)) / ref_norm;
        const double rate = e / prev;
        worst_rate = std::max(worst_rate, rate);
        if (!(rate < 1.0)) {
          ok = false;
          if (first_failure.empty()) first_failure = fmt("; non-contracting sweep at L=%d sample %zu", levels, s);
        }
        prev = e;
        if (e <= 1e-8) {
          reached = true;
          break;
        }
      }
      worst_sweeps = std::max(worst_sweeps, sweeps);
      if (!reached) {
        ok = false;
        if (first_failure.empty()) first_failure = fmt("; L=%d sample %zu missed 1e-8", levels, s);
      }
    }
  }
  return {ok, fmt("60 runs, max sweeps to 1e-8 relative A-norm %d, max per-sweep ratio %.4f%s", worst_sweeps,
                  worst_rate, first_failure.c_str())};
}

Outcome levelwise_identity() {
  auto g = build_hierarchy(5, 3);
  std::mt19937_64 rng(1004);
  double worst = 0.0;
  for (int c = 0; c < 20; ++c) {
    const auto masks = oracle::random_nested_masks(g, rng, 0.4);
    const Image kappa = oracle::random_positive_kappa(17, rng);
    const auto d = compute_upsilon(g, kappa);
    const auto u = oracle::random_field(g, masks, rng);
    const auto table = oracle::dof_table(g, masks);
    const auto A = oracle::dense_multilevel_matrix(g, table, kappa);
    Eigen::VectorXd x(table.dofs.size());
    for (std::size_t i = 0; i < table.dofs.size(); ++i)
      x(i) = u.values[table.dofs[i].level](table.dofs[i].node.i1, table.dofs[i].node.i2);
    const Eigen::VectorXd y = A * x;
    const auto au = apply_global(g, u, d);
    double num = 0.0;
    for (std::size_t i = 0; i < table.dofs.size(); ++i)
      num = std::max(num, std::abs(y(i) - au[table.dofs[i].level](table.dofs[i].node.i1, table.dofs[i].node.i2)));
    worst = std::max(worst, num / std::max(1e-300, y.cwiseAbs().maxCoeff()));
  }
  return {worst <= 1e-11, fmt("20 cases, max relative deviation %.3e (tol 1e-11)", worst)};
}

Outcome estimator_exactness() {
  auto g = build_hierarchy(5, 3);
  const auto bank = build_stencil_bank(g);
  std::mt19937_64 rng(1005);
  double worst = 0.0;
  for (int c = 0; c < 5; ++c)
    for (int k = 0; k < g.levels(); ++k) {
      const Image kappa = oracle::random_positive_kappa(17, rng);
      const Image f = oracle::random_image(17, rng);
      const auto d = compute_upsilon(g, kappa);
      auto u = zero_field(g, single_level_masks(g, k));
      u.values[k] = masked(oracle::random_image(g.nodes_per_side(k), rng), u.masks[k].active);
      const auto want = oracle::estimator_quadrature(g, k, u.values[k], f, kappa);
      for (const auto& est : {estimate(g, u, f, d), conv_estimator(bank, u, f, kappa)}) {
        double scale = 0.0, dev = 0.0;
        for (int q = 0; q < 2; ++q) {
          const Image expect = masked(want.r2[q] + want.j2[q], est.tri_mask[k][q]);
          scale = std::max(scale, max_abs(expect));
          dev = std::max(dev, max_abs(expect - est.eta2[k][q]));
          // Every level-k triangle is a leaf of the single-level space.
          if (count(est.tri_mask[k][q]) != static_cast<std::size_t>((g.nodes_per_side(k) - 1) * (g.nodes_per_side(k) - 1)))
            dev = INFINITY;
        }
        worst = std::max(worst, dev / scale);
      }
    }
  Stack ones(2, Image(5, 1.0));
  auto g2 = build_hierarchy(3, 2);
  const auto [r2, j2] = aggregate_to_level(g2, ones, ones, 0);
  const auto bank2 = build_stencil_bank(g2);
  Stack all{ones[0], ones[1], ones[0], ones[1]};
  for (auto& c : all) c = masked(c, bank2.owner_masks[1]);
  const Stack conv = conv_apply(bank2.estimator_sum, all, &bank2.owner_masks[0]);
  bool agg = true;
  for (int q = 0; q < 2; ++q)
    for (int a = 0; a < 2; ++a)
      for (int b = 0; b < 2; ++b)
        agg = agg && r2[q](a, b) == 16.0 && j2[q](a, b) == 8.0 && conv[q](a, b) == 16.0 && conv[2 + q](a, b) == 8.0;
  return {worst <= 1e-10 && agg,
          fmt("max relative deviation from degree-4 quadrature %.3e (tol 1e-10); aggregation 16/8 %s", worst,
              agg ? "exact" : "WRONG")};
}

Outcome reliability() {
  const auto problem = cookie_problem();
  SampleRng rng(1006);
  const auto ys = sample_parameters(rng, 20);
  auto g = build_hierarchy(5, 3);
  const Image f = discretize_load(problem, g);
  const auto rhs = assemble_rhs(g, f);
  double worst_spread = 0.0, worst_mismatch = 0.0;
  for (const auto& y : ys) {
    const Image kappa = discretize_kappa(problem, y, g);
    const auto d = compute_upsilon(g, kappa);
    const auto ref = overkill_reference(kappa, f, 2);
    std::vector<double> crel, eta, err;
    for (int k = 0; k < 3; ++k) {
      const auto u = uniform_solution(g, k, d, rhs);
      const auto e = relative_errors(ref, flatten_to_finest(g, u));
      const double eta2 = total_eta2(estimate(g, u, f, d));
      crel.push_back(e.energy_abs * e.energy_abs / eta2);
      eta.push_back(std::sqrt(eta2));
      err.push_back(e.h1_rel);
    }
    worst_spread = std::max(worst_spread, *std::max_element(crel.begin(), crel.end()) /
                                              *std::min_element(crel.begin(), crel.end()));
    for (int k = 0; k + 1 < 3; ++k) {
      const double re = eta[k] / eta[k + 1], rh = err[k] / err[k + 1];
      worst_mismatch = std::max(worst_mismatch, std::max(re / rh, rh / re));
    }
  }
  return {worst_spread <= 3.0 && worst_mismatch <= 2.0,
          fmt("20 samples: max C_rel spread %.3f (tol 3), max decay-ratio mismatch %.3f (tol 2)", worst_spread,
              worst_mismatch)};
}

Outcome afem_advantage() {
  RunConfig c = parse_config("{}");
  c.sampling.count = 100;
  c.sampling.seed = 0;
  const auto studies = study_samples(c, 1);
  const auto rows = summarize(studies);
  bool dofs_ok = true;
  for (const auto& m : matched_error_levels(rows)) dofs_ok = dofs_ok && m.adaptive_dofs <= m.uniform_dofs;
  int monotone = 0;
  for (const auto& s : studies) {
    bool ok = true;
    for (std::size_t i = 1; i < s.adaptive.size(); ++i)
      ok = ok && s.adaptive[i].dofs >= s.adaptive[i - 1].dofs && s.adaptive[i].eta2_total < s.adaptive[i - 1].eta2_total;
    monotone += ok;
  }
  const double frac = monotone / static_cast<double>(studies.size());
  std::string curve;
  for (const auto& r : rows)
    if (r.family == "adaptive") curve += fmt(" %.1f:%.4f", r.dofs_mean, r.h1_mean);
  std::string interp;
  for (const auto& m : interpolated_uniform(rows)) interp += fmt(" %.1f", m.uniform_dofs);
  const auto matched = matched_error_levels(rows);
  std::string levels;
  for (const auto& m : matched) levels += fmt(" %.4f:%.1f/%.1f", m.error, m.adaptive_dofs, m.uniform_dofs);
  return {dofs_ok && frac >= 0.95,
          fmt("matched levels (err:adaptive/uniform DOFs to reach)%s; monotone samples %.0f%% (tol 95%%); "
              "adaptive mean (dofs:h1)%s; log-log interpolated uniform DOFs at those errors%s",
              levels.c_str(), 100.0 * frac, curve.c_str(), interp.c_str())};
}

Outcome mask_equality() {
  auto g = build_hierarchy(5, 4);
  const auto bank = build_stencil_bank(g);
  const auto problem = cookie_problem();
  SampleRng rng(1008);
  std::mt19937_64 mt(1008);
  const auto ys = sample_parameters(rng, 20);
  const Image f = discretize_load(problem, g);
  int equal = 0;
  std::size_t marked = 0;
  for (const auto& y : ys) {
    const Image kappa = discretize_kappa(problem, y, g);
    const auto d = compute_upsilon(g, kappa);
    const auto masks = oracle::random_nested_masks(g, mt, 0.3);
    const auto u = reference_solve(g, masks, d, assemble_rhs(g, f));
    const auto est = estimate(g, u, f, d);
    const auto conv_est = conv_estimator(bank, u, f, kappa);
    const auto delta = relative_thresholds(est, 0.1);
    const auto marks = mark_threshold(est, delta);
    const auto ref = refine(g, masks, marks);
    const auto conv = conv_mark_refine(bank, conv_est, delta, masks);
    bool same = true;
    for (int k = 0; k < g.levels(); ++k)
      same = same && conv.marks[k][0] == marks[k][0] && conv.marks[k][1] == marks[k][1] &&
             conv.masks[k].active == ref.masks[k].active && conv.masks[k].closure == ref.masks[k].closure;
    equal += same;
    marked += mark_count(marks);
  }
  return {equal == 20, fmt("%d/20 samples binary-equal (%zu marks in total)", equal, marked)};
}

Outcome parameter_structure() {
  auto g = build_hierarchy(5, 4);
  const auto bank = build_stencil_bank(g);
  auto t = [&](int L, int m) { return static_cast<long long>(parameter_count(bank, {L, m}).total); };
  bool ok = true;
  std::string detail;
  for (int m : {5, 10}) {
    const long long d1 = t(3, m) - t(2, m), d2 = t(4, m) - t(3, m);
    ok = ok && d1 == d2;
    detail += fmt("m=%d: %lld %lld %lld (steps %lld, %lld); ", m, t(2, m), t(3, m), t(4, m), d1, d2);
  }
  for (int L : {2, 3, 4}) {
    // Affine in m: the increment per sweep is the same from 5 to 10 as from 0 to 5.
    const long long a = t(L, 10) - t(L, 5), b = t(L, 5) - t(L, 0);
    ok = ok && a == b && a % 5 == 0;
  }
  // The per-sweep cost grows by the same amount for each added level.
  const long long s2 = (t(2, 10) - t(2, 5)) / 5, s3 = (t(3, 10) - t(3, 5)) / 5, s4 = (t(4, 10) - t(4, 5)) / 5;
  ok = ok && s3 - s2 == s4 - s3;
  detail += fmt("per-sweep counts %lld %lld %lld", s2, s3, s4);
  return {ok, detail};
}

std::map<std::string, std::string> tree(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file()) {
      std::ifstream in(e.path(), std::ios::binary);
      std::stringstream ss;
      ss << in.rdbuf();
      out[fs::relative(e.path(), dir).string()] = ss.str();
    }
  return out;
}

Outcome determinism(const std::string& binary) {
  const fs::path root = fs::temp_directory_path() / "mlafem_acceptance_determinism";
  fs::remove_all(root);
  fs::create_directories(root);
  const fs::path cfg = root / "config.json";
  {
    std::ofstream out(cfg);
    out << R"({"sampling": {"count": 4, "seed": 7}, "output": {"directory": ")" << (root / "out").string() << R"("}})";
  }
  bool ok = true;
  std::size_t files = 0;
  for (const std::string cmd : {"run", "gen-dataset"}) {
    std::map<std::string, std::string> first;
    for (int rep = 0; rep < 2; ++rep) {
      fs::remove_all(root / "out");
      const std::string line = "\"" + binary + "\" " + cmd + " --config \"" + cfg.string() + "\" --workers " +
                               std::to_string(rep + 1) + " > /dev/null";
      if (std::system(line.c_str()) != 0) return {false, cmd + " exited with an error"};
      auto t = tree(root / "out");
      if (rep == 0)
        first = std::move(t);
      else
        ok = ok && t == first && !t.empty();
    }
    files += first.size();
  }
  fs::remove_all(root);
  return {ok, fmt("run and gen-dataset reruns (1 and 2 workers) byte-identical over %zu files", files)};
}

}  // namespace

int main(int argc, char** argv) {
  const std::string binary = argc > 1 ? argv[1] : "afem";
  struct Criterion {
    int id;
    const char* name;
    double budget_s;  // 0: no runtime bound
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria{
      {1, "operator equivalence", 10, operator_equivalence},
      {2, "solver pipeline equivalence", 30, sweep_equivalence},
      {3, "LLMG convergence", 0, llmg_convergence},
      {4, "levelwise identity", 0, levelwise_identity},
      {5, "estimator exactness and aggregation", 0, estimator_exactness},
      {6, "reliability and efficiency", 0, reliability},
      {7, "AFEM advantage", 600, afem_advantage},
      {8, "marking/refinement mask equality", 0, mask_equality},
      {9, "parameter-count structure", 0, parameter_structure},
      {10, "determinism", 0, [&] { return determinism(binary); }},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (c.budget_s > 0 && secs > c.budget_s) {
      o.pass = false;
      o.detail += fmt("; runtime over %.0f s budget", c.budget_s);
    }
    std::printf("[%s] criterion %d %s: %s (%.1f s)\n", o.pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str(), secs);
    std::fflush(stdout);
    failed += !o.pass;
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
