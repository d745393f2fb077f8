#include "mlafem/commands.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <limits>
#include <mutex>
#include <ostream>
#include <thread>
#include <tuple>

#include "mlafem/convnet.hpp"
#include "mlafem/dataset.hpp"

namespace mlafem {

namespace {

namespace fs = std::filesystem;

// Runs fn(i) for i in [0, count) on `workers` threads; results keep their index.
template <class Fn>
auto parallel_map(int count, int workers, Fn fn) -> std::vector<decltype(fn(0))> {
  std::vector<decltype(fn(0))> out(static_cast<std::size_t>(count));
  std::atomic<int> next{0};
  std::exception_ptr failure;
  std::mutex failure_lock;
  auto work = [&] {
    for (int i = next++; i < count; i = next++) {
      try {
        out[i] = fn(i);
      } catch (...) {
        std::lock_guard g(failure_lock);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  const int n = std::clamp(workers, 1, std::max(1, count));
  std::vector<std::thread> pool;
  for (int t = 1; t < n; ++t) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
  return out;
}

void write_text(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc | std::ios::binary);
  out << text;
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

std::string sample_name(int s) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "sample_%04d", s);
  return buf;
}

struct SampleData {
  GridHierarchy grid;
  Image kappa, f;
  DiffusionField diffusion;
};

SampleData sample_data(const RunConfig& config, const Parameter& y) {
  auto grid = make_hierarchy(config);
  const auto problem = make_problem(config);
  Image kappa = discretize_kappa(problem, y, grid);
  Image f = discretize_load(problem, grid);
  auto d = compute_upsilon(grid, kappa);
  return {grid, std::move(kappa), std::move(f), std::move(d)};
}

std::vector<Parameter> parameters(const RunConfig& config) {
  SampleRng rng(config.sampling.seed);
  return sample_parameters(rng, config.sampling.count);
}

std::vector<std::uint8_t> tri_bytes(const TriangleMask& m) {
  std::vector<std::uint8_t> v(m[0].data());
  v.insert(v.end(), m[1].data().begin(), m[1].data().end());
  return v;
}

// Nested active sets from random marking of leaves, level by level.
LevelMasks random_masks(const GridHierarchy& grid, SampleRng& rng, double p) {
  LevelMasks masks = initial_masks(grid);
  for (int k = 0; k + 1 < grid.levels(); ++k) {
    const auto leaves = leaf_triangle_masks(grid, masks);
    MarkSet marks;
    for (int j = 0; j < grid.levels(); ++j) marks.push_back({Mask(grid.nodes_per_side(j)), Mask(grid.nodes_per_side(j))});
    for (int q = 0; q < 2; ++q)
      for (std::size_t i = 0; i < leaves[k][q].data().size(); ++i)
        if (leaves[k][q].data()[i] && rng.uniform() < p) marks[k][q].data()[i] = 1;
    masks = refine(grid, masks, marks).masks;
  }
  return masks;
}

Image random_image(int n, SampleRng& rng) {
  Image img(n);
  for (auto& v : img.data()) v = 2.0 * rng.uniform() - 1.0;
  return img;
}

double deviation(const Image& a, const Image& b) {
  const double s = std::max(max_abs(a), max_abs(b));
  const double d = max_abs(a - b);
  return s == 0.0 ? d : d / s;
}

double interp_loglog(double x, double x0, double x1, double y0, double y1) {
  const double t = (std::log(x) - std::log(x0)) / (std::log(x1) - std::log(x0));
  return std::exp(std::log(y0) + t * (std::log(y1) - std::log(y0)));
}

}  // namespace

SampleStudy study_sample(const RunConfig& config, const Parameter& y) {
  const auto s = sample_data(config, y);
  const auto ref = overkill_reference(s.kappa, s.f, 2);
  SampleStudy out;
  out.y = y;
  out.adaptive = afem(s.grid, s.diffusion, s.f, config.afem, &ref).report;
  const auto rhs = assemble_rhs(s.grid, s.f);
  for (int k = 0; k < s.grid.levels(); ++k) {
    const auto u = uniform_solution(s.grid, k, s.diffusion, rhs);
    out.uniform_dofs.push_back(dof_count(u.masks));
    out.uniform.push_back(relative_errors(ref, flatten_to_finest(s.grid, u)));
  }
  return out;
}

std::vector<SampleStudy> study_samples(const RunConfig& config, int workers) {
  const auto ys = parameters(config);
  return parallel_map(config.sampling.count, workers, [&](int i) { return study_sample(config, ys[i]); });
}

std::vector<StudyRow> summarize(const std::vector<SampleStudy>& studies) {
  if (studies.empty()) throw ConfigError("no samples to summarize");
  std::vector<StudyRow> rows;
  auto add = [&](const std::string& family, int step, auto get) {
    StudyRow r;
    r.family = family;
    r.step = step;
    r.h1_min = r.l2_min = std::numeric_limits<double>::infinity();
    r.h1_max = r.l2_max = -std::numeric_limits<double>::infinity();
    for (const auto& s : studies) {
      const auto [dofs, h1, l2] = get(s);
      r.dofs_mean += dofs;
      r.h1_mean += h1;
      r.l2_mean += l2;
      r.h1_min = std::min(r.h1_min, h1);
      r.h1_max = std::max(r.h1_max, h1);
      r.l2_min = std::min(r.l2_min, l2);
      r.l2_max = std::max(r.l2_max, l2);
    }
    const double n = static_cast<double>(studies.size());
    r.dofs_mean /= n;
    r.h1_mean /= n;
    r.l2_mean /= n;
    rows.push_back(r);
  };
  for (std::size_t i = 0; i < studies.front().adaptive.size(); ++i)
    add("adaptive", static_cast<int>(i) + 1, [&](const SampleStudy& s) {
      const auto& a = s.adaptive.at(i);
      return std::tuple{static_cast<double>(a.dofs), a.h1_rel_err, a.l2_rel_err};
    });
  for (std::size_t i = 0; i < studies.front().uniform.size(); ++i)
    add("uniform", static_cast<int>(i) + 1, [&](const SampleStudy& s) {
      return std::tuple{static_cast<double>(s.uniform_dofs.at(i)), s.uniform.at(i).h1_rel, s.uniform.at(i).l2_rel};
    });
  return rows;
}

std::vector<MatchPoint> matched_error_levels(const std::vector<StudyRow>& rows) {
  std::vector<const StudyRow*> ad, un;
  for (const auto& r : rows) (r.family == "adaptive" ? ad : un).push_back(&r);
  if (ad.empty() || un.empty()) return {};
  auto best = [](const std::vector<const StudyRow*>& c) {
    double m = std::numeric_limits<double>::infinity();
    for (const auto* r : c) m = std::min(m, r->h1_mean);
    return m;
  };
  // DOFs of the first step whose mean error is at most e. Both families solve to
  // a 1e-10 residual, so errors on identical meshes agree only up to that.
  auto cost = [](const std::vector<const StudyRow*>& c, double e) {
    for (const auto* r : c)
      if (r->h1_mean <= e * (1.0 + 1e-8)) return r->dofs_mean;
    return std::numeric_limits<double>::infinity();
  };
  const double floor = std::max(best(ad), best(un));
  std::vector<double> levels;
  for (const auto* r : ad)
    if (r->h1_mean >= floor) levels.push_back(r->h1_mean);
  for (const auto* r : un)
    if (r->h1_mean >= floor) levels.push_back(r->h1_mean);
  std::sort(levels.begin(), levels.end(), std::greater<>());
  levels.erase(std::unique(levels.begin(), levels.end(), [](double a, double b) { return a <= b * (1.0 + 1e-8); }),
               levels.end());
  std::vector<MatchPoint> out;
  for (double e : levels) out.push_back({e, cost(ad, e), cost(un, e)});
  return out;
}

std::vector<MatchPoint> interpolated_uniform(const std::vector<StudyRow>& rows) {
  std::vector<const StudyRow*> ad, un;
  for (const auto& r : rows) (r.family == "adaptive" ? ad : un).push_back(&r);
  std::vector<MatchPoint> out;
  for (const auto* a : ad) {
    MatchPoint m{a->h1_mean, a->dofs_mean, std::numeric_limits<double>::quiet_NaN()};
    for (std::size_t i = 0; i + 1 < un.size(); ++i) {
      const double e0 = un[i]->h1_mean, e1 = un[i + 1]->h1_mean;
      if (a->h1_mean <= e0 && a->h1_mean >= e1)
        m.uniform_dofs = interp_loglog(a->h1_mean, e0, e1, un[i]->dofs_mean, un[i + 1]->dofs_mean);
    }
    out.push_back(m);
  }
  return out;
}

std::vector<VerifyRow> run_verification(const RunConfig& config) {
  const auto grid = make_hierarchy(config);
  const auto bank = build_stencil_bank(grid);
  const auto problem = make_problem(config);
  SampleRng rng(config.sampling.seed, 0x7665726966ULL);
  const int cases = 10;
  const int L = grid.finest();
  VerifyRow op{"operator", 0, 0.0, 1e-10}, transfer{"prolong/restrict", 0, 0.0, 1e-10},
      est{"estimator+mask", 0, 0.0, 1e-10};

  for (int c = 0; c < cases; ++c) {
    // The first case keeps only the coarse level active.
    const LevelMasks masks = c == 0 ? initial_masks(grid) : random_masks(grid, rng, 0.35);
    const Parameter y{rng.uniform(), rng.uniform()};
    const Image kappa = discretize_kappa(problem, y, grid);
    const auto d = compute_upsilon(grid, kappa);
    MultilevelField u = zero_field(grid, masks);
    for (int k = 0; k <= L; ++k) {
      const int n = grid.nodes_per_side(k);
      const Image v = random_image(n, rng);
      u.values[k] = masked(v, masks[k].active);
      const auto& m = masks[k];
      op.max_deviation = std::max(
          op.max_deviation, deviation(apply_A_level(grid, k, v, d, m),
                                      conv_apply_A(bank, k, conv_translate(bank, masked(v, m.closure), m.active),
                                                   d.upsilon[k], m)));
      op.max_deviation = std::max(
          op.max_deviation,
          deviation(apply_A_level_transpose(grid, k, v, d, m),
                    conv_apply_A_transpose(bank, k, conv_translate(bank, masked(v, m.active), m.closure),
                                           d.upsilon[k], m)));
      if (k < L) {
        const Image w = random_image(grid.nodes_per_side(k + 1), rng);
        transfer.max_deviation =
            std::max(transfer.max_deviation, deviation(prolongate(v, m.closure, masks[k + 1].closure),
                                                       conv_prolongate(bank, v, m.closure, masks[k + 1].closure)));
        transfer.max_deviation =
            std::max(transfer.max_deviation, deviation(restrict_weighted(w, masks[k + 1].closure, m.closure),
                                                       conv_restrict(bank, w, masks[k + 1].closure, m.closure)));
      }
    }
    const Image f = discretize_load(problem, grid);
    const auto a = estimate(grid, u, f, d);
    const auto b = conv_estimator(bank, u, f, kappa);
    double scale = max_eta2(a);
    for (int k = 0; k <= L; ++k)
      for (int q = 0; q < 2; ++q) {
        const double dev = max_abs(a.eta2[k][q] - b.eta2[k][q]);
        est.max_deviation = std::max(est.max_deviation, scale > 0.0 ? dev / scale : dev);
        if (!(a.tri_mask[k][q] == b.tri_mask[k][q])) est.max_deviation = std::numeric_limits<double>::infinity();
      }
    const auto delta = relative_thresholds(a, config.afem.marking.theta);
    const auto conv = conv_mark_refine(bank, a, delta, masks);
    const auto ref = refine(grid, masks, mark_threshold(a, delta));
    for (int k = 0; k <= L; ++k)
      if (!(conv.masks[k].active == ref.masks[k].active) || !(conv.masks[k].closure == ref.masks[k].closure))
        est.max_deviation = std::numeric_limits<double>::infinity();
    ++op.cases;
    ++transfer.cases;
    ++est.cases;
  }
  return {op, transfer, est};
}

int default_workers() {
  if (const char* env = std::getenv("AFEM_WORKERS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end == env || *end != '\0' || v < 1) throw ConfigError("AFEM_WORKERS must be a positive integer");
    return static_cast<int>(v);
  }
  return 1;
}

std::string format_csv_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string afem_report_csv(const std::vector<AfemIteration>& report) {
  std::string s = "iteration,dofs,eta2_total,h1_rel_err,l2_rel_err,marked,sweeps\n";
  for (const auto& r : report)
    s += std::to_string(r.iteration) + "," + std::to_string(r.dofs) + "," + format_csv_number(r.eta2_total) + "," +
         format_csv_number(r.h1_rel_err) + "," + format_csv_number(r.l2_rel_err) + "," + std::to_string(r.marked) +
         "," + std::to_string(r.sweeps) + "\n";
  return s;
}

std::string study_csv(const std::vector<StudyRow>& rows) {
  std::string s = "family,step,dofs_mean,h1_mean,h1_min,h1_max,l2_mean,l2_min,l2_max\n";
  for (const auto& r : rows)
    s += r.family + "," + std::to_string(r.step) + "," + format_csv_number(r.dofs_mean) + "," +
         format_csv_number(r.h1_mean) + "," + format_csv_number(r.h1_min) + "," + format_csv_number(r.h1_max) + "," +
         format_csv_number(r.l2_mean) + "," + format_csv_number(r.l2_min) + "," + format_csv_number(r.l2_max) + "\n";
  return s;
}

int cmd_run(const RunConfig& config, int workers, std::ostream& out) {
  const auto ys = parameters(config);
  const fs::path root(config.output_directory);
  const std::string hash = config_hash(config);
  auto results = parallel_map(config.sampling.count, workers, [&](int i) {
    const auto s = sample_data(config, ys[i]);
    const auto ref = overkill_reference(s.kappa, s.f, 2);
    return afem(s.grid, s.diffusion, s.f, config.afem, &ref);
  });

  int unconverged = 0;
  for (int i = 0; i < config.sampling.count; ++i) {
    const auto& r = results[i];
    const fs::path dir = root / sample_name(i);
    write_text(dir / "report.csv", afem_report_csv(r.report));
    DatasetWriter w(dir / "snapshots", hash, config.sampling.seed);
    for (std::size_t it = 0; it < r.snapshots.size(); ++it) {
      const auto& snap = r.snapshots[it];
      const std::string pre = "iter" + std::to_string(it + 1) + "/";
      for (std::size_t k = 0; k < snap.u.values.size(); ++k) {
        const int lvl = static_cast<int>(k);
        const auto n = static_cast<std::size_t>(snap.u.values[k].size());
        const std::string sfx = "/level" + std::to_string(k);
        w.add(pre + "u" + sfx, snap.u.values[k], lvl, "u");
        w.add(pre + "eta2" + sfx, snap.estimator.eta2[k], lvl, "eta2 upper,lower");
        w.add(pre + "active" + sfx, snap.u.masks[k].active, lvl, "active mask");
        w.add(pre + "leaves" + sfx, {2, n, n}, tri_bytes(snap.estimator.tri_mask[k]), lvl, "leaf mask upper,lower");
        w.add(pre + "marks" + sfx, {2, n, n}, tri_bytes(snap.marks[k]), lvl, "marks upper,lower");
      }
    }
    w.finish();
    for (const auto& msg : r.warnings) out << sample_name(i) << ": warning: " << msg << "\n";
    for (const auto& row : r.report) unconverged += row.converged ? 0 : 1;
  }
  out << "wrote " << config.sampling.count << " sample report(s) to " << root.string() << "\n";
  if (unconverged > 0) out << unconverged << " solve(s) stopped at max_sweeps\n";
  return 0;
}

int cmd_convstudy(const RunConfig& config, int workers, std::ostream& out) {
  const auto rows = summarize(study_samples(config, workers));
  const fs::path root(config.output_directory);
  write_text(root / "convstudy.csv", study_csv(rows));
  out << "family    step  dofs        h1 mean     l2 mean\n";
  for (const auto& r : rows) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "%-9s %4d  %-10.1f  %.4e  %.4e\n", r.family.c_str(), r.step, r.dofs_mean,
                  r.h1_mean, r.l2_mean);
    out << buf;
  }
  out << "matched error levels (DOFs to reach):\n";
  for (const auto& m : matched_error_levels(rows)) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "  h1 <= %.4e  adaptive %.1f  uniform %.1f\n", m.error, m.adaptive_dofs,
                  m.uniform_dofs);
    out << buf;
  }
  out << "wrote " << (root / "convstudy.csv").string() << "\n";
  return 0;
}

int cmd_verify(const RunConfig& config, std::ostream& out) {
  const auto rows = run_verification(config);
  bool ok = true;
  out << "suite               cases  max deviation  tolerance  status\n";
  for (const auto& r : rows) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "%-18s  %5d  %13.3e  %9.1e  %s\n", r.suite.c_str(), r.cases, r.max_deviation,
                  r.tolerance, r.passed() ? "PASS" : "FAIL");
    out << buf;
    ok = ok && r.passed();
  }
  return ok ? 0 : 1;
}

int cmd_gen_dataset(const RunConfig& config, int workers, std::ostream& out) {
  const auto ys = parameters(config);
  struct Sample {
    Image kappa, f;
    AfemResult result;
  };
  auto samples = parallel_map(config.sampling.count, workers, [&](int i) {
    const auto s = sample_data(config, ys[i]);
    return Sample{s.kappa, s.f, afem(s.grid, s.diffusion, s.f, config.afem)};
  });
  const auto grid = make_hierarchy(config);
  DatasetWriter w(fs::path(config.output_directory), config_hash(config), config.sampling.seed);
  for (int i = 0; i < config.sampling.count; ++i) {
    const auto& s = samples[i];
    const std::string pre = sample_name(i) + "/";
    w.add(pre + "kappa", s.kappa, grid.finest(), "kappa nodal");
    w.add(pre + "f", s.f, grid.finest(), "f nodal");
    for (int k = 0; k < grid.levels(); ++k) {
      const std::string sfx = "/level" + std::to_string(k);
      w.add(pre + "u" + sfx, s.result.u.values[k], k, "u");
      w.add(pre + "eta2" + sfx, s.result.estimator.eta2[k], k, "eta2 upper,lower");
      w.add(pre + "active" + sfx, s.result.u.masks[k].active, k, "active mask");
    }
  }
  w.add_kernel_bank(build_stencil_bank(grid));
  w.finish();
  out << "wrote " << config.sampling.count << " sample(s) to " << config.output_directory << "\n";
  return 0;
}

}  // namespace mlafem
