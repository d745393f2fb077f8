#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mlafem/adapt.hpp"
#include "mlafem/problems.hpp"
#include "oracles.hpp"

using namespace mlafem;

namespace {

// Estimator with given values on level 0 of a single-level layout; every triangle a leaf.
EstimatorField synthetic(int n, const std::vector<double>& values) {
  EstimatorField e;
  Stack s{Image(n), Image(n)};
  TriangleMask m{Mask(n), Mask(n)};
  std::size_t idx = 0;
  for (int a = 0; a + 1 < n; ++a)
    for (int b = 0; b + 1 < n; ++b)
      for (int q = 0; q < 2; ++q) {
        m[q](a, b) = 1;
        s[q](a, b) = idx < values.size() ? values[idx] : 0.0;
        ++idx;
      }
  e.r2 = {s};
  e.j2 = {Stack{Image(n), Image(n)}};
  e.eta2 = {s};
  e.tri_mask = {m};
  return e;
}

EstimatorField random_estimator(const GridHierarchy& g, std::mt19937_64& rng) {
  auto masks = oracle::random_nested_masks(g, rng, 0.3);
  auto leaves = leaf_triangle_masks(g, masks);
  std::vector<Stack> r2, j2;
  std::uniform_real_distribution<double> U(0.0, 1.0);
  for (int k = 0; k < g.levels(); ++k) {
    const int n = g.nodes_per_side(k);
    Stack s{Image(n), Image(n)};
    for (auto& c : s)
      for (auto& v : c.data()) v = U(rng);
    r2.push_back(s);
    j2.push_back({Image(n), Image(n)});
  }
  return masked_estimator(r2, j2, leaves);
}

struct Sample {
  GridHierarchy grid;
  DiffusionField d;
  Image f;
};

Sample cookie(double y1, double y2, int coarse = 5, int levels = 3) {
  auto g = build_hierarchy(coarse, levels);
  const auto p = cookie_problem();
  return {g, compute_upsilon(g, discretize_kappa(p, {y1, y2}, g)), discretize_load(p, g)};
}

}  // namespace

TEST_CASE("threshold marking") {
  auto g = build_hierarchy(3, 3);
  std::mt19937_64 rng(3);
  const auto est = random_estimator(g, rng);
  const double top = max_eta2(est);

  SUBCASE("threshold above the maximum marks nothing") {
    CHECK(mark_count(mark_threshold(est, std::vector<double>(3, top * 1.01))) == 0);
  }
  SUBCASE("tiny threshold marks every leaf") {
    const auto m = mark_threshold(est, std::vector<double>(3, 1e-300));
    std::size_t leaves = 0;
    for (const auto& l : est.tri_mask) leaves += count(l[0]) + count(l[1]);
    CHECK(mark_count(m) == leaves);
  }
  SUBCASE("mixed thresholds match a filter loop") {
    const std::vector<double> d{0.2, 0.5, 0.7};
    const auto m = mark_threshold(est, d);
    for (int k = 0; k < 3; ++k)
      for (int q = 0; q < 2; ++q)
        for (std::size_t i = 0; i < m[k][q].data().size(); ++i) {
          const bool expect = est.tri_mask[k][q].data()[i] && est.eta2[k][q].data()[i] > d[k];
          CHECK(static_cast<bool>(m[k][q].data()[i]) == expect);
        }
  }
  SUBCASE("invalid thresholds") {
    CHECK_THROWS_AS(mark_threshold(est, {0.1, 0.0, 0.1}), ConfigError);
    CHECK_THROWS_AS(mark_threshold(est, {0.1}), ConfigError);
  }
}

TEST_CASE("doerfler marking") {
  SUBCASE("3 and 1 with theta one half") {
    const auto est = synthetic(2, {3.0, 1.0});
    const auto m = mark_doerfler(est, 0.5);
    CHECK(mark_count(m) == 1);
    CHECK(m[0][0](0, 0) == 1);
  }
  SUBCASE("ties go to the smaller index") {
    const auto est = synthetic(3, {0, 0, 0, 2.0, 0, 0, 2.0, 0});
    const auto m = mark_doerfler(est, 0.4);
    CHECK(mark_count(m) == 1);
    CHECK(m[0][1](0, 1) == 1);
  }
  SUBCASE("theta close to one marks every positive element") {
    const auto est = synthetic(3, {1, 2, 0, 4, 5, 0, 7, 8});
    const auto m = mark_doerfler(est, 1.0 - 1e-9);
    CHECK(mark_count(m) == 6);
  }
  SUBCASE("random estimates give the minimal sorted prefix") {
    auto g = build_hierarchy(3, 3);
    std::mt19937_64 rng(17);
    for (int rep = 0; rep < 10; ++rep) {
      const auto est = random_estimator(g, rng);
      const double total = total_eta2(est);
      const auto m = mark_doerfler(est, 0.1);
      double marked = 0.0, smallest_marked = 1e300, largest_unmarked = 0.0;
      for (int k = 0; k < 3; ++k)
        for (int q = 0; q < 2; ++q)
          for (std::size_t i = 0; i < m[k][q].data().size(); ++i) {
            if (!est.tri_mask[k][q].data()[i]) {
              CHECK(m[k][q].data()[i] == 0);
              continue;
            }
            const double e = est.eta2[k][q].data()[i];
            if (m[k][q].data()[i]) {
              marked += e;
              smallest_marked = std::min(smallest_marked, e);
            } else {
              largest_unmarked = std::max(largest_unmarked, e);
            }
          }
      CHECK(marked >= 0.1 * total);
      CHECK(marked - smallest_marked < 0.1 * total);
      CHECK(smallest_marked >= largest_unmarked);
    }
  }
  SUBCASE("theta outside (0, 1)") {
    const auto est = synthetic(2, {1.0, 1.0});
    CHECK_THROWS_AS(mark_doerfler(est, 0.0), ConfigError);
    CHECK_THROWS_AS(mark_doerfler(est, 1.0), ConfigError);
  }
}

TEST_CASE("refinement") {
  auto g = build_hierarchy(5, 3);
  const auto masks = initial_masks(g);
  MarkSet none;
  for (int k = 0; k < 3; ++k) none.push_back({Mask(g.nodes_per_side(k)), Mask(g.nodes_per_side(k))});

  SUBCASE("no marks keep the masks") {
    const auto r = refine(g, masks, none);
    for (int k = 0; k < 3; ++k) CHECK(r.masks[k].active == masks[k].active);
  }

  SUBCASE("one triangle adds the fine hats overlapping it") {
    for (const auto& t : oracle::triangles(g, 0)) {
      MarkSet m = none;
      m[0][static_cast<int>(t.half)](t.owner.i1, t.owner.i2) = 1;
      const auto r = refine(g, masks, m);
      const auto tri = oracle::physical(g, t);
      const int n1 = g.nodes_per_side(1);
      for (int a = 0; a < n1; ++a)
        for (int b = 0; b < n1; ++b) {
          Image hat(n1);
          hat(a, b) = 1.0;
          bool overlaps = false;
          const int s = 12;
          for (int i = 1; i < s && !overlaps; ++i)
            for (int j = 1; i + j < s && !overlaps; ++j) {
              const double l1 = static_cast<double>(i) / s, l2 = static_cast<double>(j) / s;
              overlaps = oracle::eval_p1(g, 1, hat, tri.at(1.0 - l1 - l2, l1, l2)) > 1e-12;
            }
          const bool expect = overlaps && g.is_interior(1, {a, b});
          CHECK(static_cast<bool>(r.masks[1].active(a, b)) == expect);
        }
      CHECK(r.masks[2].active == masks[2].active);
    }
  }

  SUBCASE("marking every level-0 triangle activates level 1") {
    MarkSet m = none;
    for (int q = 0; q < 2; ++q)
      for (int a = 0; a + 1 < 5; ++a)
        for (int b = 0; b + 1 < 5; ++b) m[0][q](a, b) = 1;
    const auto r = refine(g, masks, m);
    CHECK(r.masks[1].active == g.interior_mask(1));
    CHECK(r.dropped == 0);
  }

  SUBCASE("finest marks are dropped") {
    MarkSet m = none;
    m[2][0](3, 3) = 1;
    const auto r = refine(g, masks, m);
    CHECK(r.dropped == 1);
    CHECK(r.masks[2].active == masks[2].active);
  }

  SUBCASE("active sets only grow") {
    std::mt19937_64 rng(5);
    for (int rep = 0; rep < 5; ++rep) {
      const auto start = oracle::random_nested_masks(g, rng, 0.2);
      const auto est = random_estimator(g, rng);
      const auto r = refine(g, start, mark_threshold(est, {0.5, 0.5, 0.5}));
      for (int k = 0; k < 3; ++k)
        for (std::size_t i = 0; i < start[k].active.data().size(); ++i)
          if (start[k].active.data()[i]) CHECK(r.masks[k].active.data()[i] == 1);
    }
  }
}

TEST_CASE("zero load leaves everything at rest") {
  auto s = cookie(0.4, 0.6);
  const auto res = afem(s.grid, s.d, Image(s.grid.nodes_per_side(2)), AfemConfig{});
  for (const auto& row : res.report) {
    CHECK(row.eta2_total == 0.0);
    CHECK(row.marked == 0);
    CHECK(row.dofs == 9);
  }
  for (const auto& v : res.u.values) CHECK(max_abs(v) == 0.0);
}

TEST_CASE("single iteration equals the Galerkin solve on the coarse space") {
  auto s = cookie(0.7, 0.2);
  AfemConfig cfg;
  cfg.iterations = 1;
  const auto res = afem(s.grid, s.d, s.f, cfg);
  REQUIRE(res.report.size() == 1);
  const auto ref = reference_solve(s.grid, initial_masks(s.grid), s.d, assemble_rhs(s.grid, s.f));
  CHECK(oracle::rel_diff(res.u.values[0], ref.values[0]) < 1e-8);
}

TEST_CASE("adaptive iterations on a cookie sample") {
  auto s = cookie(0.9, 0.8, 5, 4);
  const auto res = afem(s.grid, s.d, s.f, AfemConfig{});
  REQUIRE(res.report.size() == 3);
  for (std::size_t i = 1; i < 3; ++i) {
    CHECK(res.report[i].dofs > res.report[i - 1].dofs);
    CHECK(res.report[i].eta2_total < res.report[i - 1].eta2_total);
  }

  const RhsField f = assemble_rhs(s.grid, s.f);
  std::mt19937_64 rng(11);
  for (std::size_t i = 0; i < res.snapshots.size(); ++i) {
    const auto& u = res.snapshots[i].u;
    // Galerkin orthogonality.
    const auto au = apply_global(s.grid, u, s.d);
    const auto w = oracle::random_field(s.grid, u.masks, rng);
    double ip = 0.0, fn = 0.0, wn = 0.0;
    for (int k = 0; k < s.grid.levels(); ++k) {
      ip += dot(masked(f[k] - au[k], u.masks[k].active), w.values[k]);
      fn += dot(masked(f[k], u.masks[k].active), masked(f[k], u.masks[k].active));
      wn += dot(w.values[k], w.values[k]);
    }
    CHECK(std::abs(ip) <= 1e-8 * std::sqrt(fn * wn));

    // Carry-over into the next space represents the same function.
    if (i + 1 < res.snapshots.size()) {
      MultilevelField carried{u.values, res.snapshots[i + 1].u.masks};
      std::vector<Point> pts;
      std::uniform_real_distribution<double> U(0.0, 1.0);
      for (int p = 0; p < 500; ++p) pts.push_back({U(rng), U(rng)});
      const auto a = evaluate_field(s.grid, u, pts);
      const auto b = evaluate_field(s.grid, carried, pts);
      for (int p = 0; p < 500; ++p) CHECK(std::abs(a[p] - b[p]) <= 1e-12);
    }
  }
}

TEST_CASE("marking names") {
  CHECK(parse_marking("doerfler") == MarkingStrategy::doerfler);
  CHECK(to_string(parse_marking("threshold")) == "threshold");
  CHECK_THROWS_AS(parse_marking("bulk"), ConfigError);
}
