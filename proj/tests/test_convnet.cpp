#include <doctest.h>

#include <cmath>
#include <random>

#include "mlafem/convnet.hpp"
#include "mlafem/problems.hpp"
#include "oracles.hpp"

using namespace mlafem;

namespace {

Stack random_stack(int channels, int n, std::mt19937_64& rng) {
  Stack s;
  for (int c = 0; c < channels; ++c) s.push_back(oracle::random_image(n, rng));
  return s;
}

ConvKernel random_kernel(int out, int in, ConvMode mode, Index2 origin, std::mt19937_64& rng) {
  ConvKernel k(out, in, 3, 3, mode, origin);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  for (auto& w : k.weights) w = U(rng);
  return k;
}

double inner(const Stack& a, const Stack& b) {
  double s = 0.0;
  for (std::size_t c = 0; c < a.size(); ++c) s += dot(a[c], b[c]);
  return s;
}

double stack_rel(const Stack& a, const Stack& b) {
  double s = 0.0, d = 0.0;
  for (std::size_t c = 0; c < a.size(); ++c) {
    s = std::max({s, max_abs(a[c]), max_abs(b[c])});
    d = std::max(d, max_abs(a[c] - b[c]));
  }
  return s == 0.0 ? d : d / s;
}

}  // namespace

TEST_CASE("identity kernel") {
  std::mt19937_64 rng(1);
  ConvKernel id = ConvKernel::centered(1, 1, 1, ConvMode::plain);
  id.at(0, 0, 0, 0) = 1.0;
  const Stack x = random_stack(1, 7, rng);
  CHECK(conv_apply(id, x).front() == x.front());
}

TEST_CASE("strided and transposed convolutions are adjoint") {
  std::mt19937_64 rng(2);
  for (Index2 origin : {Index2{0, 0}, Index2{1, 1}, Index2{2, 0}}) {
    const auto k = random_kernel(3, 2, ConvMode::strided2, origin, rng);
    const auto kt = adjoint(k);
    CHECK(kt.mode == ConvMode::transpose_strided2);
    const Stack v = random_stack(2, 9, rng);
    const Stack w = random_stack(3, 5, rng);
    const double lhs = inner(conv_apply(k, v), w);
    const double rhs = inner(v, conv_apply(kt, w));
    CHECK(std::abs(lhs - rhs) <= 1e-12 * std::max(1.0, std::abs(lhs)));
  }
  const auto p = random_kernel(2, 3, ConvMode::plain, {1, 0}, rng);
  const Stack v = random_stack(3, 6, rng), w = random_stack(2, 6, rng);
  CHECK(std::abs(inner(conv_apply(p, v), w) - inner(v, conv_apply(adjoint(p), w))) < 1e-12);
}

TEST_CASE("submanifold convolution on a checkerboard") {
  std::mt19937_64 rng(3);
  auto k = random_kernel(2, 2, ConvMode::plain, {1, 1}, rng);
  const Stack x = random_stack(2, 8, rng);
  Mask checker(8);
  for (int a = 0; a < 8; ++a)
    for (int b = 0; b < 8; ++b) checker(a, b) = (a + b) % 2;
  const Stack full = conv_apply(k, x);
  k.mode = ConvMode::submanifold;
  const Stack sub = conv_apply(k, x, &checker);
  for (int c = 0; c < 2; ++c)
    for (int a = 0; a < 8; ++a)
      for (int b = 0; b < 8; ++b) CHECK(sub[c](a, b) == (checker(a, b) ? full[c](a, b) : 0.0));
  CHECK_THROWS_AS(conv_apply(k, x), ShapeError);
  CHECK_THROWS_AS(conv_apply(k, random_stack(3, 8, rng), &checker), ShapeError);
}

TEST_CASE("stencil bank constants") {
  auto g = build_hierarchy(5, 3);
  const auto bank = build_stencil_bank(g);

  SUBCASE("unit coefficient reproduces the five-point stencil") {
    const auto d = compute_upsilon(g, Image(17, 1.0));
    const auto mask = full_level_mask(g, 0);
    Image delta(5);
    delta(2, 2) = 1.0;
    const Image out = conv_apply_A(bank, 0, conv_translate(bank, delta, mask.active), d.upsilon[0], mask);
    // Row of the operator at each active node = value of the stencil at offset delta - node.
    const Image col = apply_A_level(g, 0, delta, d, mask);
    CHECK(oracle::rel_diff(out, col) < 1e-14);
    CHECK(out(2, 2) == doctest::Approx(4.0));
    for (Index2 e : {Index2{1, 2}, Index2{3, 2}, Index2{2, 1}, Index2{2, 3}}) CHECK(out(e.i1, e.i2) == doctest::Approx(-1.0));
    for (Index2 e : {Index2{1, 1}, Index2{3, 3}, Index2{1, 3}, Index2{3, 1}}) CHECK(std::abs(out(e.i1, e.i2)) < 1e-14);

    const auto dense = oracle::dense_level_matrix(g, 0, Image(17, 1.0));
    for (int a = 1; a < 4; ++a)
      for (int b = 1; b < 4; ++b) CHECK(out(a, b) == doctest::Approx(dense(a * 5 + b, 2 * 5 + 2)).epsilon(1e-12));
  }

  SUBCASE("constants vanish off the patch triangle and scale with the area") {
    for (int l = 0; l < 6; ++l) {
      const auto& pt = node_patch()[l];
      const auto verts = triangle_vertex_offsets(pt.half);
      for (int t = 0; t < 7; ++t) {
        bool in = false;
        for (const auto& v : verts) in = in || (v + pt.owner_shift == hat_overlap_offsets()[t]);
        const double c0 = bank.operators[0][l].at(0, t, 0, 0) * g.triangle_area(0);
        const double c2 = bank.operators[2][l].at(0, t, 0, 0) * g.triangle_area(2);
        if (!in) CHECK(c0 == 0.0);
        CHECK(c0 == doctest::Approx(c2).epsilon(1e-15));
      }
    }
    std::size_t w = 0;
    for (const auto& k : bank.operators[1]) w += k.parameter_count();
    CHECK(w == 42);
  }

  SUBCASE("zero input") {
    const auto d = compute_upsilon(g, Image(17, 1.0));
    const auto mask = full_level_mask(g, 1);
    CHECK(max_abs(conv_apply_A(bank, 1, conv_translate(bank, Image(9), mask.closure), d.upsilon[1], mask)) == 0.0);
    CHECK(max_abs(conv_prolongate(bank, Image(9), mask.closure, full_level_mask(g, 2).closure)) == 0.0);
  }
}

TEST_CASE("coefficient channels by convolution") {
  auto g = build_hierarchy(5, 3);
  const auto bank = build_stencil_bank(g);
  std::mt19937_64 rng(4);
  for (int rep = 0; rep < 5; ++rep) {
    const Image kappa = oracle::random_positive_kappa(17, rng);
    const auto d = compute_upsilon(g, kappa);
    const auto u = conv_upsilon(bank, kappa);
    for (int k = 0; k < 3; ++k) CHECK(stack_rel(u[k], d.upsilon[k]) < 1e-14);
    const Stack direct = hadamard(conv_apply(bank.upsilon_fine, Stack{kappa}), bank.patch_masks[2]);
    CHECK(stack_rel(direct, d.upsilon[2]) < 1e-14);
  }
}

TEST_CASE("operator, transpose and transfer equivalence on random masks") {
  auto g = build_hierarchy(5, 3);
  const auto bank = build_stencil_bank(g);
  std::mt19937_64 rng(5);
  for (int rep = 0; rep < 20; ++rep) {
    const auto masks = oracle::random_nested_masks(g, rng, 0.4);
    const auto d = compute_upsilon(g, oracle::random_positive_kappa(17, rng));
    for (int k = 0; k < 3; ++k) {
      const int n = g.nodes_per_side(k);
      const Image v = oracle::random_image(n, rng);
      const Image a = apply_A_level(g, k, v, d, masks[k]);
      const Image b = conv_apply_A(bank, k, conv_translate(bank, masked(v, masks[k].closure), masks[k].active),
                                   d.upsilon[k], masks[k]);
      CHECK(oracle::rel_diff(a, b) <= 1e-12);

      const Image at = apply_A_level_transpose(g, k, v, d, masks[k]);
      const Image bt = conv_apply_A_transpose(
          bank, k, conv_translate(bank, masked(v, masks[k].active), masks[k].closure), d.upsilon[k], masks[k]);
      CHECK(oracle::rel_diff(at, bt) <= 1e-12);

      if (k + 1 < 3) {
        const Image p = prolongate(v, masks[k].closure, masks[k + 1].closure);
        CHECK(oracle::rel_diff(p, conv_prolongate(bank, v, masks[k].closure, masks[k + 1].closure)) <= 1e-12);
        const Image w = oracle::random_image(g.nodes_per_side(k + 1), rng);
        const Image r = restrict_weighted(w, masks[k + 1].closure, masks[k].closure);
        CHECK(oracle::rel_diff(r, conv_restrict(bank, w, masks[k + 1].closure, masks[k].closure)) <= 1e-12);
        // Transfer pair adjointness on the closures.
        const double lhs = dot(conv_prolongate(bank, v, masks[k].closure, masks[k + 1].closure), w);
        const double rhs = dot(v, conv_restrict(bank, w, masks[k + 1].closure, masks[k].closure));
        CHECK(std::abs(lhs - rhs) <= 1e-12 * std::max(1.0, std::abs(lhs)));
      }
    }
  }
}

TEST_CASE("conv sweep follows the solver sweep") {
  SUBCASE("single degree of freedom") {
    auto g = build_hierarchy(3, 1);
    const auto bank = build_stencil_bank(g);
    const auto d = compute_upsilon(g, Image(3, 1.0));
    const auto masks = initial_masks(g);
    const auto u0 = zero_field(g, masks);
    const auto f = assemble_rhs(g, Image(3, 1.0));
    const SmootherConfig sm{OmegaRule::fixed, {0.125}, true};
    auto state = conv_state(bank, g, u0, f, d, sm);
    // A sweep visits the level twice: 0.03125 after the first visit, 0.046875 after both.
    state = conv_llmg_sweep(bank, state);
    CHECK(conv_field(state).values[0](1, 1) == doctest::Approx(0.046875).epsilon(1e-14));
    state = conv_llmg_sweep(bank, state);
    const auto two = llmg_sweep(g, llmg_sweep(g, u0, f, d, sm), f, d, sm);
    CHECK(conv_field(state).values[0](1, 1) == doctest::Approx(two.values[0](1, 1)).epsilon(1e-14));
    CHECK(conv_field(state).values[0] == state[0].v[0]);
  }

  SUBCASE("random three-level cases") {
    auto g = build_hierarchy(5, 3);
    const auto bank = build_stencil_bank(g);
    std::mt19937_64 rng(6);
    for (int rep = 0; rep < 5; ++rep) {
      const auto masks = oracle::random_nested_masks(g, rng, 0.4);
      const auto d = compute_upsilon(g, oracle::random_positive_kappa(17, rng));
      auto u = oracle::random_field(g, masks, rng);
      RhsField f;
      for (int k = 0; k < 3; ++k) f.push_back(masked(oracle::random_image(g.nodes_per_side(k), rng), masks[k].active));
      const auto sm = choose_omega(g, d, masks, OmegaRule::gershgorin);
      auto state = conv_state(bank, g, u, f, d, sm);
      for (int s = 0; s < 5; ++s) {
        u = llmg_sweep(g, u, f, d, sm);
        state = conv_llmg_sweep(bank, state);
        const auto c = conv_field(state);
        for (int k = 0; k < 3; ++k) CHECK(oracle::rel_diff(u.values[k], c.values[k]) <= 1e-11);
      }
    }
  }
}

TEST_CASE("conv estimator and masks") {
  auto g = build_hierarchy(5, 3);
  const auto bank = build_stencil_bank(g);
  const auto p = cookie_problem();
  SampleRng rng(8);
  std::mt19937_64 mt(9);
  for (const auto& y : sample_parameters(rng, 5)) {
    const Image kappa = discretize_kappa(p, y, g);
    const auto d = compute_upsilon(g, kappa);
    const auto masks = oracle::random_nested_masks(g, mt, 0.3);
    const auto u = oracle::random_field(g, masks, mt);
    const Image f = discretize_load(p, g);
    const auto a = estimate(g, u, f, d);
    const auto b = conv_estimator(bank, u, f, kappa);
    for (int k = 0; k < 3; ++k) {
      CHECK(stack_rel(a.eta2[k], b.eta2[k]) <= 1e-10);
      for (int q = 0; q < 2; ++q) CHECK(a.tri_mask[k][q] == b.tri_mask[k][q]);
    }

    const auto delta = relative_thresholds(a, 0.3);
    const auto conv = conv_mark_refine(bank, a, delta, masks);
    const auto marks = mark_threshold(a, delta);
    const auto ref = refine(g, masks, marks);
    for (int k = 0; k < 3; ++k) {
      CHECK(conv.marks[k][0] == marks[k][0]);
      CHECK(conv.marks[k][1] == marks[k][1]);
      CHECK(conv.masks[k].active == ref.masks[k].active);
      CHECK(conv.masks[k].closure == ref.masks[k].closure);
    }

    const auto none = conv_mark_refine(bank, a, std::vector<double>(3, 2.0 * max_eta2(a)), masks);
    for (int k = 0; k < 3; ++k) {
      CHECK(count(none.marks[k][0]) + count(none.marks[k][1]) == 0);
      CHECK(none.masks[k].active == masks[k].active);
    }
  }
}

TEST_CASE("constant images aggregate by 16 and 8") {
  auto g = build_hierarchy(3, 2);
  const auto bank = build_stencil_bank(g);
  Stack in{Image(5, 1.0), Image(5, 1.0), Image(5, 1.0), Image(5, 1.0)};
  for (auto& c : in) c = masked(c, bank.owner_masks[1]);
  const Stack out = conv_apply(bank.estimator_sum, in, &bank.owner_masks[0]);
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b) {
      CHECK(out[0](a, b) == 16.0);
      CHECK(out[1](a, b) == 16.0);
      CHECK(out[2](a, b) == 8.0);
      CHECK(out[3](a, b) == 8.0);
    }
}

TEST_CASE("parameter counts are affine in depth and sweeps") {
  auto g = build_hierarchy(5, 4);
  const auto bank = build_stencil_bank(g);
  auto total = [&](int L, int m) { return static_cast<long>(parameter_count(bank, {L, m}).total); };
  CHECK(total(3, 5) - total(2, 5) == total(4, 5) - total(3, 5));
  CHECK(total(3, 10) - total(2, 10) == total(4, 10) - total(3, 10));
  for (int L : {2, 3, 4}) CHECK(total(L, 10) - total(L, 5) == total(L, 5) - total(L, 0));
  const auto a = parameter_count(bank, {3, 5}), b = parameter_count(bank, {3, 10});
  CHECK(b.per_module.at("llmg") == 2 * a.per_module.at("llmg"));
  CHECK_THROWS_AS(parameter_count(bank, {5, 1}), ConfigError);
}
