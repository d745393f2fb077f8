#include "mlafem/convnet.hpp"

#include <cmath>
#include <string>

namespace mlafem {

namespace {

constexpr int kPatch = 6;
constexpr int kOverlap = 7;

int output_size(const ConvKernel& k, int n) {
  switch (k.mode) {
    case ConvMode::strided2:
      if (n < 3 || n % 2 == 0) throw ShapeError("strided convolution needs an odd lattice of size >= 3");
      return (n + 1) / 2;
    case ConvMode::transpose_strided2:
      return 2 * n - 1;
    default:
      return n;
  }
}

Stack zeros(int channels, int n) { return Stack(channels, Image(n)); }

Image channel_sum(const Stack& s) {
  Image out(s.front().size());
  for (const auto& c : s) axpy(1.0, c, out);
  return out;
}

Stack single(Image img) {
  Stack s;
  s.push_back(std::move(img));
  return s;
}

Stack add(Stack a, const Stack& b) {
  if (a.size() != b.size()) throw ShapeError("channel count mismatch");
  for (std::size_t c = 0; c < a.size(); ++c) axpy(1.0, b[c], a[c]);
  return a;
}

Mask to_mask(const Image& img) {
  Mask m(img.size());
  for (std::size_t i = 0; i < img.data().size(); ++i) m.data()[i] = img.data()[i] > 0.0 ? 1 : 0;
  return m;
}

Image to_image(const Mask& m) {
  Image img(m.size());
  for (std::size_t i = 0; i < m.data().size(); ++i) img.data()[i] = m.data()[i];
  return img;
}

Stack to_stack(const TriangleMask& m) { return {to_image(m[0]), to_image(m[1])}; }

TriangleMask to_tri(const Stack& s) { return {to_mask(s[0]), to_mask(s[1])}; }

}  // namespace

ConvKernel::ConvKernel(int out, int in, int h, int w, ConvMode m, Index2 org)
    : out_channels(out), in_channels(in), height(h), width(w),
      weights(static_cast<std::size_t>(out) * in * h * w, 0.0), mode(m), origin(org) {
  if (out < 1 || in < 1 || h < 1 || w < 1) throw ShapeError("kernel dimensions must be positive");
}

ConvKernel ConvKernel::centered(int out, int in, int size, ConvMode m) {
  return ConvKernel(out, in, size, size, m, {size / 2, size / 2});
}

double& ConvKernel::at(int o, int c, int a, int b) {
  if (o < 0 || o >= out_channels || c < 0 || c >= in_channels || a < 0 || a >= height || b < 0 || b >= width)
    throw ShapeError("kernel index out of range");
  return weights[((static_cast<std::size_t>(o) * in_channels + c) * height + a) * width + b];
}

double ConvKernel::at(int o, int c, int a, int b) const { return const_cast<ConvKernel*>(this)->at(o, c, a, b); }

ConvKernel adjoint(const ConvKernel& k) {
  if (!k.bias.empty()) throw ShapeError("adjoint of an affine kernel");
  ConvKernel t;
  switch (k.mode) {
    case ConvMode::strided2:
    case ConvMode::transpose_strided2:
      t = ConvKernel(k.in_channels, k.out_channels, k.height, k.width,
                     k.mode == ConvMode::strided2 ? ConvMode::transpose_strided2 : ConvMode::strided2, k.origin);
      for (int o = 0; o < k.out_channels; ++o)
        for (int c = 0; c < k.in_channels; ++c)
          for (int a = 0; a < k.height; ++a)
            for (int b = 0; b < k.width; ++b) t.at(c, o, a, b) = k.at(o, c, a, b);
      return t;
    default:
      t = ConvKernel(k.in_channels, k.out_channels, k.height, k.width, k.mode,
                     {k.height - 1 - k.origin.i1, k.width - 1 - k.origin.i2});
      for (int o = 0; o < k.out_channels; ++o)
        for (int c = 0; c < k.in_channels; ++c)
          for (int a = 0; a < k.height; ++a)
            for (int b = 0; b < k.width; ++b) t.at(c, o, k.height - 1 - a, k.width - 1 - b) = k.at(o, c, a, b);
      return t;
  }
}

Stack conv_apply(const ConvKernel& kernel, const Stack& input, const Mask* mask) {
  if (static_cast<int>(input.size()) != kernel.in_channels)
    throw ShapeError("kernel expects " + std::to_string(kernel.in_channels) + " input channels, got " +
                     std::to_string(input.size()));
  const int n = input.front().size();
  for (const auto& c : input) require_same_size(c.size(), n, "conv input channel");
  const int m = output_size(kernel, n);
  if (kernel.mode == ConvMode::submanifold && !mask) throw ShapeError("submanifold convolution needs a mask");
  if (mask) require_same_size(mask->size(), m, "conv mask");
  if (!kernel.bias.empty() && static_cast<int>(kernel.bias.size()) != kernel.out_channels)
    throw ShapeError("bias size mismatch");

  Stack out = zeros(kernel.out_channels, m);
  const int H = kernel.height, W = kernel.width;
  const Index2 org = kernel.origin;

  if (kernel.mode == ConvMode::transpose_strided2) {
    for (int o = 0; o < kernel.out_channels; ++o)
      for (int c = 0; c < kernel.in_channels; ++c)
        for (int i1 = 0; i1 < n; ++i1)
          for (int i2 = 0; i2 < n; ++i2) {
            const double x = input[c](i1, i2);
            if (x == 0.0) continue;
            for (int a = 0; a < H; ++a)
              for (int b = 0; b < W; ++b) {
                const int j1 = 2 * i1 + a - org.i1, j2 = 2 * i2 + b - org.i2;
                if (out[o].contains(j1, j2)) out[o](j1, j2) += kernel.at(o, c, a, b) * x;
              }
          }
    for (int o = 0; o < kernel.out_channels; ++o)
      if (!kernel.bias.empty())
        for (auto& v : out[o].data()) v += kernel.bias[o];
  } else {
    const int stride = kernel.mode == ConvMode::strided2 ? 2 : 1;
    for (int o = 0; o < kernel.out_channels; ++o)
      for (int j1 = 0; j1 < m; ++j1)
        for (int j2 = 0; j2 < m; ++j2) {
          if (kernel.mode == ConvMode::submanifold && !(*mask)(j1, j2)) continue;
          double s = kernel.bias.empty() ? 0.0 : kernel.bias[o];
          for (int c = 0; c < kernel.in_channels; ++c)
            for (int a = 0; a < H; ++a)
              for (int b = 0; b < W; ++b) {
                const double w = kernel.at(o, c, a, b);
                if (w != 0.0) s += w * input[c].get(stride * j1 + a - org.i1, stride * j2 + b - org.i2);
              }
          out[o](j1, j2) = s;
        }
  }
  if (mask && kernel.mode != ConvMode::submanifold)
    for (auto& c : out) c = masked(c, *mask);
  return out;
}

Stack heaviside(const Stack& x) {
  Stack out = x;
  for (auto& c : out)
    for (auto& v : c.data()) v = v > 0.0 ? 1.0 : 0.0;
  return out;
}

Stack hadamard(const Stack& a, const Stack& b) {
  if (a.size() != b.size()) throw ShapeError("channel count mismatch");
  Stack out = a;
  for (std::size_t c = 0; c < a.size(); ++c) {
    require_same_size(a[c].size(), b[c].size(), "hadamard");
    for (std::size_t i = 0; i < a[c].data().size(); ++i) out[c].data()[i] *= b[c].data()[i];
  }
  return out;
}

Stack mask_channels(const Stack& x, const Mask& m) {
  Stack out;
  for (const auto& c : x) out.push_back(masked(c, m));
  return out;
}

StencilBank build_stencil_bank(const GridHierarchy& grid) {
  StencilBank bank;
  const int L = grid.finest();
  bank.levels = grid.levels();
  const auto& p = hat_overlap_offsets();
  const auto& C = reference_stiffness();

  bank.translation = ConvKernel::centered(kOverlap, 1, 3, ConvMode::submanifold);
  for (int t = 0; t < kOverlap; ++t) bank.translation.tap(t, 0, p[t]) = 1.0;

  for (int k = 0; k <= L; ++k) {
    std::array<ConvKernel, 6> ops;
    for (int l = 0; l < kPatch; ++l) {
      ops[l] = ConvKernel::centered(1, kOverlap, 1, ConvMode::submanifold);
      for (int t = 0; t < kOverlap; ++t) ops[l].at(0, t, 0, 0) = C[l][t] / grid.triangle_area(k);
    }
    bank.operators.push_back(ops);
  }

  bank.prolongation = ConvKernel::centered(1, 1, 3, ConvMode::transpose_strided2);
  for (int d1 = -1; d1 <= 1; ++d1)
    for (int d2 = -1; d2 <= 1; ++d2)
      bank.prolongation.tap(0, 0, {d1, d2}) = (d1 == 0 && d2 == 0) ? 1.0 : (d1 * d2 < 0 ? 0.0 : 0.5);
  bank.restriction = adjoint(bank.prolongation);

  bank.closure = ConvKernel::centered(1, 1, 3, ConvMode::plain);
  for (const auto& d : p) {
    bank.closure.tap(0, 0, d) = 1.0;
    bank.closure.tap(0, 0, Index2{0, 0} - d) = 1.0;
  }

  const double h = grid.mesh_size(L);
  const double area = grid.triangle_area(L);
  bank.finest_h = h;
  bank.finest_area = area;

  // Triangle (o, q) is read from the node o; vertex offsets lie in {0, 1}^2.
  bank.triangle_integral = ConvKernel::centered(2, 1, 3, ConvMode::plain);
  bank.vertex_sum = ConvKernel::centered(2, 1, 3, ConvMode::plain);
  bank.gradient = ConvKernel::centered(4, 1, 3, ConvMode::plain);
  for (int q = 0; q < 2; ++q) {
    const auto v = triangle_vertex_offsets(static_cast<Half>(q));
    const auto g = barycentric_gradients(static_cast<Half>(q));
    for (int a = 0; a < 3; ++a) {
      bank.triangle_integral.tap(q, 0, v[a]) = area / 3.0;
      bank.vertex_sum.tap(q, 0, v[a]) = 1.0;
      bank.gradient.tap(2 * q, 0, v[a]) = g[a][0] / h;
      bank.gradient.tap(2 * q + 1, 0, v[a]) = g[a][1] / h;
    }
  }

  bank.upsilon_fine = ConvKernel::centered(kPatch, 1, 3, ConvMode::plain);
  bank.upsilon_gather = ConvKernel::centered(kPatch, 2, 3, ConvMode::plain);
  for (int l = 0; l < kPatch; ++l) {
    const auto& pt = node_patch()[l];
    for (const auto& v : triangle_vertex_offsets(pt.half)) bank.upsilon_fine.tap(l, 0, pt.owner_shift + v) = area / 3.0;
    bank.upsilon_gather.tap(l, static_cast<int>(pt.half), pt.owner_shift) = 1.0;
  }

  // Children of the coarse triangle owned by i are owned by 2 i + d, d in {0, 1}^2.
  bank.triangle_sum = ConvKernel(2, 2, 3, 3, ConvMode::strided2, {0, 0});
  bank.fine_nodes = ConvKernel(2, 1, 3, 3, ConvMode::strided2, {0, 0});
  bank.estimator_sum = ConvKernel(4, 4, 3, 3, ConvMode::strided2, {0, 0});
  const GridHierarchy pair(3, 2);
  for (int q = 0; q < 2; ++q) {
    const TriangleId t{0, {0, 0}, static_cast<Half>(q)};
    for (const auto& c : children_of_triangle(pair, t)) {
      const int ch = static_cast<int>(c.half);
      bank.triangle_sum.tap(q, ch, c.owner) = 1.0;
      bank.estimator_sum.tap(q, ch, c.owner) = 4.0;
      bank.estimator_sum.tap(2 + q, 2 + ch, c.owner) = 2.0;
    }
    for (const auto& f : fine_nodes_of_triangle(t)) bank.fine_nodes.tap(q, 0, f) = 1.0;
  }
  bank.child_spread = adjoint(bank.triangle_sum);
  bank.refinement = adjoint(bank.fine_nodes);

  // Edge e of half q: channel 3 q + e.
  bank.edge_jump = ConvKernel::centered(6, 4, 3, ConvMode::plain);
  bank.edge_ends = ConvKernel::centered(12, 1, 3, ConvMode::plain);
  bank.jump_weights = ConvKernel::centered(2, 6, 1, ConvMode::plain);
  for (int q = 0; q < 2; ++q) {
    const auto v = triangle_vertex_offsets(static_cast<Half>(q));
    for (int e = 0; e < 3; ++e) {
      const auto& en = edge_neighbors(static_cast<Half>(q))[e];
      const int ch = 3 * q + e;
      const Index2 pa = v[en.a], pb = v[en.b];
      const double tx = (pb.i1 - pa.i1) * h, ty = (pb.i2 - pa.i2) * h;
      const double len = std::sqrt(tx * tx + ty * ty);
      const int nq = static_cast<int>(en.half);
      bank.edge_jump.tap(ch, 2 * q, {0, 0}) += ty / len;
      bank.edge_jump.tap(ch, 2 * q + 1, {0, 0}) += -tx / len;
      bank.edge_jump.tap(ch, 2 * nq, en.owner_shift) += -ty / len;
      bank.edge_jump.tap(ch, 2 * nq + 1, en.owner_shift) += tx / len;
      bank.edge_ends.tap(2 * ch, 0, pa) = 1.0;
      bank.edge_ends.tap(2 * ch + 1, 0, pb) = 1.0;
      bank.jump_weights.at(q, ch, 0, 0) = h * len / 3.0;
    }
  }

  for (int k = 0; k <= L; ++k) {
    const int n = grid.nodes_per_side(k);
    Mask owner(n);
    Stack patch = zeros(kPatch, n);
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b) {
        owner(a, b) = grid.owns_triangles(k, {a, b}) ? 1 : 0;
        for (int l = 0; l < kPatch; ++l)
          patch[l](a, b) = grid.owns_triangles(k, Index2{a, b} + node_patch()[l].owner_shift) ? 1.0 : 0.0;
      }
    bank.owner_masks.push_back(owner);
    bank.patch_masks.push_back(patch);
    bank.interior_masks.push_back(grid.interior_mask(k));
  }
  const int nf = grid.nodes_per_side(L);
  bank.edge_masks = zeros(6, nf);
  for (int q = 0; q < 2; ++q)
    for (int e = 0; e < 3; ++e) {
      const auto& en = edge_neighbors(static_cast<Half>(q))[e];
      for (int a = 0; a < nf; ++a)
        for (int b = 0; b < nf; ++b)
          bank.edge_masks[3 * q + e](a, b) =
              grid.owns_triangles(L, {a, b}) && grid.owns_triangles(L, Index2{a, b} + en.owner_shift) ? 1.0 : 0.0;
    }
  return bank;
}

Stack conv_translate(const StencilBank& bank, const Image& v, const Mask& where) {
  return conv_apply(bank.translation, single(v), &where);
}

namespace {

void check_level(const StencilBank& bank, int k) {
  if (k < 0 || k >= bank.levels) throw ShapeError("level " + std::to_string(k) + " outside the bank");
}

Image patch_sum(const StencilBank& bank, int k, const Stack& stack, const Stack& upsilon, const Mask& out) {
  check_level(bank, k);
  if (stack.size() != kOverlap) throw ShapeError("operator input needs 7 translated channels");
  if (upsilon.size() != kPatch) throw ShapeError("operator needs 6 Upsilon channels");
  Stack terms;
  for (int l = 0; l < kPatch; ++l) terms.push_back(conv_apply(bank.operators[k][l], stack, &out).front());
  return masked(channel_sum(hadamard(terms, upsilon)), out);
}

}  // namespace

Image conv_apply_A(const StencilBank& bank, int k, const Stack& stack, const Stack& upsilon, const LevelMask& mask) {
  return patch_sum(bank, k, stack, upsilon, mask.active);
}

Image conv_apply_A_transpose(const StencilBank& bank, int k, const Stack& stack, const Stack& upsilon,
                             const LevelMask& mask) {
  return patch_sum(bank, k, stack, upsilon, mask.closure);
}

Image conv_prolongate(const StencilBank& bank, const Image& coarse, const Mask& coarse_closure, const Mask& fine_closure) {
  return conv_apply(bank.prolongation, single(masked(coarse, coarse_closure)), &fine_closure).front();
}

Image conv_restrict(const StencilBank& bank, const Image& fine, const Mask& fine_closure, const Mask& coarse_closure) {
  return conv_apply(bank.restriction, single(masked(fine, fine_closure)), &coarse_closure).front();
}

std::vector<Stack> conv_upsilon(const StencilBank& bank, const Image& kappa_fine) {
  const int L = bank.levels - 1;
  require_same_size(kappa_fine.size(), bank.owner_masks[L].size(), "kappa image");
  std::vector<Stack> tri(bank.levels), ups(bank.levels);
  tri[L] = conv_apply(bank.triangle_integral, single(kappa_fine), &bank.owner_masks[L]);
  for (int k = L - 1; k >= 0; --k) tri[k] = conv_apply(bank.triangle_sum, tri[k + 1], &bank.owner_masks[k]);
  for (int k = 0; k <= L; ++k) ups[k] = hadamard(conv_apply(bank.upsilon_gather, tri[k]), bank.patch_masks[k]);
  return ups;
}

std::vector<ConvLevelState> conv_state(const StencilBank& bank, const GridHierarchy& grid, const MultilevelField& u,
                                       const RhsField& f, const DiffusionField& diffusion,
                                       const SmootherConfig& smoother) {
  check_field(grid, u);
  if (bank.levels != grid.levels()) throw ShapeError("bank depth mismatch");
  if (static_cast<int>(f.size()) != grid.levels() || static_cast<int>(smoother.omega.size()) != grid.levels())
    throw ShapeError("level count mismatch");
  std::vector<ConvLevelState> state(grid.levels());
  for (int k = 0; k < grid.levels(); ++k) {
    auto& s = state[k];
    const int n = grid.nodes_per_side(k);
    s.mask = u.masks[k];
    s.v = conv_translate(bank, masked(u.values[k], s.mask.active), s.mask.closure);
    s.utilde = s.ubar = s.z = zeros(kOverlap, n);
    s.upsilon = diffusion.upsilon[k];
    s.f = single(masked(f[k], s.mask.active));
    s.omega = smoother.omega[k];
  }
  return state;
}

std::vector<ConvLevelState> conv_llmg_sweep(const StencilBank& bank, std::vector<ConvLevelState> state) {
  if (static_cast<int>(state.size()) != bank.levels) throw ShapeError("state depth mismatch");
  const int L = bank.levels - 1;

  // Entry: utilde by prolongation from the coarse side, ubar on the finest level is zero.
  state[0].utilde = zeros(kOverlap, state[0].v.front().size());
  for (int k = 1; k <= L; ++k) {
    const Image up = conv_prolongate(bank, state[k - 1].utilde.front() + state[k - 1].v.front(),
                                     state[k - 1].mask.closure, state[k].mask.closure);
    state[k].utilde = conv_translate(bank, up, state[k].mask.closure);
  }
  state[L].ubar = zeros(kOverlap, state[L].v.front().size());

  auto smooth = [&](int k) {
    auto& s = state[k];
    const Image au = conv_apply_A(bank, k, add(s.v, s.utilde), s.upsilon, s.mask);
    Image res = s.f.front() - au - s.ubar.front();
    Image v = s.v.front();
    axpy(s.omega, masked(res, s.mask.active), v);
    s.v = conv_translate(bank, v, s.mask.closure);
  };

  for (int k = L; k >= 0; --k) {
    smooth(k);
    if (k > 0) {
      auto& s = state[k];
      const Image at = conv_apply_A_transpose(bank, k, s.v, s.upsilon, s.mask);
      s.z = conv_translate(bank, s.ubar.front() + at, s.mask.closure);
      const Image r = conv_restrict(bank, s.z.front(), s.mask.closure, state[k - 1].mask.closure);
      state[k - 1].ubar = conv_translate(bank, r, state[k - 1].mask.closure);
    }
  }
  state[0].utilde = zeros(kOverlap, state[0].v.front().size());
  for (int k = 0; k <= L; ++k) {
    smooth(k);
    if (k < L) {
      const Image up = conv_prolongate(bank, state[k].utilde.front() + state[k].v.front(), state[k].mask.closure,
                                       state[k + 1].mask.closure);
      state[k + 1].utilde = conv_translate(bank, up, state[k + 1].mask.closure);
    }
  }
  return state;
}

MultilevelField conv_field(const std::vector<ConvLevelState>& state) {
  MultilevelField u;
  for (const auto& s : state) {
    u.values.push_back(masked(s.v.front(), s.mask.active));
    u.masks.push_back(s.mask);
  }
  return u;
}

std::vector<TriangleMask> conv_leaf_masks(const StencilBank& bank, const LevelMasks& masks) {
  if (static_cast<int>(masks.size()) != bank.levels) throw ShapeError("mask depth mismatch");
  const int L = bank.levels - 1;
  std::vector<Stack> touched(bank.levels), present(bank.levels);
  touched[L] = zeros(2, masks[L].active.size());
  for (int k = L - 1; k >= 0; --k) {
    const Stack nodes = conv_apply(bank.fine_nodes, single(to_image(masks[k + 1].active)), &bank.owner_masks[k]);
    const Stack kids = conv_apply(bank.triangle_sum, touched[k + 1], &bank.owner_masks[k]);
    touched[k] = heaviside(add(nodes, kids));
  }
  std::vector<TriangleMask> leaf(bank.levels);
  present[0] = {to_image(bank.owner_masks[0]), to_image(bank.owner_masks[0])};
  for (int k = 0; k <= L; ++k) {
    Stack keep = present[k];
    for (int q = 0; q < 2; ++q)
      for (std::size_t i = 0; i < keep[q].data().size(); ++i) keep[q].data()[i] *= 1.0 - touched[k][q].data()[i];
    leaf[k] = to_tri(keep);
    if (k < L) present[k + 1] = heaviside(conv_apply(bank.child_spread, hadamard(present[k], touched[k])));
  }
  return leaf;
}

EstimatorField conv_estimator(const StencilBank& bank, const MultilevelField& u, const Image& f_fine,
                              const Image& kappa_fine) {
  const int L = bank.levels - 1;
  if (static_cast<int>(u.values.size()) != bank.levels) throw ShapeError("field depth mismatch");
  const Mask& owner = bank.owner_masks[L];
  require_same_size(f_fine.size(), owner.size(), "estimator load");
  require_same_size(kappa_fine.size(), owner.size(), "estimator coefficient");

  // Finest nodal values through the prolongation chain.
  Image flat = u.values[0];
  for (int k = 1; k <= L; ++k)
    flat = conv_apply(bank.prolongation, single(flat)).front() + u.values[k];

  const Stack gu = conv_apply(bank.gradient, single(flat));
  const Stack gk = conv_apply(bank.gradient, single(kappa_fine));
  const Stack prod = hadamard(gu, gk);
  const Stack fs = conv_apply(bank.vertex_sum, single(f_fine));
  const Stack fsq = conv_apply(bank.vertex_sum, hadamard(single(f_fine), single(f_fine)));

  const double h = bank.finest_h, area = bank.finest_area;
  Stack r2 = zeros(2, owner.size());
  for (int q = 0; q < 2; ++q) {
    const Image div = prod[2 * q] + prod[2 * q + 1];
    const Stack d{div}, s{fs[q]};
    const Image dd = hadamard(d, d).front(), ds = hadamard(d, s).front(), ss = hadamard(s, s).front();
    Image acc(owner.size());
    axpy(h * h * area / 12.0, ss, acc);
    axpy(h * h * area / 12.0, fsq[q], acc);
    axpy(h * h * 2.0 * area / 3.0, ds, acc);
    axpy(h * h * area, dd, acc);
    r2[q] = masked(acc, owner);
  }

  const Stack jump = conv_apply(bank.edge_jump, gu);
  const Stack ends = conv_apply(bank.edge_ends, single(kappa_fine));
  Stack weighted;
  for (int ch = 0; ch < 6; ++ch) {
    const Stack a{ends[2 * ch]}, b{ends[2 * ch + 1]}, j{jump[ch]};
    const Image kap = hadamard(a, a).front() + hadamard(a, b).front() + hadamard(b, b).front();
    weighted.push_back(hadamard(hadamard(hadamard(j, j), Stack{kap}), Stack{bank.edge_masks[ch]}).front());
  }
  const Stack j2 = conv_apply(bank.jump_weights, weighted, &owner);

  std::vector<Stack> r2s(bank.levels), j2s(bank.levels);
  r2s[L] = r2;
  j2s[L] = j2;
  for (int k = L - 1; k >= 0; --k) {
    const Stack both = conv_apply(bank.estimator_sum, Stack{r2s[k + 1][0], r2s[k + 1][1], j2s[k + 1][0], j2s[k + 1][1]},
                                  &bank.owner_masks[k]);
    r2s[k] = {both[0], both[1]};
    j2s[k] = {both[2], both[3]};
  }
  return masked_estimator(std::move(r2s), std::move(j2s), conv_leaf_masks(bank, u.masks));
}

ConvRefinement conv_mark_refine(const StencilBank& bank, const EstimatorField& est, const std::vector<double>& delta,
                                const LevelMasks& masks) {
  if (static_cast<int>(delta.size()) != bank.levels || static_cast<int>(est.eta2.size()) != bank.levels ||
      static_cast<int>(masks.size()) != bank.levels)
    throw ShapeError("level count mismatch");
  for (double d : delta)
    if (!(d > 0.0)) throw ConfigError("marking thresholds must be positive");
  const int L = bank.levels - 1;
  ConvRefinement out;
  std::vector<Image> grow(bank.levels);
  for (int k = 0; k <= L; ++k) grow[k] = to_image(masks[k].active);
  for (int k = 0; k <= L; ++k) {
    ConvKernel shift = ConvKernel::centered(2, 2, 1, ConvMode::plain);
    shift.at(0, 0, 0, 0) = shift.at(1, 1, 0, 0) = 1.0;
    shift.bias = {-delta[k], -delta[k]};
    const Stack marks = hadamard(heaviside(conv_apply(shift, est.eta2[k])), to_stack(est.tri_mask[k]));
    out.marks.push_back(to_tri(marks));
    if (k < L) axpy(1.0, conv_apply(bank.refinement, marks).front(), grow[k + 1]);
  }
  for (int k = 0; k <= L; ++k) {
    const Mask active = to_mask(masked(heaviside(single(grow[k])).front(), bank.interior_masks[k]));
    const Mask closure = to_mask(heaviside(conv_apply(bank.closure, single(to_image(active)))).front());
    out.masks.push_back({active, closure});
  }
  return out;
}

ParameterCount parameter_count(const StencilBank& bank, const PipelineLayout& layout) {
  if (layout.levels < 1 || layout.levels > bank.levels) throw ConfigError("pipeline depth outside the bank");
  if (layout.sweeps < 0) throw ConfigError("sweep count must be non-negative");
  const auto levels = static_cast<std::size_t>(layout.levels);
  const auto m = static_cast<std::size_t>(layout.sweeps);
  std::size_t op = 0;
  for (const auto& k : bank.operators[0]) op += k.parameter_count();

  ParameterCount pc;
  // One triangle-integral layer, a children sum per coarser level and a gather per level.
  pc.per_module["coefficient"] = bank.triangle_integral.parameter_count() +
                                 (levels - 1) * bank.triangle_sum.parameter_count() +
                                 levels * bank.upsilon_gather.parameter_count();
  // Per sweep and level: two smoothing visits, each an operator and a retranslation, plus
  // a transpose, a restriction and a prolongation with their retranslations.
  const std::size_t visit = op + bank.translation.parameter_count();
  const std::size_t per_level = 2 * visit + op + bank.restriction.parameter_count() +
                                bank.prolongation.parameter_count() + 3 * bank.translation.parameter_count();
  pc.per_module["llmg"] = m * levels * per_level;
  pc.per_module["estimator"] = (levels - 1) * bank.prolongation.parameter_count() + 2 * bank.gradient.parameter_count() +
                               2 * bank.vertex_sum.parameter_count() + bank.edge_jump.parameter_count() +
                               bank.edge_ends.parameter_count() + bank.jump_weights.parameter_count() +
                               (levels - 1) * bank.estimator_sum.parameter_count();
  // Leaf masks, the shifted Heaviside (2 x 2 weights + 2 biases), refinement and closure.
  pc.per_module["mark_refine"] =
      (levels - 1) * (bank.fine_nodes.parameter_count() + bank.triangle_sum.parameter_count() +
                      bank.child_spread.parameter_count() + bank.refinement.parameter_count()) +
      levels * (6 + bank.closure.parameter_count());
  for (const auto& [name, c] : pc.per_module) pc.total += c;
  return pc;
}

}  // namespace mlafem
