#pragma once

#include <array>
#include <map>
#include <string>
#include <vector>

#include "mlafem/adapt.hpp"
#include "mlafem/assembly.hpp"
#include "mlafem/estimator.hpp"
#include "mlafem/solver.hpp"

namespace mlafem {

enum class ConvMode { plain, strided2, transpose_strided2, submanifold };

// Weights are stored [out][in][row][col]. Tap (a, b) reads the input at
// offset (a, b) - origin from the output position (plain, submanifold),
// from twice the output position (strided2), or scatters to twice the input
// position plus that offset (transpose_strided2).
struct ConvKernel {
  int out_channels = 0;
  int in_channels = 0;
  int height = 0;
  int width = 0;
  std::vector<double> weights;
  std::vector<double> bias;  // empty or one per output channel
  ConvMode mode = ConvMode::plain;
  Index2 origin{0, 0};

  ConvKernel() = default;
  ConvKernel(int out, int in, int h, int w, ConvMode m, Index2 org);
  // Centered 3 x 3 (or 1 x 1) kernel.
  static ConvKernel centered(int out, int in, int size, ConvMode m);

  double& at(int o, int c, int a, int b);
  double at(int o, int c, int a, int b) const;
  // Weight for input offset d relative to the anchor.
  double& tap(int o, int c, Index2 d) { return at(o, c, d.i1 + origin.i1, d.i2 + origin.i2); }
  std::size_t parameter_count() const { return weights.size() + bias.size(); }
};

// Adjoint kernel: strided2 <-> transpose_strided2, plain and submanifold flip offsets.
ConvKernel adjoint(const ConvKernel& k);

// Applies the kernel with zero padding. Submanifold mode needs a mask of the
// output size; other modes multiply the output by the mask when one is given.
Stack conv_apply(const ConvKernel& kernel, const Stack& input, const Mask* mask = nullptr);

// Elementwise helpers used between layers.
Stack heaviside(const Stack& x);  // 1 where x > 0
Stack hadamard(const Stack& a, const Stack& b);
Stack mask_channels(const Stack& x, const Mask& m);

struct StencilBank {
  int levels = 0;
  ConvKernel translation;                            // 7x1x3x3, hat overlap shifts
  std::vector<std::array<ConvKernel, 6>> operators;  // per level, 1x7x1x1 each
  ConvKernel prolongation;                           // 1x1x3x3 transpose stride 2
  ConvKernel restriction;                            // 1x1x3x3 stride 2
  ConvKernel closure;                                // 1x1x3x3 support growth
  ConvKernel upsilon_fine;                           // 6x1x3x3 nodal kappa -> finest Upsilon
  ConvKernel triangle_integral;                      // 2x1x3x3 nodal kappa -> finest triangle integrals
  ConvKernel triangle_sum;                           // 2x2x3x3 stride 2, children sum
  ConvKernel upsilon_gather;                         // 6x2x3x3 triangle integrals -> Upsilon
  ConvKernel gradient;                               // 4x1x3x3, finest P1 gradient per half
  ConvKernel vertex_sum;                             // 2x1x3x3
  ConvKernel edge_jump;                              // 6x4x3x3 normal gradient jumps
  ConvKernel edge_ends;                              // 12x1x3x3 edge endpoint values
  ConvKernel jump_weights;                           // 2x6x1x1 h |e| / 3
  ConvKernel estimator_sum;                          // 4x4x3x3 stride 2, weights 4 (r2) and 2 (j2)
  ConvKernel fine_nodes;                             // 2x1x3x3 stride 2, fine nodes inside a triangle
  ConvKernel child_spread;                           // 2x2x3x3 transpose stride 2
  ConvKernel refinement;                             // 1x2x3x3 transpose stride 2
  double finest_h = 0.0;
  double finest_area = 0.0;
  std::vector<Mask> owner_masks;                     // per level, nodes that own triangles
  std::vector<Stack> patch_masks;                    // per level, 6 channels, patch triangle exists
  std::vector<Mask> interior_masks;
  Stack edge_masks;                                  // finest, 6 channels, interior edges
};

StencilBank build_stencil_bank(const GridHierarchy& grid);

// Translation stack written at the nodes of `where`.
Stack conv_translate(const StencilBank& bank, const Image& v, const Mask& where);

// Level operator from the translation stack of v; written at active nodes.
Image conv_apply_A(const StencilBank& bank, int k, const Stack& stack, const Stack& upsilon, const LevelMask& mask);
// Transpose from the translation stack (over the closure) of w restricted to the active set; written on the closure.
Image conv_apply_A_transpose(const StencilBank& bank, int k, const Stack& stack, const Stack& upsilon,
                             const LevelMask& mask);
Image conv_prolongate(const StencilBank& bank, const Image& coarse, const Mask& coarse_closure, const Mask& fine_closure);
Image conv_restrict(const StencilBank& bank, const Image& fine, const Mask& fine_closure, const Mask& coarse_closure);

// Upsilon channels of every level from the nodal finest coefficient.
std::vector<Stack> conv_upsilon(const StencilBank& bank, const Image& kappa_fine);

// Named channel groups of one level; 7-channel groups are translation stacks over the closure.
struct ConvLevelState {
  Stack v, utilde, ubar, z;
  Stack upsilon;
  Stack f;
  LevelMask mask;
  double omega = 0.0;
};

std::vector<ConvLevelState> conv_state(const StencilBank& bank, const GridHierarchy& grid, const MultilevelField& u,
                                       const RhsField& f, const DiffusionField& diffusion,
                                       const SmootherConfig& smoother);
std::vector<ConvLevelState> conv_llmg_sweep(const StencilBank& bank, std::vector<ConvLevelState> state);
// Channel 0 of every v group.
MultilevelField conv_field(const std::vector<ConvLevelState>& state);

EstimatorField conv_estimator(const StencilBank& bank, const MultilevelField& u, const Image& f_fine,
                              const Image& kappa_fine);
std::vector<TriangleMask> conv_leaf_masks(const StencilBank& bank, const LevelMasks& masks);

struct ConvRefinement {
  MarkSet marks;
  LevelMasks masks;
};

// Threshold marking by a shifted Heaviside and refinement by transpose convolution.
ConvRefinement conv_mark_refine(const StencilBank& bank, const EstimatorField& est, const std::vector<double>& delta,
                                const LevelMasks& masks);

struct PipelineLayout {
  int levels = 0;
  int sweeps = 0;
};

struct ParameterCount {
  std::map<std::string, std::size_t> per_module;
  std::size_t total = 0;
};

// Weights and biases of one unrolled AFEM step: coefficient integration,
// `sweeps` LLMG sweeps, estimator, marking and refinement.
ParameterCount parameter_count(const StencilBank& bank, const PipelineLayout& layout);

}  // namespace mlafem
