#pragma once

#include <vector>

#include "mlafem/lattice.hpp"
#include "mlafem/mesh.hpp"

namespace mlafem {

struct LevelMask {
  Mask active;   // DOFs of the level, never on the boundary
  Mask closure;  // active plus every node whose hat overlaps an active hat
};

using LevelMasks = std::vector<LevelMask>;

Mask closure_of(const Mask& active);
LevelMask make_level_mask(Mask active);
LevelMask full_level_mask(const GridHierarchy& grid, int k);
LevelMask empty_level_mask(const GridHierarchy& grid, int k);

// Level 0 full, finer levels empty: the initial AFEM space.
LevelMasks initial_masks(const GridHierarchy& grid);
// Only level k full.
LevelMasks single_level_masks(const GridHierarchy& grid, int k);
void check_masks(const GridHierarchy& grid, const LevelMasks& masks);
std::size_t dof_count(const LevelMasks& masks);

// v = sum over levels of sum_i v^k_i phi^k_i.
struct MultilevelField {
  std::vector<Image> values;
  LevelMasks masks;
};

MultilevelField zero_field(const GridHierarchy& grid, LevelMasks masks);
void check_field(const GridHierarchy& grid, const MultilevelField& u);

// Channel t holds image(i + p_t) at active i, zero elsewhere.
Stack translate(const Image& image, const LevelMask& mask);

// Nodal interpolation of a level-k function on level k+1. The input is
// restricted to coarse_closure and the output to fine_closure.
Image prolongate(const Image& coarse, const Mask& coarse_closure, const Mask& fine_closure);
Image restrict_weighted(const Image& fine, const Mask& fine_closure, const Mask& coarse_closure);

// Unmasked variants.
Image prolongate_uniform(const Image& coarse);
Image restrict_uniform(const Image& fine);

std::vector<double> evaluate_field(const GridHierarchy& grid, const MultilevelField& u, const std::vector<Point>& points);
Image flatten_to_finest(const GridHierarchy& grid, const MultilevelField& u);

}  // namespace mlafem
