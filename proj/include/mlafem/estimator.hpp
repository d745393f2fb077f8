#pragma once

#include <array>
#include <utility>
#include <vector>

#include "mlafem/assembly.hpp"

namespace mlafem {

// Per level, one mask per half (channel q), indexed by owner node.
using TriangleMask = std::array<Mask, 2>;

struct EstimatorField {
  std::vector<Stack> r2;    // strong residual part, 2 channels per level
  std::vector<Stack> j2;    // jump part
  std::vector<Stack> eta2;  // r2 + j2
  std::vector<TriangleMask> tri_mask;
};

// Per-triangle images on the finest level for the P1 function u_flat.
std::pair<Stack, Stack> finest_estimator_images(const GridHierarchy& grid, const Image& u_flat, const Image& f_fine,
                                                const Image& kappa_fine);

// Images on level k from those on level k + 1.
std::pair<Stack, Stack> aggregate_to_level(const GridHierarchy& grid, const Stack& fine_r2, const Stack& fine_j2, int k);

// Leaf triangles of the composite mesh described by the active sets.
std::vector<TriangleMask> leaf_triangle_masks(const GridHierarchy& grid, const LevelMasks& masks);

// Masks unmasked per-level images with the leaf triangle masks.
EstimatorField masked_estimator(std::vector<Stack> r2, std::vector<Stack> j2, std::vector<TriangleMask> tri_mask);

EstimatorField estimate(const GridHierarchy& grid, const MultilevelField& u, const Image& f_fine,
                        const DiffusionField& diffusion);

double total_eta2(const EstimatorField& est);
double max_eta2(const EstimatorField& est);

struct ReliabilityReport {
  double c_rel = 0.0;  // ||u_ref - u_h||_A^2 / sum eta^2
  double c_eff = 0.0;  // max eta_T / ||u_ref - u_h||_A
  bool degenerate = false;
};

ReliabilityReport reliability_efficiency(double energy_error, const EstimatorField& est);

}  // namespace mlafem
