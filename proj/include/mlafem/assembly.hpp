#pragma once

#include <array>
#include <vector>

#include <Eigen/Sparse>

#include "mlafem/field.hpp"

namespace mlafem {

using SparseMatrix = Eigen::SparseMatrix<double>;

struct DiffusionField {
  Image kappa_fine;                        // nodal kappa_h on the finest level
  std::vector<Stack> triangle_integrals;   // per level, [q](owner) = int_T kappa_h
  std::vector<Stack> upsilon;              // per level, [l](i) = int over T_i^l of kappa_h
};

DiffusionField compute_upsilon(const GridHierarchy& grid, Image kappa_fine);

// Gradients of the barycentric coordinates of a triangle in lattice units.
std::array<std::array<double, 2>, 3> barycentric_gradients(Half half);

// [l][t] = integral over T^l of grad phi_0 . grad phi_{p_t} for a unit lattice.
using StiffnessTable = std::array<std::array<double, 7>, 6>;
const StiffnessTable& reference_stiffness();

// Level-k operator on the closure, output on the active set.
Image apply_A_level(const GridHierarchy& grid, int k, const Image& v, const DiffusionField& diffusion,
                    const LevelMask& mask);
// Adjoint: input on the active set, output on the closure.
Image apply_A_level_transpose(const GridHierarchy& grid, int k, const Image& w, const DiffusionField& diffusion,
                              const LevelMask& mask);

std::vector<Image> compute_utilde(const GridHierarchy& grid, const MultilevelField& u);
std::vector<Image> compute_ubar(const GridHierarchy& grid, const MultilevelField& u, const DiffusionField& diffusion);

// Q_k A u for every level, via the levelwise identity.
std::vector<Image> apply_global(const GridHierarchy& grid, const MultilevelField& u, const DiffusionField& diffusion);

using RhsField = std::vector<Image>;
RhsField assemble_rhs(const GridHierarchy& grid, const Image& f_fine);

struct DofId {
  int level = 0;
  Index2 node;
};

struct GlobalSystem {
  std::vector<DofId> dofs;
  SparseMatrix matrix;          // a(phi_i, phi_j) over all DOFs of all levels
  SparseMatrix basis;           // finest nodal values of each DOF's hat
  SparseMatrix fine_stiffness;  // finest-level stiffness over every lattice node
};

GlobalSystem assemble_global(const GridHierarchy& grid, const LevelMasks& masks, const DiffusionField& diffusion);

Eigen::VectorXd gather(const GlobalSystem& sys, const std::vector<Image>& per_level);
std::vector<Image> scatter(const GridHierarchy& grid, const GlobalSystem& sys, const Eigen::VectorXd& x);

// Element-loop matrices on an n x n lattice over every node, boundary included.
SparseMatrix stiffness_matrix(int n, const Image& kappa);
SparseMatrix mass_matrix(int n);
Eigen::VectorXd flat(const Image& image);
Image unflat(int n, const Eigen::VectorXd& x);

}  // namespace mlafem
