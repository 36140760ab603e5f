#pragma once

#include <vector>

#include <Eigen/Dense>

#include "ple/gaussian_model.hpp"
#include "ple/image.hpp"

namespace ple {

struct SyntheticEdgeSpec {
  double angle = 0.0;  // [0, π)
  int side = 64;
  double blur = 0.0;  // Gaussian std applied after rasterizing, 0 = sharp
  double offset = 0.0;  // signed distance of the edge line from the centre
};

/// Signed distance of pixel (row, col) to the edge line through the centre
/// of a side×side grid, with x = col − c0 and y = c0 − row:
/// −x·sin θ + y·cos θ. Negative side is white (255).
double edge_functional(double angle, int side, double row, double col);

/// 0/255 half-plane image; θ = 0 puts 255 on the bottom half, θ = π/2 on
/// the right half. Pixels with functional < offset are white.
Image synthetic_edge_image(const SyntheticEdgeSpec& spec);

/// Eigenvalues of the θ = 0 edge PCA plus `epsilon`, shared by every
/// initial model of this patch side. `edge_blur` is the Gaussian std
/// applied to the synthetic edge (0 = sharp).
Eigen::VectorXd shared_eigenvalues(int patch_side, double epsilon, int synthetic_side = 64,
                                   double edge_blur = 0.0);

/// PCA of edge-crossing patches at angle θ, first atom replaced by DC and
/// the rest Gram-Schmidt orthogonalized. Zero mean, shared eigenvalues.
GaussianModel directional_basis(double angle, int patch_side, double epsilon = 30.0,
                                int synthetic_side = 64, double edge_blur = 0.0);

/// P models for angle θ, model p trained on patches whose centre lies in
/// the p-th bin of signed distance to the edge, over several blur levels
/// and sub-pixel edge offsets.
std::vector<GaussianModel> position_bases(double angle, int patch_side, int positions,
                                          const std::vector<double>& blur_levels,
                                          double epsilon = 30.0, int synthetic_side = 64,
                                          double edge_blur = 0.0);

/// Orthonormal 2-D DCT-II atoms in zigzag order.
Eigen::MatrixXd dct_basis(int patch_side);
GaussianModel dct_model(int patch_side, double epsilon = 30.0, int synthetic_side = 64,
                        double edge_blur = 0.0);

enum class InitMode {
  Directional,      // directions + DCT, plus position families when hierarchical
  DirectionalOnly,  // directions + DCT without position families
};

struct InitConfig {
  int num_models = 19;  // K − 1 directions + DCT
  int patch_side = 8;   // model support side (the extended side for deblurring)
  int positions = 12;
  bool hierarchical = false;
  double epsilon = 30.0;
  std::vector<double> blur_levels{0.5, 1.0, 1.5, 2.0};
  int synthetic_side = 64;
  // blur of the edges behind the directional bases and the shared profile
  double edge_blur = 1.0;
};

/// K − 1 directional models at angles j·π/(K − 1), then the DCT model.
/// Hierarchical sets add `positions` position models per direction.
ModelSet init_models(const InitConfig& config, InitMode mode = InitMode::Directional);

/// Basis atoms tiled into one grid image, each atom rescaled to [0, 255].
Image atom_grid(const GaussianModel& model, int patch_side, int max_atoms = 64);

}  // namespace ple
