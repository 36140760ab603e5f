#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>

#include "ple/gaussian_model.hpp"
#include "ple/operators.hpp"

namespace ple {

/// W = (UᵀU + σ²Σ⁻¹)⁻¹Uᵀ, shape cols × rows of U. Evaluated through the
/// equivalent SPD system (U_a Σ U_aᵀ + σ²Id) on the active rows U_a of U, or
/// through Σ^½UᵀUΣ^½ + σ²Id when U has more active rows than columns.
/// Σ⁻¹ is never formed.
Eigen::MatrixXd wiener_matrix(const PatchOperatorMatrix& op, const GaussianModel& model, double sigma);

/// Precomputed gain for one (operator, model) pair:
/// f̃ = μ + G (y_a − U_a μ), y_a the observation on U's active rows.
class WienerFilter {
 public:
  static WienerFilter build(const PatchOperatorMatrix& op, const GaussianModel& model, double sigma);
  Eigen::VectorXd apply(const Eigen::Ref<const Eigen::VectorXd>& y) const;
  const Eigen::MatrixXd& gain() const noexcept { return gain_; }

 private:
  Eigen::MatrixXd gain_;
  Eigen::VectorXd mean_;
  Eigen::VectorXd predicted_;
  std::vector<int> rows_;
};

struct PatchEstimate {
  Eigen::VectorXd estimate;
  double energy = 0.0;
};

/// ‖U f − y‖² + σ²·Σ_m ⟨b_m, f − μ⟩²/λ_m + σ²·log|Σ|
double selection_energy(const Eigen::VectorXd& y, const PatchOperatorMatrix& op,
                        const GaussianModel& model, double sigma, const Eigen::VectorXd& estimate);

/// MAP estimate under one Gaussian model and its selection energy.
/// `filter`, when given, must have been built for this (op, model, sigma).
PatchEstimate estimate_patch(const Eigen::VectorXd& y, const PatchOperatorMatrix& op,
                             const GaussianModel& model, double sigma,
                             const WienerFilter* filter = nullptr);

/// Same estimate computed in the model's PCA coordinates: a weighted ridge
/// regression on (U B) with weights σ²/λ_m, mapped back through B.
Eigen::VectorXd estimate_patch_pca(const Eigen::VectorXd& y, const PatchOperatorMatrix& op,
                                   const GaussianModel& model, double sigma);

struct Selection {
  int model = 0;
  Eigen::VectorXd estimate;
  double energy = 0.0;
  int evaluations = 0;
};

/// Lowest-energy model; ties go to the lowest index. `filters`, when not
/// empty, holds one (possibly null) precomputed filter per model.
Selection select_model(const Eigen::VectorXd& y, const PatchOperatorMatrix& op,
                       std::span<const GaussianModel> models, double sigma,
                       std::span<const WienerFilter* const> filters = {});

struct HierarchicalSelection {
  int direction = 0;
  int position = -1;  // -1 when the winning direction has no position family
  Eigen::VectorXd estimate;
  double energy = 0.0;
  double layer1_energy = 0.0;
  int evaluations = 0;
};

/// Direction first, then position among the winning direction's family.
HierarchicalSelection hierarchical_select(const Eigen::VectorXd& y, const PatchOperatorMatrix& op,
                                          std::span<const GaussianModel> directional,
                                          std::span<const std::vector<GaussianModel>> positions,
                                          double sigma,
                                          std::span<const WienerFilter* const> directional_filters = {},
                                          std::span<const std::vector<const WienerFilter*>> position_filters = {});

}  // namespace ple
