#pragma once

#include <filesystem>
#include <vector>

#include <Eigen/Dense>

namespace ple {

enum class ModelKind : int { Directional = 0, Dct = 1, Position = 2 };

struct ModelMeta {
  ModelKind kind = ModelKind::Dct;
  double angle = 0.0;  // radians, directional and position models
  int position = -1;   // position index, position models only
};

/// Gaussian N(mean, covariance) with its cached PCA factorization
/// covariance = basis · diag(eigenvalues) · basisᵀ, eigenvalues sorted
/// non-increasing.
class GaussianModel {
 public:
  GaussianModel() = default;

  /// Builds from an orthonormal basis and matching eigenvalues; the
  /// covariance is reconstructed from them. Eigenvalues are re-sorted.
  static GaussianModel from_basis(Eigen::VectorXd mean, const Eigen::MatrixXd& basis,
                                  const Eigen::VectorXd& eigenvalues, ModelMeta meta);

  /// Eigen-decomposes a symmetric covariance; eigenvalues below `floor`
  /// are raised to it.
  static GaussianModel from_covariance(Eigen::VectorXd mean, const Eigen::MatrixXd& covariance,
                                       double floor, ModelMeta meta);

  int dim() const noexcept { return static_cast<int>(mean_.size()); }
  const Eigen::VectorXd& mean() const noexcept { return mean_; }
  const Eigen::MatrixXd& covariance() const noexcept { return covariance_; }
  const Eigen::MatrixXd& basis() const noexcept { return basis_; }
  const Eigen::VectorXd& eigenvalues() const noexcept { return eigenvalues_; }
  double log_det() const noexcept { return log_det_; }
  const ModelMeta& meta() const noexcept { return meta_; }

  /// ‖B Bᵀ − Id‖_max
  double orthonormality_error() const;
  /// ‖Σ − B diag(λ) Bᵀ‖_max
  double reconstruction_error() const;

  /// Block-diagonal lift to `channels` stacked copies (channel-major).
  GaussianModel lifted(int channels) const;

  friend bool operator==(const GaussianModel& a, const GaussianModel& b);

 private:
  Eigen::VectorXd mean_;
  Eigen::MatrixXd covariance_;
  Eigen::MatrixXd basis_;
  Eigen::VectorXd eigenvalues_;
  double log_det_ = 0.0;
  ModelMeta meta_;
};

/// First-layer models plus, for hierarchical (deblurring) sets, one family
/// of position models per first-layer model. A family may be empty (the
/// DCT model has none).
struct ModelSet {
  std::vector<GaussianModel> models;
  std::vector<std::vector<GaussianModel>> positions;

  bool hierarchical() const noexcept { return !positions.empty(); }
  std::size_t position_count() const noexcept;
};

/// Binary sidecar: magic "PLEMSET1", then little-endian 64-bit integers and
/// IEEE doubles (dimensions, metadata, means, eigenvalues, bases).
void write_model_set(const ModelSet& set, const std::filesystem::path& path);
ModelSet read_model_set(const std::filesystem::path& path);

}  // namespace ple
