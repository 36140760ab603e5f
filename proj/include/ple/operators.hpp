#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include <Eigen/Dense>

#include "ple/image.hpp"

namespace ple {

/// Odd-sided, normalized (sum 1) correlation kernel.
class Kernel {
 public:
  Kernel() : side_(1), weights_{1.0} {}
  /// Normalizes `weights` to sum 1; the side must be odd.
  Kernel(int side, std::vector<double> weights);

  /// Gaussian of standard deviation `std_dev` truncated to side×side and
  /// renormalized. std_dev == 0 gives the delta kernel.
  static Kernel gaussian(double std_dev, int side);
  static Kernel box(int side);
  /// Plain text: the side, then side*side row-major reals.
  static Kernel read_text(const std::filesystem::path& path);

  int side() const noexcept { return side_; }
  int radius() const noexcept { return side_ / 2; }
  double at(int i, int j) const noexcept { return weights_[i * side_ + j]; }
  const std::vector<double>& weights() const noexcept { return weights_; }

 private:
  int side_;
  std::vector<double> weights_;
};

enum class OperatorKind { Identity, Mask, UniformSubsample, Convolution, MaskedConvolution };

/// Whole-image degradation operator U acting on a fixed width×height grid.
/// Immutable after construction.
class DegradationOperator {
 public:
  static DegradationOperator identity(int width, int height);
  /// `observed` holds one 0/1 entry per pixel, row-major.
  static DegradationOperator mask(int width, int height, std::vector<std::uint8_t> observed);
  /// i.i.d. Bernoulli(keep_ratio) per pixel.
  static DegradationOperator random_mask(int width, int height, double keep_ratio, std::uint64_t seed);
  /// Reads a P5 mask where 255 = observed and 0 = missing.
  static DegradationOperator mask_from_file(const std::filesystem::path& path);
  /// Keeps pixels whose row and column are multiples of `factor`.
  static DegradationOperator subsample(int width, int height, int factor);
  static DegradationOperator convolution(int width, int height, Kernel kernel);
  /// Convolution whose patch restrictions act on an extended support of
  /// margin `margin` followed by masking back to the inner patch.
  static DegradationOperator masked_convolution(int width, int height, Kernel kernel, int margin);

  DegradationOperator with_noise(double sigma) const;

  OperatorKind kind() const noexcept { return kind_; }
  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  int factor() const noexcept { return factor_; }
  int margin() const noexcept { return margin_; }
  double noise_sigma() const noexcept { return noise_sigma_; }
  const Kernel& kernel() const noexcept { return kernel_; }

  /// True when pixel (row, col) survives the operator (always true for
  /// identity and convolutions).
  bool observed(int row, int col) const;
  /// 0/1 bitmap of observed pixels as a one-channel image.
  Image observation_mask() const;

 private:
  OperatorKind kind_ = OperatorKind::Identity;
  int width_ = 0;
  int height_ = 0;
  int factor_ = 1;
  int margin_ = 0;
  double noise_sigma_ = 0.0;
  Kernel kernel_;
  std::vector<std::uint8_t> mask_;
};

/// Half-sample symmetric reflection of an index into [0, n).
int mirror_index(int i, int n);

/// U f without noise. Convolutions use spatial correlation with mirror
/// boundary extension; masks and subsampling zero the unobserved pixels.
Image apply(const DegradationOperator& op, const Image& img);

/// U f + w with w ~ N(0, σ²) on observed pixels only; deterministic in `seed`.
Image degrade(const DegradationOperator& op, const Image& img, std::uint64_t seed);

/// Pixels at multiples of `factor` (the low-resolution image).
Image decimate(const Image& img, int factor);
/// Places low-res samples on a `factor`-times finer grid of the given size,
/// zeros elsewhere.
Image embed_on_grid(const Image& low_res, int factor, int width, int height);

/// Restriction U_i of an operator to one patch, as a matrix acting on the
/// patch (or, for MaskedConvolution, the extended patch) vectorized
/// channel-major.
class PatchOperatorMatrix {
 public:
  static PatchOperatorMatrix from_diagonal(Eigen::VectorXd diagonal, bool translation_invariant,
                                           std::uint64_t signature);
  static PatchOperatorMatrix from_dense(Eigen::MatrixXd matrix, bool translation_invariant,
                                        std::uint64_t signature);

  int rows() const noexcept { return rows_; }
  int cols() const noexcept { return cols_; }
  bool is_diagonal() const noexcept { return diagonal_; }
  const Eigen::VectorXd& diagonal() const noexcept { return diag_; }
  bool translation_invariant() const noexcept { return translation_invariant_; }
  /// Identifies matrices that are equal across patches; 0 when not shareable.
  std::uint64_t signature() const noexcept { return signature_; }
  /// Indices of rows with at least one nonzero entry.
  const std::vector<int>& active_rows() const noexcept { return active_rows_; }

  Eigen::MatrixXd dense() const;
  /// The active rows only (|active| × cols). Dense operators only; empty
  /// for diagonal ones, which are stored as their diagonal.
  const Eigen::MatrixXd& active_block() const noexcept { return active_block_; }
  /// Active rows for either storage.
  Eigen::MatrixXd active_matrix() const;

  Eigen::VectorXd apply(const Eigen::Ref<const Eigen::VectorXd>& x) const;
  Eigen::VectorXd adjoint_apply(const Eigen::Ref<const Eigen::VectorXd>& v) const;

  /// `copies` copies on the block diagonal (color patches, channel-major).
  PatchOperatorMatrix block_diagonal(int copies) const;

 private:
  PatchOperatorMatrix() = default;
  void finalize();

  int rows_ = 0;
  int cols_ = 0;
  bool diagonal_ = false;
  Eigen::VectorXd diag_;
  Eigen::MatrixXd dense_;
  Eigen::MatrixXd active_block_;
  std::vector<int> active_rows_;
  bool translation_invariant_ = false;
  std::uint64_t signature_ = 0;
};

/// Restriction of `op` to the side×side patch at (row, col). For
/// MaskedConvolution the input support is the extended patch at
/// (row − margin, col − margin) of side side + 2·margin, which must lie
/// inside the operator grid.
PatchOperatorMatrix restrict_to_patch(const DegradationOperator& op, int row, int col, int side);

Eigen::VectorXd adjoint_apply(const PatchOperatorMatrix& matrix, const Eigen::VectorXd& v);

}  // namespace ple
