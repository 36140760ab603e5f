#include "ple/operators.hpp"

#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <string>

#include "ple/errors.hpp"

namespace ple {

namespace {

class Fnv1a {
 public:
  template <typename T>
  Fnv1a& add(const T& value) {
    const auto* bytes = reinterpret_cast<const unsigned char*>(&value);
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      hash_ ^= bytes[i];
      hash_ *= 0x100000001b3ULL;
    }
    return *this;
  }
  std::uint64_t value() const { return hash_ == 0 ? 1 : hash_; }

 private:
  std::uint64_t hash_ = 0xcbf29ce484222325ULL;
};

}  // namespace

Kernel::Kernel(int side, std::vector<double> weights) : side_(side), weights_(std::move(weights)) {
  if (side < 1 || side % 2 == 0) throw InvalidArgument("kernel side must be odd and positive");
  if (weights_.size() != static_cast<std::size_t>(side) * side)
    throw DimensionMismatch("kernel needs side*side weights");
  const double total = std::accumulate(weights_.begin(), weights_.end(), 0.0);
  if (std::abs(total) < 1e-12) throw InvalidArgument("kernel weights sum to zero");
  for (double& w : weights_) w /= total;
}

Kernel Kernel::gaussian(double std_dev, int side) {
  if (std_dev < 0) throw InvalidArgument("negative kernel std");
  const int rho = side / 2;
  std::vector<double> w(static_cast<std::size_t>(side) * side, 0.0);
  if (std_dev == 0.0) {
    w[rho * side + rho] = 1.0;
  } else {
    for (int i = 0; i < side; ++i)
      for (int j = 0; j < side; ++j) {
        const double d2 = (i - rho) * (i - rho) + (j - rho) * (j - rho);
        w[i * side + j] = std::exp(-d2 / (2.0 * std_dev * std_dev));
      }
  }
  return Kernel(side, std::move(w));
}

Kernel Kernel::box(int side) {
  return Kernel(side, std::vector<double>(static_cast<std::size_t>(side) * side, 1.0));
}

Kernel Kernel::read_text(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open kernel file " + path.string());
  int side = 0;
  if (!(in >> side)) throw Error("kernel file " + path.string() + ": missing side");
  std::vector<double> w(static_cast<std::size_t>(std::max(side, 0)) * std::max(side, 0));
  for (double& v : w)
    if (!(in >> v)) throw Error("kernel file " + path.string() + ": too few weights");
  return Kernel(side, std::move(w));
}

DegradationOperator DegradationOperator::identity(int width, int height) {
  DegradationOperator op;
  op.kind_ = OperatorKind::Identity;
  op.width_ = width;
  op.height_ = height;
  return op;
}

DegradationOperator DegradationOperator::mask(int width, int height,
                                              std::vector<std::uint8_t> observed) {
  if (observed.size() != static_cast<std::size_t>(width) * height)
    throw DimensionMismatch("mask bitmap does not match image size");
  for (auto& v : observed)
    if (v > 1) throw InvalidArgument("mask entries must be 0 or 1");
  DegradationOperator op;
  op.kind_ = OperatorKind::Mask;
  op.width_ = width;
  op.height_ = height;
  op.mask_ = std::move(observed);
  return op;
}

DegradationOperator DegradationOperator::random_mask(int width, int height, double keep_ratio,
                                                     std::uint64_t seed) {
  if (keep_ratio < 0.0 || keep_ratio > 1.0) throw InvalidArgument("keep ratio must be in [0,1]");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<std::uint8_t> bits(static_cast<std::size_t>(width) * height);
  for (auto& b : bits) b = unif(rng) < keep_ratio ? 1 : 0;
  return mask(width, height, std::move(bits));
}

DegradationOperator DegradationOperator::mask_from_file(const std::filesystem::path& path) {
  const Image img = read_image(path);
  if (img.channels() != 1) throw UnsupportedFormat("mask file must be a P5 grayscale image");
  std::vector<std::uint8_t> bits(img.size());
  for (std::size_t i = 0; i < img.size(); ++i) {
    const double v = img.data()[i];
    if (v != 0.0 && v != 255.0)
      throw InvalidArgument("mask pixels must be 0 (missing) or 255 (observed)");
    bits[i] = v == 255.0 ? 1 : 0;
  }
  return mask(img.width(), img.height(), std::move(bits));
}

DegradationOperator DegradationOperator::subsample(int width, int height, int factor) {
  if (factor < 1) throw InvalidArgument("subsample factor must be >= 1");
  DegradationOperator op;
  op.kind_ = OperatorKind::UniformSubsample;
  op.width_ = width;
  op.height_ = height;
  op.factor_ = factor;
  return op;
}

DegradationOperator DegradationOperator::convolution(int width, int height, Kernel kernel) {
  if (kernel.side() > width || kernel.side() > height)
    throw InvalidArgument("kernel larger than image");
  DegradationOperator op;
  op.kind_ = OperatorKind::Convolution;
  op.width_ = width;
  op.height_ = height;
  op.kernel_ = std::move(kernel);
  return op;
}

DegradationOperator DegradationOperator::masked_convolution(int width, int height, Kernel kernel,
                                                            int margin) {
  if (margin < kernel.radius())
    throw InvalidArgument("margin " + std::to_string(margin) + " is smaller than kernel radius " +
                          std::to_string(kernel.radius()));
  DegradationOperator op = convolution(width, height, std::move(kernel));
  op.kind_ = OperatorKind::MaskedConvolution;
  op.margin_ = margin;
  return op;
}

DegradationOperator DegradationOperator::with_noise(double sigma) const {
  if (sigma < 0) throw InvalidArgument("noise sigma must be >= 0");
  DegradationOperator op = *this;
  op.noise_sigma_ = sigma;
  return op;
}

bool DegradationOperator::observed(int row, int col) const {
  switch (kind_) {
    case OperatorKind::Mask:
      return mask_[static_cast<std::size_t>(row) * width_ + col] != 0;
    case OperatorKind::UniformSubsample:
      return row % factor_ == 0 && col % factor_ == 0;
    default:
      return true;
  }
}

Image DegradationOperator::observation_mask() const {
  Image out(width_, height_, 1);
  for (int r = 0; r < height_; ++r)
    for (int c = 0; c < width_; ++c) out.at(r, c) = observed(r, c) ? 1.0 : 0.0;
  return out;
}

int mirror_index(int i, int n) {
  if (n == 1) return 0;
  const int period = 2 * n;
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - 1 - i;
}

namespace {

void check_grid(const DegradationOperator& op, const Image& img) {
  if (img.width() != op.width() || img.height() != op.height())
    throw DimensionMismatch("image size does not match operator grid");
}

Image correlate_mirror(const Image& img, const Kernel& k) {
  if (k.side() > img.width() || k.side() > img.height())
    throw InvalidArgument("kernel larger than image");
  const int rho = k.radius();
  Image out(img.width(), img.height(), img.channels());
  for (int r = 0; r < img.height(); ++r)
    for (int c = 0; c < img.width(); ++c)
      for (int ch = 0; ch < img.channels(); ++ch) {
        double acc = 0.0;
        for (int i = 0; i < k.side(); ++i) {
          const int rr = mirror_index(r + i - rho, img.height());
          for (int j = 0; j < k.side(); ++j)
            acc += k.at(i, j) * img.at(rr, mirror_index(c + j - rho, img.width()), ch);
        }
        out.at(r, c, ch) = acc;
      }
  return out;
}

}  // namespace

Image apply(const DegradationOperator& op, const Image& img) {
  check_grid(op, img);
  switch (op.kind()) {
    case OperatorKind::Identity:
      return img;
    case OperatorKind::Mask:
    case OperatorKind::UniformSubsample: {
      Image out = img;
      for (int r = 0; r < img.height(); ++r)
        for (int c = 0; c < img.width(); ++c)
          if (!op.observed(r, c))
            for (int ch = 0; ch < img.channels(); ++ch) out.at(r, c, ch) = 0.0;
      return out;
    }
    case OperatorKind::Convolution:
    case OperatorKind::MaskedConvolution:
      return correlate_mirror(img, op.kernel());
  }
  return img;
}

Image degrade(const DegradationOperator& op, const Image& img, std::uint64_t seed) {
  Image out = apply(op, img);
  if (op.noise_sigma() == 0.0) return out;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, op.noise_sigma());
  for (int r = 0; r < out.height(); ++r)
    for (int c = 0; c < out.width(); ++c) {
      if (!op.observed(r, c)) continue;
      for (int ch = 0; ch < out.channels(); ++ch) out.at(r, c, ch) += noise(rng);
    }
  return out;
}

Image decimate(const Image& img, int factor) {
  if (factor < 1) throw InvalidArgument("factor must be >= 1");
  const int w = (img.width() + factor - 1) / factor;
  const int h = (img.height() + factor - 1) / factor;
  Image out(w, h, img.channels());
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c)
      for (int ch = 0; ch < img.channels(); ++ch) out.at(r, c, ch) = img.at(r * factor, c * factor, ch);
  return out;
}

Image embed_on_grid(const Image& low_res, int factor, int width, int height) {
  Image out(width, height, low_res.channels());
  for (int r = 0; r < low_res.height() && r * factor < height; ++r)
    for (int c = 0; c < low_res.width() && c * factor < width; ++c)
      for (int ch = 0; ch < low_res.channels(); ++ch)
        out.at(r * factor, c * factor, ch) = low_res.at(r, c, ch);
  return out;
}

PatchOperatorMatrix PatchOperatorMatrix::from_diagonal(Eigen::VectorXd diagonal,
                                                       bool translation_invariant,
                                                       std::uint64_t signature) {
  PatchOperatorMatrix m;
  m.rows_ = m.cols_ = static_cast<int>(diagonal.size());
  m.diagonal_ = true;
  m.diag_ = std::move(diagonal);
  m.translation_invariant_ = translation_invariant;
  m.signature_ = signature;
  m.finalize();
  return m;
}

PatchOperatorMatrix PatchOperatorMatrix::from_dense(Eigen::MatrixXd matrix,
                                                    bool translation_invariant,
                                                    std::uint64_t signature) {
  PatchOperatorMatrix m;
  m.rows_ = static_cast<int>(matrix.rows());
  m.cols_ = static_cast<int>(matrix.cols());
  m.diagonal_ = false;
  m.dense_ = std::move(matrix);
  m.translation_invariant_ = translation_invariant;
  m.signature_ = signature;
  m.finalize();
  return m;
}

void PatchOperatorMatrix::finalize() {
  active_rows_.clear();
  for (int i = 0; i < rows_; ++i) {
    const bool nonzero = diagonal_ ? diag_[i] != 0.0 : dense_.row(i).cwiseAbs().maxCoeff() > 0.0;
    if (nonzero) active_rows_.push_back(i);
  }
  if (diagonal_) return;
  active_block_.resize(static_cast<Eigen::Index>(active_rows_.size()), cols_);
  for (std::size_t a = 0; a < active_rows_.size(); ++a)
    active_block_.row(static_cast<Eigen::Index>(a)) = dense_.row(active_rows_[a]);
}

Eigen::MatrixXd PatchOperatorMatrix::active_matrix() const {
  if (!diagonal_) return active_block_;
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(active_rows_.size()), cols_);
  for (std::size_t a = 0; a < active_rows_.size(); ++a)
    out(static_cast<Eigen::Index>(a), active_rows_[a]) = diag_[active_rows_[a]];
  return out;
}

Eigen::MatrixXd PatchOperatorMatrix::dense() const {
  if (!diagonal_) return dense_;
  return diag_.asDiagonal();
}

Eigen::VectorXd PatchOperatorMatrix::apply(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  if (x.size() != cols_) throw DimensionMismatch("operator apply: dimension mismatch");
  if (diagonal_) return diag_.cwiseProduct(x);
  return dense_ * x;
}

Eigen::VectorXd PatchOperatorMatrix::adjoint_apply(const Eigen::Ref<const Eigen::VectorXd>& v) const {
  if (v.size() != rows_) throw DimensionMismatch("operator adjoint: dimension mismatch");
  if (diagonal_) return diag_.cwiseProduct(v);
  return dense_.transpose() * v;
}

PatchOperatorMatrix PatchOperatorMatrix::block_diagonal(int copies) const {
  const std::uint64_t sig =
      signature_ == 0 ? 0 : Fnv1a().add(signature_).add(copies).add(std::uint8_t{0xbd}).value();
  if (diagonal_) return from_diagonal(diag_.replicate(copies, 1), translation_invariant_, sig);
  Eigen::MatrixXd big = Eigen::MatrixXd::Zero(rows_ * copies, cols_ * copies);
  for (int b = 0; b < copies; ++b) big.block(b * rows_, b * cols_, rows_, cols_) = dense_;
  return from_dense(std::move(big), translation_invariant_, sig);
}

namespace {

std::uint64_t kernel_signature(const Kernel& k, OperatorKind kind, int side, int margin) {
  Fnv1a h;
  h.add(static_cast<int>(kind)).add(side).add(margin).add(k.side());
  for (double w : k.weights()) h.add(w);
  return h.value();
}

}  // namespace

PatchOperatorMatrix restrict_to_patch(const DegradationOperator& op, int row, int col, int side) {
  const int n = side * side;
  if (op.kind() != OperatorKind::MaskedConvolution &&
      (row < 0 || col < 0 || row + side > op.height() || col + side > op.width()))
    throw InvalidArgument("patch outside operator grid");
  switch (op.kind()) {
    case OperatorKind::Identity:
      return PatchOperatorMatrix::from_diagonal(
          Eigen::VectorXd::Ones(n), true,
          Fnv1a().add(static_cast<int>(op.kind())).add(side).value());
    case OperatorKind::Mask: {
      Eigen::VectorXd d(n);
      for (int r = 0; r < side; ++r)
        for (int c = 0; c < side; ++c) d[r * side + c] = op.observed(row + r, col + c) ? 1.0 : 0.0;
      return PatchOperatorMatrix::from_diagonal(std::move(d), false, 0);
    }
    case OperatorKind::UniformSubsample: {
      Eigen::VectorXd d(n);
      for (int r = 0; r < side; ++r)
        for (int c = 0; c < side; ++c) d[r * side + c] = op.observed(row + r, col + c) ? 1.0 : 0.0;
      const std::uint64_t sig = Fnv1a()
                                    .add(static_cast<int>(op.kind()))
                                    .add(side)
                                    .add(op.factor())
                                    .add(row % op.factor())
                                    .add(col % op.factor())
                                    .value();
      return PatchOperatorMatrix::from_diagonal(std::move(d), true, sig);
    }
    case OperatorKind::Convolution: {
      const Kernel& k = op.kernel();
      const int rho = k.radius();
      Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
      for (int a = 0; a < side; ++a)
        for (int b = 0; b < side; ++b)
          for (int i = 0; i < k.side(); ++i)
            for (int j = 0; j < k.side(); ++j) {
              const int aa = a + i - rho, bb = b + j - rho;
              if (aa < 0 || bb < 0 || aa >= side || bb >= side) continue;
              m(a * side + b, aa * side + bb) += k.at(i, j);
            }
      return PatchOperatorMatrix::from_dense(std::move(m), true,
                                             kernel_signature(k, op.kind(), side, 0));
    }
    case OperatorKind::MaskedConvolution: {
      const Kernel& k = op.kernel();
      const int rho = k.radius();
      const int margin = op.margin();
      const int ext = side + 2 * margin;
      if (row - margin < 0 || col - margin < 0 || row - margin + ext > op.height() ||
          col - margin + ext > op.width())
        throw InvalidArgument("extended support at (" + std::to_string(row - margin) + ", " +
                              std::to_string(col - margin) + ") exceeds the operator grid");
      const int n_ext = ext * ext;
      Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n_ext, n_ext);
      for (int a = margin; a < margin + side; ++a)
        for (int b = margin; b < margin + side; ++b)
          for (int i = 0; i < k.side(); ++i)
            for (int j = 0; j < k.side(); ++j)
              m(a * ext + b, (a + i - rho) * ext + (b + j - rho)) += k.at(i, j);
      return PatchOperatorMatrix::from_dense(std::move(m), true,
                                             kernel_signature(k, op.kind(), side, margin));
    }
  }
  throw InvalidArgument("unknown operator kind");
}

Eigen::VectorXd adjoint_apply(const PatchOperatorMatrix& matrix, const Eigen::VectorXd& v) {
  return matrix.adjoint_apply(v);
}

}  // namespace ple
