#include "ple/gaussian_model.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <numeric>

#include "ple/errors.hpp"

namespace ple {

namespace {

double sum_log(const Eigen::VectorXd& lambda) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < lambda.size(); ++i) s += std::log(lambda[i]);
  return s;
}

}  // namespace

GaussianModel GaussianModel::from_basis(Eigen::VectorXd mean, const Eigen::MatrixXd& basis,
                                        const Eigen::VectorXd& eigenvalues, ModelMeta meta) {
  const Eigen::Index n = mean.size();
  if (basis.rows() != n || basis.cols() != n || eigenvalues.size() != n)
    throw DimensionMismatch("model mean, basis and eigenvalues disagree in dimension");
  if (eigenvalues.minCoeff() <= 0.0) throw InvalidArgument("model eigenvalues must be positive");
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index a, Eigen::Index b) { return eigenvalues[a] > eigenvalues[b]; });
  GaussianModel m;
  m.mean_ = std::move(mean);
  m.basis_.resize(n, n);
  m.eigenvalues_.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    m.basis_.col(i) = basis.col(order[static_cast<std::size_t>(i)]);
    m.eigenvalues_[i] = eigenvalues[order[static_cast<std::size_t>(i)]];
  }
  m.covariance_ = m.basis_ * m.eigenvalues_.asDiagonal() * m.basis_.transpose();
  m.covariance_ = 0.5 * (m.covariance_ + m.covariance_.transpose());
  m.log_det_ = sum_log(m.eigenvalues_);
  m.meta_ = meta;
  return m;
}

GaussianModel GaussianModel::from_covariance(Eigen::VectorXd mean, const Eigen::MatrixXd& covariance,
                                             double floor, ModelMeta meta) {
  const Eigen::Index n = mean.size();
  if (covariance.rows() != n || covariance.cols() != n)
    throw DimensionMismatch("covariance does not match mean dimension");
  if (floor <= 0.0) throw InvalidArgument("eigenvalue floor must be positive");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(covariance);
  if (eig.info() != Eigen::Success) throw NumericalError("eigendecomposition failed", 0.0);
  // Ascending from Eigen; reverse into non-increasing order.
  Eigen::VectorXd lambda = eig.eigenvalues().reverse();
  Eigen::MatrixXd basis = eig.eigenvectors().rowwise().reverse();
  for (Eigen::Index i = 0; i < n; ++i) lambda[i] = std::max(lambda[i], floor);
  return from_basis(std::move(mean), basis, lambda, meta);
}

double GaussianModel::orthonormality_error() const {
  const Eigen::Index n = basis_.rows();
  return (basis_ * basis_.transpose() - Eigen::MatrixXd::Identity(n, n)).cwiseAbs().maxCoeff();
}

double GaussianModel::reconstruction_error() const {
  return (covariance_ - basis_ * eigenvalues_.asDiagonal() * basis_.transpose()).cwiseAbs().maxCoeff();
}

GaussianModel GaussianModel::lifted(int channels) const {
  const Eigen::Index n = dim();
  GaussianModel m;
  m.mean_ = mean_.replicate(channels, 1);
  m.basis_ = Eigen::MatrixXd::Zero(n * channels, n * channels);
  m.covariance_ = Eigen::MatrixXd::Zero(n * channels, n * channels);
  Eigen::VectorXd lambda(n * channels);
  for (int c = 0; c < channels; ++c) {
    m.basis_.block(c * n, c * n, n, n) = basis_;
    m.covariance_.block(c * n, c * n, n, n) = covariance_;
    lambda.segment(c * n, n) = eigenvalues_;
  }
  // Keep the non-increasing order across the stacked blocks.
  return from_basis(m.mean_, m.basis_, lambda, meta_);
}

bool operator==(const GaussianModel& a, const GaussianModel& b) {
  return a.mean_ == b.mean_ && a.covariance_ == b.covariance_ && a.basis_ == b.basis_ &&
         a.eigenvalues_ == b.eigenvalues_ && a.log_det_ == b.log_det_ &&
         a.meta_.kind == b.meta_.kind && a.meta_.angle == b.meta_.angle &&
         a.meta_.position == b.meta_.position;
}

std::size_t ModelSet::position_count() const noexcept {
  std::size_t total = 0;
  for (const auto& family : positions) total += family.size();
  return total;
}

namespace {

constexpr char kMagic[8] = {'P', 'L', 'E', 'M', 'S', 'E', 'T', '1'};

class LeWriter {
 public:
  explicit LeWriter(std::ofstream& out) : out_(out) {}
  void u64(std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    out_.write(reinterpret_cast<const char*>(b), 8);
  }
  void i64(std::int64_t v) { u64(static_cast<std::uint64_t>(v)); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }

 private:
  std::ofstream& out_;
};

class LeReader {
 public:
  explicit LeReader(std::ifstream& in) : in_(in) {}
  std::uint64_t u64() {
    unsigned char b[8];
    if (!in_.read(reinterpret_cast<char*>(b), 8)) throw ParseError("truncated model file", offset_);
    offset_ += 8;
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | b[i];
    return v;
  }
  std::int64_t i64() { return static_cast<std::int64_t>(u64()); }
  double f64() { return std::bit_cast<double>(u64()); }
  void skip(std::size_t n) { offset_ += n; }

 private:
  std::ifstream& in_;
  std::size_t offset_ = 0;
};

void write_model(LeWriter& w, const GaussianModel& m) {
  const Eigen::Index n = m.dim();
  w.u64(static_cast<std::uint64_t>(n));
  w.i64(static_cast<int>(m.meta().kind));
  w.f64(m.meta().angle);
  w.i64(m.meta().position);
  for (Eigen::Index i = 0; i < n; ++i) w.f64(m.mean()[i]);
  for (Eigen::Index i = 0; i < n; ++i) w.f64(m.eigenvalues()[i]);
  for (Eigen::Index c = 0; c < n; ++c)
    for (Eigen::Index r = 0; r < n; ++r) w.f64(m.basis()(r, c));
}

GaussianModel read_model(LeReader& r) {
  const auto n = static_cast<Eigen::Index>(r.u64());
  if (n <= 0 || n > 100000) throw ParseError("implausible model dimension", 0);
  ModelMeta meta;
  meta.kind = static_cast<ModelKind>(r.i64());
  meta.angle = r.f64();
  meta.position = static_cast<int>(r.i64());
  Eigen::VectorXd mean(n), lambda(n);
  Eigen::MatrixXd basis(n, n);
  for (Eigen::Index i = 0; i < n; ++i) mean[i] = r.f64();
  for (Eigen::Index i = 0; i < n; ++i) lambda[i] = r.f64();
  for (Eigen::Index c = 0; c < n; ++c)
    for (Eigen::Index i = 0; i < n; ++i) basis(i, c) = r.f64();
  return GaussianModel::from_basis(std::move(mean), basis, lambda, meta);
}

}  // namespace

void write_model_set(const ModelSet& set, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out.write(kMagic, sizeof(kMagic));
  LeWriter w(out);
  w.u64(set.models.size());
  for (const auto& m : set.models) write_model(w, m);
  w.u64(set.positions.size());
  for (const auto& family : set.positions) {
    w.u64(family.size());
    for (const auto& m : family) write_model(w, m);
  }
  if (!out) throw Error("write failed for " + path.string());
}

ModelSet read_model_set(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  char magic[8];
  if (!in.read(magic, 8) || std::memcmp(magic, kMagic, 8) != 0)
    throw ParseError("bad model file magic", 0);
  LeReader r(in);
  r.skip(8);
  ModelSet set;
  const auto count = r.u64();
  for (std::uint64_t i = 0; i < count; ++i) set.models.push_back(read_model(r));
  const auto families = r.u64();
  set.positions.resize(families);
  for (auto& family : set.positions) {
    const auto size = r.u64();
    for (std::uint64_t i = 0; i < size; ++i) family.push_back(read_model(r));
  }
  return set;
}

}  // namespace ple
