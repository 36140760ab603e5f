#include "ple/init_bases.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <numbers>

#include "ple/errors.hpp"
#include "ple/operators.hpp"
#include "ple/patches.hpp"

namespace ple {

double edge_functional(double angle, int side, double row, double col) {
  const double c0 = (side - 1) / 2.0;
  const double x = col - c0;
  const double y = c0 - row;
  return -x * std::sin(angle) + y * std::cos(angle);
}

Image synthetic_edge_image(const SyntheticEdgeSpec& spec) {
  if (spec.side < 2) throw InvalidArgument("synthetic image side must be >= 2");
  if (spec.angle < 0 || spec.angle >= std::numbers::pi) throw InvalidArgument("edge angle must lie in [0, pi)");
  Image img(spec.side, spec.side, 1);
  for (int r = 0; r < spec.side; ++r)
    for (int c = 0; c < spec.side; ++c)
      img.at(r, c) = edge_functional(spec.angle, spec.side, r, c) < spec.offset ? 255.0 : 0.0;
  if (spec.blur > 0) {
    const int side = 2 * static_cast<int>(std::ceil(3 * spec.blur)) + 1;
    img = apply(DegradationOperator::convolution(spec.side, spec.side, Kernel::gaussian(spec.blur, side)), img);
  }
  return img;
}

namespace {

// Patch at (r, c) has pixels on both sides of the sharp edge.
bool touches_edge(double angle, int image_side, int r, int c, int patch_side, double offset = 0.0) {
  bool neg = false;
  bool pos = false;
  for (int i = 0; i < patch_side && !(neg && pos); ++i)
    for (int j = 0; j < patch_side; ++j) {
      if (edge_functional(angle, image_side, r + i, c + j) < offset)
        neg = true;
      else
        pos = true;
    }
  return neg && pos;
}

// E[f fᵀ] over the patches and their polarity flips 255 − f.
class SecondMoment {
 public:
  explicit SecondMoment(int dim) : dim_(dim) {}
  void add(const Eigen::VectorXd& f) { patches_.push_back(f); }
  int count() const noexcept { return 2 * static_cast<int>(patches_.size()); }
  Eigen::MatrixXd matrix() const {
    const auto m = static_cast<Eigen::Index>(patches_.size());
    Eigen::MatrixXd x(dim_, m);
    for (Eigen::Index j = 0; j < m; ++j) x.col(j) = patches_[static_cast<std::size_t>(j)];
    // Σ (c − f)(c − f)ᵀ = Σ f fᵀ − c(1 sᵀ + s 1ᵀ) + m c² 1 1ᵀ with s = Σ f
    const double c = 255.0;
    const Eigen::VectorXd s = x.rowwise().sum();
    const Eigen::VectorXd ones = Eigen::VectorXd::Ones(dim_);
    Eigen::MatrixXd sum = 2.0 * (x * x.transpose());
    sum -= c * (ones * s.transpose() + s * ones.transpose());
    sum += (static_cast<double>(m) * c * c) * (ones * ones.transpose());
    return sum / count();
  }

 private:
  int dim_;
  std::vector<Eigen::VectorXd> patches_;
};

struct Pca {
  Eigen::MatrixXd basis;  // descending eigenvalue order
  Eigen::VectorXd eigenvalues;
};

Pca pca(const Eigen::MatrixXd& moment) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(moment);
  Pca out;
  out.basis = solver.eigenvectors().rowwise().reverse();
  out.eigenvalues = solver.eigenvalues().reverse().cwiseMax(0.0);
  return out;
}

// DC first, then the PCA atoms in order, each orthogonalized against the
// accepted ones; canonical vectors fill in for degenerate residuals.
Eigen::MatrixXd dc_gram_schmidt(const Eigen::MatrixXd& atoms) {
  const Eigen::Index n = atoms.rows();
  Eigen::MatrixXd q(n, n);
  q.col(0) = Eigen::VectorXd::Constant(n, 1.0 / std::sqrt(static_cast<double>(n)));
  Eigen::Index accepted = 1;
  auto try_add = [&](Eigen::VectorXd v) {
    for (int pass = 0; pass < 2; ++pass)
      v -= q.leftCols(accepted) * (q.leftCols(accepted).transpose() * v);
    const double norm = v.norm();
    if (norm < 1e-10) return false;
    q.col(accepted++) = v / norm;
    return true;
  };
  for (Eigen::Index j = 1; j < atoms.cols() && accepted < n; ++j) try_add(atoms.col(j));
  for (Eigen::Index e = 0; e < n && accepted < n; ++e) try_add(Eigen::VectorXd::Unit(n, e));
  return q;
}

Eigen::MatrixXd edge_moment(double angle, int patch_side, int synthetic_side, double blur) {
  if (patch_side < 2) throw InvalidArgument("patch side must be >= 2");
  if (patch_side > synthetic_side) throw InvalidArgument("patch larger than the synthetic image");
  const Image img = synthetic_edge_image({angle, synthetic_side, blur});
  SecondMoment moment(patch_side * patch_side);
  for (int r = 0; r + patch_side <= synthetic_side; ++r)
    for (int c = 0; c + patch_side <= synthetic_side; ++c)
      if (touches_edge(angle, synthetic_side, r, c, patch_side)) moment.add(read_patch(img, r, c, patch_side));
  if (moment.count() == 0) throw InvalidArgument("no patch touches the synthetic edge");
  return moment.matrix();
}

}  // namespace

Eigen::VectorXd shared_eigenvalues(int patch_side, double epsilon, int synthetic_side, double edge_blur) {
  if (!(epsilon > 0)) throw InvalidArgument("epsilon must be > 0");
  return pca(edge_moment(0.0, patch_side, synthetic_side, edge_blur)).eigenvalues.array() + epsilon;
}

GaussianModel directional_basis(double angle, int patch_side, double epsilon, int synthetic_side,
                                double edge_blur) {
  const Pca p = pca(edge_moment(angle, patch_side, synthetic_side, edge_blur));
  const int n = patch_side * patch_side;
  return GaussianModel::from_basis(Eigen::VectorXd::Zero(n), dc_gram_schmidt(p.basis),
                                   shared_eigenvalues(patch_side, epsilon, synthetic_side, edge_blur),
                                   {ModelKind::Directional, angle, -1});
}

std::vector<GaussianModel> position_bases(double angle, int patch_side, int positions,
                                          const std::vector<double>& blur_levels, double epsilon,
                                          int synthetic_side, double edge_blur) {
  if (positions < 1) throw InvalidArgument("positions must be >= 1");
  if (blur_levels.empty()) throw InvalidArgument("at least one blur level is required");
  const int n = patch_side * patch_side;
  const double half = (patch_side - 1) / 2.0;
  const double reach = half * (std::abs(std::sin(angle)) + std::abs(std::cos(angle)));

  // Quarter-pixel shifts of the edge so every bin sees some crossings even
  // when the patch centres fall on a coarser set of distances.
  constexpr int kShifts = 4;
  std::vector<SecondMoment> moments(static_cast<std::size_t>(positions), SecondMoment(n));
  for (double blur : blur_levels)
    for (int shift = 0; shift < kShifts; ++shift) {
      const double offset = static_cast<double>(shift) / kShifts;
      const Image img = synthetic_edge_image({angle, synthetic_side, blur, offset});
      for (int r = 0; r + patch_side <= synthetic_side; ++r)
        for (int c = 0; c + patch_side <= synthetic_side; ++c) {
          if (!touches_edge(angle, synthetic_side, r, c, patch_side, offset)) continue;
          const double d = edge_functional(angle, synthetic_side, r + half, c + half) - offset;
          int bin = static_cast<int>(std::floor((d + reach) / (2 * reach) * positions));
          bin = std::clamp(bin, 0, positions - 1);
          moments[static_cast<std::size_t>(bin)].add(read_patch(img, r, c, patch_side));
        }
    }

  const Eigen::VectorXd lambda = shared_eigenvalues(patch_side, epsilon, synthetic_side, edge_blur);
  std::vector<GaussianModel> out;
  out.reserve(static_cast<std::size_t>(positions));
  for (int p = 0; p < positions; ++p) {
    if (moments[static_cast<std::size_t>(p)].count() == 0)
      throw InvalidArgument("no edge patch falls in position bin " + std::to_string(p));
    const Pca pc = pca(moments[static_cast<std::size_t>(p)].matrix());
    out.push_back(GaussianModel::from_basis(Eigen::VectorXd::Zero(n), dc_gram_schmidt(pc.basis), lambda,
                                            {ModelKind::Position, angle, p}));
  }
  return out;
}

Eigen::MatrixXd dct_basis(int patch_side) {
  if (patch_side < 1) throw InvalidArgument("patch side must be >= 1");
  const int s = patch_side;
  auto alpha = [s](int u) { return u == 0 ? std::sqrt(1.0 / s) : std::sqrt(2.0 / s); };
  Eigen::MatrixXd basis(s * s, s * s);
  int atom = 0;
  for (int diag = 0; diag <= 2 * (s - 1); ++diag) {
    // JPEG zigzag: odd diagonals run down-left, even ones up-right.
    for (int t = 0; t <= diag; ++t) {
      const int u = (diag % 2 == 1) ? t : diag - t;  // vertical frequency
      const int v = diag - u;
      if (u >= s || v >= s) continue;
      for (int r = 0; r < s; ++r)
        for (int c = 0; c < s; ++c)
          basis(r * s + c, atom) = alpha(u) * alpha(v) * std::cos(std::numbers::pi * (2 * r + 1) * u / (2.0 * s)) *
                                   std::cos(std::numbers::pi * (2 * c + 1) * v / (2.0 * s));
      ++atom;
    }
  }
  return basis;
}

GaussianModel dct_model(int patch_side, double epsilon, int synthetic_side, double edge_blur) {
  return GaussianModel::from_basis(Eigen::VectorXd::Zero(patch_side * patch_side), dct_basis(patch_side),
                                   shared_eigenvalues(patch_side, epsilon, synthetic_side, edge_blur),
                                   {ModelKind::Dct, 0.0, -1});
}

ModelSet init_models(const InitConfig& config, InitMode mode) {
  if (config.num_models < 1) throw InvalidArgument("num_models must be >= 1");
  const int directions = config.num_models - 1;
  const bool families = config.hierarchical && mode == InitMode::Directional;
  ModelSet set;
  set.models.resize(static_cast<std::size_t>(config.num_models));
  if (families) set.positions.resize(static_cast<std::size_t>(config.num_models));

  std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic)
  for (int k = 0; k < config.num_models; ++k) {
    try {
      if (k == directions) {
        set.models[k] = dct_model(config.patch_side, config.epsilon, config.synthetic_side, config.edge_blur);
        continue;
      }
      const double angle = std::numbers::pi * k / directions;
      set.models[k] =
          directional_basis(angle, config.patch_side, config.epsilon, config.synthetic_side, config.edge_blur);
      if (families)
        set.positions[k] = position_bases(angle, config.patch_side, config.positions, config.blur_levels,
                                          config.epsilon, config.synthetic_side, config.edge_blur);
    } catch (...) {
#pragma omp critical(ple_init_failure)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  return set;
}

Image atom_grid(const GaussianModel& model, int patch_side, int max_atoms) {
  const int count = std::min(max_atoms, static_cast<int>(model.basis().cols()));
  if (patch_side * patch_side != model.dim())
    throw DimensionMismatch("patch side does not match the model dimension");
  const int per_row = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(count))));
  const int rows = (count + per_row - 1) / per_row;
  const int cell = patch_side + 1;
  Image grid(per_row * cell + 1, rows * cell + 1, 1, 128.0);
  for (int a = 0; a < count; ++a) {
    const Eigen::VectorXd atom = model.basis().col(a);
    const double lo = atom.minCoeff();
    const double hi = atom.maxCoeff();
    const double scale = hi > lo ? 255.0 / (hi - lo) : 0.0;
    const int r0 = (a / per_row) * cell + 1;
    const int c0 = (a % per_row) * cell + 1;
    for (int r = 0; r < patch_side; ++r)
      for (int c = 0; c < patch_side; ++c)
        grid.at(r0 + r, c0 + c) = hi > lo ? (atom[r * patch_side + c] - lo) * scale : 128.0;
  }
  return grid;
}

}  // namespace ple
