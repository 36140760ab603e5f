#pragma once

#include <random>

#include <Eigen/Dense>

#include "ple/gaussian_model.hpp"
#include "ple/operators.hpp"

namespace ple::testing {

inline Eigen::VectorXd gaussian_vector(Eigen::Index n, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> g(0.0, scale);
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = g(rng);
  return v;
}

inline Eigen::MatrixXd random_orthonormal(Eigen::Index n, std::mt19937_64& rng) {
  Eigen::MatrixXd a(n, n);
  for (Eigen::Index j = 0; j < n; ++j) a.col(j) = gaussian_vector(n, rng);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
  return qr.householderQ() * Eigen::MatrixXd::Identity(n, n);
}

// Eigenvalues log-uniform in [floor, floor·spread].
inline GaussianModel random_model(Eigen::Index n, std::mt19937_64& rng, double floor = 30.0,
                                  double spread = 1e4, double mean_scale = 50.0) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Eigen::VectorXd lambda(n);
  for (Eigen::Index i = 0; i < n; ++i) lambda[i] = floor * std::pow(spread, u(rng));
  return GaussianModel::from_basis(gaussian_vector(n, rng, mean_scale), random_orthonormal(n, rng), lambda, {});
}

inline Eigen::VectorXd sample(const GaussianModel& m, std::mt19937_64& rng) {
  const Eigen::VectorXd z = gaussian_vector(m.dim(), rng);
  return m.mean() + m.basis() * (m.eigenvalues().cwiseSqrt().cwiseProduct(z));
}

inline double relative_error(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  return (a - b).norm() / std::max(1.0, b.norm());
}

// Restrictions of the four basic operator kinds to an n = side² patch.
inline PatchOperatorMatrix random_operator(int kind, int side, std::mt19937_64& rng) {
  const int w = side + 6;
  std::uniform_int_distribution<int> pos(0, 6);
  const int r = pos(rng);
  const int c = pos(rng);
  switch (kind % 4) {
    case 0:
      return restrict_to_patch(DegradationOperator::identity(w, w), r, c, side);
    case 1:
      return restrict_to_patch(DegradationOperator::random_mask(w, w, 0.5, rng()), r, c, side);
    case 2:
      return restrict_to_patch(DegradationOperator::subsample(w, w, 2), r, c, side);
    default: {
      const int ks = side >= 3 ? 3 : 1;
      return restrict_to_patch(DegradationOperator::convolution(w, w, Kernel::gaussian(1.0, ks)), r, c, side);
    }
  }
}

}  // namespace ple::testing
