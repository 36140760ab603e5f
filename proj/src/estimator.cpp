#include "ple/estimator.hpp"

#include <cmath>
#include <limits>

#include "ple/errors.hpp"

namespace ple {

namespace {

Eigen::LLT<Eigen::MatrixXd> factor_spd(const Eigen::MatrixXd& a) {
  Eigen::LLT<Eigen::MatrixXd> llt(a);
  if (llt.info() != Eigen::Success) {
    Eigen::LDLT<Eigen::MatrixXd> ldlt(a);
    const double pivot = ldlt.vectorD().size() ? ldlt.vectorD().minCoeff() : 0.0;
    throw NumericalError("Wiener system is not positive definite", pivot);
  }
  return llt;
}

Eigen::MatrixXd sqrt_covariance(const GaussianModel& model) {
  return model.basis() * model.eigenvalues().cwiseSqrt().asDiagonal() * model.basis().transpose();
}

void check_dims(const PatchOperatorMatrix& op, const GaussianModel& model) {
  if (op.cols() != model.dim())
    throw DimensionMismatch("operator columns (" + std::to_string(op.cols()) +
                            ") do not match model dimension (" + std::to_string(model.dim()) + ")");
}

bool use_compact(const PatchOperatorMatrix& op) {
  return static_cast<int>(op.active_rows().size()) <= op.cols();
}

// U_a Σ U_aᵀ + σ²Id on the active rows.
Eigen::MatrixXd compact_system(const PatchOperatorMatrix& op, const GaussianModel& model,
                               double sigma) {
  const auto& rows = op.active_rows();
  const auto m = static_cast<Eigen::Index>(rows.size());
  Eigen::MatrixXd a(m, m);
  if (op.is_diagonal()) {
    const auto& d = op.diagonal();
    for (Eigen::Index i = 0; i < m; ++i)
      for (Eigen::Index j = 0; j < m; ++j)
        a(i, j) = d[rows[i]] * d[rows[j]] * model.covariance()(rows[i], rows[j]);
  } else {
    a = op.active_block() * model.covariance() * op.active_block().transpose();
  }
  a.diagonal().array() += sigma * sigma;
  return a;
}

// Σ U_aᵀ (cols × m).
Eigen::MatrixXd covariance_times_adjoint(const PatchOperatorMatrix& op, const GaussianModel& model) {
  const auto& rows = op.active_rows();
  const auto m = static_cast<Eigen::Index>(rows.size());
  if (op.is_diagonal()) {
    Eigen::MatrixXd out(model.dim(), m);
    for (Eigen::Index j = 0; j < m; ++j)
      out.col(j) = model.covariance().col(rows[j]) * op.diagonal()[rows[j]];
    return out;
  }
  return model.covariance() * op.active_block().transpose();
}

Eigen::VectorXd active_values(const PatchOperatorMatrix& op, const Eigen::VectorXd& y) {
  const auto& rows = op.active_rows();
  Eigen::VectorXd out(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) out[static_cast<Eigen::Index>(i)] = y[rows[i]];
  return out;
}

// U_a μ
Eigen::VectorXd predicted_active(const PatchOperatorMatrix& op, const Eigen::VectorXd& mean) {
  if (!op.is_diagonal()) return op.active_block() * mean;
  const auto& rows = op.active_rows();
  Eigen::VectorXd out(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    out[static_cast<Eigen::Index>(i)] = op.diagonal()[rows[i]] * mean[rows[i]];
  return out;
}

// G such that f = μ + G (y_a − U_a μ), via Σ^½ when U_a is tall.
Eigen::MatrixXd gain_matrix(const PatchOperatorMatrix& op, const GaussianModel& model, double sigma) {
  const auto m = static_cast<Eigen::Index>(op.active_rows().size());
  if (m == 0) return Eigen::MatrixXd::Zero(model.dim(), 0);
  if (use_compact(op)) {
    const auto llt = factor_spd(compact_system(op, model, sigma));
    // A⁻¹ U_a Σ, transposed: Σ U_aᵀ A⁻¹.
    return llt.solve(covariance_times_adjoint(op, model).transpose()).transpose();
  }
  const Eigen::MatrixXd s_half = sqrt_covariance(model);
  const Eigen::MatrixXd us = op.active_block() * s_half;
  Eigen::MatrixXd h = us.transpose() * us;
  h.diagonal().array() += sigma * sigma;
  const auto llt = factor_spd(h);
  return s_half * llt.solve(us.transpose());
}

}  // namespace

Eigen::MatrixXd wiener_matrix(const PatchOperatorMatrix& op, const GaussianModel& model, double sigma) {
  check_dims(op, model);
  const Eigen::MatrixXd g = gain_matrix(op, model, sigma);
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(op.cols(), op.rows());
  const auto& rows = op.active_rows();
  for (std::size_t j = 0; j < rows.size(); ++j) w.col(rows[j]) = g.col(static_cast<Eigen::Index>(j));
  return w;
}

WienerFilter WienerFilter::build(const PatchOperatorMatrix& op, const GaussianModel& model,
                                 double sigma) {
  check_dims(op, model);
  WienerFilter f;
  f.gain_ = gain_matrix(op, model, sigma);
  f.mean_ = model.mean();
  f.rows_ = op.active_rows();
  f.predicted_ = predicted_active(op, model.mean());
  return f;
}

Eigen::VectorXd WienerFilter::apply(const Eigen::Ref<const Eigen::VectorXd>& y) const {
  Eigen::VectorXd residual(static_cast<Eigen::Index>(rows_.size()));
  for (std::size_t i = 0; i < rows_.size(); ++i)
    residual[static_cast<Eigen::Index>(i)] = y[rows_[i]] - predicted_[static_cast<Eigen::Index>(i)];
  return mean_ + gain_ * residual;
}

double selection_energy(const Eigen::VectorXd& y, const PatchOperatorMatrix& op,
                        const GaussianModel& model, double sigma, const Eigen::VectorXd& estimate) {
  const auto& rows = op.active_rows();
  double data = 0.0;
  if (op.is_diagonal()) {
    const auto& d = op.diagonal();
    for (Eigen::Index i = 0; i < y.size(); ++i) {
      const double r = d[i] * estimate[i] - y[i];
      data += r * r;
    }
  } else {
    data = (op.active_block() * estimate - active_values(op, y)).squaredNorm();
    std::size_t next = 0;
    for (Eigen::Index i = 0; i < y.size(); ++i) {
      if (next < rows.size() && rows[next] == i) {
        ++next;
        continue;
      }
      data += y[i] * y[i];
    }
  }
  const Eigen::VectorXd coeffs = model.basis().transpose() * (estimate - model.mean());
  const double prior = (coeffs.array().square() / model.eigenvalues().array()).sum();
  const double s2 = sigma * sigma;
  return data + s2 * prior + s2 * model.log_det();
}

PatchEstimate estimate_patch(const Eigen::VectorXd& y, const PatchOperatorMatrix& op,
                             const GaussianModel& model, double sigma, const WienerFilter* filter) {
  check_dims(op, model);
  if (y.size() != op.rows()) throw DimensionMismatch("observation length does not match operator rows");
  PatchEstimate out;
  if (filter != nullptr) {
    out.estimate = filter->apply(y);
  } else if (op.translation_invariant() && op.signature() != 0) {
    // Same arithmetic as a cached filter, so caching never changes a result.
    out.estimate = WienerFilter::build(op, model, sigma).apply(y);
  } else if (op.active_rows().empty()) {
    out.estimate = model.mean();
  } else if (use_compact(op)) {
    const Eigen::VectorXd residual = active_values(op, y) - predicted_active(op, model.mean());
    const auto llt = factor_spd(compact_system(op, model, sigma));
    const Eigen::VectorXd z = llt.solve(residual);
    if (op.is_diagonal()) {
      const auto& rows = op.active_rows();
      out.estimate = model.mean();
      for (std::size_t j = 0; j < rows.size(); ++j)
        out.estimate += model.covariance().col(rows[j]) * (op.diagonal()[rows[j]] * z[static_cast<Eigen::Index>(j)]);
    } else {
      out.estimate = model.mean() + model.covariance() * (op.active_block().transpose() * z);
    }
  } else {
    out.estimate = WienerFilter::build(op, model, sigma).apply(y);
  }
  out.energy = selection_energy(y, op, model, sigma, out.estimate);
  return out;
}

Eigen::VectorXd estimate_patch_pca(const Eigen::VectorXd& y, const PatchOperatorMatrix& op,
                                   const GaussianModel& model, double sigma) {
  check_dims(op, model);
  if (y.size() != op.rows()) throw DimensionMismatch("observation length does not match operator rows");
  const Eigen::MatrixXd u = op.dense();
  const Eigen::MatrixXd ub = u * model.basis();
  Eigen::MatrixXd h = ub.transpose() * ub;
  h.diagonal() += (sigma * sigma) * model.eigenvalues().cwiseInverse();
  const Eigen::VectorXd rhs = ub.transpose() * (y - u * model.mean());
  const Eigen::VectorXd coeffs = h.ldlt().solve(rhs);
  return model.mean() + model.basis() * coeffs;
}

Selection select_model(const Eigen::VectorXd& y, const PatchOperatorMatrix& op,
                       std::span<const GaussianModel> models, double sigma,
                       std::span<const WienerFilter* const> filters) {
  if (models.empty()) throw InvalidArgument("select_model needs at least one model");
  if (!filters.empty() && filters.size() != models.size())
    throw DimensionMismatch("one filter slot per model expected");
  Selection best;
  best.energy = std::numeric_limits<double>::infinity();
  best.model = -1;
  for (std::size_t k = 0; k < models.size(); ++k) {
    PatchEstimate e = estimate_patch(y, op, models[k], sigma, filters.empty() ? nullptr : filters[k]);
    ++best.evaluations;
    if (best.model < 0 || e.energy < best.energy) {
      best.model = static_cast<int>(k);
      best.energy = e.energy;
      best.estimate = std::move(e.estimate);
    }
  }
  return best;
}

HierarchicalSelection hierarchical_select(const Eigen::VectorXd& y, const PatchOperatorMatrix& op,
                                          std::span<const GaussianModel> directional,
                                          std::span<const std::vector<GaussianModel>> positions,
                                          double sigma,
                                          std::span<const WienerFilter* const> directional_filters,
                                          std::span<const std::vector<const WienerFilter*>> position_filters) {
  if (positions.size() != directional.size())
    throw DimensionMismatch("one position family per directional model expected");
  Selection first = select_model(y, op, directional, sigma, directional_filters);
  HierarchicalSelection out;
  out.direction = first.model;
  out.layer1_energy = first.energy;
  out.evaluations = first.evaluations;
  const auto& family = positions[static_cast<std::size_t>(first.model)];
  if (family.empty()) {
    out.estimate = std::move(first.estimate);
    out.energy = first.energy;
    return out;
  }
  std::span<const WienerFilter* const> family_filters;
  if (!position_filters.empty()) family_filters = position_filters[static_cast<std::size_t>(first.model)];
  Selection second = select_model(y, op, family, sigma, family_filters);
  out.position = second.model;
  out.estimate = std::move(second.estimate);
  out.energy = second.energy;
  out.evaluations += second.evaluations;
  return out;
}

}  // namespace ple
