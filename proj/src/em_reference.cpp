#include <limits>

#include "ple/em.hpp"
#include "ple/errors.hpp"
#include "ple/estimator.hpp"

namespace ple::reference {

namespace {

struct Pick {
  int index = -1;
  PatchEstimate estimate;
};

Pick argmin(const Eigen::VectorXd& y, const PatchOperatorMatrix& op,
            const std::vector<GaussianModel>& models, double sigma) {
  Pick best;
  for (std::size_t k = 0; k < models.size(); ++k) {
    PatchEstimate e = estimate_patch(y, op, models[k], sigma);
    if (best.index < 0 || e.energy < best.estimate.energy) {
      best.index = static_cast<int>(k);
      best.estimate = std::move(e);
    }
  }
  return best;
}

}  // namespace

EStepResult e_step(const PatchSet& patches, const ModelSet& models, double sigma) {
  EStepResult out;
  std::vector<int> labels;
  std::vector<int> positions;
  for (std::size_t i = 0; i < patches.size(); ++i) {
    const auto& y = patches.observations[i];
    const auto& op = patches.op(i);
    Pick first = argmin(y, op, models.models, sigma);
    out.evaluations += static_cast<long long>(models.models.size());
    int p = -1;
    if (models.hierarchical() && !models.positions[first.index].empty()) {
      Pick second = argmin(y, op, models.positions[first.index], sigma);
      out.evaluations += static_cast<long long>(models.positions[first.index].size());
      p = second.index;
      first.estimate = std::move(second.estimate);
    }
    labels.push_back(first.index);
    positions.push_back(p);
    out.total_energy += first.estimate.energy;
    out.energies.push_back(first.estimate.energy);
    out.estimates.push_back(std::move(first.estimate.estimate));
  }
  std::vector<std::size_t> sizes;
  for (const auto& f : models.positions) sizes.push_back(f.size());
  out.assignment = Assignment::from_labels(std::move(labels), std::move(positions),
                                           static_cast<int>(models.models.size()), sizes);
  return out;
}

namespace {

// Σ f and Σ f fᵀ accumulated patch by patch.
struct Moments {
  Eigen::VectorXd sum;
  Eigen::MatrixXd outer;
  int count = 0;

  void add(const Eigen::VectorXd& f) {
    if (count == 0) {
      sum = Eigen::VectorXd::Zero(f.size());
      outer = Eigen::MatrixXd::Zero(f.size(), f.size());
    }
    sum += f;
    outer += f * f.transpose();
    ++count;
  }

  GaussianModel fit(double epsilon, const GaussianModel& prior) const {
    if (count == 0) return prior;
    const Eigen::VectorXd mean = sum / count;
    Eigen::MatrixXd cov = outer / count - mean * mean.transpose();
    cov += epsilon * Eigen::MatrixXd::Identity(cov.rows(), cov.cols());
    return GaussianModel::from_covariance(mean, cov, epsilon, prior.meta());
  }
};

}  // namespace

ModelSet m_step(std::span<const Eigen::VectorXd> estimates, const Assignment& assignment,
                double epsilon, const ModelSet& prior) {
  if (!(epsilon > 0)) throw InvalidArgument("epsilon must be > 0");
  std::vector<Moments> first(prior.models.size());
  std::vector<std::vector<Moments>> families(prior.positions.size());
  for (std::size_t k = 0; k < prior.positions.size(); ++k) families[k].resize(prior.positions[k].size());

  for (std::size_t i = 0; i < estimates.size(); ++i) {
    const int k = assignment.model[i];
    first[k].add(estimates[i]);
    const int p = assignment.position[i];
    if (p >= 0) families[k][p].add(estimates[i]);
  }

  ModelSet out = prior;
  for (std::size_t k = 0; k < first.size(); ++k) out.models[k] = first[k].fit(epsilon, prior.models[k]);
  for (std::size_t k = 0; k < families.size(); ++k)
    for (std::size_t p = 0; p < families[k].size(); ++p)
      out.positions[k][p] = families[k][p].fit(epsilon, prior.positions[k][p]);
  return out;
}

}  // namespace ple::reference
