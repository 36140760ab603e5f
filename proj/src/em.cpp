#include "ple/em.hpp"

#include <exception>
#include <limits>
#include <random>
#include <unordered_map>

#include "ple/errors.hpp"
#include "ple/estimator.hpp"

namespace ple {

void PatchSet::add(Eigen::VectorXd y, PatchOperatorMatrix op) {
  operators.push_back(std::move(op));
  add_shared(std::move(y), static_cast<int>(operators.size()) - 1);
}

void PatchSet::add_shared(Eigen::VectorXd y, int index) {
  if (index < 0 || static_cast<std::size_t>(index) >= operators.size())
    throw InvalidArgument("operator index out of range");
  if (y.size() != operators[static_cast<std::size_t>(index)].rows())
    throw DimensionMismatch("observation length does not match operator rows");
  observations.push_back(std::move(y));
  operator_index.push_back(index);
}

Assignment Assignment::from_labels(std::vector<int> model, std::vector<int> position, int num_models,
                                   std::span<const std::size_t> family_sizes) {
  if (model.size() != position.size()) throw DimensionMismatch("label vectors differ in length");
  Assignment a;
  a.model = std::move(model);
  a.position = std::move(position);
  a.clusters.assign(static_cast<std::size_t>(num_models), {});
  if (!family_sizes.empty()) {
    a.position_clusters.resize(static_cast<std::size_t>(num_models));
    for (int k = 0; k < num_models; ++k) a.position_clusters[k].resize(family_sizes[k]);
  }
  for (std::size_t i = 0; i < a.model.size(); ++i) {
    const int k = a.model[i];
    if (k < 0 || k >= num_models) throw InvalidArgument("model label out of range");
    a.clusters[k].push_back(static_cast<int>(i));
    const int p = a.position[i];
    if (p >= 0) {
      if (a.position_clusters.empty() || static_cast<std::size_t>(p) >= a.position_clusters[k].size())
        throw InvalidArgument("position label out of range");
      a.position_clusters[k][p].push_back(static_cast<int>(i));
    }
  }
  return a;
}

std::vector<int> Assignment::occupancy() const {
  std::vector<int> out;
  out.reserve(clusters.size());
  for (const auto& c : clusters) out.push_back(static_cast<int>(c.size()));
  return out;
}

namespace {

struct FilterBank {
  std::vector<WienerFilter> first;
  std::vector<std::vector<WienerFilter>> families;
  std::vector<const WienerFilter*> first_ptrs;
  std::vector<std::vector<const WienerFilter*>> family_ptrs;
};

FilterBank build_bank(const PatchOperatorMatrix& op, const ModelSet& models, double sigma) {
  struct Job {
    int k;
    int p;
  };
  std::vector<Job> jobs;
  for (int k = 0; k < static_cast<int>(models.models.size()); ++k) jobs.push_back({k, -1});
  FilterBank bank;
  bank.first.resize(models.models.size());
  bank.families.resize(models.positions.size());
  for (std::size_t k = 0; k < models.positions.size(); ++k) {
    bank.families[k].resize(models.positions[k].size());
    for (std::size_t p = 0; p < models.positions[k].size(); ++p)
      jobs.push_back({static_cast<int>(k), static_cast<int>(p)});
  }

  std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic)
  for (std::size_t j = 0; j < jobs.size(); ++j) {
    try {
      const Job job = jobs[j];
      if (job.p < 0)
        bank.first[job.k] = WienerFilter::build(op, models.models[job.k], sigma);
      else
        bank.families[job.k][job.p] = WienerFilter::build(op, models.positions[job.k][job.p], sigma);
    } catch (...) {
#pragma omp critical(ple_bank_failure)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);

  for (const auto& f : bank.first) bank.first_ptrs.push_back(&f);
  bank.family_ptrs.resize(bank.families.size());
  for (std::size_t k = 0; k < bank.families.size(); ++k)
    for (const auto& f : bank.families[k]) bank.family_ptrs[k].push_back(&f);
  return bank;
}

// Bank index per operator, -1 for operators that cannot be cached.
std::vector<int> build_banks(const PatchSet& patches, const ModelSet& models, double sigma,
                             bool enabled, std::vector<FilterBank>& banks) {
  std::vector<int> op_bank(patches.operators.size(), -1);
  if (!enabled) return op_bank;
  std::vector<bool> used(patches.operators.size(), false);
  for (int idx : patches.operator_index) used[static_cast<std::size_t>(idx)] = true;
  std::unordered_map<std::uint64_t, int> by_signature;
  for (std::size_t o = 0; o < patches.operators.size(); ++o) {
    const auto& op = patches.operators[o];
    if (!used[o] || !op.translation_invariant() || op.signature() == 0) continue;
    auto [it, inserted] = by_signature.try_emplace(op.signature(), static_cast<int>(banks.size()));
    if (inserted) banks.push_back(build_bank(op, models, sigma));
    op_bank[o] = it->second;
  }
  return op_bank;
}

std::vector<std::size_t> family_sizes(const ModelSet& models) {
  std::vector<std::size_t> sizes;
  for (const auto& f : models.positions) sizes.push_back(f.size());
  return sizes;
}

void check_models(const ModelSet& models) {
  if (models.models.empty()) throw InvalidArgument("model set is empty");
  if (models.hierarchical() && models.positions.size() != models.models.size())
    throw InvalidArgument("hierarchical model set needs one family per model");
}

}  // namespace

EStepResult e_step(const PatchSet& patches, const ModelSet& models, double sigma,
                   EStepOptions options) {
  check_models(models);
  std::vector<FilterBank> banks;
  const std::vector<int> op_bank = build_banks(patches, models, sigma, options.cache_filters, banks);

  const std::size_t n = patches.size();
  EStepResult out;
  out.estimates.resize(n);
  out.energies.resize(n);
  std::vector<int> labels(n, 0);
  std::vector<int> positions(n, -1);
  std::vector<int> evaluations(n, 0);

  std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic, 64)
  for (std::size_t i = 0; i < n; ++i) {
    try {
      const auto& op = patches.op(i);
      const int b = op_bank[static_cast<std::size_t>(patches.operator_index[i])];
      const FilterBank* bank = b < 0 ? nullptr : &banks[static_cast<std::size_t>(b)];
      if (models.hierarchical()) {
        auto sel = bank ? hierarchical_select(patches.observations[i], op, models.models, models.positions,
                                              sigma, bank->first_ptrs, bank->family_ptrs)
                        : hierarchical_select(patches.observations[i], op, models.models, models.positions,
                                              sigma);
        labels[i] = sel.direction;
        positions[i] = sel.position;
        out.energies[i] = sel.energy;
        evaluations[i] = sel.evaluations;
        out.estimates[i] = std::move(sel.estimate);
      } else {
        auto sel = select_model(patches.observations[i], op, models.models, sigma,
                                bank ? std::span<const WienerFilter* const>(bank->first_ptrs)
                                     : std::span<const WienerFilter* const>());
        labels[i] = sel.model;
        out.energies[i] = sel.energy;
        evaluations[i] = sel.evaluations;
        out.estimates[i] = std::move(sel.estimate);
      }
    } catch (...) {
#pragma omp critical(ple_estep_failure)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);

  // Serial sums keep the total independent of the thread schedule.
  for (std::size_t i = 0; i < n; ++i) {
    out.total_energy += out.energies[i];
    out.evaluations += evaluations[i];
  }
  const auto sizes = family_sizes(models);
  out.assignment = Assignment::from_labels(std::move(labels), std::move(positions),
                                           static_cast<int>(models.models.size()), sizes);
  return out;
}

EStepResult e_step_joint(std::span<const PatchSet> channels, const ModelSet& models, double sigma,
                         EStepOptions options) {
  check_models(models);
  if (models.hierarchical()) throw InvalidArgument("joint channel selection needs a flat model set");
  if (channels.empty()) throw InvalidArgument("no channels");
  const std::size_t n = channels[0].size();
  for (const auto& c : channels)
    if (c.size() != n) throw DimensionMismatch("channels hold different patch counts");

  std::vector<std::vector<FilterBank>> banks(channels.size());
  std::vector<std::vector<int>> op_bank(channels.size());
  for (std::size_t c = 0; c < channels.size(); ++c)
    op_bank[c] = build_banks(channels[c], models, sigma, options.cache_filters, banks[c]);

  const std::size_t k_count = models.models.size();
  EStepResult out;
  out.estimates.resize(n);
  out.energies.resize(n);
  std::vector<int> labels(n, 0);

  std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic, 64)
  for (std::size_t i = 0; i < n; ++i) {
    try {
      double best = std::numeric_limits<double>::infinity();
      std::vector<Eigen::VectorXd> best_parts;
      int best_k = -1;
      std::vector<Eigen::VectorXd> parts(channels.size());
      for (std::size_t k = 0; k < k_count; ++k) {
        double energy = 0.0;
        for (std::size_t c = 0; c < channels.size(); ++c) {
          const auto& ps = channels[c];
          const int b = op_bank[c][static_cast<std::size_t>(ps.operator_index[i])];
          const WienerFilter* filter = b < 0 ? nullptr : banks[c][static_cast<std::size_t>(b)].first_ptrs[k];
          auto e = estimate_patch(ps.observations[i], ps.op(i), models.models[k], sigma, filter);
          energy += e.energy;
          parts[c] = std::move(e.estimate);
        }
        if (best_k < 0 || energy < best) {
          best = energy;
          best_k = static_cast<int>(k);
          best_parts = parts;
        }
      }
      Eigen::Index total = 0;
      for (const auto& p : best_parts) total += p.size();
      Eigen::VectorXd joined(total);
      Eigen::Index at = 0;
      for (const auto& p : best_parts) {
        joined.segment(at, p.size()) = p;
        at += p.size();
      }
      out.estimates[i] = std::move(joined);
      out.energies[i] = best;
      labels[i] = best_k;
    } catch (...) {
#pragma omp critical(ple_joint_failure)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);

  for (std::size_t i = 0; i < n; ++i) out.total_energy += out.energies[i];
  out.evaluations = static_cast<long long>(n * k_count * channels.size());
  out.assignment = Assignment::from_labels(std::move(labels), std::vector<int>(n, -1),
                                           static_cast<int>(k_count));
  return out;
}

namespace {

GaussianModel refit(std::span<const Eigen::VectorXd> estimates, const std::vector<int>& members,
                    double epsilon, const GaussianModel& prior) {
  if (members.empty()) return prior;
  const Eigen::Index dim = estimates[static_cast<std::size_t>(members.front())].size();
  Eigen::MatrixXd x(dim, static_cast<Eigen::Index>(members.size()));
  for (std::size_t j = 0; j < members.size(); ++j) {
    const auto& f = estimates[static_cast<std::size_t>(members[j])];
    if (f.size() != dim) throw DimensionMismatch("estimates in one cluster differ in length");
    x.col(static_cast<Eigen::Index>(j)) = f;
  }
  const double inv = 1.0 / static_cast<double>(members.size());
  const Eigen::VectorXd mean = x.rowwise().sum() * inv;
  x.colwise() -= mean;
  Eigen::MatrixXd cov = (x * x.transpose()) * inv;
  cov.diagonal().array() += epsilon;
  return GaussianModel::from_covariance(mean, cov, epsilon, prior.meta());
}

}  // namespace

ModelSet m_step(std::span<const Eigen::VectorXd> estimates, const Assignment& assignment,
                double epsilon, const ModelSet& prior) {
  if (!(epsilon > 0)) throw InvalidArgument("epsilon must be > 0");
  if (assignment.clusters.size() != prior.models.size())
    throw DimensionMismatch("assignment and model set disagree on K");
  struct Job {
    int k;
    int p;
  };
  std::vector<Job> jobs;
  for (int k = 0; k < static_cast<int>(prior.models.size()); ++k) jobs.push_back({k, -1});
  ModelSet out = prior;
  if (prior.hierarchical()) {
    for (std::size_t k = 0; k < prior.positions.size(); ++k)
      for (std::size_t p = 0; p < prior.positions[k].size(); ++p)
        jobs.push_back({static_cast<int>(k), static_cast<int>(p)});
  }

  std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic)
  for (std::size_t j = 0; j < jobs.size(); ++j) {
    try {
      const Job job = jobs[j];
      if (job.p < 0) {
        if (!assignment.clusters[job.k].empty())
          out.models[job.k] = refit(estimates, assignment.clusters[job.k], epsilon, prior.models[job.k]);
      } else {
        const auto& members = assignment.position_clusters.empty()
                                  ? std::vector<int>{}
                                  : assignment.position_clusters[job.k][job.p];
        if (!members.empty())
          out.positions[job.k][job.p] = refit(estimates, members, epsilon, prior.positions[job.k][job.p]);
      }
    } catch (...) {
#pragma omp critical(ple_mstep_failure)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  return out;
}

EmResult map_em(const PatchSet& patches, const ModelSet& init, const EmConfig& config,
                const IterationCallback& on_iteration) {
  if (config.iterations < 1) throw InvalidArgument("iterations must be >= 1");
  if (!(config.epsilon > 0)) throw InvalidArgument("epsilon must be > 0");
  EmResult result;
  result.models = init;
  for (int t = 1; t <= config.iterations; ++t) {
    EStepResult e = e_step(patches, result.models, config.sigma);
    if (on_iteration) on_iteration(t, e);
    result.trace.push_back({t, e.total_energy, e.assignment.occupancy()});
    result.models = m_step(e.estimates, e.assignment, config.epsilon, result.models);
    result.estimates = std::move(e.estimates);
    result.assignment = std::move(e.assignment);
  }
  return result;
}

Assignment random_assignment(std::size_t count, int num_models, std::uint64_t seed) {
  if (num_models < 1) throw InvalidArgument("num_models must be >= 1");
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> pick(0, num_models - 1);
  std::vector<int> labels(count);
  for (auto& l : labels) l = pick(rng);
  return Assignment::from_labels(std::move(labels), std::vector<int>(count, -1), num_models);
}

}  // namespace ple
