#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "ple/gaussian_model.hpp"
#include "ple/operators.hpp"

namespace ple {

struct EmConfig {
  int num_models = 19;  // directional models + 1 DCT
  int patch_side = 8;
  int stride = 1;
  double sigma = 3.0;
  double epsilon = 30.0;
  int iterations = 5;
  int positions = 12;  // per direction, hierarchical sets only
};

/// Patch observations y_i with their operators U_i. Patches may share an
/// operator through `operator_index`.
struct PatchSet {
  std::vector<Eigen::VectorXd> observations;
  std::vector<PatchOperatorMatrix> operators;
  std::vector<int> operator_index;

  std::size_t size() const noexcept { return observations.size(); }
  const PatchOperatorMatrix& op(std::size_t i) const {
    return operators[static_cast<std::size_t>(operator_index[i])];
  }
  /// Appends a patch with its own operator.
  void add(Eigen::VectorXd y, PatchOperatorMatrix op);
  /// Appends a patch using operators[index].
  void add_shared(Eigen::VectorXd y, int index);
};

struct Assignment {
  std::vector<int> model;     // k_i
  std::vector<int> position;  // p_i, -1 when the direction has no family
  std::vector<std::vector<int>> clusters;                        // C_k
  std::vector<std::vector<std::vector<int>>> position_clusters;  // C_{k,p}

  /// Builds the cluster lists from per-patch labels. `family_sizes` is
  /// empty for flat model sets.
  static Assignment from_labels(std::vector<int> model, std::vector<int> position, int num_models,
                                std::span<const std::size_t> family_sizes = {});
  std::vector<int> occupancy() const;
};

struct EStepResult {
  std::vector<Eigen::VectorXd> estimates;
  std::vector<double> energies;
  Assignment assignment;
  double total_energy = 0.0;
  long long evaluations = 0;
};

struct EStepOptions {
  /// Precompute Wiener filters per (model, operator signature) for
  /// translation-invariant operators.
  bool cache_filters = true;
};

/// MAP estimate and model selection for every patch (hierarchical when the
/// set has position families). Parallel over patches.
EStepResult e_step(const PatchSet& patches, const ModelSet& models, double sigma,
                   EStepOptions options = {});

/// One E-step over several single-channel patch sets sharing a model
/// selection: patch i takes the model minimizing the summed energy over
/// channels. Estimates are concatenated channel-major.
EStepResult e_step_joint(std::span<const PatchSet> channels, const ModelSet& models, double sigma,
                         EStepOptions options = {});

/// ML refit of every non-empty cluster (mean, covariance + ε·Id); empty
/// clusters keep their prior model. Parallel over clusters.
ModelSet m_step(std::span<const Eigen::VectorXd> estimates, const Assignment& assignment,
                double epsilon, const ModelSet& prior);

/// Serial implementations kept as a reference for the parallel ones.
namespace reference {
EStepResult e_step(const PatchSet& patches, const ModelSet& models, double sigma);
ModelSet m_step(std::span<const Eigen::VectorXd> estimates, const Assignment& assignment,
                double epsilon, const ModelSet& prior);
}  // namespace reference

struct IterationTrace {
  int iteration = 0;
  double total_energy = 0.0;
  std::vector<int> occupancy;
};

/// Called after each E-step with the 1-based iteration number.
using IterationCallback = std::function<void(int, const EStepResult&)>;

struct EmResult {
  std::vector<Eigen::VectorXd> estimates;
  ModelSet models;
  Assignment assignment;
  std::vector<IterationTrace> trace;
};

/// `config.iterations` rounds of E-step then M-step, starting from `init`.
/// Returned estimates come from the last E-step.
EmResult map_em(const PatchSet& patches, const ModelSet& init, const EmConfig& config,
                const IterationCallback& on_iteration = {});

/// Uniform random labels in [0, num_models), deterministic in `seed`.
Assignment random_assignment(std::size_t count, int num_models, std::uint64_t seed);

}  // namespace ple
