#include <random>

#include <gtest/gtest.h>

#include "ple/em.hpp"
#include "ple/errors.hpp"
#include "ple/estimator.hpp"
#include "ple/init_bases.hpp"
#include "ple/patches.hpp"
#include "support.hpp"

using namespace ple;
using namespace ple::testing;

namespace {

Image crop(int size, int row = 20, int col = 30) {
  return read_image(PLE_TEST_DATA "/camera_head.pgm").crop(row, col, size, size);
}

PatchSet masked_patches(const Image& img, double keep, std::uint64_t seed, int stride = 2) {
  const auto op = DegradationOperator::random_mask(img.width(), img.height(), keep, seed);
  const Image y = apply(op, img);
  PatchSet set;
  for (const auto& p : extract_patches(y, 8, stride)) set.add(p.values, restrict_to_patch(op, p.row, p.col, 8));
  return set;
}

PatchSet blurred_patches(const Image& img, int stride = 2) {
  const auto op = DegradationOperator::masked_convolution(img.width(), img.height(), Kernel::gaussian(1.0, 5), 2);
  const Image y = apply(op, img);
  PatchSet set;
  set.operators.push_back(restrict_to_patch(op, 2, 2, 8));
  for (int r : patch_offsets(img.height(), 12, stride))
    for (int c : patch_offsets(img.width(), 12, stride)) set.add_shared(read_patch(y, r, c, 12), 0);
  return set;
}

ModelSet hierarchical_models() {
  InitConfig cfg;
  cfg.patch_side = 12;
  cfg.hierarchical = true;
  cfg.num_models = 7;
  cfg.positions = 4;
  return init_models(cfg);
}

}  // namespace

TEST(PatchSet, RejectsMismatchedObservation) {
  PatchSet set;
  set.add(Eigen::VectorXd::Zero(4), PatchOperatorMatrix::from_diagonal(Eigen::VectorXd::Ones(4), false, 0));
  EXPECT_THROW(set.add_shared(Eigen::VectorXd::Zero(3), 0), DimensionMismatch);
  EXPECT_THROW(set.add_shared(Eigen::VectorXd::Zero(4), 1), InvalidArgument);
  EXPECT_EQ(set.size(), 1u);
}

TEST(Assignment, ClustersFollowLabels) {
  const std::vector<std::size_t> fams{2, 0, 1};
  const auto a = Assignment::from_labels({0, 2, 0, 1}, {1, 0, -1, -1}, 3, fams);
  EXPECT_EQ(a.clusters[0], (std::vector<int>{0, 2}));
  EXPECT_EQ(a.occupancy(), (std::vector<int>{2, 1, 1}));
  EXPECT_EQ(a.position_clusters[0][1], std::vector<int>{0});
  EXPECT_EQ(a.position_clusters[2][0], std::vector<int>{1});
  EXPECT_THROW(Assignment::from_labels({3}, {-1}, 3), InvalidArgument);
}

TEST(RandomAssignment, DeterministicAndInRange) {
  const auto a = random_assignment(500, 19, 42);
  const auto b = random_assignment(500, 19, 42);
  EXPECT_EQ(a.model, b.model);
  int total = 0;
  for (int n : a.occupancy()) {
    EXPECT_GT(n, 0);
    total += n;
  }
  EXPECT_EQ(total, 500);
  EXPECT_NE(random_assignment(500, 19, 43).model, a.model);
}

TEST(EStep, SinglePatchMatchesSelectModel) {
  std::mt19937_64 rng(1);
  ModelSet set;
  set.models.push_back(random_model(16, rng));
  PatchSet patches;
  const auto op = random_operator(1, 4, rng);
  const Eigen::VectorXd y = op.apply(sample(set.models[0], rng));
  patches.add(y, op);
  const auto e = e_step(patches, set, 3.0);
  const auto s = select_model(y, op, set.models, 3.0);
  EXPECT_EQ(e.estimates[0], s.estimate);
  EXPECT_EQ(e.total_energy, s.energy);
}

TEST(EStep, TotalIsSumOfRecomputedEnergies) {
  const PatchSet patches = masked_patches(crop(32), 0.5, 3);
  const ModelSet models = init_models({});
  const auto e = e_step(patches, models, 3.0);
  double total = 0;
  for (std::size_t i = 0; i < patches.size(); ++i) {
    const auto& m = models.models[static_cast<std::size_t>(e.assignment.model[i])];
    const double energy = selection_energy(patches.observations[i], patches.op(i), m, 3.0, e.estimates[i]);
    EXPECT_NEAR(energy, e.energies[i], 1e-8 * std::abs(energy));
    total += e.energies[i];
  }
  EXPECT_EQ(total, e.total_energy);
  EXPECT_EQ(e.evaluations, static_cast<long long>(patches.size() * models.models.size()));
}

TEST(EStep, ParallelMatchesReferenceOnMasks) {
  const PatchSet patches = masked_patches(crop(40), 0.4, 4);
  const ModelSet models = init_models({});
  const auto a = e_step(patches, models, 3.0);
  const auto b = reference::e_step(patches, models, 3.0);
  EXPECT_EQ(a.assignment.model, b.assignment.model);
  EXPECT_EQ(a.estimates, b.estimates);
  EXPECT_EQ(a.energies, b.energies);
}

TEST(EStep, ParallelMatchesReferenceHierarchical) {
  const PatchSet patches = blurred_patches(crop(36), 3);
  const ModelSet models = hierarchical_models();
  const auto a = e_step(patches, models, 5.0);
  const auto b = reference::e_step(patches, models, 5.0);
  EXPECT_EQ(a.assignment.model, b.assignment.model);
  EXPECT_EQ(a.assignment.position, b.assignment.position);
  EXPECT_EQ(a.estimates, b.estimates);
  // Position models are only tried when the winning direction has a family.
  long long expected = 0;
  for (int p : a.assignment.position) expected += 7 + (p >= 0 ? 4 : 0);
  EXPECT_EQ(a.evaluations, expected);
  EXPECT_EQ(b.evaluations, expected);
}

TEST(EStep, FilterCacheIsBitIdentical) {
  const PatchSet patches = blurred_patches(crop(36), 3);
  const ModelSet models = hierarchical_models();
  const auto on = e_step(patches, models, 5.0, {true});
  const auto off = e_step(patches, models, 5.0, {false});
  EXPECT_EQ(on.estimates, off.estimates);
  EXPECT_EQ(on.energies, off.energies);
  EXPECT_EQ(on.assignment.position, off.assignment.position);
}

TEST(EStep, JointSelectionWithEqualChannels) {
  const PatchSet gray = masked_patches(crop(32), 0.5, 5);
  const std::vector<PatchSet> channels(3, gray);
  const ModelSet models = init_models({});
  const auto joint = e_step_joint(channels, models, 3.0);
  const auto single = e_step(gray, models, 3.0);
  EXPECT_EQ(joint.assignment.model, single.assignment.model);
  ASSERT_EQ(joint.estimates[0].size(), 3 * 64);
  for (std::size_t i = 0; i < gray.size(); ++i)
    for (int c = 0; c < 3; ++c) EXPECT_EQ(joint.estimates[i].segment(64 * c, 64), single.estimates[i]);
  EXPECT_NEAR(joint.total_energy, 3 * single.total_energy, 1e-9 * std::abs(joint.total_energy));
}

TEST(MStep, SinglePatchClusterIsFloor) {
  Eigen::VectorXd p(4);
  p << 1, 2, 3, 4;
  const std::vector<Eigen::VectorXd> est{p};
  ModelSet prior;
  std::mt19937_64 rng(6);
  prior.models.push_back(random_model(4, rng));
  const auto out = m_step(est, Assignment::from_labels({0}, {-1}, 1), 30.0, prior);
  EXPECT_EQ(out.models[0].mean(), p);
  EXPECT_TRUE(out.models[0].covariance().isApprox(30.0 * Eigen::MatrixXd::Identity(4, 4)));
  for (int i = 0; i < 4; ++i) EXPECT_NEAR(out.models[0].eigenvalues()[i], 30.0, 1e-12);
}

TEST(MStep, RecoversSampledCovariance) {
  std::mt19937_64 rng(7);
  const auto truth = random_model(6, rng, 10.0, 100.0);
  std::vector<Eigen::VectorXd> est;
  for (int i = 0; i < 100000; ++i) est.push_back(sample(truth, rng));
  ModelSet prior;
  prior.models.push_back(truth);
  const auto out = m_step(est, Assignment::from_labels(std::vector<int>(est.size(), 0),
                                                       std::vector<int>(est.size(), -1), 1),
                          30.0, prior);
  const Eigen::MatrixXd expect = truth.covariance() + 30.0 * Eigen::MatrixXd::Identity(6, 6);
  EXPECT_LT((out.models[0].covariance() - expect).norm() / expect.norm(), 0.02);
}

TEST(MStep, EmptyClusterKeepsPrior) {
  std::mt19937_64 rng(8);
  ModelSet prior;
  prior.models = {random_model(4, rng), random_model(4, rng)};
  const std::vector<Eigen::VectorXd> est{gaussian_vector(4, rng), gaussian_vector(4, rng)};
  const auto out = m_step(est, Assignment::from_labels({0, 0}, {-1, -1}, 2), 30.0, prior);
  EXPECT_TRUE(out.models[1] == prior.models[1]);
  EXPECT_FALSE(out.models[0] == prior.models[0]);
}

TEST(MStep, ParallelMatchesReference) {
  const PatchSet patches = blurred_patches(crop(36), 3);
  const ModelSet models = hierarchical_models();
  const auto e = e_step(patches, models, 5.0);
  const auto a = m_step(e.estimates, e.assignment, 30.0, models);
  const auto b = reference::m_step(e.estimates, e.assignment, 30.0, models);
  for (std::size_t k = 0; k < a.models.size(); ++k) {
    const double scale = a.models[k].covariance().norm();
    EXPECT_LT((a.models[k].covariance() - b.models[k].covariance()).norm(), 1e-9 * scale);
    EXPECT_LT((a.models[k].mean() - b.models[k].mean()).norm(), 1e-9 * std::max(1.0, a.models[k].mean().norm()));
    for (std::size_t p = 0; p < a.positions[k].size(); ++p)
      EXPECT_LT((a.positions[k][p].covariance() - b.positions[k][p].covariance()).norm(),
                1e-9 * a.positions[k][p].covariance().norm());
  }
}

TEST(MStep, PositionModelsAreRefit) {
  const PatchSet patches = blurred_patches(crop(36), 3);
  const ModelSet models = hierarchical_models();
  const auto e = e_step(patches, models, 5.0);
  const auto out = m_step(e.estimates, e.assignment, 30.0, models);
  int refit = 0;
  for (std::size_t k = 0; k < models.positions.size(); ++k)
    for (std::size_t p = 0; p < models.positions[k].size(); ++p) {
      const bool used = !e.assignment.position_clusters[k][p].empty();
      EXPECT_EQ(used, !(out.positions[k][p] == models.positions[k][p]));
      refit += used;
    }
  EXPECT_GT(refit, 0);
}

TEST(MapEm, OneIterationIsOneEStepThenOneMStep) {
  const PatchSet patches = masked_patches(crop(32), 0.5, 9);
  const ModelSet init = init_models({});
  EmConfig cfg;
  cfg.iterations = 1;
  int calls = 0;
  const auto r = map_em(patches, init, cfg, [&](int t, const EStepResult&) {
    EXPECT_EQ(t, 1);
    ++calls;
  });
  const auto e = e_step(patches, init, cfg.sigma);
  EXPECT_EQ(calls, 1);
  EXPECT_EQ(r.estimates, e.estimates);
  ASSERT_EQ(r.trace.size(), 1u);
  EXPECT_EQ(r.trace[0].total_energy, e.total_energy);
  const auto m = m_step(e.estimates, e.assignment, cfg.epsilon, init);
  for (std::size_t k = 0; k < m.models.size(); ++k) EXPECT_TRUE(r.models.models[k] == m.models[k]);
}

TEST(MapEm, RepeatRunsAreBitIdentical) {
  const PatchSet patches = masked_patches(crop(32), 0.5, 10);
  EmConfig cfg;
  cfg.iterations = 3;
  const auto a = map_em(patches, init_models({}), cfg);
  const auto b = map_em(patches, init_models({}), cfg);
  EXPECT_EQ(a.estimates, b.estimates);
  EXPECT_EQ(a.assignment.model, b.assignment.model);
  for (std::size_t t = 0; t < a.trace.size(); ++t) EXPECT_EQ(a.trace[t].total_energy, b.trace[t].total_energy);
}

TEST(MapEm, ModelsKeepInvariants) {
  const PatchSet patches = masked_patches(crop(40), 0.5, 11);
  EmConfig cfg;
  cfg.iterations = 3;
  const auto r = map_em(patches, init_models({}), cfg);
  for (const auto& m : r.models.models) {
    EXPECT_LT(m.orthonormality_error(), 1e-8);
    EXPECT_LT(m.reconstruction_error(), 1e-8 * m.eigenvalues()[0]);
    EXPECT_GE(m.eigenvalues().minCoeff(), cfg.epsilon * (1 - 1e-12));
  }
}

// Against the models used in an E-step, re-selection never raises the
// energy of the previous labels.
TEST(MapEm, SelectionNeverRaisesEnergyAtFixedModels) {
  for (int problem = 0; problem < 20; ++problem) {
    const PatchSet patches = masked_patches(crop(24, 10 + 3 * problem, 5 + 4 * problem), 0.5, 100 + problem, 3);
    ModelSet models = init_models({});
    auto prev = e_step(patches, models, 3.0);
    for (int t = 0; t < 2; ++t) {
      models = m_step(prev.estimates, prev.assignment, 30.0, models);
      const auto next = e_step(patches, models, 3.0);
      double kept = 0;
      for (std::size_t i = 0; i < patches.size(); ++i)
        kept += estimate_patch(patches.observations[i], patches.op(i),
                               models.models[static_cast<std::size_t>(prev.assignment.model[i])], 3.0)
                    .energy;
      EXPECT_LE(next.total_energy, kept);
      prev = next;
    }
  }
}

TEST(MapEm, RejectsBadConfig) {
  const PatchSet patches = masked_patches(crop(16), 0.5, 12);
  EmConfig cfg;
  cfg.iterations = 0;
  EXPECT_THROW(map_em(patches, init_models({}), cfg), InvalidArgument);
}
