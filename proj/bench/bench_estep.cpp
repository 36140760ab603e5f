// Parallel E-/M-steps against the serial reference on a 64x64 textured
// image: 50% random mask (per-patch operators) and a 5x5 blur (shared,
// cached operator).
#include <benchmark/benchmark.h>

#include <cmath>

#include "ple/em.hpp"
#include "ple/init_bases.hpp"
#include "ple/operators.hpp"
#include "ple/patches.hpp"

namespace {

using namespace ple;

Image texture(int side) {
  Image img(side, side, 1);
  for (int r = 0; r < side; ++r)
    for (int c = 0; c < side; ++c)
      img.at(r, c) = 128 + 60 * std::sin(0.3 * r + 0.1 * c) + 40 * std::cos(0.05 * r * c / 8.0);
  return img;
}

struct Problem {
  PatchSet patches;
  ModelSet models;
};

const Problem& masked() {
  static const Problem p = [] {
    Problem out;
    const Image img = texture(64);
    const auto op = DegradationOperator::random_mask(64, 64, 0.5, 3);
    const Image y = apply(op, img);
    for (int r = 0; r + 8 <= 64; ++r)
      for (int c = 0; c + 8 <= 64; ++c) out.patches.add(read_patch(y, r, c, 8), restrict_to_patch(op, r, c, 8));
    InitConfig cfg;
    out.models = init_models(cfg);
    return out;
  }();
  return p;
}

const Problem& blurred() {
  static const Problem p = [] {
    Problem out;
    const Image img = texture(64);
    const auto op = DegradationOperator::masked_convolution(64, 64, Kernel::gaussian(1.0, 5), 2);
    const Image y = apply(op, img);
    out.patches.operators.push_back(restrict_to_patch(op, 2, 2, 8));
    for (int r = 0; r + 12 <= 64; ++r)
      for (int c = 0; c + 12 <= 64; ++c) out.patches.add_shared(read_patch(y, r, c, 12), 0);
    InitConfig cfg;
    cfg.patch_side = 12;
    out.models = init_models(cfg, InitMode::DirectionalOnly);
    return out;
  }();
  return p;
}

void BM_EStepMaskParallel(benchmark::State& state) {
  const auto& p = masked();
  for (auto _ : state) benchmark::DoNotOptimize(e_step(p.patches, p.models, 3.0));
}
void BM_EStepMaskSerial(benchmark::State& state) {
  const auto& p = masked();
  for (auto _ : state) benchmark::DoNotOptimize(reference::e_step(p.patches, p.models, 3.0));
}
void BM_EStepBlurCached(benchmark::State& state) {
  const auto& p = blurred();
  for (auto _ : state) benchmark::DoNotOptimize(e_step(p.patches, p.models, 5.0));
}
void BM_EStepBlurSerial(benchmark::State& state) {
  const auto& p = blurred();
  for (auto _ : state) benchmark::DoNotOptimize(reference::e_step(p.patches, p.models, 5.0));
}

void BM_MStepParallel(benchmark::State& state) {
  const auto& p = masked();
  const EStepResult e = e_step(p.patches, p.models, 3.0);
  for (auto _ : state) benchmark::DoNotOptimize(m_step(e.estimates, e.assignment, 30.0, p.models));
}
void BM_MStepSerial(benchmark::State& state) {
  const auto& p = masked();
  const EStepResult e = e_step(p.patches, p.models, 3.0);
  for (auto _ : state) benchmark::DoNotOptimize(reference::m_step(e.estimates, e.assignment, 30.0, p.models));
}

}  // namespace

BENCHMARK(BM_EStepMaskParallel)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_EStepMaskSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_EStepBlurCached)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_EStepBlurSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_MStepParallel)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_MStepSerial)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
