// Per-episode costs: fitting, prediction and one meta-gradient.

#include "metaqda/classifier.hpp"
#include "metaqda/episodes.hpp"
#include "metaqda/trainer.hpp"

#include <benchmark/benchmark.h>

namespace {

using namespace metaqda;

Episode make_episode(Index d, int shots) {
  Rng rng(7);
  const SyntheticTaskSpec spec = make_benchmark_spec(d, 5, 6.0, kBenchmarkKappa, 7);
  const FeatureDataset ds = generate_synthetic(spec, 5, shots + 15, rng);
  return sample_episode(ds, 5, shots, 15, rng);
}

Mode mode_arg(const benchmark::State& state) { return state.range(1) ? Mode::FullBayes : Mode::Map; }

void BM_Fit(benchmark::State& state) {
  const Index d = state.range(0);
  const Episode ep = make_episode(d, 5);
  const NiwPrior prior = default_prior(d);
  for (auto _ : state) {
    QdaModel model = QdaModel::fit(prior, ep.support, mode_arg(state));
    benchmark::DoNotOptimize(model);
  }
}
BENCHMARK(BM_Fit)->ArgsProduct({{16, 64, 256}, {0, 1}})->ArgNames({"d", "fb"});

void BM_PredictEpisode(benchmark::State& state) {
  const Index d = state.range(0);
  const Episode ep = make_episode(d, 5);
  const QdaModel model = QdaModel::fit(default_prior(d), ep.support, mode_arg(state));
  for (auto _ : state) {
    for (const Vector& x : ep.query) benchmark::DoNotOptimize(model.predict(x));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(ep.query.size()));
}
BENCHMARK(BM_PredictEpisode)->ArgsProduct({{16, 64, 256}, {0, 1}})->ArgNames({"d", "fb"});

void BM_LossAndGrad(benchmark::State& state) {
  const Index d = state.range(0);
  const Episode ep = make_episode(d, 5);
  const NiwPrior prior = default_prior(d);
  for (auto _ : state) {
    LossAndGradient g = loss_and_grad(prior, ep, mode_arg(state), LossKind::Discriminative);
    benchmark::DoNotOptimize(g);
  }
}
BENCHMARK(BM_LossAndGrad)->ArgsProduct({{16, 64, 256}, {0, 1}})->ArgNames({"d", "fb"});

}  // namespace

BENCHMARK_MAIN();
