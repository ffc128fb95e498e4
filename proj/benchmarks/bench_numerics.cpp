// Dense kernels behind every class score.

#include "metaqda/numerics.hpp"

#include <benchmark/benchmark.h>

#include <random>

namespace {

using namespace metaqda;

Matrix random_spd(Index d, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Matrix a(d, d);
  for (Index i = 0; i < d; ++i)
    for (Index j = 0; j < d; ++j) a(i, j) = n(rng);
  return a * a.transpose() / static_cast<double>(d) + Matrix::Identity(d, d);
}

Vector random_vector(Index d, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Vector v(d);
  for (Index i = 0; i < d; ++i) v(i) = n(rng);
  return v;
}

void BM_Cholesky(benchmark::State& state) {
  std::mt19937_64 rng(1);
  const Matrix a = random_spd(state.range(0), rng);
  for (auto _ : state) {
    LowerTriangular l = cholesky(a);
    benchmark::DoNotOptimize(l);
  }
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_Cholesky)->RangeMultiplier(2)->Range(8, 512)->Complexity(benchmark::oNCubed);

void BM_MvnLogpdf(benchmark::State& state) {
  std::mt19937_64 rng(2);
  const Index d = state.range(0);
  const LowerTriangular l = cholesky(random_spd(d, rng));
  const Vector mu = random_vector(d, rng);
  const Vector x = random_vector(d, rng);
  for (auto _ : state) benchmark::DoNotOptimize(mvn_logpdf(x, mu, l));
  state.SetComplexityN(d);
}
BENCHMARK(BM_MvnLogpdf)->RangeMultiplier(2)->Range(8, 512)->Complexity(benchmark::oNSquared);

void BM_MvtLogpdf(benchmark::State& state) {
  std::mt19937_64 rng(3);
  const Index d = state.range(0);
  const LowerTriangular l = cholesky(random_spd(d, rng));
  const Vector loc = random_vector(d, rng);
  const Vector x = random_vector(d, rng);
  for (auto _ : state) benchmark::DoNotOptimize(mvt_logpdf(x, loc, l, static_cast<double>(d) + 3.0));
  state.SetComplexityN(d);
}
BENCHMARK(BM_MvtLogpdf)->RangeMultiplier(2)->Range(8, 512)->Complexity(benchmark::oNSquared);

}  // namespace
