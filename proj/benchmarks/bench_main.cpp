#include <benchmark/benchmark.h>

#include "mbym2/datagen.hpp"
#include "mbym2/evaluation.hpp"
#include "mbym2/mcmc.hpp"
#include "mbym2/nonspatial.hpp"
#include "mbym2/spatial_closed_form.hpp"
#include "mbym2/spatial_structure.hpp"

using namespace mbym2;

namespace {

struct Fixture {
  ScaledPrecision precision;
  GenerationParams params;
  Dataset data;
  MatrixXd X;
  SpectralBasis spectral;

  Fixture()
      : precision(make_scaled_precision(california_counties(), PrecisionKind::car, 0.99)),
        params(default_generation_params(precision)),
        data(generate_dataset(params, 11)),
        X(design_matrix(data.X1)),
        spectral(spectral_decompose(precision)) {}
};

const Fixture& fixture() {
  static const Fixture f;
  return f;
}

void BM_ScaledPrecision(benchmark::State& state) {
  const auto graph = california_counties();
  const auto kind = state.range(0) == 0 ? PrecisionKind::car : PrecisionKind::sar;
  for (auto _ : state) benchmark::DoNotOptimize(make_scaled_precision(graph, kind, 0.99));
}
BENCHMARK(BM_ScaledPrecision)->Arg(0)->Arg(1);

void BM_SpectralDecompose(benchmark::State& state) {
  const auto& f = fixture();
  for (auto _ : state) benchmark::DoNotOptimize(spectral_decompose(f.precision));
}
BENCHMARK(BM_SpectralDecompose);

void BM_ConditionedEstimate(benchmark::State& state) {
  const auto& f = fixture();
  const auto ps = projected_spectral(f.precision, f.X);
  for (auto _ : state) {
    benchmark::DoNotOptimize(conditioned_estimate(f.data.Y, f.X, f.params.A, f.params.rho, ps));
  }
}
BENCHMARK(BM_ConditionedEstimate);

void BM_McmcIteration(benchmark::State& state) {
  const auto& f = fixture();
  SpatialConfig c;
  c.precision = f.precision;
  c.Sigma0 = default_sigma0(f.data.Y, f.X);
  Rng rng(5);
  ChainState s = initial_state(f.data.Y, f.X, c.Sigma0, rng);
  const MatrixXd xtx_chol = (f.X.transpose() * f.X).llt().matrixL();
  for (auto _ : state) {
    s.B = gibbs_update_beta(s, f.data.Y, f.X, xtx_chol, rng);
    s.G = gibbs_update_gamma(s, f.data.Y, f.X, f.spectral, rng);
    mh_update_M(s, f.data.Y, f.X, f.spectral, c, rng);
    mh_update_R(s, f.data.Y, f.X, f.spectral, c, rng);
  }
}
BENCHMARK(BM_McmcIteration);

void BM_KroneckerKl(benchmark::State& state) {
  const auto& f = fixture();
  const auto sar = spectral_decompose(make_scaled_precision(california_counties(), PrecisionKind::sar, 0.99));
  const KroneckerKl kl(f.spectral, sar);
  const auto p = generation_kronecker(f.params, f.X);
  const auto q = analysis_kronecker(f.X, MatrixXd::Ones(2, 2), f.params.A, f.params.rho);
  for (auto _ : state) benchmark::DoNotOptimize(kl(p, q));
}
BENCHMARK(BM_KroneckerKl);

void BM_DenseKl(benchmark::State& state) {
  const auto& f = fixture();
  const auto p = to_dense(generation_kronecker(f.params, f.X), f.precision.covariance);
  const auto q = to_dense(analysis_kronecker(f.X, MatrixXd::Ones(2, 2), f.params.A, f.params.rho),
                          f.precision.covariance);
  for (auto _ : state) benchmark::DoNotOptimize(gaussian_kl(p, q));
}
BENCHMARK(BM_DenseKl);

}  // namespace
BENCHMARK_MAIN();
