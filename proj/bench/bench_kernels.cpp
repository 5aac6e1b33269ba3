// Serial reference vs OpenMP kernels. Run with --benchmark_filter to pick one.

#include <benchmark/benchmark.h>
#include <omp.h>

#include "simplex_uq/kernels.hpp"
#include "simplex_uq/synth.hpp"

namespace {

using namespace simplex_uq;

const MixtureDesign kUniform{DesignKind::kUniformSimplex, 5, 1};

void BM_MomentsSerial(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(accumulate_moments_serial(kUniform, n, 1));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_MomentsParallel(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const int threads = omp_get_max_threads();
  for (auto _ : state) benchmark::DoNotOptimize(accumulate_moments_parallel(kUniform, n, 1, threads));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

Matrix residuals(Eigen::Index t, Eigen::Index n) {
  Rng rng(3);
  Matrix r(t, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = 0; i < t; ++i) r(i, j) = rng.normal();
  }
  return r;
}

void BM_CovarianceSerial(benchmark::State& state) {
  const Matrix r = residuals(state.range(0), 1000);
  for (auto _ : state) benchmark::DoNotOptimize(residual_covariance_serial(r, 1000.0));
}

void BM_CovarianceParallel(benchmark::State& state) {
  const Matrix r = residuals(state.range(0), 1000);
  const int threads = omp_get_max_threads();
  for (auto _ : state) benchmark::DoNotOptimize(residual_covariance_parallel(r, 1000.0, threads));
}

ReplicationPlan plan() {
  ReplicationPlan p;
  p.true_operator = make_operator(spectra_preset(Separability::kEasy, 5, 64), 5);
  p.design = {DesignKind::kMultinomial, 5, 1};
  p.samples = 500;
  p.noise_sd = Vector::Constant(64, 0.1);
  p.replications = 64;
  p.seed = 11;
  return p;
}

void BM_ReplicationsSerial(benchmark::State& state) {
  const ReplicationPlan p = plan();
  for (auto _ : state) benchmark::DoNotOptimize(replicate_estimates_serial(p));
}

void BM_ReplicationsParallel(benchmark::State& state) {
  const ReplicationPlan p = plan();
  const int threads = omp_get_max_threads();
  for (auto _ : state) benchmark::DoNotOptimize(replicate_estimates_parallel(p, threads));
}

}  // namespace

BENCHMARK(BM_MomentsSerial)->Arg(1 << 18);
BENCHMARK(BM_MomentsParallel)->Arg(1 << 18);
BENCHMARK(BM_CovarianceSerial)->Arg(64)->Arg(256);
BENCHMARK(BM_CovarianceParallel)->Arg(64)->Arg(256);
BENCHMARK(BM_ReplicationsSerial);
BENCHMARK(BM_ReplicationsParallel);

BENCHMARK_MAIN();
