// Copyright 2026 The nqs-prune Authors
// SPDX-License-Identifier: Apache-2.0

#include <benchmark/benchmark.h>

#include "nqs/oracle.hpp"
#include "nqs/sampler.hpp"
#include "nqs/sr.hpp"

namespace {

using namespace nqs;

MaskedAnsatz ffnn(std::size_t side, double alpha) {
  const auto arch = ArchitectureSpec::feed_forward(SquareLattice(side), alpha);
  return MaskedAnsatz::dense(arch, init_parameters(arch, InitScheme::normal, 1));
}

void BM_LogPsiDelta(benchmark::State& state) {
  const auto ansatz = ffnn(static_cast<std::size_t>(state.range(0)), 8.0);
  Walker walker(ansatz, SpinConfiguration(ansatz.input_size()));
  std::size_t site = 0;
  for (auto _ : state) {
    const FlipSet f{site};
    benchmark::DoNotOptimize(walker.delta(f));
    site = (site + 1) % ansatz.input_size();
  }
}
BENCHMARK(BM_LogPsiDelta)->Arg(4)->Arg(10);

void BM_LogPsiFull(benchmark::State& state) {
  const auto ansatz = ffnn(static_cast<std::size_t>(state.range(0)), 8.0);
  const SpinConfiguration sigma(ansatz.input_size());
  for (auto _ : state) benchmark::DoNotOptimize(ansatz.log_psi(sigma));
}
BENCHMARK(BM_LogPsiFull)->Arg(4)->Arg(10);

void BM_SampleBatch(benchmark::State& state) {
  const auto ansatz = ffnn(4, 8.0);
  SamplerConfig config;
  config.n_samples = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(sample_batch(ansatz, config));
    ++config.seed;
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_SampleBatch)->Arg(1024)->Unit(benchmark::kMillisecond);

void BM_SolveSR(benchmark::State& state) {
  const auto ansatz = ffnn(4, static_cast<double>(state.range(0)));
  const auto spec = HamiltonianSpec::tfim(SquareLattice(4), 3.04438);
  SamplerConfig sampler;
  sampler.n_samples = 1024;
  const auto batch = sample_batch(ansatz, sampler);
  const auto est = collect_estimators(ansatz, spec, batch.configs);
  const auto g = estimate_gradient(est);
  SRConfig cfg;
  cfg.solver = state.range(1) ? SolverKind::conjugate_gradient : SolverKind::dense_cholesky;
  for (auto _ : state) benchmark::DoNotOptimize(solve_sr(est, g, cfg));
}
BENCHMARK(BM_SolveSR)->Args({1, 0})->Args({8, 0})->Args({8, 1})->Unit(benchmark::kMillisecond);

void BM_LanczosTfim4x4(benchmark::State& state) {
  const auto spec = HamiltonianSpec::tfim(SquareLattice(4), 3.04438);
  for (auto _ : state) benchmark::DoNotOptimize(lanczos_ground_energy(spec));
}
BENCHMARK(BM_LanczosTfim4x4)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
