// Copyright 2026 The nqs-prune Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>

#include "nqs/error.hpp"
#include "nqs/oracle.hpp"
#include "nqs/sr.hpp"

namespace nqs {
namespace {

MaskedAnsatz random_ffnn(std::size_t side, double alpha, std::uint64_t seed, double scale = 1.0) {
  const auto arch = ArchitectureSpec::feed_forward(SquareLattice(side), alpha);
  auto theta = init_parameters(arch, InitScheme::normal, seed);
  for (double& t : theta) t *= scale;
  return MaskedAnsatz::dense(arch, theta);
}

// Explicit S and g built with plain loops.
void dense_s_and_g(const EstimatorSet& est, std::vector<double>& s, std::vector<double>& g) {
  const std::size_t n = est.cols;
  std::vector<double> mo(n, 0.0);
  double me = 0.0;
  for (std::size_t r = 0; r < est.rows; ++r) {
    me += est.weight(r) * est.e_loc[r];
    for (std::size_t k = 0; k < n; ++k) mo[k] += est.weight(r) * est.o[r * n + k];
  }
  s.assign(n * n, 0.0);
  g.assign(n, 0.0);
  for (std::size_t r = 0; r < est.rows; ++r)
    for (std::size_t i = 0; i < n; ++i) {
      const double oi = est.o[r * n + i] - mo[i];
      g[i] += 2.0 * est.weight(r) * oi * (est.e_loc[r] - me);
      for (std::size_t j = 0; j < n; ++j) s[i * n + j] += est.weight(r) * oi * (est.o[r * n + j] - mo[j]);
    }
}

EstimatorSet sampled_estimators(const MaskedAnsatz& ansatz, const HamiltonianSpec& spec, std::size_t rows) {
  SamplerConfig config;
  config.n_samples = rows;
  config.n_chains = 8;
  config.seed = 3;
  const auto batch = sample_batch(ansatz, config);
  return collect_estimators(ansatz, spec, batch.configs);
}

TEST(SRConfig, Validation) {
  SRConfig c;
  EXPECT_NO_THROW(c.validate());
  c.eta = -1.0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = SRConfig{};
  c.lambda = 0.0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = SRConfig{};
  c.cg_max_iter = 0;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Gradient, MatchesFiniteDifferenceOfExactEnergy) {
  const auto spec = HamiltonianSpec::tfim(SquareLattice(2), 1.3);
  const auto ansatz = random_ffnn(2, 2.0, 6, 4.0);
  const auto grad = estimate_gradient(enumerate_estimators(ansatz, spec));
  const double eps = 1e-6;
  ParameterVector theta(ansatz.parameters().begin(), ansatz.parameters().end());
  for (std::size_t k = 0; k < theta.size(); ++k) {
    auto plus = theta, minus = theta;
    plus[k] += eps;
    minus[k] -= eps;
    const double fd = (enumerate_expectation(ansatz.with_parameters(plus), spec).energy -
                       enumerate_expectation(ansatz.with_parameters(minus), spec).energy) /
                      (2 * eps);
    EXPECT_NEAR(grad[k], fd, 1e-6) << "parameter " << k;
  }
}

TEST(Gradient, NeedsTwoRows) {
  EstimatorSet est;
  est.rows = 1;
  est.cols = 1;
  est.o = {1.0};
  est.e_loc = {1.0};
  EXPECT_THROW(estimate_gradient(est), ContractViolation);
}

TEST(SMatvec, MatchesExplicitMatrix) {
  const auto spec = HamiltonianSpec::tfim(SquareLattice(3), 2.0);
  const auto ansatz = random_ffnn(3, 1.0, 2, 3.0);
  const auto est = sampled_estimators(ansatz, spec, 64);
  std::vector<double> s, g;
  dense_s_and_g(est, s, g);
  const auto grad = estimate_gradient(est);
  RngStream rng(1);
  std::vector<double> v(est.cols);
  for (double& x : v) x = rng.normal();
  const auto sv = s_matvec(est, v);
  double vsv = 0.0;
  for (std::size_t i = 0; i < est.cols; ++i) {
    double expected = 0.0;
    for (std::size_t j = 0; j < est.cols; ++j) expected += s[i * est.cols + j] * v[j];
    EXPECT_NEAR(sv[i], expected, 1e-10);
    EXPECT_NEAR(grad[i], g[i], 1e-10);
    vsv += v[i] * sv[i];
  }
  EXPECT_GE(vsv, -1e-12);
}

class SolveSR : public ::testing::TestWithParam<std::size_t> {};

// Rows below and above the parameter count exercise both direct forms.
TEST_P(SolveSR, DirectAndIterativeAgreeAndSolveTheSystem) {
  const auto spec = HamiltonianSpec::tfim(SquareLattice(3), 2.0);
  const auto ansatz = random_ffnn(3, 2.0, 2, 3.0);
  const auto est = sampled_estimators(ansatz, spec, GetParam());
  const auto g = estimate_gradient(est);
  SRConfig direct;
  direct.lambda = 1e-2;
  direct.solver = SolverKind::dense_cholesky;
  SRConfig iterative = direct;
  iterative.solver = SolverKind::conjugate_gradient;
  iterative.cg_tol = 1e-12;
  const auto a = solve_sr(est, g, direct);
  const auto b = solve_sr(est, g, iterative);
  EXPECT_EQ(a.lambda_used, 1e-2);
  EXPECT_GT(b.cg_iterations, 0u);
  const auto sa = s_matvec(est, a.delta);
  double gnorm = 0.0;
  for (double x : g) gnorm = std::max(gnorm, std::abs(x));
  for (std::size_t k = 0; k < est.cols; ++k) {
    EXPECT_NEAR(sa[k] + 1e-2 * a.delta[k], g[k], 1e-9 * (1.0 + gnorm));
    EXPECT_NEAR(a.delta[k], b.delta[k], 1e-7 * (1.0 + std::abs(a.delta[k])));
  }
}

INSTANTIATE_TEST_SUITE_P(Rows, SolveSR, ::testing::Values(32, 512));

TEST(SolveSR, ShrinksTowardGradientForLargeShift) {
  const auto spec = HamiltonianSpec::tfim(SquareLattice(2), 1.0);
  const auto ansatz = random_ffnn(2, 1.0, 2, 3.0);
  const auto est = enumerate_estimators(ansatz, spec);
  const auto g = estimate_gradient(est);
  SRConfig cfg;
  cfg.lambda = 1e8;
  const auto r = solve_sr(est, g, cfg);
  for (std::size_t k = 0; k < g.size(); ++k) EXPECT_NEAR(r.delta[k] * 1e8, g[k], 1e-6 * (1.0 + std::abs(g[k])));
}

TEST(Update, ZeroStepAndMaskConservation) {
  const auto spec = HamiltonianSpec::tfim(SquareLattice(3), 3.0);
  const auto dense = random_ffnn(3, 1.0, 5);
  const std::vector<std::size_t> pruned_idx{0, 10, 40, 80};
  const auto ansatz = apply_prune(dense, pruned_idx);
  const auto est = sampled_estimators(ansatz, spec, 128);
  EXPECT_EQ(est.cols, 77u);
  SRConfig cfg;
  cfg.eta = 0.0;
  const auto same = sr_update(ansatz, est, cfg);
  EXPECT_TRUE(std::equal(same.parameters().begin(), same.parameters().end(), ansatz.parameters().begin()));
  cfg.eta = 0.05;
  const auto moved = sr_update(ansatz, est, cfg);
  EXPECT_EQ(moved.mask(), ansatz.mask());
  for (std::size_t k : pruned_idx) EXPECT_EQ(moved.parameters()[k], 0.0);
  EXPECT_FALSE(std::equal(moved.parameters().begin(), moved.parameters().end(), ansatz.parameters().begin()));
}

TEST(Train, ConvergesOnSmallLattice) {
  const auto spec = HamiltonianSpec::tfim(SquareLattice(3), 3.04438);
  const double exact = lanczos_ground_energy(spec).energy;
  const auto arch = ArchitectureSpec::feed_forward(spec.lattice(), 2.0);
  const auto start = MaskedAnsatz::dense(arch, init_parameters(arch, InitScheme::normal, 1));
  SamplerConfig sampler;
  sampler.n_samples = 512;
  sampler.seed = 4;
  SRConfig sr;
  sr.eta = 0.02;
  const TrainResult result = train(start, spec, sampler, sr, 300);
  ASSERT_EQ(result.trace.size(), 300u);
  const double energy = enumerate_expectation(result.ansatz, spec).energy;
  EXPECT_LT(std::abs((energy - exact) / exact), 5e-3) << energy << " vs " << exact;
  EXPECT_GT(result.trace.front().energy, energy);

  const TrainResult again = train(start, spec, sampler, sr, 300);
  EXPECT_TRUE(std::equal(again.ansatz.parameters().begin(), again.ansatz.parameters().end(),
                         result.ansatz.parameters().begin()));
}

}  // namespace
}  // namespace nqs
