// Copyright 2026 The nqs-prune Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>

#include "nqs/error.hpp"
#include "nqs/observables.hpp"
#include "nqs/oracle.hpp"

namespace nqs {
namespace {

MaskedAnsatz random_ffnn(std::size_t side, double alpha, std::uint64_t seed, double scale) {
  const auto arch = ArchitectureSpec::feed_forward(SquareLattice(side), alpha);
  auto theta = init_parameters(arch, InitScheme::normal, seed);
  for (double& t : theta) t *= scale;
  return MaskedAnsatz::dense(arch, theta);
}

SampleBatch draw(const MaskedAnsatz& ansatz, std::size_t n, std::uint64_t seed) {
  SamplerConfig config;
  config.n_samples = n;
  config.n_chains = 32;
  config.seed = seed;
  return sample_batch(ansatz, config);
}

TEST(EnergyStats, Example) {
  const std::vector<double> e{1.0, 2.0, 3.0, 4.0};
  const EnergyStats s = energy_stats(e);
  EXPECT_DOUBLE_EQ(s.mean, 2.5);
  EXPECT_DOUBLE_EQ(s.variance, 5.0 / 3.0);
  EXPECT_DOUBLE_EQ(s.stat_err, std::sqrt(5.0 / 12.0));
  EXPECT_THROW(energy_stats(std::vector<double>{1.0}), ContractViolation);
}

TEST(Errors, RelativeAndPerSpin) {
  EXPECT_NEAR(relative_error(-9.9, -10.0), 0.01, 1e-15);
  EXPECT_NEAR(relative_error(-10.1, -10.0), 0.01, 1e-15);
  EXPECT_THROW(relative_error(1.0, 0.0), ContractViolation);
  EXPECT_DOUBLE_EQ(absolute_error_per_spin(-9.0, -10.0, 4), 0.25);
}

TEST(Magnetization, ZFromSamples) {
  SampleBatch batch;
  batch.configs = {SpinConfiguration(4), SpinConfiguration(std::vector<Spin>{1, -1, -1, -1})};
  EXPECT_DOUBLE_EQ(magnetization_z(batch), 0.25);
}

TEST(Magnetization, XOfUniformStateIsOne) {
  const auto arch = ArchitectureSpec::feed_forward(SquareLattice(3), 1.0);
  const auto flat = MaskedAnsatz::dense(arch, ParameterVector(arch.parameter_count(), 0.0));
  EXPECT_DOUBLE_EQ(magnetization_x(flat, draw(flat, 64, 1)), 1.0);
}

TEST(Magnetization, XMatchesEnumeration) {
  const auto ansatz = random_ffnn(2, 2.0, 4, 3.0);
  const auto p = enumerate_probabilities(ansatz);
  double exact = 0.0;
  for (std::size_t k = 0; k < 16; ++k) {
    const auto s = SpinConfiguration::from_index(k, 4);
    for (std::size_t i = 0; i < 4; ++i) exact += p[k] * std::exp(log_psi_delta(ansatz, s, FlipSet{i})) / 4.0;
  }
  EXPECT_NEAR(magnetization_x(ansatz, draw(ansatz, 32768, 2)), exact, 0.02);
}

TEST(Fidelity, SelfOverlapIsOne) {
  const auto ansatz = random_ffnn(3, 1.0, 4, 2.0);
  const auto a = draw(ansatz, 1024, 1);
  const auto b = draw(ansatz, 1024, 2);
  const FidelityEstimate f = fidelity(ansatz, ansatz, a, b);
  EXPECT_DOUBLE_EQ(f.value, 1.0);
  EXPECT_DOUBLE_EQ(f.squared, 1.0);
}

TEST(Fidelity, MatchesEnumeratedOverlap) {
  const auto a = random_ffnn(3, 1.0, 4, 3.0);
  const auto b = random_ffnn(3, 1.0, 5, 3.0);
  const double exact = enumerate_overlap(a, b);
  const FidelityEstimate f = fidelity(a, b, draw(a, 32768, 1), draw(b, 32768, 2));
  EXPECT_NEAR(f.value, exact, 0.03) << "exact " << exact;
  EXPECT_GE(f.value, 0.0);
  EXPECT_LE(f.value, 1.0);
  EXPECT_GT(f.stat_err, 0.0);
}

}  // namespace
}  // namespace nqs
