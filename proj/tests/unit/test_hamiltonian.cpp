// Copyright 2026 The nqs-prune Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>

#include "nqs/error.hpp"
#include "nqs/hamiltonian.hpp"
#include "nqs/oracle.hpp"

namespace nqs {
namespace {

constexpr double kCritical = 3.04438;

TEST(DiagonalEnergy, Examples) {
  const auto tfim = HamiltonianSpec::tfim(SquareLattice(2), 1.0);
  EXPECT_DOUBLE_EQ(diagonal_energy(tfim, SpinConfiguration(4)), -4.0);
  EXPECT_DOUBLE_EQ(diagonal_energy(tfim, flip(SpinConfiguration(4), FlipSet{0})), 0.0);
  const auto tc = HamiltonianSpec::toric_code(ToricLattice(3));
  EXPECT_DOUBLE_EQ(diagonal_energy(tc, SpinConfiguration(18)), -9.0);
  EXPECT_THROW(diagonal_energy(tc, SpinConfiguration(4)), ContractViolation);
}

TEST(DiagonalEnergy, ToricSingleFlipBreaksTwoPlaquettes) {
  const auto tc = HamiltonianSpec::toric_code(ToricLattice(3));
  for (std::size_t e = 0; e < 18; ++e)
    EXPECT_DOUBLE_EQ(diagonal_energy(tc, flip(SpinConfiguration(18), FlipSet{e})), -9.0 + 4.0);
}

TEST(ConnectedElements, Tfim) {
  const auto spec = HamiltonianSpec::tfim(SquareLattice(4), kCritical);
  const auto elements = connected_elements(spec, SpinConfiguration(16));
  ASSERT_EQ(elements.size(), 16u);
  for (std::size_t i = 0; i < 16; ++i) {
    EXPECT_EQ(elements[i].flips.size(), 1u);
    EXPECT_EQ(elements[i].flips.sites()[0], i);
    EXPECT_DOUBLE_EQ(elements[i].amplitude, -kCritical);
  }
  const auto zero = HamiltonianSpec::tfim(SquareLattice(4), 0.0);
  ASSERT_EQ(zero.connected_elements().size(), 16u);
  for (const auto& el : zero.connected_elements()) EXPECT_EQ(el.amplitude, 0.0);
}

TEST(ConnectedElements, Toric) {
  const auto spec = HamiltonianSpec::toric_code(ToricLattice(3));
  const auto elements = connected_elements(spec, SpinConfiguration(18));
  ASSERT_EQ(elements.size(), 9u);
  for (const auto& el : elements) {
    EXPECT_EQ(el.flips.size(), 4u);
    EXPECT_DOUBLE_EQ(el.amplitude, -1.0);
  }
}

TEST(HamiltonianSpec, RejectsBadKappa) {
  EXPECT_THROW(HamiltonianSpec::tfim(SquareLattice(2), -1.0), ConfigError);
  EXPECT_THROW(HamiltonianSpec::tfim(SquareLattice(2), std::nan("")), ConfigError);
  EXPECT_THROW(HamiltonianSpec::tfim(SquareLattice(2), INFINITY), ConfigError);
}

MaskedAnsatz zero_ansatz(const Lattice& lattice) {
  const auto arch = ArchitectureSpec::feed_forward(lattice, 1.0);
  return MaskedAnsatz::dense(arch, ParameterVector(arch.parameter_count(), 0.0));
}

TEST(LocalEnergy, UniformState) {
  const auto tfim = HamiltonianSpec::tfim(SquareLattice(2), 1.0);
  EXPECT_DOUBLE_EQ(local_energy(tfim, zero_ansatz(tfim.lattice()), SpinConfiguration(4)), -8.0);
  const auto tc = HamiltonianSpec::toric_code(ToricLattice(3));
  EXPECT_DOUBLE_EQ(local_energy(tc, zero_ansatz(tc.lattice()), SpinConfiguration(18)), -18.0);
}

TEST(LocalEnergy, ExactToricStateHasConstantLocalEnergy) {
  const auto tc = HamiltonianSpec::toric_code(ToricLattice(3));
  const MaskedAnsatz state = build_toric_solution(3, 8.0);
  SpinConfiguration sigma(18);
  RngStream rng(3);
  const ToricLattice lattice(3);
  for (int step = 0; step < 200; ++step) {
    const Cell& star = lattice.vertices()[rng.below(9)];
    sigma = flip(sigma, FlipSet(star));
    EXPECT_DOUBLE_EQ(local_energy(tc, state, sigma), -18.0);
  }
}

TEST(LocalEnergy, MatchesDenseMatrixElements) {
  // E_loc(sigma) = sum_sigma' H_{sigma sigma'} psi(sigma') / psi(sigma), with H from the Lanczos operator.
  const auto spec = HamiltonianSpec::tfim(SquareLattice(2), 0.7);
  const auto arch = ArchitectureSpec::feed_forward(spec.lattice(), 2.0);
  const MaskedAnsatz ansatz = MaskedAnsatz::dense(arch, init_parameters(arch, InitScheme::normal, 9));
  std::vector<double> psi(16);
  for (std::size_t s = 0; s < 16; ++s) psi[s] = std::exp(ansatz.log_psi(SpinConfiguration::from_index(s, 4)));
  std::vector<double> h_psi;
  apply_hamiltonian(spec, psi, h_psi);
  for (std::size_t s = 0; s < 16; ++s)
    EXPECT_NEAR(local_energy(spec, ansatz, SpinConfiguration::from_index(s, 4)), h_psi[s] / psi[s], 1e-12);
}

TEST(LocalEnergy, ClampsHugeRatios) {
  EXPECT_DOUBLE_EQ(safe_ratio(0.0), 1.0);
  EXPECT_DOUBLE_EQ(safe_ratio(800.0), std::exp(kMaxLogRatio));
  EXPECT_TRUE(std::isfinite(safe_ratio(1e6)));
}

TEST(LocalEnergy, EnumeratedMeanMatchesRayleighQuotient) {
  // <H> from |psi|^2-weighted local energies equals psi^T H psi / psi^T psi.
  for (const auto& spec : {HamiltonianSpec::tfim(SquareLattice(3), kCritical),
                           HamiltonianSpec::tfim(SquareLattice(4), 1.5),
                           HamiltonianSpec::toric_code(ToricLattice(2))}) {
    const auto arch = ArchitectureSpec::feed_forward(spec.lattice(), 1.0);
    const MaskedAnsatz ansatz = MaskedAnsatz::dense(arch, init_parameters(arch, InitScheme::normal, 4));
    const std::size_t dim = std::size_t{1} << spec.size();
    std::vector<double> psi(dim);
    for (std::size_t s = 0; s < dim; ++s) psi[s] = std::exp(ansatz.log_psi(SpinConfiguration::from_index(s, spec.size())));
    std::vector<double> h_psi;
    apply_hamiltonian(spec, psi, h_psi);
    double num = 0.0, den = 0.0;
    for (std::size_t s = 0; s < dim; ++s) {
      num += psi[s] * h_psi[s];
      den += psi[s] * psi[s];
    }
    const double rayleigh = num / den;
    const Enumeration en = enumerate_expectation(ansatz, spec);
    EXPECT_NEAR(en.energy, rayleigh, 1e-12 * std::abs(rayleigh)) << spec.descriptor();
  }
}

}  // namespace
}  // namespace nqs
