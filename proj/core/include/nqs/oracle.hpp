// Copyright 2026 The nqs-prune Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <vector>

#include "nqs/ansatz.hpp"
#include "nqs/hamiltonian.hpp"
#include "nqs/sr.hpp"

namespace nqs {

enum class SolutionMethod { lanczos, dense, analytic };

struct ExactSolution {
  double energy = 0.0;
  SolutionMethod method = SolutionMethod::lanczos;
  std::size_t n = 0;
  std::size_t iterations = 0;
};

/// Applies H to a full state vector of length 2^N (basis index as in
/// SpinConfiguration::from_index).
void apply_hamiltonian(const HamiltonianSpec& spec, const std::vector<double>& in, std::vector<double>& out,
                       std::size_t threads = 1);

/// Matrix-free Lanczos from the normalized all-ones vector with full
/// reorthogonalization while the Krylov basis fits in memory. Stops when
/// successive lowest Ritz values differ by less than `tol`.
ExactSolution lanczos_ground_energy(const HamiltonianSpec& spec, std::size_t max_n = 20, double tol = 1e-10,
                                    std::size_t threads = 1);

/// Lowest eigenvalue of the explicitly built 2^N x 2^N matrix; N <= max_n.
ExactSolution dense_ground_energy(const HamiltonianSpec& spec, std::size_t max_n = 12);

/// -2 L^2. Requires L >= 2.
double toric_ground_energy(std::size_t side);

/// Exact expectations over all 2^N configurations under |psi|^2.
struct Enumeration {
  double energy = 0.0;
  double energy_sq = 0.0;
  double variance = 0.0;
  /// log of sum_sigma psi(sigma)^2.
  double log_norm = 0.0;
  /// sum_sigma p(sigma) (E_loc(sigma) - reference), accurate when the
  /// deviation is far below the rounding error of `energy`.
  std::optional<double> excess;
};

Enumeration enumerate_expectation(const MaskedAnsatz& ansatz, const HamiltonianSpec& spec,
                                  std::optional<double> reference = std::nullopt, std::size_t max_n = 20);

/// |<a|b>| / (||a|| ||b||) by enumeration.
double enumerate_overlap(const MaskedAnsatz& a, const MaskedAnsatz& b, std::size_t max_n = 20);

/// Normalized probabilities |psi|^2 / Z for every basis index.
std::vector<double> enumerate_probabilities(const MaskedAnsatz& ansatz, std::size_t max_n = 20);

/// Estimator set over every configuration, rows weighted by |psi|^2 / Z.
EstimatorSet enumerate_estimators(const MaskedAnsatz& ansatz, const HamiltonianSpec& spec, std::size_t max_n = 16);

/// The eight sign patterns of length four with an odd number of -1 entries:
/// four with one minus sign followed by four with three.
struct OddParityFilterSet {
  static constexpr std::size_t kPatterns = 8;
  std::array<std::array<int, 4>, kPatterns> patterns{};
  double magnitude = 0.0;

  explicit OddParityFilterSet(double w);
};

/// Feed-forward toric-code state in which hidden unit 8p + k of a width
/// 8 L^2 network connects to the four edges of plaquette p with pattern k
/// scaled by W. Every other weight is masked. log psi equals
/// sum_p (8W if B_p = +1 else 4W).
MaskedAnsatz build_toric_solution(std::size_t side, double w);
/// Same construction inside a caller-chosen feed-forward architecture on a
/// toric lattice; throws CapacityError when the width is below 8 L^2.
MaskedAnsatz build_toric_solution(const ArchitectureSpec& arch, double w);

}  // namespace nqs
