// Copyright 2026 The nqs-prune Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <optional>
#include <span>

#include "nqs/ansatz.hpp"
#include "nqs/sampler.hpp"

namespace nqs {

/// Per-iteration observables of a pruning run.
struct MetricsRecord {
  std::size_t iteration = 0;
  std::size_t n = 0;
  double rho = 0.0;
  double energy = 0.0;
  double variance = 0.0;
  double stat_err = 0.0;
  double rel_err = 0.0;
  double abs_err_per_spin = 0.0;
  double m_x = 0.0;
  double m_z = 0.0;
  std::optional<double> fidelity;
};

struct EnergyStats {
  double mean = 0.0;
  double variance = 0.0;
  double stat_err = 0.0;
};

/// Sample mean, unbiased sample variance and sqrt(variance / N_s). Needs N_s >= 2.
EnergyStats energy_stats(std::span<const double> local_energies);

/// |(E_ref - E) / E_ref|; throws ContractViolation when E_ref == 0.
double relative_error(double energy, double reference);
/// |E_ref - E| / N.
double absolute_error_per_spin(double energy, double reference, std::size_t n);

/// Mean over samples of sum_i sigma_i / N.
double magnetization_z(const SampleBatch& batch);
/// Mean over samples of sum_i psi(sigma with i flipped) / psi(sigma) / N.
double magnetization_x(const MaskedAnsatz& ansatz, const SampleBatch& batch);

struct FidelityEstimate {
  double value = 0.0;     ///< reported F, in [0, 1]
  double squared = 0.0;   ///< raw estimate of F^2 before clamping
  double stat_err = 0.0;  ///< standard error of `squared`
};

/// Two-population overlap estimate
/// F^2 = <psi_b / psi_a>_a * <psi_a / psi_b>_b, with each mean evaluated
/// relative to the batch-maximal log ratio.
FidelityEstimate fidelity(const MaskedAnsatz& a, const MaskedAnsatz& b, const SampleBatch& batch_a,
                          const SampleBatch& batch_b);

}  // namespace nqs
