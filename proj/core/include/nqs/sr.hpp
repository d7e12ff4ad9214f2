// Copyright 2026 The nqs-prune Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "nqs/ansatz.hpp"
#include "nqs/error.hpp"
#include "nqs/hamiltonian.hpp"
#include "nqs/sampler.hpp"

namespace nqs {

enum class SolverKind { automatic, dense_cholesky, conjugate_gradient };

struct SRConfig {
  double eta = 8e-3;
  double lambda = 1e-4;
  SolverKind solver = SolverKind::automatic;
  double cg_tol = 1e-6;
  std::size_t cg_max_iter = 1000;
  /// The automatic solver uses a direct factorization up to this many unmasked parameters.
  std::size_t dense_threshold = 4096;

  void validate() const;
};

/// Per-sample log-derivatives O (row-major, rows x cols) and local energies.
/// Rows carry probability weights; empty weights mean uniform 1/rows.
struct EstimatorSet {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> o;
  std::vector<double> e_loc;
  std::vector<double> weights;

  double weight(std::size_t r) const { return weights.empty() ? 1.0 / static_cast<double>(rows) : weights[r]; }
  std::span<const double> row(std::size_t r) const { return {o.data() + r * cols, cols}; }
  /// Weighted means of the O columns.
  std::vector<double> mean_o() const;
  double mean_energy() const;
};

/// Builds O and E_loc for every sample of the batch (parallel over samples,
/// deterministic row order).
EstimatorSet collect_estimators(const MaskedAnsatz& ansatz, const HamiltonianSpec& spec,
                                std::span<const SpinConfiguration> configs, std::size_t threads = 1);

/// g_k = 2 (<O_k E_loc> - <O_k><E_loc>). Needs at least two rows.
std::vector<double> estimate_gradient(const EstimatorSet& est);

/// S v with S = <O O> - <O><O>, without forming S.
std::vector<double> s_matvec(const EstimatorSet& est, std::span<const double> v);

struct SolveReport {
  std::vector<double> delta;
  double lambda_used = 0.0;
  std::size_t cg_iterations = 0;
  double residual = 0.0;
};

/// Solves (S + lambda I) delta = g.
SolveReport solve_sr(const EstimatorSet& est, std::span<const double> gradient, const SRConfig& cfg);

/// theta <- theta - eta * delta on the unmasked coordinates.
MaskedAnsatz sr_update(const MaskedAnsatz& ansatz, const EstimatorSet& est, const SRConfig& cfg);

struct StepRecord {
  double energy = 0.0;
  double variance = 0.0;
  double acceptance = 0.0;
};

struct TrainResult {
  MaskedAnsatz ansatz;
  std::vector<StepRecord> trace;
};

/// Raised when the sampled energy turns non-finite; carries the step index and
/// the last ansatz whose energy was finite.
class TrainingDiverged : public NumericalError {
 public:
  TrainingDiverged(std::size_t step, MaskedAnsatz last_finite);
  std::size_t step() const { return step_; }
  const MaskedAnsatz& last_finite() const { return last_finite_; }

 private:
  std::size_t step_;
  MaskedAnsatz last_finite_;
};

/// Runs `steps` rounds of sample -> estimators -> SR update. Step t samples
/// with the stream derived from (sampler.seed, t).
TrainResult train(MaskedAnsatz ansatz, const HamiltonianSpec& spec, const SamplerConfig& sampler,
                  const SRConfig& sr, std::size_t steps);

}  // namespace nqs
