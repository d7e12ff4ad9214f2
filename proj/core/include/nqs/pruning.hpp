// Copyright 2026 The nqs-prune Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "nqs/ansatz.hpp"
#include "nqs/hamiltonian.hpp"
#include "nqs/observables.hpp"
#include "nqs/rng.hpp"
#include "nqs/sampler.hpp"
#include "nqs/sr.hpp"

namespace nqs {

enum class PruneStrategy { magnitude, random };
enum class ResetMode { rewind, continue_training };

/// IMP-WR is (magnitude, rewind), IMP-CT is (magnitude, continue_training) and
/// IRP-WR is (random, rewind).
struct PruneSchedule {
  double ratio = 0.12;
  std::size_t iterations = 1;
  std::size_t pretrain_steps = 10000;
  std::size_t train_steps = 1000;
  PruneStrategy strategy = PruneStrategy::magnitude;
  ResetMode reset = ResetMode::rewind;

  /// 0.12 for feed-forward networks, 0.05 for the shallow CNN.
  static double default_ratio(const ArchitectureSpec& arch);
  void validate() const;
};

/// max(1, round_half_up(ratio * ones)).
std::size_t prune_count(std::size_t ones, double ratio);

/// Indices to clear next, in increasing order. Magnitude selection takes the
/// smallest |theta| among unmasked entries (ties to the lower index); random
/// selection draws uniformly without replacement. Returns nullopt when the
/// step would leave no unmasked weight.
std::optional<std::vector<std::size_t>> select_prune_set(std::span<const double> theta, const Mask& mask, double ratio,
                                                         PruneStrategy strategy, RngStream& rng);

struct IterationRecord {
  Mask mask;
  ParameterVector theta;
  MetricsRecord metrics;
};

struct PruningTrajectory {
  ParameterVector theta_init;
  /// Parameters after pre-training; the rewinding point.
  ParameterVector theta_rewind;
  /// Metrics of the dense pre-trained network, reported as iteration 0.
  MetricsRecord pretrained;
  /// Entry i - 1 holds pruning iteration i.
  std::vector<IterationRecord> iterations;
  /// Set when the schedule ran out of prunable weights.
  bool exhausted = false;
  /// Set when an iteration diverged; later iterations were not run.
  std::optional<std::string> truncated;
};

struct PruningOptions {
  /// Exact ground energy for rel_err / abs_err_per_spin (NaN when absent).
  std::optional<double> reference_energy;
  /// Number of trailing training steps averaged into the per-iteration energy.
  std::size_t tail_steps = 100;
  /// Samples for the measurement pass (magnetizations and fidelity); 0 skips it.
  std::size_t measure_samples = 1024;
  std::function<void(const PruningTrajectory&)> on_pretrained;
  std::function<void(const PruningTrajectory&, std::size_t iteration)> on_iteration;
};

/// Pre-trains a dense network for pretrain_steps, stores the rewinding point,
/// then alternates prune / reset / train for the scheduled iterations. All
/// random streams derive from `seed` and the phase and iteration indices, so
/// a run can be continued from any completed iteration with identical results.
PruningTrajectory run_iterative_pruning(const ArchitectureSpec& arch, const HamiltonianSpec& spec,
                                        const PruneSchedule& schedule, const SamplerConfig& sampler,
                                        const SRConfig& sr, std::uint64_t seed, const PruningOptions& options = {});

/// Continues a partial trajectory produced by run_iterative_pruning with the
/// same arguments.
PruningTrajectory resume_iterative_pruning(PruningTrajectory partial, const ArchitectureSpec& arch,
                                           const HamiltonianSpec& spec, const PruneSchedule& schedule,
                                           const SamplerConfig& sampler, const SRConfig& sr, std::uint64_t seed,
                                           const PruningOptions& options = {});

/// Sampled metrics of a trained state: energy from the training tail, plus a
/// measurement batch for magnetizations. `eval` is returned for fidelity use.
MetricsRecord measure_state(const MaskedAnsatz& ansatz, const HamiltonianSpec& spec, std::span<const StepRecord> trace,
                            const SamplerConfig& sampler, std::uint64_t eval_seed, const PruningOptions& options,
                            SampleBatch* eval = nullptr);

enum class TicketVariant { theta_init_m_imp, theta_rand_m_imp, theta_init_m_rand };

std::string to_string(TicketVariant variant);
/// Accepts both "theta_init_m_imp" and "theta-init-m-imp" spellings.
TicketVariant parse_ticket_variant(const std::string& text);

/// Builds a ticket from pruning iteration `iteration` (1-based). The theta_init
/// variants use the random initialization unless `use_rewind_point` is set.
MaskedAnsatz make_ticket(TicketVariant variant, const ArchitectureSpec& arch, const PruningTrajectory& trajectory,
                         std::size_t iteration, std::uint64_t seed, bool use_rewind_point = false);

struct TicketResult {
  MaskedAnsatz ansatz;
  MetricsRecord metrics;
  std::vector<StepRecord> trace;
};

/// Trains a ticket in isolation; the mask never changes.
TicketResult train_ticket(const MaskedAnsatz& ticket, const HamiltonianSpec& spec, const SamplerConfig& sampler,
                          const SRConfig& sr, std::size_t steps, const PruningOptions& options = {});

}  // namespace nqs
