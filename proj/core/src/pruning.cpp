// Copyright 2026 The nqs-prune Authors
// SPDX-License-Identifier: Apache-2.0

#include "nqs/pruning.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "nqs/diagnostics.hpp"
#include "nqs/error.hpp"

namespace nqs {

double PruneSchedule::default_ratio(const ArchitectureSpec& arch) { return arch.is_feed_forward() ? 0.12 : 0.05; }

void PruneSchedule::validate() const {
  if (!(ratio > 0.0 && ratio < 1.0)) throw ConfigError("pruning ratio must lie in (0, 1)");
}

std::size_t prune_count(std::size_t ones, double ratio) {
  const auto rounded = static_cast<std::size_t>(std::floor(ratio * static_cast<double>(ones) + 0.5));
  return std::max<std::size_t>(1, rounded);
}

std::optional<std::vector<std::size_t>> select_prune_set(std::span<const double> theta, const Mask& mask, double ratio,
                                                         PruneStrategy strategy, RngStream& rng) {
  NQS_EXPECT(theta.size() == mask.size(), "parameter and mask lengths differ");
  NQS_EXPECT(ratio > 0.0 && ratio < 1.0, "pruning ratio must lie in (0, 1)");
  const std::size_t count = prune_count(mask.ones(), ratio);
  if (count >= mask.ones()) return std::nullopt;
  std::vector<std::size_t> active = mask.active_indices();
  if (strategy == PruneStrategy::magnitude) {
    std::nth_element(active.begin(), active.begin() + static_cast<std::ptrdiff_t>(count), active.end(),
                     [&](std::size_t a, std::size_t b) {
                       const double ma = std::abs(theta[a]);
                       const double mb = std::abs(theta[b]);
                       return ma < mb || (ma == mb && a < b);
                     });
    active.resize(count);
  } else {
    for (std::size_t i = 0; i < count; ++i) {
      const std::size_t j = i + static_cast<std::size_t>(rng.below(active.size() - i));
      std::swap(active[i], active[j]);
    }
    active.resize(count);
  }
  std::sort(active.begin(), active.end());
  return active;
}

MetricsRecord measure_state(const MaskedAnsatz& ansatz, const HamiltonianSpec& spec, std::span<const StepRecord> trace,
                            const SamplerConfig& sampler, std::uint64_t eval_seed, const PruningOptions& options,
                            SampleBatch* eval) {
  MetricsRecord rec;
  const std::size_t n_spins = spec.size();
  rec.n = ansatz.mask().ones();
  rec.rho = static_cast<double>(rec.n) / static_cast<double>(n_spins);

  SampleBatch batch;
  if (options.measure_samples > 0) {
    SamplerConfig cfg = sampler;
    cfg.seed = eval_seed;
    cfg.n_samples = options.measure_samples;
    if (cfg.n_samples % cfg.n_chains != 0) cfg.n_chains = 1;
    batch = sample_batch(ansatz, cfg);
    rec.m_z = magnetization_z(batch);
    rec.m_x = magnetization_x(ansatz, batch);
  } else {
    rec.m_z = std::numeric_limits<double>::quiet_NaN();
    rec.m_x = std::numeric_limits<double>::quiet_NaN();
  }

  if (!trace.empty()) {
    const std::size_t tail = std::min(trace.size(), std::max<std::size_t>(1, options.tail_steps));
    double e = 0.0;
    double v = 0.0;
    for (std::size_t t = trace.size() - tail; t < trace.size(); ++t) {
      e += trace[t].energy;
      v += trace[t].variance;
    }
    rec.energy = e / static_cast<double>(tail);
    rec.variance = v / static_cast<double>(tail);
    rec.stat_err = std::sqrt(rec.variance / static_cast<double>(sampler.n_samples));
  } else if (batch.size() >= 2) {
    const EstimatorSet est = collect_estimators(ansatz, spec, batch.configs, sampler.threads);
    const EnergyStats stats = energy_stats(est.e_loc);
    rec.energy = stats.mean;
    rec.variance = stats.variance;
    rec.stat_err = stats.stat_err;
  } else {
    rec.energy = rec.variance = rec.stat_err = std::numeric_limits<double>::quiet_NaN();
  }

  if (options.reference_energy) {
    rec.rel_err = relative_error(rec.energy, *options.reference_energy);
    rec.abs_err_per_spin = absolute_error_per_spin(rec.energy, *options.reference_energy, n_spins);
  } else {
    rec.rel_err = rec.abs_err_per_spin = std::numeric_limits<double>::quiet_NaN();
  }
  if (eval != nullptr) *eval = std::move(batch);
  return rec;
}

namespace {

SamplerConfig phase_sampler(const SamplerConfig& base, std::uint64_t seed, std::uint64_t phase, std::uint64_t index) {
  SamplerConfig cfg = base;
  cfg.seed = RngStream::derive(seed, {phase, index}).key();
  return cfg;
}

std::uint64_t eval_seed(std::uint64_t seed, std::size_t iteration) {
  return RngStream::derive(seed, {stream::kEvaluate, iteration}).key();
}

void attach_fidelity(MetricsRecord& rec, const MaskedAnsatz& prev, const SampleBatch& prev_batch,
                     const MaskedAnsatz& current, const SampleBatch& batch) {
  if (prev_batch.size() == 0 || batch.size() == 0) return;
  rec.fidelity = fidelity(prev, current, prev_batch, batch).value;
}

PruningTrajectory run_iterations(PruningTrajectory traj, const ArchitectureSpec& arch, const HamiltonianSpec& spec,
                                 const PruneSchedule& schedule, const SamplerConfig& sampler, const SRConfig& sr,
                                 std::uint64_t seed, const PruningOptions& options) {
  // State entering the next iteration: the last completed one, or the dense pre-trained network.
  MaskedAnsatz previous = traj.iterations.empty()
                              ? MaskedAnsatz::dense(arch, traj.theta_rewind)
                              : MaskedAnsatz(arch, traj.iterations.back().theta, traj.iterations.back().mask);
  SampleBatch previous_batch;
  if (options.measure_samples > 0) {
    SamplerConfig cfg = sampler;
    cfg.seed = eval_seed(seed, traj.iterations.size());
    cfg.n_samples = options.measure_samples;
    if (cfg.n_samples % cfg.n_chains != 0) cfg.n_chains = 1;
    previous_batch = sample_batch(previous, cfg);
  }

  for (std::size_t i = traj.iterations.size() + 1; i <= schedule.iterations; ++i) {
    RngStream select_rng = RngStream::derive(seed, {stream::kPruneSelect, i});
    const auto prune = select_prune_set(previous.parameters(), previous.mask(), schedule.ratio, schedule.strategy,
                                        select_rng);
    if (!prune) {
      traj.exhausted = true;
      break;
    }
    Mask mask = previous.mask();
    for (std::size_t k : *prune) mask.clear(k);
    const ParameterVector& source =
        schedule.reset == ResetMode::rewind ? traj.theta_rewind : ParameterVector(previous.parameters().begin(),
                                                                                  previous.parameters().end());
    MaskedAnsatz start(arch, source, mask);

    TrainResult trained{start, {}};
    if (schedule.train_steps > 0) {
      try {
        trained = train(start, spec, phase_sampler(sampler, seed, stream::kIteration, i), sr, schedule.train_steps);
      } catch (const TrainingDiverged& e) {
        traj.truncated = "iteration " + std::to_string(i) + ": " + e.what();
        diagnostics::warn("pruning", *traj.truncated);
        break;
      }
    }

    SampleBatch batch;
    MetricsRecord rec =
        measure_state(trained.ansatz, spec, trained.trace, sampler, eval_seed(seed, i), options, &batch);
    rec.iteration = i;
    attach_fidelity(rec, previous, previous_batch, trained.ansatz, batch);

    traj.iterations.push_back(IterationRecord{
        mask, ParameterVector(trained.ansatz.parameters().begin(), trained.ansatz.parameters().end()), rec});
    previous = std::move(trained.ansatz);
    previous_batch = std::move(batch);
    if (options.on_iteration) options.on_iteration(traj, i);
  }
  return traj;
}

}  // namespace

PruningTrajectory run_iterative_pruning(const ArchitectureSpec& arch, const HamiltonianSpec& spec,
                                        const PruneSchedule& schedule, const SamplerConfig& sampler,
                                        const SRConfig& sr, std::uint64_t seed, const PruningOptions& options) {
  schedule.validate();
  NQS_EXPECT(arch.input_size() == spec.size(), "architecture input size does not match the Hamiltonian");
  PruningTrajectory traj;
  traj.theta_init =
      init_parameters(arch, default_init_scheme(arch), RngStream::derive(seed, {stream::kInit}).key());
  MaskedAnsatz dense = MaskedAnsatz::dense(arch, traj.theta_init);
  std::vector<StepRecord> trace;
  if (schedule.pretrain_steps > 0) {
    try {
      TrainResult pre = train(dense, spec, phase_sampler(sampler, seed, stream::kPretrain, 0), sr,
                              schedule.pretrain_steps);
      dense = std::move(pre.ansatz);
      trace = std::move(pre.trace);
    } catch (const TrainingDiverged& e) {
      traj.theta_rewind = traj.theta_init;
      traj.truncated = std::string("pre-training: ") + e.what();
      diagnostics::warn("pruning", *traj.truncated);
      return traj;
    }
  }
  traj.theta_rewind.assign(dense.parameters().begin(), dense.parameters().end());
  traj.pretrained = measure_state(dense, spec, trace, sampler, eval_seed(seed, 0), options);
  traj.pretrained.iteration = 0;
  if (options.on_pretrained) options.on_pretrained(traj);
  return run_iterations(std::move(traj), arch, spec, schedule, sampler, sr, seed, options);
}

PruningTrajectory resume_iterative_pruning(PruningTrajectory partial, const ArchitectureSpec& arch,
                                           const HamiltonianSpec& spec, const PruneSchedule& schedule,
                                           const SamplerConfig& sampler, const SRConfig& sr, std::uint64_t seed,
                                           const PruningOptions& options) {
  schedule.validate();
  NQS_EXPECT(partial.theta_rewind.size() == arch.parameter_count(), "partial trajectory does not match the architecture");
  if (partial.exhausted || partial.truncated) return partial;
  return run_iterations(std::move(partial), arch, spec, schedule, sampler, sr, seed, options);
}

std::string to_string(TicketVariant variant) {
  switch (variant) {
    case TicketVariant::theta_init_m_imp:
      return "theta_init_m_imp";
    case TicketVariant::theta_rand_m_imp:
      return "theta_rand_m_imp";
    case TicketVariant::theta_init_m_rand:
      return "theta_init_m_rand";
  }
  return "unknown";
}

TicketVariant parse_ticket_variant(const std::string& text) {
  std::string key = text;
  std::replace(key.begin(), key.end(), '-', '_');
  for (auto v : {TicketVariant::theta_init_m_imp, TicketVariant::theta_rand_m_imp, TicketVariant::theta_init_m_rand})
    if (to_string(v) == key) return v;
  throw ConfigError("unknown ticket variant '" + text + "'");
}

MaskedAnsatz make_ticket(TicketVariant variant, const ArchitectureSpec& arch, const PruningTrajectory& trajectory,
                         std::size_t iteration, std::uint64_t seed, bool use_rewind_point) {
  NQS_EXPECT(iteration >= 1 && iteration <= trajectory.iterations.size(), "iteration outside the trajectory");
  const Mask& m_imp = trajectory.iterations[iteration - 1].mask;
  const ParameterVector& theta_init = use_rewind_point ? trajectory.theta_rewind : trajectory.theta_init;
  switch (variant) {
    case TicketVariant::theta_init_m_imp:
      return MaskedAnsatz(arch, theta_init, m_imp);
    case TicketVariant::theta_rand_m_imp: {
      ParameterVector fresh =
          init_parameters(arch, default_init_scheme(arch), RngStream::derive(seed, {stream::kTicket, 0}).key());
      return MaskedAnsatz(arch, std::move(fresh), m_imp);
    }
    case TicketVariant::theta_init_m_rand: {
      RngStream rng = RngStream::derive(seed, {stream::kTicket, 1});
      std::vector<std::size_t> order(m_imp.size());
      std::iota(order.begin(), order.end(), 0);
      for (std::size_t i = 0; i < m_imp.ones(); ++i) {
        const std::size_t j = i + static_cast<std::size_t>(rng.below(order.size() - i));
        std::swap(order[i], order[j]);
      }
      std::vector<std::uint8_t> bits(m_imp.size(), 0);
      for (std::size_t i = 0; i < m_imp.ones(); ++i) bits[order[i]] = 1;
      return MaskedAnsatz(arch, theta_init, Mask(std::move(bits)));
    }
  }
  throw ContractViolation("unknown ticket variant");
}

TicketResult train_ticket(const MaskedAnsatz& ticket, const HamiltonianSpec& spec, const SamplerConfig& sampler,
                          const SRConfig& sr, std::size_t steps, const PruningOptions& options) {
  TrainResult trained = train(ticket, spec, sampler, sr, steps);
  const std::uint64_t seed = RngStream::derive(sampler.seed, {stream::kEvaluate}).key();
  MetricsRecord rec = measure_state(trained.ansatz, spec, trained.trace, sampler, seed, options);
  return TicketResult{std::move(trained.ansatz), rec, std::move(trained.trace)};
}

}  // namespace nqs
