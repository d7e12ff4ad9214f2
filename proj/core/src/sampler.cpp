// Copyright 2026 The nqs-prune Authors
// SPDX-License-Identifier: Apache-2.0

#include "nqs/sampler.hpp"

#include <cmath>
#include <optional>

#include "nqs/diagnostics.hpp"
#include "nqs/error.hpp"
#include "nqs/parallel.hpp"

namespace nqs {

namespace {

constexpr std::size_t kRefreshInterval = 1000;

}  // namespace

void SamplerConfig::validate() const {
  if (n_chains == 0) throw ConfigError("n_chains must be positive");
  if (n_samples == 0 || n_samples % n_chains != 0)
    throw ConfigError("n_samples (" + std::to_string(n_samples) + ") must be a positive multiple of n_chains (" +
                      std::to_string(n_chains) + ")");
}

ProposalRule default_rule(const Lattice& lattice) {
  return std::holds_alternative<ToricLattice>(lattice) ? ProposalRule::mixed_plaquette : ProposalRule::single_flip;
}

FlipSet propose(ProposalRule rule, const Lattice& lattice, RngStream& rng) {
  const std::size_t n = site_count(lattice);
  if (rule == ProposalRule::single_flip) return FlipSet{static_cast<std::size_t>(rng.below(n))};
  const auto* toric = std::get_if<ToricLattice>(&lattice);
  if (toric == nullptr) throw ConfigError("the mixed plaquette rule needs a toric lattice");
  if (rng.uniform() < 0.5) return FlipSet{static_cast<std::size_t>(rng.below(n))};
  const auto& stars = toric->vertices();
  return FlipSet(stars[rng.below(stars.size())]);
}

double acceptance_probability(double delta_log_psi) {
  if (delta_log_psi >= 0.0) return 1.0;
  return std::exp(2.0 * delta_log_psi);
}

bool metropolis_step(ChainState& chain, ProposalRule rule, const Lattice& lattice) {
  const FlipSet flips = propose(rule, lattice, chain.rng);
  const double delta = chain.walker.delta(flips);
  const double p = acceptance_probability(delta);
  if (p < 1.0 && chain.rng.uniform() >= p) return false;
  chain.walker.accept(flips, delta);
  if (++chain.accepted_since_refresh >= kRefreshInterval) {
    chain.walker.refresh();
    chain.accepted_since_refresh = 0;
  }
  return true;
}

SpinConfiguration initial_configuration(const Lattice& lattice, RngStream& rng) {
  const std::size_t n = site_count(lattice);
  if (std::holds_alternative<ToricLattice>(lattice)) return SpinConfiguration(n, 1);
  std::vector<Spin> values(n);
  for (auto& v : values) v = (rng() >> 63) != 0 ? Spin{-1} : Spin{1};
  return SpinConfiguration(std::move(values));
}

SampleBatch sample_batch(const MaskedAnsatz& ansatz, const SamplerConfig& config) {
  config.validate();
  const Lattice& lattice = ansatz.architecture().lattice();
  const std::size_t n = ansatz.input_size();
  const std::size_t per_chain = config.n_samples / config.n_chains;
  const std::size_t sweep = config.sweep_length == 0 ? n : config.sweep_length;
  if (config.rule == ProposalRule::mixed_plaquette && !std::holds_alternative<ToricLattice>(lattice))
    throw ConfigError("the mixed plaquette rule needs a toric lattice");

  SampleBatch batch;
  batch.configs.resize(config.n_samples);
  batch.log_psis.resize(config.n_samples);
  std::vector<std::size_t> accepted(config.n_chains, 0);

  parallel_for(config.n_chains, config.threads, [&](std::size_t c) {
    RngStream rng = RngStream::derive(config.seed, {stream::kChain, c});
    SpinConfiguration start = initial_configuration(lattice, rng);
    ChainState chain{Walker(ansatz, std::move(start)), rng, 0};
    for (std::size_t t = 0; t < config.burn_in_sweeps * n; ++t) metropolis_step(chain, config.rule, lattice);
    std::size_t acc = 0;
    for (std::size_t s = 0; s < per_chain; ++s) {
      for (std::size_t t = 0; t < sweep; ++t) acc += metropolis_step(chain, config.rule, lattice) ? 1 : 0;
      const std::size_t slot = c * per_chain + s;
      batch.configs[slot] = chain.walker.config();
      batch.log_psis[slot] = chain.walker.log_psi();
    }
    accepted[c] = acc;
  });

  std::size_t total = 0;
  for (std::size_t a : accepted) total += a;
  const double proposals = static_cast<double>(config.n_samples) * static_cast<double>(sweep);
  batch.acceptance_rate = static_cast<double>(total) / proposals;
  batch.stuck = total == 0;
  if (batch.stuck) diagnostics::warn("sampler", "no proposal accepted in a full batch (stuck chains)");
  return batch;
}

}  // namespace nqs
