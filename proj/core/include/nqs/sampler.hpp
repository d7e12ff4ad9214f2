// Copyright 2026 The nqs-prune Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "nqs/ansatz.hpp"
#include "nqs/lattice.hpp"
#include "nqs/rng.hpp"

namespace nqs {

/// Proposal rules. The mixed rule draws a single-site flip with probability
/// 1/2, otherwise a four-spin flip of one toric-code vertex star.
enum class ProposalRule { single_flip, mixed_plaquette };

struct SamplerConfig {
  std::size_t n_samples = 1024;
  std::size_t n_chains = 16;
  std::size_t burn_in_sweeps = 10;
  /// Proposals between recorded samples; 0 means N.
  std::size_t sweep_length = 0;
  ProposalRule rule = ProposalRule::single_flip;
  std::uint64_t seed = 0;
  std::size_t threads = 1;

  /// Throws ConfigError when N_s is not a positive multiple of n_chains.
  void validate() const;
};

/// Rule that matches the lattice: mixed for the toric code, single flips otherwise.
ProposalRule default_rule(const Lattice& lattice);

struct ChainState {
  Walker walker;
  RngStream rng;
  std::size_t accepted_since_refresh = 0;
};

struct SampleBatch {
  std::vector<SpinConfiguration> configs;
  std::vector<double> log_psis;
  double acceptance_rate = 0.0;
  /// True when no proposal was accepted over the whole batch.
  bool stuck = false;

  std::size_t size() const { return configs.size(); }
};

/// Draws a symmetric proposal. The mixed rule requires a ToricLattice.
FlipSet propose(ProposalRule rule, const Lattice& lattice, RngStream& rng);

/// min(1, exp(2 delta)).
double acceptance_probability(double delta_log_psi);

/// One Metropolis proposal; returns whether it was accepted.
bool metropolis_step(ChainState& chain, ProposalRule rule, const Lattice& lattice);

/// Initial configuration of chain `index`: uniform random for square lattices,
/// all-up for the toric code.
SpinConfiguration initial_configuration(const Lattice& lattice, RngStream& rng);

/// Runs n_chains independent chains (chain c uses the stream derived from
/// (seed, chain, c)) and concatenates their samples in chain order. The
/// result does not depend on `threads`. Emits a warning when `stuck`.
SampleBatch sample_batch(const MaskedAnsatz& ansatz, const SamplerConfig& config);

}  // namespace nqs
