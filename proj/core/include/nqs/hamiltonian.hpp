// Copyright 2026 The nqs-prune Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <string>
#include <variant>
#include <vector>

#include "nqs/ansatz.hpp"
#include "nqs/lattice.hpp"

namespace nqs {

/// H = -sum_<ij> sz_i sz_j - kappa sum_i sx_i
struct TransverseFieldIsing {
  SquareLattice lattice;
  double kappa = 0.0;
};

/// H = -sum_v A_v - sum_p B_p with A_v = prod sx over the star of v and
/// B_p = prod sz around p.
struct ToricCode {
  ToricLattice lattice;
};

/// Off-diagonal term <sigma|H|sigma'> where sigma' = flip(sigma, flips).
struct ConnectedElement {
  FlipSet flips;
  double amplitude = 0.0;
};

/// Both models have sigma-independent off-diagonal structure, so the
/// connected elements are built once at construction.
class HamiltonianSpec {
 public:
  using Model = std::variant<TransverseFieldIsing, ToricCode>;

  static HamiltonianSpec tfim(SquareLattice lattice, double kappa);
  static HamiltonianSpec toric_code(ToricLattice lattice);

  const Model& model() const { return model_; }
  bool is_toric_code() const { return std::holds_alternative<ToricCode>(model_); }
  Lattice lattice() const;
  std::size_t size() const;
  std::string descriptor() const;

  double diagonal_energy(const SpinConfiguration& sigma) const;
  std::span<const ConnectedElement> connected_elements() const { return elements_; }

 private:
  explicit HamiltonianSpec(Model model);

  Model model_;
  std::vector<ConnectedElement> elements_;
};

/// TFIM: -sum_bonds s_i s_j. Toric code: -sum_p prod_{i in p} s_i.
double diagonal_energy(const HamiltonianSpec& spec, const SpinConfiguration& sigma);

std::span<const ConnectedElement> connected_elements(const HamiltonianSpec& spec, const SpinConfiguration& sigma);

/// Log-ratio above which exp() is clamped (with a warning) in local estimators.
inline constexpr double kMaxLogRatio = 700.0;

/// exp(delta) with the overflow clamp applied.
double safe_ratio(double delta_log_psi);

/// E_loc(sigma) = H_{sigma sigma} + sum_c amplitude_c psi(sigma'_c) / psi(sigma),
/// with every ratio evaluated as exp(delta log psi).
double local_energy(const HamiltonianSpec& spec, Walker& walker);
double local_energy(const HamiltonianSpec& spec, const MaskedAnsatz& ansatz, const SpinConfiguration& sigma);

}  // namespace nqs
