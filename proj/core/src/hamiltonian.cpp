// Copyright 2026 The nqs-prune Authors
// SPDX-License-Identifier: Apache-2.0

#include "nqs/hamiltonian.hpp"

#include <charconv>
#include <cmath>
#include <sstream>

#include "nqs/diagnostics.hpp"
#include "nqs/error.hpp"

namespace nqs {

HamiltonianSpec::HamiltonianSpec(Model model) : model_(std::move(model)) {
  if (const auto* tfim = std::get_if<TransverseFieldIsing>(&model_)) {
    for (std::size_t i = 0; i < tfim->lattice.size(); ++i) elements_.push_back({FlipSet{i}, -tfim->kappa});
  } else {
    const auto& tc = std::get<ToricCode>(model_);
    for (const Cell& star : tc.lattice.vertices()) elements_.push_back({FlipSet(star), -1.0});
  }
}

HamiltonianSpec HamiltonianSpec::tfim(SquareLattice lattice, double kappa) {
  if (!std::isfinite(kappa) || kappa < 0.0) throw ConfigError("kappa must be finite and non-negative");
  return HamiltonianSpec(TransverseFieldIsing{std::move(lattice), kappa});
}

HamiltonianSpec HamiltonianSpec::toric_code(ToricLattice lattice) { return HamiltonianSpec(ToricCode{std::move(lattice)}); }

Lattice HamiltonianSpec::lattice() const {
  if (const auto* tfim = std::get_if<TransverseFieldIsing>(&model_)) return tfim->lattice;
  return std::get<ToricCode>(model_).lattice;
}

std::size_t HamiltonianSpec::size() const {
  return std::visit([](const auto& m) { return m.lattice.size(); }, model_);
}

std::string HamiltonianSpec::descriptor() const {
  std::ostringstream out;
  if (const auto* tfim = std::get_if<TransverseFieldIsing>(&model_)) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof(buf), tfim->kappa);
    out << "tfim:" << tfim->lattice.descriptor() << ":kappa=" << std::string_view(buf, res.ptr);
  } else {
    out << "toric:" << std::get<ToricCode>(model_).lattice.descriptor();
  }
  return out.str();
}

double HamiltonianSpec::diagonal_energy(const SpinConfiguration& sigma) const {
  NQS_EXPECT(sigma.size() == size(), "configuration size does not match the Hamiltonian");
  double energy = 0.0;
  if (const auto* tfim = std::get_if<TransverseFieldIsing>(&model_)) {
    for (const auto& [i, j] : tfim->lattice.bonds()) energy -= sigma[i] * sigma[j];
  } else {
    for (const Cell& p : std::get<ToricCode>(model_).lattice.plaquettes()) energy -= cell_parity(sigma, p);
  }
  return energy;
}

double diagonal_energy(const HamiltonianSpec& spec, const SpinConfiguration& sigma) {
  return spec.diagonal_energy(sigma);
}

std::span<const ConnectedElement> connected_elements(const HamiltonianSpec& spec, const SpinConfiguration& sigma) {
  NQS_EXPECT(sigma.size() == spec.size(), "configuration size does not match the Hamiltonian");
  return spec.connected_elements();
}

double safe_ratio(double delta_log_psi) {
  if (delta_log_psi > kMaxLogRatio) {
    diagnostics::warn("hamiltonian", "log-amplitude ratio " + std::to_string(delta_log_psi) + " clamped to " +
                      std::to_string(kMaxLogRatio));
    delta_log_psi = kMaxLogRatio;
  }
  return std::exp(delta_log_psi);
}

namespace {

[[noreturn]] void report_non_finite(const SpinConfiguration& sigma) {
  std::string bits;
  for (Spin s : sigma.values()) bits += s > 0 ? '+' : '-';
  throw NumericalError("non-finite local energy at configuration " + bits);
}

}  // namespace

double local_energy(const HamiltonianSpec& spec, Walker& walker) {
  const SpinConfiguration& sigma = walker.config();
  if (!std::isfinite(walker.log_psi())) report_non_finite(sigma);
  double energy = spec.diagonal_energy(sigma);
  for (const ConnectedElement& element : spec.connected_elements()) {
    if (element.amplitude == 0.0) continue;
    const double delta = walker.delta(element.flips);
    if (!std::isfinite(delta)) report_non_finite(sigma);
    energy += element.amplitude * safe_ratio(delta);
  }
  if (!std::isfinite(energy)) report_non_finite(sigma);
  return energy;
}

double local_energy(const HamiltonianSpec& spec, const MaskedAnsatz& ansatz, const SpinConfiguration& sigma) {
  NQS_EXPECT(ansatz.input_size() == spec.size(), "ansatz input size does not match the Hamiltonian");
  Walker walker(ansatz, sigma);
  return local_energy(spec, walker);
}

}  // namespace nqs
