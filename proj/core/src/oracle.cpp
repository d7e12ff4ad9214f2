// Copyright 2026 The nqs-prune Authors
// SPDX-License-Identifier: Apache-2.0

#include "nqs/oracle.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "nqs/error.hpp"
#include "nqs/parallel.hpp"

namespace nqs {

namespace {

constexpr std::size_t kMaxKrylov = 300;
constexpr std::size_t kLanczosIterations = 2000;
constexpr double kBasisMemoryBytes = 1024.0 * 1024.0 * 1024.0;

void require_capacity(std::size_t n, std::size_t max_n, const char* what) {
  if (n > max_n || n >= 63)
    throw CapacityError(std::string(what) + ": N=" + std::to_string(n) + " exceeds the limit of " +
                        std::to_string(max_n));
}

/// Diagonal entries and flip masks of H in the integer basis.
struct BasisOperator {
  std::vector<double> diagonal;
  std::vector<std::uint64_t> flip_masks;
  std::vector<double> amplitudes;
};

BasisOperator basis_operator(const HamiltonianSpec& spec, std::size_t threads) {
  const std::size_t n = spec.size();
  const std::size_t dim = std::size_t{1} << n;
  BasisOperator op;
  op.diagonal.resize(dim);
  parallel_for(dim, threads, [&](std::size_t s) {
    op.diagonal[s] = spec.diagonal_energy(SpinConfiguration::from_index(s, n));
  });
  for (const ConnectedElement& el : spec.connected_elements()) {
    std::uint64_t mask = 0;
    for (std::size_t site : el.flips.sites()) mask |= std::uint64_t{1} << site;
    op.flip_masks.push_back(mask);
    op.amplitudes.push_back(el.amplitude);
  }
  return op;
}

void apply(const BasisOperator& op, const std::vector<double>& in, std::vector<double>& out, std::size_t threads) {
  out.resize(in.size());
  parallel_for(in.size(), threads, [&](std::size_t s) {
    double acc = op.diagonal[s] * in[s];
    for (std::size_t c = 0; c < op.flip_masks.size(); ++c) acc += op.amplitudes[c] * in[s ^ op.flip_masks[c]];
    out[s] = acc;
  });
}

double lowest_ritz(const std::vector<double>& alpha, const std::vector<double>& beta) {
  const auto m = static_cast<Eigen::Index>(alpha.size());
  Eigen::VectorXd diag = Eigen::Map<const Eigen::VectorXd>(alpha.data(), m);
  Eigen::VectorXd sub(std::max<Eigen::Index>(m - 1, 0));
  for (Eigen::Index i = 0; i + 1 < m; ++i) sub[i] = beta[static_cast<std::size_t>(i)];
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver;
  solver.computeFromTridiagonal(diag, sub, Eigen::EigenvaluesOnly);
  return solver.eigenvalues()[0];
}

}  // namespace

void apply_hamiltonian(const HamiltonianSpec& spec, const std::vector<double>& in, std::vector<double>& out,
                       std::size_t threads) {
  require_capacity(spec.size(), 30, "apply_hamiltonian");
  NQS_EXPECT(in.size() == (std::size_t{1} << spec.size()), "state vector length must be 2^N");
  apply(basis_operator(spec, threads), in, out, threads);
}

ExactSolution lanczos_ground_energy(const HamiltonianSpec& spec, std::size_t max_n, double tol, std::size_t threads) {
  const std::size_t n = spec.size();
  require_capacity(n, max_n, "lanczos_ground_energy");
  const std::size_t dim = std::size_t{1} << n;
  const BasisOperator op = basis_operator(spec, threads);
  const std::size_t basis_cap = std::clamp<std::size_t>(
      static_cast<std::size_t>(kBasisMemoryBytes / (8.0 * static_cast<double>(dim))), 2, kMaxKrylov);

  std::vector<std::vector<double>> basis;
  std::vector<double> v(dim, 1.0 / std::sqrt(static_cast<double>(dim)));
  std::vector<double> v_prev(dim, 0.0);
  std::vector<double> w;
  std::vector<double> alpha;
  std::vector<double> beta;
  double previous = std::numeric_limits<double>::infinity();
  ExactSolution result{0.0, SolutionMethod::lanczos, n, 0};

  for (std::size_t it = 0; it < std::min(kLanczosIterations, dim); ++it) {
    if (basis.size() < basis_cap) basis.push_back(v);
    apply(op, v, w, threads);
    double a = 0.0;
    for (std::size_t s = 0; s < dim; ++s) a += w[s] * v[s];
    alpha.push_back(a);
    const double b_prev = beta.empty() ? 0.0 : beta.back();
    for (std::size_t s = 0; s < dim; ++s) w[s] -= a * v[s] + b_prev * v_prev[s];
    for (const auto& q : basis) {
      double dot = 0.0;
      for (std::size_t s = 0; s < dim; ++s) dot += w[s] * q[s];
      for (std::size_t s = 0; s < dim; ++s) w[s] -= dot * q[s];
    }
    double b = 0.0;
    for (double x : w) b += x * x;
    b = std::sqrt(b);

    const double ritz = lowest_ritz(alpha, beta);
    result.energy = ritz;
    result.iterations = it + 1;
    if (std::abs(ritz - previous) < tol || b < 1e-12) return result;
    previous = ritz;

    beta.push_back(b);
    v_prev.swap(v);
    for (std::size_t s = 0; s < dim; ++s) v[s] = w[s] / b;
  }
  throw NumericalError("lanczos_ground_energy: no convergence after " + std::to_string(result.iterations) +
                       " iterations");
}

ExactSolution dense_ground_energy(const HamiltonianSpec& spec, std::size_t max_n) {
  const std::size_t n = spec.size();
  require_capacity(n, max_n, "dense_ground_energy");
  const auto dim = static_cast<Eigen::Index>(std::size_t{1} << n);
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(dim, dim);
  for (Eigen::Index s = 0; s < dim; ++s) {
    const SpinConfiguration sigma = SpinConfiguration::from_index(static_cast<std::uint64_t>(s), n);
    h(s, s) += spec.diagonal_energy(sigma);
    for (const ConnectedElement& el : spec.connected_elements()) {
      std::uint64_t mask = 0;
      for (std::size_t site : el.flips.sites()) mask |= std::uint64_t{1} << site;
      h(static_cast<Eigen::Index>(static_cast<std::uint64_t>(s) ^ mask), s) += el.amplitude;
    }
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(h, Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) throw NumericalError("dense_ground_energy: eigensolver failed");
  return {solver.eigenvalues()[0], SolutionMethod::dense, n, 0};
}

double toric_ground_energy(std::size_t side) {
  NQS_EXPECT(side >= 2, "toric lattice side must be at least 2");
  return -2.0 * static_cast<double>(side * side);
}

namespace {

std::vector<double> all_log_psi(const MaskedAnsatz& ansatz, std::size_t max_n) {
  const std::size_t n = ansatz.input_size();
  require_capacity(n, max_n, "enumeration");
  const std::size_t dim = std::size_t{1} << n;
  std::vector<double> out(dim);
  for (std::size_t s = 0; s < dim; ++s) {
    out[s] = ansatz.log_psi(SpinConfiguration::from_index(s, n));
    if (!std::isfinite(out[s])) throw NumericalError("enumeration: non-finite log amplitude at index " + std::to_string(s));
  }
  return out;
}

/// Returns p = exp(2 (l - max)) / Z and log Z (of psi^2).
std::vector<double> normalized(const std::vector<double>& log_psi, double& log_norm) {
  const double top = *std::max_element(log_psi.begin(), log_psi.end());
  std::vector<double> p(log_psi.size());
  double z = 0.0;
  for (std::size_t s = 0; s < p.size(); ++s) {
    p[s] = std::exp(2.0 * (log_psi[s] - top));
    z += p[s];
  }
  for (double& x : p) x /= z;
  log_norm = std::log(z) + 2.0 * top;
  return p;
}

}  // namespace

Enumeration enumerate_expectation(const MaskedAnsatz& ansatz, const HamiltonianSpec& spec,
                                  std::optional<double> reference, std::size_t max_n) {
  NQS_EXPECT(ansatz.input_size() == spec.size(), "ansatz input size does not match the Hamiltonian");
  const std::size_t n = spec.size();
  const std::vector<double> logs = all_log_psi(ansatz, max_n);
  Enumeration out;
  const std::vector<double> p = normalized(logs, out.log_norm);
  double excess = 0.0;
  for (std::size_t s = 0; s < p.size(); ++s) {
    const double e = local_energy(spec, ansatz, SpinConfiguration::from_index(s, n));
    out.energy += p[s] * e;
    out.energy_sq += p[s] * e * e;
    if (reference) excess += p[s] * (e - *reference);
  }
  out.variance = std::max(0.0, out.energy_sq - out.energy * out.energy);
  if (reference) out.excess = excess;
  return out;
}

double enumerate_overlap(const MaskedAnsatz& a, const MaskedAnsatz& b, std::size_t max_n) {
  NQS_EXPECT(a.input_size() == b.input_size(), "ansatz sizes differ");
  const std::vector<double> la = all_log_psi(a, max_n);
  const std::vector<double> lb = all_log_psi(b, max_n);
  double za = 0.0;
  double zb = 0.0;
  const std::vector<double> pa = normalized(la, za);
  const std::vector<double> pb = normalized(lb, zb);
  double overlap = 0.0;
  for (std::size_t s = 0; s < pa.size(); ++s) overlap += std::sqrt(pa[s] * pb[s]);
  return overlap;
}

std::vector<double> enumerate_probabilities(const MaskedAnsatz& ansatz, std::size_t max_n) {
  double log_norm = 0.0;
  return normalized(all_log_psi(ansatz, max_n), log_norm);
}

EstimatorSet enumerate_estimators(const MaskedAnsatz& ansatz, const HamiltonianSpec& spec, std::size_t max_n) {
  const std::size_t n = spec.size();
  require_capacity(n, max_n, "enumerate_estimators");
  std::vector<SpinConfiguration> configs;
  configs.reserve(std::size_t{1} << n);
  for (std::size_t s = 0; s < (std::size_t{1} << n); ++s) configs.push_back(SpinConfiguration::from_index(s, n));
  EstimatorSet est = collect_estimators(ansatz, spec, configs);
  est.weights = enumerate_probabilities(ansatz, max_n);
  return est;
}

OddParityFilterSet::OddParityFilterSet(double w) : magnitude(w) {
  std::size_t k = 0;
  for (int minus : {1, 3}) {
    for (std::size_t pos = 0; pos < 4; ++pos) {
      std::array<int, 4> pattern{};
      for (std::size_t i = 0; i < 4; ++i) {
        const bool flipped = minus == 1 ? i == pos : i != pos;
        pattern[i] = flipped ? -1 : 1;
      }
      patterns[k++] = pattern;
    }
  }
}

MaskedAnsatz build_toric_solution(const ArchitectureSpec& arch, double w) {
  const auto* toric = std::get_if<ToricLattice>(&arch.lattice());
  if (toric == nullptr || !arch.is_feed_forward())
    throw ConfigError("the toric solution needs a feed-forward network on a toric lattice");
  const std::size_t n = toric->size();
  const std::size_t units_needed = OddParityFilterSet::kPatterns * toric->plaquettes().size();
  if (arch.output_size() < units_needed)
    throw CapacityError("toric solution needs " + std::to_string(units_needed) + " hidden units, have " +
                        std::to_string(arch.output_size()));
  const OddParityFilterSet filters(w);
  ParameterVector theta(arch.parameter_count(), 0.0);
  std::vector<std::uint8_t> bits(arch.parameter_count(), 0);
  for (std::size_t p = 0; p < toric->plaquettes().size(); ++p) {
    const Cell& cell = toric->plaquettes()[p];
    for (std::size_t k = 0; k < OddParityFilterSet::kPatterns; ++k) {
      const std::size_t unit = OddParityFilterSet::kPatterns * p + k;
      for (std::size_t e = 0; e < 4; ++e) {
        const std::size_t index = unit * n + cell[e];
        theta[index] = filters.magnitude * filters.patterns[k][e];
        bits[index] = 1;
      }
    }
  }
  return MaskedAnsatz(arch, std::move(theta), Mask(std::move(bits)));
}

MaskedAnsatz build_toric_solution(std::size_t side, double w) {
  const ToricLattice lattice(side);
  // 8 L^2 hidden units = 4 N.
  return build_toric_solution(ArchitectureSpec::feed_forward(lattice, 4.0), w);
}

}  // namespace nqs
