// Copyright 2026 The nqs-prune Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "nqs/lattice.hpp"

namespace nqs {

enum class Activation { relu, gelu };

/// Single hidden layer, no biases, ReLU; hidden width w = alpha * N.
struct FeedForward {
  double width_factor = 1.0;
};

/// One convolutional layer of `kernels` k x k filters, VALID padding, no
/// biases, GELU. Toric-code inputs are laid out as a (2L) x L image: the L x L
/// horizontal-edge grid stacked on top of the vertical-edge grid.
struct ShallowConv {
  std::size_t kernels = 1;
  std::size_t kernel_side = 3;
};

namespace detail {
struct Topology;
}

/// Architecture plus the lattice it reads from.
///
/// Parameter layout (part of the checkpoint contract):
///  - FFNN: W row-major by hidden unit, index = unit * N + site.
///  - CNN: kernels concatenated, each row-major, index = f * k^2 + a * k + b.
class ArchitectureSpec {
 public:
  using Kind = std::variant<FeedForward, ShallowConv>;

  static ArchitectureSpec feed_forward(Lattice lattice, double width_factor);
  static ArchitectureSpec shallow_cnn(Lattice lattice, std::size_t kernels, std::size_t kernel_side = 3);
  /// Rebuilds a spec from descriptor() and describe(lattice) strings.
  static ArchitectureSpec from_descriptors(const std::string& arch, const std::string& lattice);

  const Kind& kind() const { return kind_; }
  const Lattice& lattice() const { return lattice_; }
  bool is_feed_forward() const { return std::holds_alternative<FeedForward>(kind_); }
  Activation activation() const { return is_feed_forward() ? Activation::relu : Activation::gelu; }

  std::size_t input_size() const;
  /// Number of pre-activations: hidden units (FFNN) or kernels * positions (CNN).
  std::size_t output_size() const;
  std::size_t parameter_count() const;
  /// CNN only: VALID output positions per kernel.
  std::size_t positions_per_kernel() const;

  std::string descriptor() const;

  const detail::Topology& topology() const { return *topology_; }

  friend bool operator==(const ArchitectureSpec& a, const ArchitectureSpec& b) {
    return a.descriptor() == b.descriptor() && describe(a.lattice_) == describe(b.lattice_);
  }

 private:
  ArchitectureSpec(Kind kind, Lattice lattice);

  Kind kind_;
  Lattice lattice_;
  std::shared_ptr<const detail::Topology> topology_;
};

using ParameterVector = std::vector<double>;

enum class InitScheme {
  normal,           ///< N(0, 0.1^2), the FFNN default
  lecun_truncated,  ///< truncated normal in [-2, 2] scaled to variance 1/fan_in, the CNN default
};

InitScheme default_init_scheme(const ArchitectureSpec& arch);

/// Deterministic for fixed (arch, scheme, seed).
ParameterVector init_parameters(const ArchitectureSpec& arch, InitScheme scheme, std::uint64_t seed);

/// Binary pruning mask with a cached population count.
class Mask {
 public:
  Mask() = default;
  static Mask full(std::size_t n);
  /// Entries must be 0 or 1.
  explicit Mask(std::vector<std::uint8_t> bits);

  std::size_t size() const { return bits_.size(); }
  std::size_t ones() const { return ones_; }
  bool test(std::size_t i) const { return bits_[i] != 0; }
  /// Clears bit i; throws ContractViolation if it is already clear.
  void clear(std::size_t i);
  std::vector<std::size_t> active_indices() const;
  bool is_subset_of(const Mask& other) const;

  /// LSB-first bit packing, ceil(n/8) bytes.
  std::vector<std::uint8_t> pack() const;
  static Mask unpack(std::span<const std::uint8_t> bytes, std::size_t n);

  std::uint64_t hash() const;

  friend bool operator==(const Mask&, const Mask&) = default;

 private:
  std::vector<std::uint8_t> bits_;
  std::size_t ones_ = 0;
};

/// Architecture + parameters theta + mask m; the effective weights are
/// theta (.) m. Masked entries of theta are stored as exactly 0.
///
/// Immutable: construction compiles the unmasked weights into per-site
/// column lists so that single and multi-spin flips can be evaluated
/// incrementally from cached pre-activations (see Walker).
class MaskedAnsatz {
 public:
  MaskedAnsatz(ArchitectureSpec arch, ParameterVector theta, Mask mask);
  static MaskedAnsatz dense(ArchitectureSpec arch, ParameterVector theta);

  const ArchitectureSpec& architecture() const { return arch_; }
  std::span<const double> parameters() const { return theta_; }
  const Mask& mask() const { return mask_; }
  /// Unmasked parameter indices in increasing order ("mask order").
  const std::vector<std::size_t>& active_indices() const { return active_; }
  std::size_t input_size() const { return arch_.input_size(); }
  std::size_t output_size() const { return arch_.output_size(); }

  /// Same mask, new parameters (masked entries forced to 0).
  MaskedAnsatz with_parameters(ParameterVector theta) const;

  /// h = (theta (.) m) * sigma.
  void preactivations(std::span<const Spin> sigma, std::span<double> h) const;
  /// sum_o act(h_o).
  double log_psi_from(std::span<const double> h) const;
  double log_psi(const SpinConfiguration& sigma) const;

  /// Reusable buffers for multi-site deltas; sized by the ansatz on first use.
  struct DeltaScratch {
    std::vector<double> shift;
    std::vector<std::uint8_t> marked;
    std::vector<std::uint32_t> touched;
  };

  /// log psi(flip(sigma, flips)) - log psi(sigma) given the cached h of sigma.
  double delta_from(std::span<const Spin> sigma, std::span<const double> h, std::span<const std::size_t> flips,
                    DeltaScratch& scratch) const;
  /// Applies the pre-activation update of a flip to h (sigma not yet flipped).
  void update_preactivations(std::span<const Spin> sigma, std::span<double> h,
                             std::span<const std::size_t> flips) const;

  /// d log psi / d theta_k for unmasked k in mask order, given cached h.
  void log_derivatives_from(std::span<const Spin> sigma, std::span<const double> h, std::span<double> out) const;

 private:
  struct ColumnEntry {
    std::uint32_t output;
    double weight;
  };

  void compile();

  ArchitectureSpec arch_;
  ParameterVector theta_;
  Mask mask_;
  std::vector<std::size_t> active_;
  std::vector<std::size_t> column_offsets_;
  std::vector<ColumnEntry> columns_;
};

/// A spin configuration together with its cached pre-activations and
/// log-amplitude under a fixed ansatz. The ansatz must outlive the walker.
class Walker {
 public:
  Walker(const MaskedAnsatz& ansatz, SpinConfiguration config);

  const SpinConfiguration& config() const { return config_; }
  double log_psi() const { return log_psi_; }
  std::span<const double> preactivations() const { return h_; }
  const MaskedAnsatz& ansatz() const { return *ansatz_; }

  /// log psi after flipping `flips` minus the current log psi; no state change.
  double delta(std::span<const std::size_t> flips);
  /// Moves to the flipped configuration; `delta` is the value returned by delta().
  void accept(std::span<const std::size_t> flips, double delta);
  /// Recomputes pre-activations and log psi from scratch.
  void refresh();

 private:
  const MaskedAnsatz* ansatz_;
  SpinConfiguration config_;
  std::vector<double> h_;
  double log_psi_ = 0.0;
  MaskedAnsatz::DeltaScratch scratch_;
};

double log_psi(const MaskedAnsatz& ansatz, const SpinConfiguration& sigma);
double log_psi_delta(const MaskedAnsatz& ansatz, const SpinConfiguration& sigma, std::span<const std::size_t> flips);
/// Only unmasked coordinates are returned, in mask order.
std::vector<double> log_derivatives(const MaskedAnsatz& ansatz, const SpinConfiguration& sigma);
/// Clears the given (currently unmasked) indices and zeroes their weights.
MaskedAnsatz apply_prune(const MaskedAnsatz& ansatz, std::span<const std::size_t> indices);

double activate(Activation act, double x);
/// ReLU'(0) is taken to be 0.
double activate_derivative(Activation act, double x);

}  // namespace nqs
