// Copyright 2026 The nqs-prune Authors
// SPDX-License-Identifier: Apache-2.0

#include "nqs/ansatz.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "nqs/error.hpp"
#include "nqs/rng.hpp"

namespace nqs {
namespace detail {

/// Theta-independent wiring of the linear layer: parameter k contributes
/// theta_k * sigma_input to pre-activation `output` once per tap.
struct Topology {
  struct Tap {
    std::uint32_t output;
    std::uint32_t input;
  };
  std::size_t inputs = 0;
  std::size_t outputs = 0;
  std::size_t params = 0;
  std::vector<std::size_t> tap_offsets;  // params + 1
  std::vector<Tap> taps;
};

}  // namespace detail

namespace {

struct ImageShape {
  std::size_t rows;
  std::size_t cols;
};

ImageShape image_shape(const Lattice& lattice) {
  if (const auto* sq = std::get_if<SquareLattice>(&lattice)) return {sq->side(), sq->side()};
  const auto& toric = std::get<ToricLattice>(lattice);
  return {2 * toric.side(), toric.side()};
}

std::size_t hidden_units(const FeedForward& ff, std::size_t n) {
  const double w = ff.width_factor * static_cast<double>(n);
  const double rounded = std::round(w);
  if (ff.width_factor <= 0 || std::abs(w - rounded) > 1e-9 || rounded < 1)
    throw ConfigError("width factor " + std::to_string(ff.width_factor) + " does not give an integer width for N=" +
                      std::to_string(n));
  return static_cast<std::size_t>(rounded);
}

std::shared_ptr<const detail::Topology> build_topology(const ArchitectureSpec::Kind& kind, const Lattice& lattice) {
  auto topo = std::make_shared<detail::Topology>();
  const std::size_t n = site_count(lattice);
  topo->inputs = n;
  if (const auto* ff = std::get_if<FeedForward>(&kind)) {
    const std::size_t w = hidden_units(*ff, n);
    topo->outputs = w;
    topo->params = w * n;
    topo->tap_offsets.resize(topo->params + 1);
    topo->taps.reserve(topo->params);
    for (std::size_t i = 0; i < w; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        topo->tap_offsets[i * n + j] = topo->taps.size();
        topo->taps.push_back({static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j)});
      }
    }
    topo->tap_offsets[topo->params] = topo->taps.size();
    return topo;
  }
  const auto& conv = std::get<ShallowConv>(kind);
  const auto [rows, cols] = image_shape(lattice);
  const std::size_t k = conv.kernel_side;
  if (conv.kernels == 0 || k == 0) throw ConfigError("convolution needs at least one non-empty kernel");
  if (rows < k || cols < k)
    throw ConfigError("kernel side " + std::to_string(k) + " exceeds the input image " + std::to_string(rows) + "x" +
                      std::to_string(cols));
  const std::size_t out_rows = rows - k + 1;
  const std::size_t out_cols = cols - k + 1;
  const std::size_t positions = out_rows * out_cols;
  topo->outputs = conv.kernels * positions;
  topo->params = conv.kernels * k * k;
  topo->tap_offsets.resize(topo->params + 1);
  for (std::size_t f = 0; f < conv.kernels; ++f) {
    for (std::size_t a = 0; a < k; ++a) {
      for (std::size_t b = 0; b < k; ++b) {
        const std::size_t param = f * k * k + a * k + b;
        topo->tap_offsets[param] = topo->taps.size();
        for (std::size_t pr = 0; pr < out_rows; ++pr) {
          for (std::size_t pc = 0; pc < out_cols; ++pc) {
            const std::size_t output = f * positions + pr * out_cols + pc;
            const std::size_t input = (pr + a) * cols + (pc + b);
            topo->taps.push_back({static_cast<std::uint32_t>(output), static_cast<std::uint32_t>(input)});
          }
        }
      }
    }
  }
  topo->tap_offsets[topo->params] = topo->taps.size();
  return topo;
}

}  // namespace

// ---------------------------------------------------------------------------
// ArchitectureSpec

ArchitectureSpec::ArchitectureSpec(Kind kind, Lattice lattice)
    : kind_(kind), lattice_(std::move(lattice)), topology_(build_topology(kind_, lattice_)) {}

ArchitectureSpec ArchitectureSpec::feed_forward(Lattice lattice, double width_factor) {
  return ArchitectureSpec(FeedForward{width_factor}, std::move(lattice));
}

ArchitectureSpec ArchitectureSpec::shallow_cnn(Lattice lattice, std::size_t kernels, std::size_t kernel_side) {
  return ArchitectureSpec(ShallowConv{kernels, kernel_side}, std::move(lattice));
}

std::size_t ArchitectureSpec::input_size() const { return topology_->inputs; }
std::size_t ArchitectureSpec::output_size() const { return topology_->outputs; }
std::size_t ArchitectureSpec::parameter_count() const { return topology_->params; }

std::size_t ArchitectureSpec::positions_per_kernel() const {
  const auto* conv = std::get_if<ShallowConv>(&kind_);
  NQS_EXPECT(conv != nullptr, "positions are defined for convolutional networks only");
  return topology_->outputs / conv->kernels;
}

std::string ArchitectureSpec::descriptor() const {
  std::ostringstream out;
  if (const auto* ff = std::get_if<FeedForward>(&kind_)) {
    out.precision(17);
    out << "ffnn:alpha=" << ff->width_factor;
  } else {
    const auto& conv = std::get<ShallowConv>(kind_);
    out << "cnn:kernels=" << conv.kernels << ":kd=" << conv.kernel_side;
  }
  return out.str();
}

ArchitectureSpec ArchitectureSpec::from_descriptors(const std::string& arch, const std::string& lattice) {
  Lattice lat = parse_lattice_descriptor(lattice);
  try {
    if (arch.rfind("ffnn:alpha=", 0) == 0) return feed_forward(std::move(lat), std::stod(arch.substr(11)));
    if (arch.rfind("cnn:kernels=", 0) == 0) {
      const auto colon = arch.find(":kd=");
      if (colon == std::string::npos) throw ConfigError("missing kernel side in '" + arch + "'");
      return shallow_cnn(std::move(lat), std::stoul(arch.substr(12, colon - 12)), std::stoul(arch.substr(colon + 4)));
    }
  } catch (const std::invalid_argument&) {
  } catch (const std::out_of_range&) {
  }
  throw ConfigError("malformed architecture descriptor '" + arch + "'");
}

// ---------------------------------------------------------------------------
// Initialization

InitScheme default_init_scheme(const ArchitectureSpec& arch) {
  return arch.is_feed_forward() ? InitScheme::normal : InitScheme::lecun_truncated;
}

ParameterVector init_parameters(const ArchitectureSpec& arch, InitScheme scheme, std::uint64_t seed) {
  RngStream rng = RngStream::derive(seed, {stream::kInit});
  ParameterVector theta(arch.parameter_count());
  if (scheme == InitScheme::normal) {
    for (double& t : theta) t = 0.1 * rng.normal();
    return theta;
  }
  // Fan-in of one output is the number of inputs it reads.
  std::size_t fan_in = arch.input_size();
  if (const auto* conv = std::get_if<ShallowConv>(&arch.kind())) fan_in = conv->kernel_side * conv->kernel_side;
  // Standard normal truncated to [-2, 2] has standard deviation 0.87962566103423978.
  const double scale = std::sqrt(1.0 / static_cast<double>(fan_in)) / 0.87962566103423978;
  for (double& t : theta) {
    double z = rng.normal();
    while (std::abs(z) > 2.0) z = rng.normal();
    t = scale * z;
  }
  return theta;
}

// ---------------------------------------------------------------------------
// Mask

Mask Mask::full(std::size_t n) { return Mask(std::vector<std::uint8_t>(n, 1)); }

Mask::Mask(std::vector<std::uint8_t> bits) : bits_(std::move(bits)) {
  for (std::uint8_t b : bits_) {
    NQS_EXPECT(b <= 1, "mask entries must be 0 or 1");
    ones_ += b;
  }
}

void Mask::clear(std::size_t i) {
  NQS_EXPECT(i < bits_.size(), "mask index " + std::to_string(i) + " out of range");
  NQS_EXPECT(bits_[i] == 1, "index " + std::to_string(i) + " is already masked");
  bits_[i] = 0;
  --ones_;
}

std::vector<std::size_t> Mask::active_indices() const {
  std::vector<std::size_t> out;
  out.reserve(ones_);
  for (std::size_t i = 0; i < bits_.size(); ++i)
    if (bits_[i]) out.push_back(i);
  return out;
}

bool Mask::is_subset_of(const Mask& other) const {
  if (other.size() != size()) return false;
  for (std::size_t i = 0; i < bits_.size(); ++i)
    if (bits_[i] && !other.bits_[i]) return false;
  return true;
}

std::vector<std::uint8_t> Mask::pack() const {
  std::vector<std::uint8_t> out((bits_.size() + 7) / 8, 0);
  for (std::size_t i = 0; i < bits_.size(); ++i)
    if (bits_[i]) out[i / 8] |= static_cast<std::uint8_t>(1U << (i % 8));
  return out;
}

Mask Mask::unpack(std::span<const std::uint8_t> bytes, std::size_t n) {
  NQS_EXPECT(bytes.size() == (n + 7) / 8, "packed mask has the wrong length");
  std::vector<std::uint8_t> bits(n);
  for (std::size_t i = 0; i < n; ++i) bits[i] = (bytes[i / 8] >> (i % 8)) & 1U;
  return Mask(std::move(bits));
}

std::uint64_t Mask::hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::uint8_t b : bits_) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// ---------------------------------------------------------------------------
// Activations

double activate(Activation act, double x) {
  if (act == Activation::relu) return x > 0.0 ? x : 0.0;
  return 0.5 * x * (1.0 + std::erf(x * std::numbers::sqrt2 / 2.0));
}

double activate_derivative(Activation act, double x) {
  if (act == Activation::relu) return x > 0.0 ? 1.0 : 0.0;
  const double cdf = 0.5 * (1.0 + std::erf(x * std::numbers::sqrt2 / 2.0));
  const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
  return cdf + x * pdf;
}

// ---------------------------------------------------------------------------
// MaskedAnsatz

MaskedAnsatz::MaskedAnsatz(ArchitectureSpec arch, ParameterVector theta, Mask mask)
    : arch_(std::move(arch)), theta_(std::move(theta)), mask_(std::move(mask)) {
  NQS_EXPECT(theta_.size() == arch_.parameter_count(),
             "parameter vector has length " + std::to_string(theta_.size()) + ", expected " +
                 std::to_string(arch_.parameter_count()));
  NQS_EXPECT(mask_.size() == theta_.size(), "mask length does not match parameter count");
  for (std::size_t k = 0; k < theta_.size(); ++k)
    if (!mask_.test(k)) theta_[k] = 0.0;
  active_ = mask_.active_indices();
  compile();
}

MaskedAnsatz MaskedAnsatz::dense(ArchitectureSpec arch, ParameterVector theta) {
  const std::size_t n = theta.size();
  return MaskedAnsatz(std::move(arch), std::move(theta), Mask::full(n));
}

MaskedAnsatz MaskedAnsatz::with_parameters(ParameterVector theta) const {
  return MaskedAnsatz(arch_, std::move(theta), mask_);
}

void MaskedAnsatz::compile() {
  const auto& topo = arch_.topology();
  column_offsets_.assign(topo.inputs + 1, 0);
  for (std::size_t k : active_)
    for (std::size_t t = topo.tap_offsets[k]; t < topo.tap_offsets[k + 1]; ++t) ++column_offsets_[topo.taps[t].input + 1];
  for (std::size_t j = 0; j < topo.inputs; ++j) column_offsets_[j + 1] += column_offsets_[j];
  columns_.resize(column_offsets_.back());
  std::vector<std::size_t> fill(column_offsets_.begin(), column_offsets_.end() - 1);
  for (std::size_t k : active_) {
    for (std::size_t t = topo.tap_offsets[k]; t < topo.tap_offsets[k + 1]; ++t) {
      const auto& tap = topo.taps[t];
      columns_[fill[tap.input]++] = {tap.output, theta_[k]};
    }
  }
}

void MaskedAnsatz::preactivations(std::span<const Spin> sigma, std::span<double> h) const {
  NQS_EXPECT(sigma.size() == input_size(), "configuration size does not match the ansatz input");
  std::fill(h.begin(), h.end(), 0.0);
  for (std::size_t j = 0; j < sigma.size(); ++j) {
    const double s = sigma[j];
    for (std::size_t e = column_offsets_[j]; e < column_offsets_[j + 1]; ++e) h[columns_[e].output] += s * columns_[e].weight;
  }
}

double MaskedAnsatz::log_psi_from(std::span<const double> h) const {
  const Activation act = arch_.activation();
  double sum = 0.0;
  if (act == Activation::relu) {
    for (double x : h) sum += x > 0.0 ? x : 0.0;
  } else {
    for (double x : h) sum += activate(act, x);
  }
  return sum;
}

double MaskedAnsatz::log_psi(const SpinConfiguration& sigma) const {
  std::vector<double> h(output_size());
  preactivations(sigma.values(), h);
  const double value = log_psi_from(h);
  if (!std::isfinite(value)) throw NumericalError("non-finite log-amplitude");
  return value;
}

double MaskedAnsatz::delta_from(std::span<const Spin> sigma, std::span<const double> h,
                                std::span<const std::size_t> flips, DeltaScratch& scratch) const {
  const Activation act = arch_.activation();
  if (flips.empty()) return 0.0;
  if (flips.size() == 1) {
    const std::size_t j = flips[0];
    NQS_EXPECT(j < sigma.size(), "flip site out of range");
    const double factor = -2.0 * sigma[j];
    double delta = 0.0;
    if (act == Activation::relu) {
      for (std::size_t e = column_offsets_[j]; e < column_offsets_[j + 1]; ++e) {
        const double before = h[columns_[e].output];
        const double after = before + factor * columns_[e].weight;
        delta += (after > 0.0 ? after : 0.0) - (before > 0.0 ? before : 0.0);
      }
    } else {
      for (std::size_t e = column_offsets_[j]; e < column_offsets_[j + 1]; ++e) {
        const double before = h[columns_[e].output];
        delta += activate(act, before + factor * columns_[e].weight) - activate(act, before);
      }
    }
    return delta;
  }
  if (scratch.shift.size() != h.size()) {
    scratch.shift.assign(h.size(), 0.0);
    scratch.marked.assign(h.size(), 0);
  }
  scratch.touched.clear();
  for (std::size_t j : flips) {
    NQS_EXPECT(j < sigma.size(), "flip site out of range");
    const double factor = -2.0 * sigma[j];
    for (std::size_t e = column_offsets_[j]; e < column_offsets_[j + 1]; ++e) {
      const std::uint32_t o = columns_[e].output;
      if (!scratch.marked[o]) {
        scratch.marked[o] = 1;
        scratch.touched.push_back(o);
      }
      scratch.shift[o] += factor * columns_[e].weight;
    }
  }
  // Summing in output order keeps the result independent of flip order.
  std::sort(scratch.touched.begin(), scratch.touched.end());
  double delta = 0.0;
  for (std::uint32_t o : scratch.touched) {
    delta += activate(act, h[o] + scratch.shift[o]) - activate(act, h[o]);
    scratch.shift[o] = 0.0;
    scratch.marked[o] = 0;
  }
  return delta;
}

void MaskedAnsatz::update_preactivations(std::span<const Spin> sigma, std::span<double> h,
                                         std::span<const std::size_t> flips) const {
  for (std::size_t j : flips) {
    const double factor = -2.0 * sigma[j];
    for (std::size_t e = column_offsets_[j]; e < column_offsets_[j + 1]; ++e)
      h[columns_[e].output] += factor * columns_[e].weight;
  }
}

void MaskedAnsatz::log_derivatives_from(std::span<const Spin> sigma, std::span<const double> h,
                                        std::span<double> out) const {
  NQS_EXPECT(out.size() == active_.size(), "derivative buffer must have one slot per unmasked parameter");
  const auto& topo = arch_.topology();
  const Activation act = arch_.activation();
  thread_local std::vector<double> slope;
  slope.resize(h.size());
  for (std::size_t o = 0; o < h.size(); ++o) slope[o] = activate_derivative(act, h[o]);
  for (std::size_t p = 0; p < active_.size(); ++p) {
    const std::size_t k = active_[p];
    double sum = 0.0;
    for (std::size_t t = topo.tap_offsets[k]; t < topo.tap_offsets[k + 1]; ++t)
      sum += slope[topo.taps[t].output] * sigma[topo.taps[t].input];
    out[p] = sum;
  }
}

// ---------------------------------------------------------------------------
// Walker

Walker::Walker(const MaskedAnsatz& ansatz, SpinConfiguration config)
    : ansatz_(&ansatz),
      config_(std::move(config)),
      h_(ansatz.output_size()) {
  refresh();
}

double Walker::delta(std::span<const std::size_t> flips) {
  return ansatz_->delta_from(config_.values(), h_, flips, scratch_);
}

void Walker::accept(std::span<const std::size_t> flips, double delta) {
  ansatz_->update_preactivations(config_.values(), h_, flips);
  config_.flip_in_place(flips);
  log_psi_ += delta;
}

void Walker::refresh() {
  ansatz_->preactivations(config_.values(), h_);
  log_psi_ = ansatz_->log_psi_from(h_);
  if (!std::isfinite(log_psi_)) throw NumericalError("non-finite log-amplitude");
}

// ---------------------------------------------------------------------------
// Free functions

double log_psi(const MaskedAnsatz& ansatz, const SpinConfiguration& sigma) { return ansatz.log_psi(sigma); }

double log_psi_delta(const MaskedAnsatz& ansatz, const SpinConfiguration& sigma, std::span<const std::size_t> flips) {
  Walker walker(ansatz, sigma);
  return walker.delta(flips);
}

std::vector<double> log_derivatives(const MaskedAnsatz& ansatz, const SpinConfiguration& sigma) {
  std::vector<double> h(ansatz.output_size());
  ansatz.preactivations(sigma.values(), h);
  std::vector<double> out(ansatz.active_indices().size());
  ansatz.log_derivatives_from(sigma.values(), h, out);
  return out;
}

MaskedAnsatz apply_prune(const MaskedAnsatz& ansatz, std::span<const std::size_t> indices) {
  Mask mask = ansatz.mask();
  for (std::size_t k : indices) mask.clear(k);
  return MaskedAnsatz(ansatz.architecture(), ParameterVector(ansatz.parameters().begin(), ansatz.parameters().end()),
                      std::move(mask));
}

}  // namespace nqs
