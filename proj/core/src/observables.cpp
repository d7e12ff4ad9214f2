// Copyright 2026 The nqs-prune Authors
// SPDX-License-Identifier: Apache-2.0

#include "nqs/observables.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "nqs/error.hpp"
#include "nqs/hamiltonian.hpp"

namespace nqs {

EnergyStats energy_stats(std::span<const double> values) {
  NQS_EXPECT(values.size() >= 2, "need at least two samples");
  const double count = static_cast<double>(values.size());
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= count;
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  const double var = ss / (count - 1.0);
  return {mean, var, std::sqrt(var / count)};
}

double relative_error(double energy, double reference) {
  NQS_EXPECT(reference != 0.0, "relative error needs a nonzero reference energy");
  return std::abs((reference - energy) / reference);
}

double absolute_error_per_spin(double energy, double reference, std::size_t n) {
  NQS_EXPECT(n > 0, "spin count must be positive");
  return std::abs(reference - energy) / static_cast<double>(n);
}

double magnetization_z(const SampleBatch& batch) {
  NQS_EXPECT(batch.size() > 0, "empty batch");
  double sum = 0.0;
  for (const auto& sigma : batch.configs) sum += static_cast<double>(sigma.total()) / static_cast<double>(sigma.size());
  return sum / static_cast<double>(batch.size());
}

double magnetization_x(const MaskedAnsatz& ansatz, const SampleBatch& batch) {
  NQS_EXPECT(batch.size() > 0, "empty batch");
  double sum = 0.0;
  for (const auto& sigma : batch.configs) {
    Walker walker(ansatz, sigma);
    double row = 0.0;
    for (std::size_t i = 0; i < sigma.size(); ++i) row += safe_ratio(walker.delta(FlipSet{i}));
    sum += row / static_cast<double>(sigma.size());
  }
  return sum / static_cast<double>(batch.size());
}

namespace {

struct RatioMean {
  double log_mean;  // log of mean(exp(r))
  double rel_var;   // variance of exp(r) / mean^2, divided by sample count
};

RatioMean mean_ratio(const MaskedAnsatz& num, const MaskedAnsatz& den, const SampleBatch& batch) {
  const std::size_t count = batch.size();
  std::vector<double> r(count);
  for (std::size_t s = 0; s < count; ++s) {
    const double lb = num.log_psi(batch.configs[s]);
    const double la = den.log_psi(batch.configs[s]);
    r[s] = lb - la;
    if (!std::isfinite(r[s])) {
      std::string bits;
      for (Spin v : batch.configs[s].values()) bits += v > 0 ? '+' : '-';
      throw NumericalError("non-finite amplitude ratio at configuration " + bits);
    }
  }
  const double shift = *std::max_element(r.begin(), r.end());
  double m1 = 0.0;
  double m2 = 0.0;
  for (double x : r) {
    const double e = std::exp(x - shift);
    m1 += e;
    m2 += e * e;
  }
  m1 /= static_cast<double>(count);
  m2 /= static_cast<double>(count);
  const double rel_var = count > 1 ? std::max(0.0, m2 / (m1 * m1) - 1.0) / static_cast<double>(count - 1) : 0.0;
  return {std::log(m1) + shift, rel_var};
}

}  // namespace

FidelityEstimate fidelity(const MaskedAnsatz& a, const MaskedAnsatz& b, const SampleBatch& batch_a,
                          const SampleBatch& batch_b) {
  NQS_EXPECT(batch_a.size() > 0 && batch_b.size() > 0, "empty batch");
  NQS_EXPECT(a.input_size() == b.input_size(), "ansatz sizes differ");
  const RatioMean ab = mean_ratio(b, a, batch_a);
  const RatioMean ba = mean_ratio(a, b, batch_b);
  FidelityEstimate out;
  const double log_sq = ab.log_mean + ba.log_mean;
  out.squared = std::exp(std::min(log_sq, 700.0));
  out.stat_err = out.squared * std::sqrt(ab.rel_var + ba.rel_var);
  const double f = std::sqrt(std::max(out.squared, 0.0));
  out.value = std::min(std::clamp(f, 0.0, 1.0 + 3.0 * out.stat_err), 1.0);
  return out;
}

}  // namespace nqs
