// Copyright 2026 The nqs-prune Authors
// SPDX-License-Identifier: Apache-2.0

#include "nqs/sr.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <string>

#include "nqs/diagnostics.hpp"
#include "nqs/error.hpp"
#include "nqs/parallel.hpp"
#include "nqs/rng.hpp"

namespace nqs {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMatrix>;
using Vec = Eigen::VectorXd;

ConstMap matrix(const EstimatorSet& est) {
  return ConstMap(est.o.data(), static_cast<Eigen::Index>(est.rows), static_cast<Eigen::Index>(est.cols));
}

Vec weight_vector(const EstimatorSet& est) {
  if (est.weights.empty()) return Vec::Constant(static_cast<Eigen::Index>(est.rows), 1.0 / static_cast<double>(est.rows));
  return Eigen::Map<const Vec>(est.weights.data(), static_cast<Eigen::Index>(est.rows));
}

/// Rows scaled by sqrt(w_r) after centering: S = X^T X.
RowMatrix centered_scaled(const EstimatorSet& est) {
  const Vec w = weight_vector(est);
  const auto o = matrix(est);
  const Eigen::RowVectorXd mean = w.transpose() * o;
  RowMatrix x = o.rowwise() - mean;
  x.array().colwise() *= w.array().sqrt();
  return x;
}

std::vector<double> to_std(const Vec& v) { return {v.data(), v.data() + v.size()}; }

}  // namespace

void SRConfig::validate() const {
  if (!(eta >= 0.0) || !std::isfinite(eta)) throw ConfigError("eta must be finite and non-negative");
  if (!(lambda > 0.0) || !std::isfinite(lambda)) throw ConfigError("lambda must be finite and positive");
  if (!(cg_tol > 0.0)) throw ConfigError("cg_tol must be positive");
  if (cg_max_iter == 0) throw ConfigError("cg_max_iter must be positive");
}

std::vector<double> EstimatorSet::mean_o() const {
  std::vector<double> mean(cols, 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    const double w = weight(r);
    const double* row = o.data() + r * cols;
    for (std::size_t k = 0; k < cols; ++k) mean[k] += w * row[k];
  }
  return mean;
}

double EstimatorSet::mean_energy() const {
  double mean = 0.0;
  for (std::size_t r = 0; r < rows; ++r) mean += weight(r) * e_loc[r];
  return mean;
}

EstimatorSet collect_estimators(const MaskedAnsatz& ansatz, const HamiltonianSpec& spec,
                                std::span<const SpinConfiguration> configs, std::size_t threads) {
  NQS_EXPECT(ansatz.input_size() == spec.size(), "ansatz input size does not match the Hamiltonian");
  EstimatorSet est;
  est.rows = configs.size();
  est.cols = ansatz.active_indices().size();
  est.o.assign(est.rows * est.cols, 0.0);
  est.e_loc.assign(est.rows, 0.0);
  parallel_for(est.rows, threads, [&](std::size_t r) {
    Walker walker(ansatz, configs[r]);
    est.e_loc[r] = local_energy(spec, walker);
    ansatz.log_derivatives_from(configs[r].values(), walker.preactivations(),
                                std::span<double>(est.o.data() + r * est.cols, est.cols));
  });
  return est;
}

std::vector<double> estimate_gradient(const EstimatorSet& est) {
  NQS_EXPECT(est.rows >= 2, "gradient estimate needs at least two samples");
  const Vec w = weight_vector(est);
  const auto o = matrix(est);
  const Eigen::Map<const Vec> e(est.e_loc.data(), static_cast<Eigen::Index>(est.rows));
  const double e_mean = w.dot(e);
  const Vec centered = (e.array() - e_mean).matrix().cwiseProduct(w);
  return to_std(2.0 * (o.transpose() * centered));
}

std::vector<double> s_matvec(const EstimatorSet& est, std::span<const double> v) {
  NQS_EXPECT(v.size() == est.cols, "vector length does not match the unmasked parameter count");
  const Vec w = weight_vector(est);
  const auto o = matrix(est);
  const Eigen::Map<const Vec> x(v.data(), static_cast<Eigen::Index>(v.size()));
  const Vec mean = o.transpose() * w;
  const Vec ov = o * x;
  const Vec result = o.transpose() * ov.cwiseProduct(w) - mean * mean.dot(x);
  return to_std(result);
}

namespace {

/// Direct solve of (X^T X + lambda I) delta = g, factorizing whichever of
/// X^T X (n x n) or X X^T (rows x rows) is smaller. Returns false if the
/// factorization fails.
bool direct_solve(const RowMatrix& x, const Vec& g, double lambda, Vec& delta) {
  const Eigen::Index rows = x.rows();
  const Eigen::Index n = x.cols();
  if (n <= rows) {
    Eigen::MatrixXd s(n, n);
    s.setZero();
    s.selfadjointView<Eigen::Lower>().rankUpdate(x.transpose());
    s.diagonal().array() += lambda;
    Eigen::LLT<Eigen::MatrixXd> llt(s);
    if (llt.info() != Eigen::Success) return false;
    delta = llt.solve(g);
  } else {
    // Woodbury: (X^T X + lambda I)^-1 g = (g - X^T (X X^T + lambda I)^-1 X g) / lambda.
    Eigen::MatrixXd t(rows, rows);
    t.setZero();
    t.selfadjointView<Eigen::Lower>().rankUpdate(x);
    t.diagonal().array() += lambda;
    Eigen::LLT<Eigen::MatrixXd> llt(t);
    if (llt.info() != Eigen::Success) return false;
    const Vec xg = x * g;
    delta = (g - x.transpose() * llt.solve(xg)) / lambda;
  }
  return delta.allFinite();
}

}  // namespace

SolveReport solve_sr(const EstimatorSet& est, std::span<const double> gradient, const SRConfig& cfg) {
  cfg.validate();
  NQS_EXPECT(gradient.size() == est.cols, "gradient length does not match the unmasked parameter count");
  const Eigen::Map<const Vec> g(gradient.data(), static_cast<Eigen::Index>(gradient.size()));
  SolveReport report;
  report.lambda_used = cfg.lambda;
  const RowMatrix x = centered_scaled(est);

  const bool dense = cfg.solver == SolverKind::dense_cholesky ||
                     (cfg.solver == SolverKind::automatic && est.cols <= cfg.dense_threshold);
  if (dense) {
    Vec delta;
    double lambda = cfg.lambda;
    for (int attempt = 0; attempt < 8; ++attempt) {
      if (direct_solve(x, g, lambda, delta)) {
        report.delta = to_std(delta);
        report.lambda_used = lambda;
        return report;
      }
      diagnostics::warn("sr", "Cholesky factorization failed at lambda=" + std::to_string(lambda) + ", retrying with " +
                        std::to_string(lambda * 10.0));
      lambda *= 10.0;
    }
    throw NumericalError("sr: Cholesky factorization failed after repeated diagonal-shift increases");
  }

  // Jacobi-preconditioned conjugate gradient on (X^T X + lambda I).
  const Vec diag = x.colwise().squaredNorm().transpose().array() + cfg.lambda;
  const auto apply = [&](const Vec& v) -> Vec { return x.transpose() * (x * v) + cfg.lambda * v; };
  Vec delta = Vec::Zero(g.size());
  Vec r = g;
  Vec z = r.cwiseQuotient(diag);
  Vec p = z;
  double rz = r.dot(z);
  const double g_norm = g.norm();
  if (g_norm == 0.0) {
    report.delta = to_std(delta);
    return report;
  }
  for (std::size_t it = 0; it < cfg.cg_max_iter; ++it) {
    const Vec ap = apply(p);
    const double alpha = rz / p.dot(ap);
    delta += alpha * p;
    r -= alpha * ap;
    report.cg_iterations = it + 1;
    report.residual = r.norm() / g_norm;
    if (report.residual <= cfg.cg_tol) {
      report.delta = to_std(delta);
      return report;
    }
    z = r.cwiseQuotient(diag);
    const double rz_next = r.dot(z);
    p = z + (rz_next / rz) * p;
    rz = rz_next;
  }
  throw NumericalError("sr: conjugate gradient did not converge in " + std::to_string(cfg.cg_max_iter) +
                       " iterations (relative residual " + std::to_string(report.residual) + ")");
}

MaskedAnsatz sr_update(const MaskedAnsatz& ansatz, const EstimatorSet& est, const SRConfig& cfg) {
  NQS_EXPECT(est.cols == ansatz.active_indices().size(), "estimator set does not match the current mask");
  const std::vector<double> g = estimate_gradient(est);
  const SolveReport solved = solve_sr(est, g, cfg);
  ParameterVector theta(ansatz.parameters().begin(), ansatz.parameters().end());
  const auto& active = ansatz.active_indices();
  for (std::size_t k = 0; k < active.size(); ++k) theta[active[k]] -= cfg.eta * solved.delta[k];
  return ansatz.with_parameters(std::move(theta));
}

TrainingDiverged::TrainingDiverged(std::size_t step, MaskedAnsatz last_finite)
    : NumericalError("training diverged at step " + std::to_string(step)),
      step_(step),
      last_finite_(std::move(last_finite)) {}

TrainResult train(MaskedAnsatz ansatz, const HamiltonianSpec& spec, const SamplerConfig& sampler,
                  const SRConfig& sr, std::size_t steps) {
  NQS_EXPECT(steps >= 1, "need at least one training step");
  sr.validate();
  sampler.validate();
  TrainResult result{std::move(ansatz), {}};
  result.trace.reserve(steps);
  for (std::size_t t = 0; t < steps; ++t) {
    SamplerConfig step_cfg = sampler;
    step_cfg.seed = RngStream::derive(sampler.seed, {t}).key();
    EstimatorSet est;
    try {
      const SampleBatch batch = sample_batch(result.ansatz, step_cfg);
      est = collect_estimators(result.ansatz, spec, batch.configs, sampler.threads);
      StepRecord rec;
      rec.acceptance = batch.acceptance_rate;
      rec.energy = est.mean_energy();
      double ss = 0.0;
      for (double e : est.e_loc) ss += (e - rec.energy) * (e - rec.energy);
      rec.variance = est.rows > 1 ? ss / static_cast<double>(est.rows - 1) : 0.0;
      if (!std::isfinite(rec.energy) || !std::isfinite(rec.variance)) throw NumericalError("non-finite energy");
      result.trace.push_back(rec);
    } catch (const NumericalError&) {
      throw TrainingDiverged(t, result.ansatz);
    }
    MaskedAnsatz next = sr_update(result.ansatz, est, sr);
    bool finite = true;
    for (double v : next.parameters()) finite = finite && std::isfinite(v);
    if (!finite) throw TrainingDiverged(t, result.ansatz);
    result.ansatz = std::move(next);
  }
  return result;
}

}  // namespace nqs
