// Copyright 2026 The nqs-prune Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "nqs/ansatz.hpp"
#include "nqs/hamiltonian.hpp"
#include "nqs/observables.hpp"
#include "nqs/pruning.hpp"
#include "nqs/sampler.hpp"
#include "nqs/sr.hpp"

namespace nqs {

/// Declarative description of a run. The text form is one `key = value`
/// per line with dotted section keys (model.kappa = 3.04438); `#` starts a
/// comment. Keys not set keep the defaults below; `auto` values are resolved
/// from the model and architecture.
struct ExperimentConfig {
  std::string model = "tfim";  // tfim | toric
  std::size_t side = 4;
  Boundary boundary = Boundary::open;
  double kappa = 3.04438;

  std::string arch = "ffnn";  // ffnn | cnn
  double alpha = 8.0;
  std::size_t kernels = 4;
  std::size_t kernel_side = 3;

  std::size_t n_samples = 1024;
  std::size_t n_chains = 16;
  std::size_t burn_in_sweeps = 10;
  std::size_t sweep_length = 0;
  std::string rule = "auto";  // auto | single_flip | mixed_plaquette
  std::uint64_t seed = 1;

  double eta = 8e-3;
  std::optional<double> lambda;  // auto: 1e-4 for TFIM FFNN, else 1e-3
  std::string solver = "auto";   // auto | dense | cg
  double cg_tol = 1e-6;
  std::size_t cg_max_iter = 1000;
  std::size_t dense_threshold = 4096;

  std::optional<double> ratio;  // auto: 0.12 FFNN, 0.05 CNN
  std::size_t iterations = 51;
  std::size_t pretrain_steps = 10000;
  std::size_t train_steps = 1000;
  std::string strategy = "magnitude";  // magnitude | random
  std::string reset = "rewind";        // rewind | continue
  std::size_t tail_steps = 100;
  std::size_t measure_samples = 1024;

  std::string reference = "auto";  // auto | none | <number>

  std::string ticket_variant = "theta_init_m_imp";
  std::size_t ticket_iteration = 1;
  std::uint64_t ticket_seed = 1;
  std::optional<std::size_t> ticket_steps;  // auto: prune.j
  bool ticket_use_rewind = false;

  std::string output_dir;
  std::size_t threads = 1;

  static ExperimentConfig preset(const std::string& name);
  static std::vector<std::string> preset_names();
  /// Applies the keys in `text` on top of `base` (defaults when omitted).
  static ExperimentConfig parse(const std::string& text);
  static ExperimentConfig parse(const std::string& text, ExperimentConfig base);
  static ExperimentConfig load(const std::filesystem::path& path);
  static ExperimentConfig load(const std::filesystem::path& path, ExperimentConfig base);

  /// Applies one key; throws ConfigError for unknown keys or unparsable values.
  void set(const std::string& key, const std::string& value);
  /// Every domain violation, one message each; empty when valid.
  std::vector<std::string> validation_errors() const;
  /// Throws ConfigError listing every violation.
  void validate() const;

  /// Canonical text of every result-affecting key, sorted.
  std::string to_text() const;
  /// FNV-1a of to_text().
  std::uint64_t hash() const;

  HamiltonianSpec hamiltonian() const;
  ArchitectureSpec architecture() const;
  SamplerConfig sampler_config() const;
  SRConfig sr_config() const;
  PruneSchedule schedule() const;
  /// Tail length and measurement size; the reference energy is left unset.
  PruningOptions pruning_options() const;
  /// Exact ground energy per `reference`: Lanczos for TFIM with N <= 20,
  /// -2L^2 for the toric code.
  std::optional<double> reference_energy() const;
};

std::string hash_hex(std::uint64_t hash);

/// One JSON-lines row; non-finite values are written as null.
std::string metrics_to_json(const MetricsRecord& record, std::uint64_t config_hash);
/// Nullopt for rows that fail to parse or lack required fields.
std::optional<MetricsRecord> metrics_from_json(const std::string& line);

/// The run directory could not be resumed (missing or inconsistent artifacts).
class ResumeRefused : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RunOptions {
  /// Stop cleanly after this pruning iteration (used to test resumption).
  std::optional<std::size_t> stop_after;
  std::ostream* log = nullptr;
};

struct RunSummary {
  std::size_t completed_iterations = 0;
  bool exhausted = false;
  std::optional<std::string> truncated;
  bool already_complete = false;
};

/// Runs the pruning experiment into config.output_dir. Writes config.txt
/// first, then checkpoints/ and metrics.jsonl incrementally.
RunSummary run_pruning_experiment(const ExperimentConfig& config, const RunOptions& options = {});

/// Continues a run from its last complete iteration. When `expected` is given
/// its hash must match the stored snapshot.
RunSummary resume_experiment(const std::filesystem::path& run_dir, const std::optional<ExperimentConfig>& expected,
                             const RunOptions& options = {}, std::optional<std::size_t> threads = std::nullopt);

/// Reads the stored snapshot of a run directory.
ExperimentConfig load_run_config(const std::filesystem::path& run_dir);

/// Rebuilds the trajectory of a run directory from its checkpoints and metrics.
PruningTrajectory load_trajectory(const std::filesystem::path& run_dir);

/// Trains a lottery ticket built from a finished (or partial) pruning run and
/// stores its metrics under run_dir/tickets/.
TicketResult run_ticket(const std::filesystem::path& run_dir, TicketVariant variant, std::size_t iteration,
                        std::uint64_t seed, std::optional<std::size_t> steps, bool use_rewind_point,
                        std::optional<std::size_t> threads = std::nullopt);

/// File name stem (without extension) of a ticket's artifacts under run_dir/tickets/.
std::string ticket_stem(TicketVariant variant, std::size_t iteration, std::uint64_t seed, bool use_rewind_point);

inline constexpr const char* kCurveHeader =
    "iteration,n,rho,E,var,stat_err,rel_err,abs_err_per_spin,m_x,m_z,fidelity";

/// Writes the CSV of metrics.jsonl; returns the number of skipped rows.
std::size_t export_curves(const std::filesystem::path& run_dir, std::ostream& out);

}  // namespace nqs
