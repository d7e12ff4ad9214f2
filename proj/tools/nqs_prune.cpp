// Copyright 2026 The nqs-prune Authors
// SPDX-License-Identifier: Apache-2.0
//
// nqs-prune: command line front end for pruning runs, lottery tickets,
// exact references and curve export.

#include <CLI11.hpp>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <iostream>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "nqs/checkpoint.hpp"
#include "nqs/error.hpp"
#include "nqs/experiment.hpp"
#include "nqs/oracle.hpp"
#include "nqs/parallel.hpp"

namespace {

enum ExitCode { kOk = 0, kValidation = 1, kNumerical = 2, kResumeRefused = 3, kSkippedRows = 4 };

struct GlobalFlags {
  std::string config;
  std::string preset;
  std::optional<std::uint64_t> seed;
  std::string output_dir;
  std::size_t threads = 1;
  std::vector<std::string> overrides;
};

std::size_t effective_threads(const GlobalFlags& g) { return nqs::threads_from_environment(g.threads); }

nqs::ExperimentConfig build_config(const GlobalFlags& g) {
  nqs::ExperimentConfig config = g.preset.empty() ? nqs::ExperimentConfig{} : nqs::ExperimentConfig::preset(g.preset);
  if (!g.config.empty()) config = nqs::ExperimentConfig::load(g.config, config);
  for (const std::string& kv : g.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw nqs::ConfigError("--set expects key=value, got '" + kv + "'");
    config.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (g.seed) config.seed = *g.seed;
  if (!g.output_dir.empty()) config.output_dir = g.output_dir;
  config.threads = effective_threads(g);
  return config;
}

nlohmann::json metrics_json(const nqs::MetricsRecord& r) {
  return nlohmann::json::parse(nqs::metrics_to_json(r, 0));
}

int report_run(const nqs::RunSummary& s) {
  nlohmann::json j;
  j["completed_iterations"] = s.completed_iterations;
  j["exhausted"] = s.exhausted;
  j["already_complete"] = s.already_complete;
  j["truncated"] = s.truncated ? nlohmann::json(*s.truncated) : nlohmann::json(nullptr);
  std::cout << j.dump() << std::endl;
  return s.truncated ? kNumerical : kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Variational Monte Carlo with pruned neural quantum states"};
  app.require_subcommand(0, 1);
  app.fallthrough();

  GlobalFlags g;
  app.add_option("--config", g.config, "Key-value configuration file");
  app.add_option("--preset", g.preset, "Built-in configuration preset (see --list-presets)");
  app.add_option("--seed", g.seed, "Master seed (sampler.seed)");
  app.add_option("--output-dir", g.output_dir, "Run directory");
  app.add_option("--threads", g.threads, "Worker threads (NQS_THREADS overrides)")->check(CLI::PositiveNumber);
  app.add_option("--set", g.overrides, "Override a configuration key, key=value (repeatable)");
  bool list_presets = false;
  app.add_flag("--list-presets", list_presets, "Print the preset names and exit");
  bool quiet = false;
  app.add_flag("-q,--quiet", quiet, "Suppress progress output");

  auto* prune = app.add_subcommand("prune", "Run iterative pruning (IMP-WR, IMP-CT or IRP-WR)");
  std::optional<std::size_t> stop_after;
  prune->add_option("--stop-after", stop_after, "Stop after this iteration (resumable)");
  bool dry_run = false;
  prune->add_flag("--print-config", dry_run, "Validate and print the resolved configuration, then exit");

  auto* resume = app.add_subcommand("resume", "Continue an interrupted run");
  std::string resume_from;
  resume->add_option("--from", resume_from, "Run directory (defaults to --output-dir)");
  resume->add_option("--stop-after", stop_after, "Stop after this iteration");

  auto* ticket = app.add_subcommand("ticket", "Train a lottery ticket from a pruning run");
  std::string ticket_from;
  std::string variant = "theta-init-m-imp";
  std::size_t ticket_iteration = 1;
  std::optional<std::size_t> ticket_steps;
  bool use_rewind = false;
  ticket->add_option("--from", ticket_from, "Pruning run directory")->required();
  ticket->add_option("--variant", variant, "theta-init-m-imp | theta-rand-m-imp | theta-init-m-rand");
  ticket->add_option("--iteration", ticket_iteration, "Pruning iteration providing the mask")->required();
  ticket->add_option("--steps", ticket_steps, "Training steps (default prune.j)");
  ticket->add_flag("--use-rewind", use_rewind, "Use the rewinding point instead of the random initialization");

  auto* oracle = app.add_subcommand("oracle", "Exact ground-state energy");
  std::string model;
  std::optional<std::size_t> side;
  std::optional<double> kappa;
  std::string boundary;
  std::string method = "lanczos";
  oracle->add_option("--model", model, "tfim | toric (default from config)");
  oracle->add_option("--L", side, "Lattice side");
  oracle->add_option("--kappa", kappa, "Transverse field");
  oracle->add_option("--boundary", boundary, "open | periodic");
  oracle->add_option("--method", method, "lanczos | dense | analytic");

  auto* observe = app.add_subcommand("observe", "Measure a stored state or the analytic toric-code state");
  std::string observe_from;
  std::size_t observe_iteration = 0;
  std::size_t observe_samples = 4096;
  std::optional<double> toric_w;
  observe->add_option("--from", observe_from, "Run directory");
  observe->add_option("--iteration", observe_iteration, "Iteration (0 = pre-trained network)");
  observe->add_option("--samples", observe_samples, "Number of samples")->check(CLI::PositiveNumber);
  observe->add_option("--L", side, "Lattice side for --toric-solution");
  observe->add_option("--toric-solution", toric_w, "Measure the odd-parity toric-code state with weight W");

  auto* exporter = app.add_subcommand("export", "Write the scaling curve CSV of a run");
  std::string export_from;
  std::string export_out;
  exporter->add_option("--from", export_from, "Run directory")->required();
  exporter->add_option("-o,--output", export_out, "Output file (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kValidation;
  }
  if (list_presets) {
    for (const auto& name : nqs::ExperimentConfig::preset_names()) std::cout << name << '\n';
    return kOk;
  }
  if (app.get_subcommands().empty()) {
    std::cerr << app.help();
    return kValidation;
  }

  nqs::RunOptions run_options;
  run_options.stop_after = stop_after;
  run_options.log = quiet ? nullptr : &std::cerr;

  try {
    if (*prune) {
      const nqs::ExperimentConfig config = build_config(g);
      if (dry_run) {
        config.validate();
        std::cout << config.to_text();
        return kOk;
      }
      return report_run(nqs::run_pruning_experiment(config, run_options));
    }
    if (*resume) {
      const std::string dir = resume_from.empty() ? g.output_dir : resume_from;
      if (dir.empty()) throw nqs::ConfigError("resume needs --from or --output-dir");
      std::optional<nqs::ExperimentConfig> expected;
      if (!g.config.empty() || !g.preset.empty() || !g.overrides.empty() || g.seed) expected = build_config(g);
      return report_run(nqs::resume_experiment(dir, expected, run_options, effective_threads(g)));
    }
    if (*ticket) {
      const std::uint64_t seed = g.seed.value_or(1);
      const auto result = nqs::run_ticket(ticket_from, nqs::parse_ticket_variant(variant), ticket_iteration, seed,
                                          ticket_steps, use_rewind, effective_threads(g));
      nlohmann::json j = metrics_json(result.metrics);
      j.erase("config_hash");
      j["variant"] = nqs::to_string(nqs::parse_ticket_variant(variant));
      j["seed"] = seed;
      std::cout << j.dump() << std::endl;
      return kOk;
    }
    if (*oracle) {
      nqs::ExperimentConfig config = build_config(g);
      if (!model.empty()) config.model = model;
      if (side) config.side = *side;
      if (kappa) config.kappa = *kappa;
      if (!boundary.empty()) config.set("model.boundary", boundary);
      config.validate();
      const nqs::HamiltonianSpec spec = config.hamiltonian();
      nlohmann::json j;
      j["model"] = spec.descriptor();
      j["N"] = spec.size();
      if (method == "analytic") {
        if (!spec.is_toric_code()) throw nqs::ConfigError("the analytic method applies to the toric code only");
        j["energy"] = nqs::toric_ground_energy(config.side);
      } else if (method == "dense") {
        const auto sol = nqs::dense_ground_energy(spec);
        j["energy"] = sol.energy;
      } else if (method == "lanczos") {
        const auto sol = nqs::lanczos_ground_energy(spec, 20, 1e-10, config.threads);
        j["energy"] = sol.energy;
        j["iterations"] = sol.iterations;
      } else {
        throw nqs::ConfigError("unknown oracle method '" + method + "'");
      }
      j["method"] = method;
      j["energy_per_spin"] = j["energy"].get<double>() / static_cast<double>(spec.size());
      std::cout << j.dump() << std::endl;
      return kOk;
    }
    if (*observe) {
      nqs::ExperimentConfig config;
      std::optional<nqs::MaskedAnsatz> state;
      if (toric_w) {
        config = build_config(g);
        config.model = "toric";
        if (side) config.side = *side;
        state = nqs::build_toric_solution(config.side, *toric_w);
      } else {
        if (observe_from.empty()) throw nqs::ConfigError("observe needs --from or --toric-solution");
        config = nqs::load_run_config(observe_from);
        config.threads = effective_threads(g);
        const std::filesystem::path dir(observe_from);
        std::ostringstream name;
        name << "iter_" << std::setw(4) << std::setfill('0') << observe_iteration << ".nqsp";
        const auto path = observe_iteration == 0 ? dir / "checkpoints" / "rewind.nqsp" : dir / "checkpoints" / name.str();
        state = nqs::read_checkpoint(path).ansatz();
      }
      const nqs::HamiltonianSpec spec = config.hamiltonian();
      nqs::SamplerConfig sampler = config.sampler_config();
      sampler.n_samples = observe_samples;
      if (sampler.n_samples % sampler.n_chains != 0) sampler.n_chains = 1;
      if (g.seed) sampler.seed = *g.seed;
      nqs::PruningOptions po = config.pruning_options();
      po.measure_samples = observe_samples;
      po.reference_energy = config.reference_energy();
      nqs::MetricsRecord rec = nqs::measure_state(*state, spec, {}, sampler, sampler.seed, po);
      rec.iteration = observe_iteration;
      nlohmann::json j = metrics_json(rec);
      j.erase("config_hash");
      std::cout << j.dump() << std::endl;
      return kOk;
    }
    if (*exporter) {
      std::size_t skipped = 0;
      if (export_out.empty()) {
        skipped = nqs::export_curves(export_from, std::cout);
      } else {
        std::ofstream out(export_out);
        if (!out) throw nqs::ConfigError("cannot write " + export_out);
        skipped = nqs::export_curves(export_from, out);
      }
      if (skipped > 0) std::cerr << "skipped rows: " << skipped << std::endl;
      return skipped > 0 ? kSkippedRows : kOk;
    }
  } catch (const nqs::ResumeRefused& e) {
    std::cerr << "resume refused: " << e.what() << std::endl;
    return kResumeRefused;
  } catch (const nqs::CheckpointError& e) {
    std::cerr << "checkpoint error: " << e.what() << std::endl;
    return kResumeRefused;
  } catch (const nqs::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << std::endl;
    return kNumerical;
  } catch (const nqs::CapacityError& e) {
    std::cerr << "capacity: " << e.what() << std::endl;
    return kValidation;
  } catch (const nqs::ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << std::endl;
    return kValidation;
  } catch (const nqs::ContractViolation& e) {
    std::cerr << "invalid input: " << e.what() << std::endl;
    return kValidation;
  }
  return kOk;
}
