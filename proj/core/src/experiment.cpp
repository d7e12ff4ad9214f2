// Copyright 2026 The nqs-prune Authors
// SPDX-License-Identifier: Apache-2.0

#include "nqs/experiment.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <nlohmann/json.hpp>
#include <ostream>
#include <sstream>

#include "nqs/checkpoint.hpp"
#include "nqs/diagnostics.hpp"
#include "nqs/error.hpp"
#include "nqs/oracle.hpp"
#include "nqs/rng.hpp"

namespace nqs {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

constexpr int kMetricsVersion = 1;

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return {};
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double parse_double(const std::string& key, const std::string& value) {
  double out = 0.0;
  const auto res = std::from_chars(value.data(), value.data() + value.size(), out);
  if (res.ec != std::errc() || res.ptr != value.data() + value.size())
    throw ConfigError(key + ": expected a number, got '" + value + "'");
  return out;
}

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
  // Accept integral scientific notation such as 1e4.
  std::uint64_t out = 0;
  const auto res = std::from_chars(value.data(), value.data() + value.size(), out);
  if (res.ec == std::errc() && res.ptr == value.data() + value.size()) return out;
  const double d = parse_double(key, value);
  if (d < 0 || d != std::floor(d) || d > 1.8e19) throw ConfigError(key + ": expected a non-negative integer, got '" + value + "'");
  return static_cast<std::uint64_t>(d);
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  throw ConfigError(key + ": expected true or false, got '" + value + "'");
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

std::string hash_hex(std::uint64_t hash) {
  std::ostringstream out;
  out << std::hex << std::setw(16) << std::setfill('0') << hash;
  return out.str();
}

void ExperimentConfig::set(const std::string& raw_key, const std::string& raw_value) {
  const std::string key = trim(raw_key);
  const std::string value = trim(raw_value);
  const auto size = [&] { return static_cast<std::size_t>(parse_u64(key, value)); };
  const auto real = [&] { return parse_double(key, value); };
  if (key == "model.kind") {
    model = value;
  } else if (key == "model.L") {
    side = size();
  } else if (key == "model.boundary") {
    if (value == "open") boundary = Boundary::open;
    else if (value == "periodic") boundary = Boundary::periodic;
    else throw ConfigError("model.boundary: expected open or periodic, got '" + value + "'");
  } else if (key == "model.kappa") {
    kappa = real();
  } else if (key == "arch.kind") {
    arch = value;
  } else if (key == "arch.alpha") {
    alpha = real();
  } else if (key == "arch.n_f") {
    kernels = size();
  } else if (key == "arch.k_d") {
    kernel_side = size();
  } else if (key == "sampler.N_s" || key == "sampler.n_samples") {
    n_samples = size();
  } else if (key == "sampler.n_chains") {
    n_chains = size();
  } else if (key == "sampler.burn_in_sweeps") {
    burn_in_sweeps = size();
  } else if (key == "sampler.sweep_length") {
    sweep_length = size();
  } else if (key == "sampler.rule") {
    rule = value;
  } else if (key == "sampler.seed") {
    seed = parse_u64(key, value);
  } else if (key == "sr.eta") {
    eta = real();
  } else if (key == "sr.lambda") {
    lambda = value == "auto" ? std::nullopt : std::optional<double>(real());
  } else if (key == "sr.solver") {
    solver = value;
  } else if (key == "sr.cg_tol") {
    cg_tol = real();
  } else if (key == "sr.cg_max_iter") {
    cg_max_iter = size();
  } else if (key == "sr.dense_threshold") {
    dense_threshold = size();
  } else if (key == "prune.p_r") {
    ratio = value == "auto" ? std::nullopt : std::optional<double>(real());
  } else if (key == "prune.I") {
    iterations = size();
  } else if (key == "prune.j") {
    pretrain_steps = size();
  } else if (key == "prune.k") {
    train_steps = size();
  } else if (key == "prune.strategy") {
    strategy = value;
  } else if (key == "prune.reset") {
    reset = value;
  } else if (key == "prune.tail_steps") {
    tail_steps = size();
  } else if (key == "prune.measure_samples") {
    measure_samples = size();
  } else if (key == "reference.energy") {
    if (value != "auto" && value != "none") parse_double(key, value);
    reference = value;
  } else if (key == "ticket.variant") {
    ticket_variant = to_string(parse_ticket_variant(value));
  } else if (key == "ticket.iteration") {
    ticket_iteration = size();
  } else if (key == "ticket.seed") {
    ticket_seed = parse_u64(key, value);
  } else if (key == "ticket.steps") {
    ticket_steps = value == "auto" ? std::nullopt : std::optional<std::size_t>(size());
  } else if (key == "ticket.use_rewind") {
    ticket_use_rewind = parse_bool(key, value);
  } else if (key == "run.output_dir") {
    output_dir = value;
  } else if (key == "run.threads") {
    threads = size();
  } else {
    throw ConfigError("unknown configuration key '" + key + "'");
  }
}

ExperimentConfig ExperimentConfig::parse(const std::string& text, ExperimentConfig base) {
  std::istringstream in(text);
  std::string line;
  std::size_t number = 0;
  std::vector<std::string> errors;
  while (std::getline(in, line)) {
    ++number;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      errors.push_back("line " + std::to_string(number) + ": expected key = value");
      continue;
    }
    try {
      base.set(line.substr(0, eq), line.substr(eq + 1));
    } catch (const ConfigError& e) {
      errors.push_back("line " + std::to_string(number) + ": " + e.what());
    }
  }
  if (!errors.empty()) {
    std::string joined;
    for (const auto& e : errors) joined += "\n  " + e;
    throw ConfigError("invalid configuration:" + joined);
  }
  return base;
}

ExperimentConfig ExperimentConfig::parse(const std::string& text) { return parse(text, ExperimentConfig{}); }

ExperimentConfig ExperimentConfig::load(const fs::path& path) { return load(path, ExperimentConfig{}); }

ExperimentConfig ExperimentConfig::load(const fs::path& path, ExperimentConfig base) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse(text.str(), std::move(base));
}

std::vector<std::string> ExperimentConfig::validation_errors() const {
  std::vector<std::string> errors;
  const auto check = [&](bool ok, const std::string& message) {
    if (!ok) errors.push_back(message);
  };
  check(model == "tfim" || model == "toric", "model.kind must be tfim or toric");
  check(side >= 2, "model.L must be at least 2");
  check(std::isfinite(kappa) && kappa >= 0.0, "model.kappa must be finite and non-negative");
  check(arch == "ffnn" || arch == "cnn", "arch.kind must be ffnn or cnn");
  if (arch == "ffnn") {
    const std::size_t n = model == "toric" ? 2 * side * side : side * side;
    const double w = alpha * static_cast<double>(n);
    check(alpha > 0.0 && std::abs(w - std::round(w)) < 1e-9, "arch.alpha * N must be a positive integer");
  } else {
    check(kernels >= 1, "arch.n_f must be positive");
    check(kernel_side >= 1 && kernel_side <= side, "arch.k_d must lie in [1, L]");
  }
  check(n_chains >= 1, "sampler.n_chains must be positive");
  check(n_samples >= 2 && n_chains >= 1 && n_samples % n_chains == 0,
        "sampler.N_s must be at least 2 and a multiple of sampler.n_chains");
  check(rule == "auto" || rule == "single_flip" || rule == "mixed_plaquette",
        "sampler.rule must be auto, single_flip or mixed_plaquette");
  check(!(rule == "mixed_plaquette" && model != "toric"), "sampler.rule mixed_plaquette needs model.kind = toric");
  check(std::isfinite(eta) && eta >= 0.0, "sr.eta must be finite and non-negative");
  check(!lambda || (std::isfinite(*lambda) && *lambda > 0.0), "sr.lambda must be finite and positive");
  check(solver == "auto" || solver == "dense" || solver == "cg", "sr.solver must be auto, dense or cg");
  check(cg_tol > 0.0, "sr.cg_tol must be positive");
  check(cg_max_iter >= 1, "sr.cg_max_iter must be positive");
  check(!ratio || (*ratio > 0.0 && *ratio < 1.0), "prune.p_r must lie in (0, 1)");
  check(strategy == "magnitude" || strategy == "random", "prune.strategy must be magnitude or random");
  check(reset == "rewind" || reset == "continue", "prune.reset must be rewind or continue");
  check(measure_samples == 0 || measure_samples >= 2, "prune.measure_samples must be 0 or at least 2");
  check(ticket_iteration >= 1, "ticket.iteration must be at least 1");
  return errors;
}

void ExperimentConfig::validate() const {
  const auto errors = validation_errors();
  if (errors.empty()) return;
  std::string joined;
  for (const auto& e : errors) joined += "\n  " + e;
  throw ConfigError("invalid configuration:" + joined);
}

std::string ExperimentConfig::to_text() const {
  std::map<std::string, std::string> kv;
  kv["model.kind"] = model;
  kv["model.L"] = std::to_string(side);
  kv["model.boundary"] = boundary == Boundary::open ? "open" : "periodic";
  kv["model.kappa"] = format_double(kappa);
  kv["arch.kind"] = arch;
  kv["arch.alpha"] = format_double(alpha);
  kv["arch.n_f"] = std::to_string(kernels);
  kv["arch.k_d"] = std::to_string(kernel_side);
  kv["sampler.N_s"] = std::to_string(n_samples);
  kv["sampler.n_chains"] = std::to_string(n_chains);
  kv["sampler.burn_in_sweeps"] = std::to_string(burn_in_sweeps);
  kv["sampler.sweep_length"] = std::to_string(sweep_length);
  kv["sampler.rule"] = rule;
  kv["sampler.seed"] = std::to_string(seed);
  kv["sr.eta"] = format_double(eta);
  kv["sr.lambda"] = lambda ? format_double(*lambda) : "auto";
  kv["sr.solver"] = solver;
  kv["sr.cg_tol"] = format_double(cg_tol);
  kv["sr.cg_max_iter"] = std::to_string(cg_max_iter);
  kv["sr.dense_threshold"] = std::to_string(dense_threshold);
  kv["prune.p_r"] = ratio ? format_double(*ratio) : "auto";
  kv["prune.I"] = std::to_string(iterations);
  kv["prune.j"] = std::to_string(pretrain_steps);
  kv["prune.k"] = std::to_string(train_steps);
  kv["prune.strategy"] = strategy;
  kv["prune.reset"] = reset;
  kv["prune.tail_steps"] = std::to_string(tail_steps);
  kv["prune.measure_samples"] = std::to_string(measure_samples);
  kv["reference.energy"] = reference;
  std::string out;
  for (const auto& [k, v] : kv) out += k + " = " + v + "\n";
  return out;
}

std::uint64_t ExperimentConfig::hash() const { return fnv1a(to_text()); }

HamiltonianSpec ExperimentConfig::hamiltonian() const {
  if (model == "toric") return HamiltonianSpec::toric_code(ToricLattice(side));
  return HamiltonianSpec::tfim(SquareLattice(side, boundary), kappa);
}

ArchitectureSpec ExperimentConfig::architecture() const {
  const Lattice lattice = hamiltonian().lattice();
  if (arch == "cnn") return ArchitectureSpec::shallow_cnn(lattice, kernels, kernel_side);
  return ArchitectureSpec::feed_forward(lattice, alpha);
}

SamplerConfig ExperimentConfig::sampler_config() const {
  SamplerConfig cfg;
  cfg.n_samples = n_samples;
  cfg.n_chains = n_chains;
  cfg.burn_in_sweeps = burn_in_sweeps;
  cfg.sweep_length = sweep_length;
  cfg.seed = seed;
  cfg.threads = std::max<std::size_t>(1, threads);
  if (rule == "single_flip") cfg.rule = ProposalRule::single_flip;
  else if (rule == "mixed_plaquette") cfg.rule = ProposalRule::mixed_plaquette;
  else cfg.rule = default_rule(hamiltonian().lattice());
  return cfg;
}

SRConfig ExperimentConfig::sr_config() const {
  SRConfig cfg;
  cfg.eta = eta;
  cfg.lambda = lambda.value_or(model == "tfim" && arch == "ffnn" ? 1e-4 : 1e-3);
  cfg.solver = solver == "dense" ? SolverKind::dense_cholesky
               : solver == "cg"  ? SolverKind::conjugate_gradient
                                 : SolverKind::automatic;
  cfg.cg_tol = cg_tol;
  cfg.cg_max_iter = cg_max_iter;
  cfg.dense_threshold = dense_threshold;
  return cfg;
}

PruneSchedule ExperimentConfig::schedule() const {
  PruneSchedule s;
  s.ratio = ratio.value_or(arch == "cnn" ? 0.05 : 0.12);
  s.iterations = iterations;
  s.pretrain_steps = pretrain_steps;
  s.train_steps = train_steps;
  s.strategy = strategy == "random" ? PruneStrategy::random : PruneStrategy::magnitude;
  s.reset = reset == "continue" ? ResetMode::continue_training : ResetMode::rewind;
  return s;
}

PruningOptions ExperimentConfig::pruning_options() const {
  PruningOptions options;
  options.tail_steps = tail_steps;
  options.measure_samples = measure_samples;
  return options;
}

std::optional<double> ExperimentConfig::reference_energy() const {
  if (reference == "none") return std::nullopt;
  if (reference != "auto") return parse_double("reference.energy", reference);
  if (model == "toric") return toric_ground_energy(side);
  if (side * side <= 20) return lanczos_ground_energy(hamiltonian(), 20, 1e-10, std::max<std::size_t>(1, threads)).energy;
  return std::nullopt;
}

namespace {

ExperimentConfig tfim_preset(std::size_t side, double kappa, double alpha, std::size_t iterations) {
  ExperimentConfig c;
  c.model = "tfim";
  c.side = side;
  c.kappa = kappa;
  c.arch = "ffnn";
  c.alpha = alpha;
  c.iterations = iterations;
  c.ratio = 0.12;
  c.lambda = 1e-4;
  return c;
}

ExperimentConfig toric_preset(double alpha, std::size_t iterations) {
  ExperimentConfig c;
  c.model = "toric";
  c.side = 3;
  c.arch = "ffnn";
  c.alpha = alpha;
  c.iterations = iterations;
  c.ratio = 0.12;
  c.lambda = 1e-3;
  return c;
}

const std::map<std::string, ExperimentConfig>& presets() {
  static const std::map<std::string, ExperimentConfig> table = [] {
    std::map<std::string, ExperimentConfig> t;
    constexpr double kc = 3.04438;
    ExperimentConfig cnn = tfim_preset(10, kc, 1.0, 31);
    cnn.arch = "cnn";
    cnn.kernels = 4;
    cnn.kernel_side = 3;
    cnn.ratio = 0.05;
    cnn.lambda = 1e-3;
    t["fig1-cnn"] = cnn;
    t["fig1-ffnn"] = tfim_preset(10, kc, 5.0, 65);
    t["fig2-w1"] = tfim_preset(10, kc, 1.0, 54);
    t["fig2-w2.5"] = tfim_preset(10, kc, 2.5, 60);
    t["fig2-w5"] = tfim_preset(10, kc, 5.0, 65);
    for (double kappa : {0.1, 1.0, 2.0, 4.0, 5.0, 6.0}) t["fig2-kappa-" + format_double(kappa)] = tfim_preset(10, kappa, 5.0, 65);
    const std::pair<std::size_t, std::size_t> sizes[] = {{4, 51}, {5, 58}, {6, 64}, {7, 69}, {8, 65}, {9, 74}, {10, 74}};
    for (const auto& [side, iters] : sizes)
      t["fig3-" + std::to_string(side) + "x" + std::to_string(side)] = tfim_preset(side, kc, 8.0, iters);
    t["fig4-toric-w4"] = toric_preset(4.0, 47);
    t["fig4-toric"] = toric_preset(8.0, 53);
    t["fig4-toric-w16"] = toric_preset(16.0, 58);
    t["fig4-toric-w32"] = toric_preset(32.0, 64);
    return t;
  }();
  return table;
}

}  // namespace

ExperimentConfig ExperimentConfig::preset(const std::string& name) {
  const auto& table = presets();
  const auto it = table.find(name);
  if (it == table.end()) {
    std::string known;
    for (const auto& [k, v] : table) known += " " + k;
    throw ConfigError("unknown preset '" + name + "'; known:" + known);
  }
  return it->second;
}

std::vector<std::string> ExperimentConfig::preset_names() {
  std::vector<std::string> names;
  for (const auto& [k, v] : presets()) names.push_back(k);
  return names;
}

namespace {

json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

double number_or_nan(const json& j, const char* key) {
  const auto it = j.find(key);
  if (it == j.end()) throw std::out_of_range(key);
  if (it->is_null()) return std::numeric_limits<double>::quiet_NaN();
  return it->get<double>();
}

}  // namespace

std::string metrics_to_json(const MetricsRecord& r, std::uint64_t config_hash) {
  json j = json::object();
  j["v"] = kMetricsVersion;
  j["config_hash"] = hash_hex(config_hash);
  j["iteration"] = r.iteration;
  j["n"] = r.n;
  j["rho"] = finite_or_null(r.rho);
  j["E"] = finite_or_null(r.energy);
  j["var"] = finite_or_null(r.variance);
  j["stat_err"] = finite_or_null(r.stat_err);
  j["rel_err"] = finite_or_null(r.rel_err);
  j["abs_err_per_spin"] = finite_or_null(r.abs_err_per_spin);
  j["m_x"] = finite_or_null(r.m_x);
  j["m_z"] = finite_or_null(r.m_z);
  j["fidelity"] = r.fidelity ? finite_or_null(*r.fidelity) : json(nullptr);
  return j.dump();
}

std::optional<MetricsRecord> metrics_from_json(const std::string& line) {
  try {
    const json j = json::parse(line);
    if (!j.is_object() || j.value("v", 0) != kMetricsVersion) return std::nullopt;
    MetricsRecord r;
    r.iteration = j.at("iteration").get<std::size_t>();
    r.n = j.at("n").get<std::size_t>();
    r.rho = number_or_nan(j, "rho");
    r.energy = number_or_nan(j, "E");
    r.variance = number_or_nan(j, "var");
    r.stat_err = number_or_nan(j, "stat_err");
    r.rel_err = number_or_nan(j, "rel_err");
    r.abs_err_per_spin = number_or_nan(j, "abs_err_per_spin");
    r.m_x = number_or_nan(j, "m_x");
    r.m_z = number_or_nan(j, "m_z");
    if (j.contains("fidelity") && !j.at("fidelity").is_null()) r.fidelity = j.at("fidelity").get<double>();
    else if (!j.contains("fidelity")) return std::nullopt;
    return r;
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

namespace {

/// Exclusive advisory lock on run_dir/LOCK, released when the process exits.
class DirectoryLock {
 public:
  explicit DirectoryLock(const fs::path& dir) {
    const fs::path path = dir / "LOCK";
    fd_ = ::open(path.c_str(), O_CREAT | O_RDWR, 0644);
    if (fd_ < 0) throw ConfigError("cannot create lock file " + path.string());
    if (::flock(fd_, LOCK_EX | LOCK_NB) != 0) {
      ::close(fd_);
      throw ConfigError("output directory " + dir.string() + " is in use by another run");
    }
    const std::string pid = std::to_string(::getpid()) + "\n";
    if (::ftruncate(fd_, 0) == 0) {
      [[maybe_unused]] const auto written = ::write(fd_, pid.data(), pid.size());
    }
  }
  DirectoryLock(const DirectoryLock&) = delete;
  DirectoryLock& operator=(const DirectoryLock&) = delete;
  ~DirectoryLock() {
    ::flock(fd_, LOCK_UN);
    ::close(fd_);
  }

 private:
  int fd_ = -1;
};

struct StopRequested {};

fs::path checkpoint_dir(const fs::path& run_dir) { return run_dir / "checkpoints"; }

fs::path iteration_checkpoint(const fs::path& run_dir, std::size_t i) {
  std::ostringstream name;
  name << "iter_" << std::setw(4) << std::setfill('0') << i << ".nqsp";
  return checkpoint_dir(run_dir) / name.str();
}

void write_text(const fs::path& path, const std::string& text) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw ConfigError("cannot write " + tmp.string());
    out << text;
  }
  fs::rename(tmp, path);
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ResumeRefused("missing " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

std::string snapshot_text(const ExperimentConfig& config) {
  return "# nqs-prune run configuration, hash " + hash_hex(config.hash()) + "\n" + config.to_text();
}

void append_metrics(const fs::path& run_dir, const MetricsRecord& rec, std::uint64_t hash) {
  std::ofstream out(run_dir / "metrics.jsonl", std::ios::app | std::ios::binary);
  if (!out) throw ConfigError("cannot append to metrics log");
  out << metrics_to_json(rec, hash) << '\n';
  out.flush();
}

struct MetricsScan {
  std::vector<MetricsRecord> rows;
  std::size_t valid_bytes = 0;
  bool partial_tail = false;
};

/// Leading run of consecutive, newline-terminated, parseable rows.
MetricsScan scan_metrics(const fs::path& path, std::uint64_t hash) {
  MetricsScan scan;
  std::ifstream in(path, std::ios::binary);
  if (!in) return scan;
  std::ostringstream buffer;
  buffer << in.rdbuf();
  const std::string text = buffer.str();
  std::size_t pos = 0;
  while (pos < text.size()) {
    const auto nl = text.find('\n', pos);
    if (nl == std::string::npos) {
      scan.partial_tail = true;
      break;
    }
    const std::string line = text.substr(pos, nl - pos);
    const auto rec = metrics_from_json(line);
    const bool same_run = line.find("\"config_hash\":\"" + hash_hex(hash) + "\"") != std::string::npos;
    if (!rec || !same_run || rec->iteration != scan.rows.size() + 1) {
      scan.partial_tail = true;
      break;
    }
    scan.rows.push_back(*rec);
    pos = nl + 1;
    scan.valid_bytes = pos;
  }
  return scan;
}

void write_summary(const fs::path& run_dir, const ExperimentConfig& config, const PruningTrajectory& traj,
                   bool complete) {
  json j;
  j["v"] = kMetricsVersion;
  j["config_hash"] = hash_hex(config.hash());
  j["completed_iterations"] = traj.iterations.size();
  j["complete"] = complete;
  j["exhausted"] = traj.exhausted;
  j["truncated"] = traj.truncated ? json(*traj.truncated) : json(nullptr);
  if (!traj.iterations.empty()) j["final_ones"] = traj.iterations.back().mask.ones();
  write_text(run_dir / "summary.json", j.dump(2) + "\n");
}

struct Hooks {
  fs::path run_dir;
  std::uint64_t hash;
  std::uint64_t seed;
  const ArchitectureSpec* arch;
  const RunOptions* options;
};

void install_hooks(PruningOptions& po, const Hooks& h) {
  po.on_pretrained = [h](const PruningTrajectory& traj) {
    write_checkpoint(checkpoint_dir(h.run_dir) / "init.nqsp",
                     Checkpoint::of(MaskedAnsatz::dense(*h.arch, traj.theta_init), h.hash, 0,
                                    RngStream::derive(h.seed, {stream::kPretrain, 0})));
    write_checkpoint(checkpoint_dir(h.run_dir) / "rewind.nqsp",
                     Checkpoint::of(MaskedAnsatz::dense(*h.arch, traj.theta_rewind), h.hash, 0,
                                    RngStream::derive(h.seed, {stream::kPruneSelect, 1})));
    write_text(h.run_dir / "pretrained.json", metrics_to_json(traj.pretrained, h.hash) + "\n");
    if (h.options->log) *h.options->log << "pre-training done: E=" << traj.pretrained.energy << std::endl;
  };
  po.on_iteration = [h](const PruningTrajectory& traj, std::size_t i) {
    const IterationRecord& rec = traj.iterations.back();
    write_checkpoint(iteration_checkpoint(h.run_dir, i),
                     Checkpoint::of(MaskedAnsatz(*h.arch, rec.theta, rec.mask), h.hash, i,
                                    RngStream::derive(h.seed, {stream::kPruneSelect, i + 1})));
    append_metrics(h.run_dir, rec.metrics, h.hash);
    if (h.options->log) {
      *h.options->log << "iteration " << i << ": n=" << rec.metrics.n << " E=" << rec.metrics.energy
                      << " rel_err=" << rec.metrics.rel_err;
      if (rec.metrics.fidelity) *h.options->log << " F=" << *rec.metrics.fidelity;
      *h.options->log << std::endl;
    }
    if (h.options->stop_after && i >= *h.options->stop_after) throw StopRequested{};
  };
}

std::optional<double> cached_reference(const fs::path& run_dir, const ExperimentConfig& config) {
  const fs::path path = run_dir / "reference.json";
  if (fs::exists(path)) {
    const json j = json::parse(read_text(path));
    if (j.at("energy").is_null()) return std::nullopt;
    return j.at("energy").get<double>();
  }
  const auto e = config.reference_energy();
  json j;
  j["energy"] = e ? json(*e) : json(nullptr);
  write_text(path, j.dump() + "\n");
  return e;
}

RunSummary summarize(const PruningTrajectory& traj) {
  RunSummary s;
  s.completed_iterations = traj.iterations.size();
  s.exhausted = traj.exhausted;
  s.truncated = traj.truncated;
  return s;
}

}  // namespace

ExperimentConfig load_run_config(const fs::path& run_dir) {
  const fs::path path = run_dir / "config.txt";
  if (!fs::exists(path)) throw ResumeRefused("no config.txt in " + run_dir.string());
  ExperimentConfig config = ExperimentConfig::parse(read_text(path));
  config.output_dir = run_dir.string();
  return config;
}

RunSummary run_pruning_experiment(const ExperimentConfig& config, const RunOptions& options) {
  config.validate();
  if (config.output_dir.empty()) throw ConfigError("run.output_dir (--output-dir) is required");
  const fs::path run_dir(config.output_dir);
  fs::create_directories(checkpoint_dir(run_dir));
  DirectoryLock lock(run_dir);
  if (fs::exists(run_dir / "config.txt") || fs::exists(run_dir / "metrics.jsonl"))
    throw ConfigError("output directory " + run_dir.string() + " already holds a run; use resume");
  write_text(run_dir / "config.txt", snapshot_text(config));
  {
    std::ofstream touch(run_dir / "metrics.jsonl", std::ios::app);
  }

  const HamiltonianSpec spec = config.hamiltonian();
  const ArchitectureSpec arch = config.architecture();
  PruningOptions po = config.pruning_options();
  po.reference_energy = cached_reference(run_dir, config);
  install_hooks(po, Hooks{run_dir, config.hash(), config.seed, &arch, &options});

  PruningTrajectory traj;
  try {
    traj = run_iterative_pruning(arch, spec, config.schedule(), config.sampler_config(), config.sr_config(),
                                 config.seed, po);
  } catch (const StopRequested&) {
    RunSummary s;
    s.completed_iterations = *options.stop_after;
    return s;
  }
  const bool complete = !traj.truncated;
  write_summary(run_dir, config, traj, complete);
  return summarize(traj);
}

PruningTrajectory load_trajectory(const fs::path& run_dir) {
  const ExperimentConfig config = load_run_config(run_dir);
  const std::uint64_t hash = config.hash();
  PruningTrajectory traj;
  const auto load = [&](const fs::path& path) {
    Checkpoint c;
    try {
      c = read_checkpoint(path);
    } catch (const CheckpointError& e) {
      throw ResumeRefused(e.what());
    }
    if (c.config_hash != hash) throw ResumeRefused(path.string() + " belongs to a different configuration");
    return c;
  };
  traj.theta_init = load(checkpoint_dir(run_dir) / "init.nqsp").theta;
  traj.theta_rewind = load(checkpoint_dir(run_dir) / "rewind.nqsp").theta;
  if (fs::exists(run_dir / "pretrained.json")) {
    const auto rec = metrics_from_json(read_text(run_dir / "pretrained.json"));
    if (rec) traj.pretrained = *rec;
  }
  const MetricsScan scan = scan_metrics(run_dir / "metrics.jsonl", hash);
  for (const MetricsRecord& row : scan.rows) {
    const fs::path path = iteration_checkpoint(run_dir, row.iteration);
    if (!fs::exists(path)) break;
    const Checkpoint c = load(path);
    if (c.iteration != row.iteration || c.mask.ones() != row.n)
      throw ResumeRefused(path.string() + " disagrees with the metrics log");
    traj.iterations.push_back(IterationRecord{c.mask, c.theta, row});
  }
  return traj;
}

RunSummary resume_experiment(const fs::path& run_dir, const std::optional<ExperimentConfig>& expected,
                             const RunOptions& options, std::optional<std::size_t> threads) {
  if (!fs::is_directory(run_dir)) throw ResumeRefused("no run directory " + run_dir.string());
  DirectoryLock lock(run_dir);
  ExperimentConfig config = load_run_config(run_dir);
  if (threads) config.threads = *threads;
  const std::uint64_t hash = config.hash();
  const std::string header = read_text(run_dir / "config.txt");
  if (header.find(hash_hex(hash)) == std::string::npos)
    throw ResumeRefused("config.txt was modified after the run started");
  if (expected && expected->hash() != hash)
    throw ResumeRefused("configuration hash " + hash_hex(expected->hash()) + " does not match the run's " +
                        hash_hex(hash));

  if (fs::exists(run_dir / "summary.json")) {
    const json s = json::parse(read_text(run_dir / "summary.json"));
    if (s.value("complete", false)) {
      RunSummary out;
      out.completed_iterations = s.value("completed_iterations", std::size_t{0});
      out.exhausted = s.value("exhausted", false);
      out.already_complete = true;
      return out;
    }
  }

  PruningTrajectory traj = load_trajectory(run_dir);
  // Discard anything after the last complete iteration: a torn metrics row or
  // a checkpoint written just before an interruption.
  const MetricsScan scan = scan_metrics(run_dir / "metrics.jsonl", hash);
  if (scan.partial_tail || scan.rows.size() != traj.iterations.size()) {
    std::size_t keep = 0;
    {
      std::ifstream in(run_dir / "metrics.jsonl", std::ios::binary);
      std::string line;
      std::size_t rows = 0;
      while (rows < traj.iterations.size() && std::getline(in, line)) {
        keep += line.size() + 1;
        ++rows;
      }
    }
    fs::resize_file(run_dir / "metrics.jsonl", keep);
  }
  for (std::size_t i = traj.iterations.size() + 1;; ++i) {
    const fs::path stale = iteration_checkpoint(run_dir, i);
    if (!fs::exists(stale)) break;
    fs::remove(stale);
  }

  const HamiltonianSpec spec = config.hamiltonian();
  const ArchitectureSpec arch = config.architecture();
  PruningOptions po = config.pruning_options();
  po.reference_energy = cached_reference(run_dir, config);
  install_hooks(po, Hooks{run_dir, hash, config.seed, &arch, &options});
  try {
    traj = resume_iterative_pruning(std::move(traj), arch, spec, config.schedule(), config.sampler_config(),
                                    config.sr_config(), config.seed, po);
  } catch (const StopRequested&) {
    RunSummary s;
    s.completed_iterations = *options.stop_after;
    return s;
  }
  write_summary(run_dir, config, traj, !traj.truncated);
  return summarize(traj);
}

TicketResult run_ticket(const fs::path& run_dir, TicketVariant variant, std::size_t iteration, std::uint64_t seed,
                        std::optional<std::size_t> steps, bool use_rewind_point, std::optional<std::size_t> threads) {
  ExperimentConfig config = load_run_config(run_dir);
  if (threads) config.threads = *threads;
  const PruningTrajectory traj = load_trajectory(run_dir);
  if (iteration < 1 || iteration > traj.iterations.size())
    throw ConfigError("ticket iteration " + std::to_string(iteration) + " not available; the run has " +
                      std::to_string(traj.iterations.size()) + " completed iterations");
  const ArchitectureSpec arch = config.architecture();
  const MaskedAnsatz ticket = make_ticket(variant, arch, traj, iteration, seed, use_rewind_point);
  SamplerConfig sampler = config.sampler_config();
  sampler.seed = RngStream::derive(seed, {stream::kTicket, 2, iteration}).key();
  PruningOptions po = config.pruning_options();
  po.reference_energy = cached_reference(run_dir, config);
  const std::size_t n_steps = steps.value_or(config.pretrain_steps);
  TicketResult result = train_ticket(ticket, config.hamiltonian(), sampler, config.sr_config(), n_steps, po);
  result.metrics.iteration = iteration;

  const fs::path dir = run_dir / "tickets";
  fs::create_directories(dir);
  const std::string stem = ticket_stem(variant, iteration, seed, use_rewind_point);
  write_checkpoint(dir / (stem + ".nqsp"), Checkpoint::of(result.ansatz, config.hash(), iteration));
  write_text(dir / (stem + ".json"), metrics_to_json(result.metrics, config.hash()) + "\n");
  return result;
}

std::string ticket_stem(TicketVariant variant, std::size_t iteration, std::uint64_t seed, bool use_rewind_point) {
  return to_string(variant) + "_iter" + std::to_string(iteration) + "_seed" + std::to_string(seed) +
         (use_rewind_point ? "_wr" : "");
}

std::size_t export_curves(const fs::path& run_dir, std::ostream& out) {
  const fs::path path = run_dir / "metrics.jsonl";
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("no metrics log in " + run_dir.string());
  std::size_t spins = 0;
  if (fs::exists(run_dir / "config.txt")) spins = load_run_config(run_dir).hamiltonian().size();
  out << kCurveHeader << '\n';
  const auto field = [](double v) { return std::isfinite(v) ? format_double(v) : std::string(); };
  std::vector<std::string> lines;
  if (fs::exists(run_dir / "pretrained.json")) lines.push_back(trim(read_text(run_dir / "pretrained.json")));
  for (std::string line; std::getline(in, line);) lines.push_back(std::move(line));
  std::size_t skipped = 0;
  for (const std::string& line : lines) {
    if (line.empty()) continue;
    const auto rec = metrics_from_json(line);
    if (!rec) {
      ++skipped;
      continue;
    }
    const double rho = spins > 0 ? static_cast<double>(rec->n) / static_cast<double>(spins) : rec->rho;
    out << rec->iteration << ',' << rec->n << ',' << field(rho) << ',' << field(rec->energy) << ','
        << field(rec->variance) << ',' << field(rec->stat_err) << ',' << field(rec->rel_err) << ','
        << field(rec->abs_err_per_spin) << ',' << field(rec->m_x) << ',' << field(rec->m_z) << ','
        << (rec->fidelity ? field(*rec->fidelity) : std::string()) << '\n';
  }
  if (skipped > 0) diagnostics::warn("export", "skipped " + std::to_string(skipped) + " corrupt metrics rows");
  return skipped;
}

}  // namespace nqs
