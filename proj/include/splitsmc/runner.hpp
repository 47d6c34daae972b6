#pragma once

// Runs a configured algorithm on a dataset and writes its outputs.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "splitsmc/config.hpp"
#include "splitsmc/data.hpp"
#include "splitsmc/metrics.hpp"
#include "splitsmc/trace.hpp"

namespace splitsmc {

struct RunSummary {
  std::string algorithm;
  std::size_t n = 0;
  std::size_t n_clusters = 0;
  double log_posterior = 0.0;
  std::optional<EvalReport> eval;  // present when gold labels exist
  double runtime_seconds = 0.0;
  std::uint64_t model_evals = 0;  // main-model cache misses
  std::uint64_t max_step_model_evals = 0;
  bool budget_exhausted = false;
  std::uint64_t seed = 0;
  std::size_t final_subproblems = 1;
  double final_log_effective_particles = 0.0;
};

struct RunOutput {
  Dataset dataset;
  Partition clustering;  // over arrival ids
  RunTrace trace;
  RunSummary summary;
};

// Loads `cfg.input` (shuffled when cfg.shuffle) and runs.
RunOutput execute_run(const RunConfig& cfg);
// Runs on an already-loaded dataset.
RunOutput execute_run(const RunConfig& cfg, Dataset dataset);

nlohmann::json summary_to_json(const RunSummary& s);

// Writes clustering.tsv, trace.tsv and summary.json into `dir`.
void write_run_outputs(const RunOutput& out, const std::string& dir);

struct SweepConfig {
  RunConfig base;
  std::vector<Algorithm> algorithms;
  std::vector<std::size_t> ms;
  std::vector<std::optional<std::size_t>> m_primes;
  std::size_t replications = 1;
  std::uint64_t master_seed = 0;
};

SweepConfig sweep_config_from_json(const nlohmann::json& j);
SweepConfig load_sweep_config(const std::string& path);

struct MeanSd {
  double mean = 0.0;
  double sd = 0.0;
};

struct SweepRow {
  Algorithm algorithm = Algorithm::split_smc;
  std::size_t m = 0;
  std::optional<std::size_t> m_prime;
  std::size_t completed = 0;
  std::size_t failed = 0;
  std::string last_error;
  MeanSd f1, log_posterior, runtime_seconds, model_evals, n_clusters;
};

// Seed of replication r, derived from the master seed by counter.
std::uint64_t replication_seed(std::uint64_t master_seed, std::size_t r);

// One row per grid point; a failing replication is counted, not fatal.
std::vector<SweepRow> execute_sweep(const SweepConfig& cfg);
void write_sweep_table(std::ostream& os, const std::vector<SweepRow>& rows);

}  // namespace splitsmc
