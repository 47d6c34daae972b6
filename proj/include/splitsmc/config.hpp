#pragma once

// Run configuration: a JSON object whose keys mirror the command-line flags.
// Unknown keys are rejected so typos fail loudly.

#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "splitsmc/models.hpp"

namespace splitsmc {

// Invalid configuration or command-line input (exit code 2).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ModelSpec {
  std::string kind = "nig";  // nig | bigram | unit
  // nig
  std::vector<double> mu0{0.0};  // one value is broadcast to every dimension
  double lambda = 0.0002;
  double a = 2.0;
  double b = 0.5;
  // bigram
  std::string corpus;  // one name per line; empty means a uniform prior
  double rescale_c = 1.0;
  bool case_fold = true;
  std::string attribute = "name";
  // any kind; non-zero wraps the model in ScaledModel
  double log_scale_per_point = 0.0;
  double log_scale_per_cluster = 0.0;
};

enum class Algorithm { greedy, smc, split_smc, gibbs, mwg, agglom };

std::optional<Algorithm> parse_algorithm(const std::string& name);
std::string algorithm_name(Algorithm a);

struct RunConfig {
  Algorithm algorithm = Algorithm::split_smc;
  std::size_t m = 100;
  std::optional<std::size_t> m_prime;
  double alpha = 1.0;
  ModelSpec model;
  std::optional<ModelSpec> surrogate;
  std::uint64_t seed = 0;
  bool shuffle = false;  // shuffle the input stream with `seed`
  double budget_seconds = std::numeric_limits<double>::infinity();
  std::size_t patience = 500;  // MCMC sweeps without a MAP change
  std::size_t agglom_batch_size = 0;  // 0 scores every pair
  std::size_t agglom_patience = 100;
  double accept_threshold = 0.0;
  double explicit_joint_cap_factor = 10.0;
  std::size_t cache_max_entries = 0;
  bool trace_f1 = true;
  std::string input;
  std::string input_kind;  // points | fragments; empty infers from the extension
  std::string output_dir = "out";
};

// Throws ConfigError on unknown keys, wrong types or failed validation.
RunConfig run_config_from_json(const nlohmann::json& j);
nlohmann::json run_config_to_json(const RunConfig& cfg);
RunConfig load_run_config(const std::string& path);

ModelSpec model_spec_from_json(const nlohmann::json& j);
nlohmann::json model_spec_to_json(const ModelSpec& spec);

// Checks cross-field rules; throws ConfigError.
void validate(const RunConfig& cfg);

// Builds the likelihood; `dims` is the point dimensionality (ignored for
// fragment models).
ModelPtr build_model(const ModelSpec& spec, std::size_t dims);

// Human-readable description of every key, printed by --help-config.
std::string config_schema();

}  // namespace splitsmc
