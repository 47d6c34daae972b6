// splitsmc: generate datasets, run clustering algorithms, evaluate and sweep.
// Exit codes: 0 success, 2 invalid configuration or input, 3 runtime failure.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "splitsmc/cache.hpp"
#include "splitsmc/config.hpp"
#include "splitsmc/data.hpp"
#include "splitsmc/metrics.hpp"
#include "splitsmc/numeric.hpp"
#include "splitsmc/runner.hpp"

namespace fs = std::filesystem;
using namespace splitsmc;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

std::optional<std::string> out_dir_override() {
  const char* env = std::getenv("SPLITSMC_OUT_DIR");
  if (env == nullptr || *env == '\0') return std::nullopt;
  return std::string(env);
}

// Relative output paths land under SPLITSMC_OUT_DIR when it is set.
std::string resolve_output(const std::string& path) {
  auto dir = out_dir_override();
  if (!dir || fs::path(path).is_absolute()) return path;
  return (fs::path(*dir) / path).string();
}

std::ofstream open_output(const std::string& path) {
  const fs::path p(path);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write `" + path + "`");
  return out;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::uint64_t text_hash(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) h = mix64(h ^ c);
  return h;
}

// ---------------------------------------------------------------- generate

struct GenerateArgs {
  std::string kind;
  std::uint64_t seed = 0;
  std::string output;
  GmmGenConfig gmm;
};

int cmd_generate(const GenerateArgs& a) {
  std::vector<PointRecord> records;
  json cfg;
  if (a.kind == "gmm") {
    GmmGenConfig g = a.gmm;
    g.seed = a.seed;
    records = gen_gmm(g);
    cfg = {{"alpha_dp", g.alpha_dp}, {"K", g.K},           {"n", g.n}, {"n_groups", g.n_groups},
           {"a", g.a},               {"b", g.b},           {"mu", g.mu}, {"lambda", g.lambda},
           {"perturb_divisor", g.perturb_divisor},         {"dims", g.dims}};
  } else if (a.kind == "circles") {
    CirclesGenConfig c;
    c.seed = a.seed;
    records = gen_circles(c);
    cfg = {{"n_clusters", c.n_clusters}, {"half_width", c.half_width}, {"radius", c.radius},
           {"min_size", c.min_size},     {"max_size", c.max_size}};
  } else {
    throw ConfigError("unknown dataset kind `" + a.kind + "` (expected gmm or circles)");
  }
  const std::string path = resolve_output(a.output);
  {
    auto out = open_output(path);
    write_points(out, records);
  }
  json meta;
  meta["kind"] = a.kind;
  meta["seed"] = a.seed;
  meta["config"] = cfg;
  meta["config_hash"] = hex64(text_hash(a.kind + cfg.dump()));
  meta["records"] = records.size();
  auto side = open_output(path + ".meta.json");
  side << meta.dump(2) << '\n';
  std::cout << "wrote " << records.size() << " records to " << path << '\n';
  return kExitOk;
}

// --------------------------------------------------------------------- run

struct RunArgs {
  std::string config;
  std::string algorithm;
  std::optional<std::size_t> m, m_prime, patience;
  std::optional<double> alpha, budget;
  std::optional<std::uint64_t> seed;
  bool shuffle = false;
  std::string input, output_dir;
};

RunConfig assemble_run_config(const RunArgs& a) {
  json j = json::object();
  if (!a.config.empty()) {
    std::ifstream in(a.config);
    if (!in) throw ConfigError("cannot open config `" + a.config + "`");
    try {
      j = json::parse(in);
    } catch (const json::exception& e) {
      throw ConfigError("config `" + a.config + "` is not valid JSON: " + e.what());
    }
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
  }
  if (!a.algorithm.empty()) j["algorithm"] = a.algorithm;
  if (a.m) j["m"] = *a.m;
  if (a.m_prime) j["m_prime"] = *a.m_prime;
  if (a.patience) j["patience"] = *a.patience;
  if (a.alpha) j["alpha"] = *a.alpha;
  if (a.budget) j["budget_seconds"] = *a.budget;
  if (a.seed) j["seed"] = *a.seed;
  if (a.shuffle) j["shuffle"] = true;
  if (!a.input.empty()) j["input"] = a.input;
  if (!a.output_dir.empty()) j["output_dir"] = a.output_dir;
  RunConfig cfg = run_config_from_json(j);
  if (auto dir = out_dir_override()) cfg.output_dir = *dir;
  return cfg;
}

int cmd_run(const RunArgs& a) {
  const RunConfig cfg = assemble_run_config(a);
  const RunOutput out = execute_run(cfg);
  write_run_outputs(out, cfg.output_dir);
  {
    auto f = open_output((fs::path(cfg.output_dir) / "config.json").string());
    f << run_config_to_json(cfg).dump(2) << '\n';
  }
  std::cout << summary_to_json(out.summary).dump(2) << '\n';
  return kExitOk;
}

// -------------------------------------------------------------------- eval

struct EvalArgs {
  std::string pred, gold, config;
  std::optional<double> alpha;
};

int cmd_eval(const EvalArgs& a) {
  RunConfig cfg;
  if (!a.config.empty()) cfg = load_run_config(a.config);
  if (a.alpha) cfg.alpha = *a.alpha;
  validate(cfg);
  const DataKind kind = cfg.input_kind.empty() ? infer_data_kind(a.gold) : *parse_data_kind(cfg.input_kind);
  if (kind == DataKind::fragments && a.config.empty()) cfg.model.kind = "bigram";
  const Dataset ds = load_stream(a.gold, kind);
  if (!ds.has_gold()) throw ConfigError("`" + a.gold + "` carries no complete gold labelling");
  std::ifstream in(a.pred);
  if (!in) throw ConfigError("cannot open `" + a.pred + "`");
  Partition pred;
  try {
    pred = read_clustering(in, ds);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  const std::size_t dims = ds.kind == DataKind::points ? ds.store->point(make_id(0)).size() : 0;
  ModelEvaluator model(build_model(cfg.model, dims), ds.store);
  EvalReport r = bcubed(pred, ds.gold_partition());
  r.log_posterior = score_clustering(pred, cfg.alpha, model);
  write_report(std::cout, r);
  return kExitOk;
}

// ------------------------------------------------------------------- sweep

struct SweepArgs {
  std::string config, output;
};

int cmd_sweep(const SweepArgs& a) {
  const SweepConfig cfg = load_sweep_config(a.config);
  const auto rows = execute_sweep(cfg);
  const std::string path = resolve_output(a.output);
  auto out = open_output(path);
  write_sweep_table(out, rows);
  std::size_t failed = 0;
  for (const auto& r : rows) failed += r.failed;
  std::cout << "wrote " << rows.size() << " rows to " << path;
  if (failed) std::cout << " (" << failed << " failed replications)";
  std::cout << '\n';
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Online clustering with split sequential Monte Carlo"};
  app.require_subcommand(0, 1);
  bool help_config = false;
  app.add_flag("--help-config", help_config, "Print the run configuration schema and exit");

  GenerateArgs gen;
  auto* g = app.add_subcommand("generate", "Generate a synthetic dataset");
  g->add_option("kind", gen.kind, "gmm or circles")->required();
  g->add_option("--seed", gen.seed, "Generator seed");
  g->add_option("-o,--output", gen.output, "Output points file")->required();
  g->add_option("--n", gen.gmm.n, "gmm: number of points");
  g->add_option("--alpha-dp", gen.gmm.alpha_dp, "gmm: stick-breaking concentration");
  g->add_option("--K", gen.gmm.K, "gmm: stick-breaking truncation");

  RunArgs run;
  auto* r = app.add_subcommand("run", "Run one algorithm on a dataset");
  r->add_option("-c,--config", run.config, "Run configuration (JSON)");
  r->add_option("--algorithm", run.algorithm, "greedy | smc | split-smc | gibbs | mwg | agglom");
  r->add_option("--m", run.m, "Particle count");
  r->add_option("--m-prime", run.m_prime, "Surrogate shortlist size");
  r->add_option("--alpha", run.alpha, "DP concentration");
  r->add_option("--seed", run.seed, "Seed");
  r->add_flag("--shuffle", run.shuffle, "Shuffle the input order with the seed");
  r->add_option("--budget", run.budget, "MCMC wall-clock budget in seconds");
  r->add_option("--patience", run.patience, "MCMC sweeps without a MAP change");
  r->add_option("-i,--input", run.input, "Input data file");
  r->add_option("-o,--output-dir", run.output_dir, "Output directory");

  EvalArgs ev;
  auto* e = app.add_subcommand("eval", "Score a clustering against gold labels");
  e->add_option("--pred", ev.pred, "Clustering file (id<TAB>label)")->required();
  e->add_option("--gold", ev.gold, "Data file with gold labels")->required();
  e->add_option("-c,--config", ev.config, "Run configuration supplying model and alpha");
  e->add_option("--alpha", ev.alpha, "DP concentration");

  SweepArgs sw;
  auto* s = app.add_subcommand("sweep", "Run a grid of configurations with replications");
  s->add_option("-c,--config", sw.config, "Sweep configuration (JSON)")->required();
  s->add_option("-o,--output", sw.output, "Summary table (TSV)")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& err) {
    return app.exit(err);
  } catch (const CLI::ParseError& err) {
    app.exit(err);
    return kExitConfig;
  }
  if (help_config) {
    std::cout << config_schema();
    return kExitOk;
  }
  try {
    if (*g) return cmd_generate(gen);
    if (*r) return cmd_run(run);
    if (*e) return cmd_eval(ev);
    if (*s) return cmd_sweep(sw);
    std::cerr << app.help();
    return kExitConfig;
  } catch (const ConfigError& err) {
    std::cerr << "error: " << err.what() << '\n';
    return kExitConfig;
  } catch (const FormatError& err) {
    std::cerr << "error: " << err.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& err) {
    std::cerr << "runtime failure: " << err.what() << '\n';
    return kExitRuntime;
  }
}
