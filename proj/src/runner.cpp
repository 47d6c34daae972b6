#include "splitsmc/runner.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>

#include "splitsmc/baselines.hpp"
#include "splitsmc/cache.hpp"
#include "splitsmc/numeric.hpp"
#include "splitsmc/smc.hpp"
#include "splitsmc/split_smc.hpp"

namespace splitsmc {

namespace {

using nlohmann::json;

std::size_t point_dims(const Dataset& ds) {
  if (ds.kind != DataKind::points || ds.size() == 0) return 0;
  return ds.store->point(make_id(0)).size();
}

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

}  // namespace

RunOutput execute_run(const RunConfig& cfg) {
  validate(cfg);
  if (cfg.input.empty()) throw ConfigError("no input file given");
  DataKind kind = infer_data_kind(cfg.input);
  if (!cfg.input_kind.empty()) kind = *parse_data_kind(cfg.input_kind);
  const bool needs_attr = cfg.model.kind == "bigram" || (cfg.surrogate && cfg.surrogate->kind == "bigram");
  std::optional<std::uint64_t> shuffle;
  if (cfg.shuffle) shuffle = cfg.seed;
  Dataset ds = load_stream(cfg.input, kind, shuffle, needs_attr ? cfg.model.attribute : "");
  return execute_run(cfg, std::move(ds));
}

RunOutput execute_run(const RunConfig& cfg, Dataset dataset) {
  validate(cfg);
  if (dataset.size() == 0) throw ConfigError("dataset is empty");
  const std::size_t dims = point_dims(dataset);
  if ((cfg.model.kind == "nig" || (cfg.surrogate && cfg.surrogate->kind == "nig")) && dataset.kind != DataKind::points)
    throw ConfigError("the nig model needs point data");
  if ((cfg.model.kind == "bigram" || (cfg.surrogate && cfg.surrogate->kind == "bigram")) &&
      dataset.kind != DataKind::fragments)
    throw ConfigError("the bigram model needs fragment data");

  auto cache = std::make_shared<LikelihoodCache>(cfg.cache_max_entries);
  ModelEvaluator main(build_model(cfg.model, dims), dataset.store, cache);
  std::optional<ModelEvaluator> surrogate;
  if (cfg.surrogate) surrogate.emplace(build_model(*cfg.surrogate, dims), dataset.store, cache);
  const CrpPrior prior(cfg.alpha);
  const auto stream = dataset.stream();
  std::optional<Partition> gold;
  if (dataset.has_gold()) gold = dataset.gold_partition();

  RunOptions run;
  run.m = cfg.algorithm == Algorithm::greedy ? 1 : cfg.m;
  if (surrogate && cfg.m_prime) run.surrogate = {&*surrogate, *cfg.m_prime};
  if (gold && cfg.trace_f1) run.gold = &*gold;
  run.eval_counter = [&] { return main.evaluations(); };

  RunOutput out;
  RunSummary& s = out.summary;
  s.algorithm = algorithm_name(cfg.algorithm);
  s.seed = cfg.seed;
  const auto start = std::chrono::steady_clock::now();
  switch (cfg.algorithm) {
    case Algorithm::greedy:
    case Algorithm::smc: {
      auto r = run_smc(stream, main, prior, run);
      out.clustering = r.particles[r.particles.top()].partition;
      out.trace = std::move(r.trace);
      s.final_log_effective_particles = std::log(static_cast<double>(r.particles.size()));
      break;
    }
    case Algorithm::split_smc: {
      SplitSmcOptions opt;
      opt.m = cfg.m;
      opt.surrogate = run.surrogate;
      opt.explicit_joint_cap_factor = cfg.explicit_joint_cap_factor;
      auto r = run_split_smc(stream, main, prior, opt, cfg.seed, run);
      out.clustering = r.state.top_partition();
      out.trace = std::move(r.trace);
      s.final_subproblems = r.state.num_subproblems();
      s.final_log_effective_particles = log_effective_particle_count(r.state);
      break;
    }
    case Algorithm::gibbs:
    case Algorithm::mwg: {
      McmcConfig mc;
      mc.max_runtime_seconds = cfg.budget_seconds;
      mc.patience_sweeps = cfg.patience;
      mc.seed = cfg.seed;
      const bool mwg = cfg.algorithm == Algorithm::mwg;
      auto r = mcmc_run(stream, main, prior, mc, mwg ? McmcVariant::mwg : McmcVariant::gibbs,
                        mwg ? &*surrogate : nullptr);
      out.clustering = std::move(r.map);
      out.trace = std::move(r.trace);
      s.budget_exhausted = r.budget_exhausted;
      break;
    }
    case Algorithm::agglom: {
      AgglomConfig ac;
      ac.batch_size = cfg.agglom_batch_size;
      ac.patience_iterations = cfg.agglom_patience;
      ac.accept_threshold = cfg.accept_threshold;
      ac.seed = cfg.seed;
      auto r = agglomerative_run(stream, main, prior, ac);
      out.clustering = std::move(r.partition);
      out.trace = std::move(r.trace);
      break;
    }
  }
  s.runtime_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  s.n = dataset.size();
  s.n_clusters = out.clustering.num_clusters();
  s.log_posterior = score_clustering(out.clustering, cfg.alpha, main);
  for (const auto& rec : out.trace.records()) s.max_step_model_evals = std::max(s.max_step_model_evals, rec.step_model_evals);
  // Final scoring may add evaluations; they count towards the total.
  s.model_evals = main.evaluations();
  if (gold) {
    EvalReport e = bcubed(out.clustering, *gold);
    e.log_posterior = s.log_posterior;
    s.eval = e;
  }
  out.dataset = std::move(dataset);
  return out;
}

json summary_to_json(const RunSummary& s) {
  json j;
  j["algorithm"] = s.algorithm;
  j["n"] = s.n;
  j["n_clusters"] = s.n_clusters;
  j["log_posterior"] = number_or_null(s.log_posterior);
  if (s.eval) {
    j["precision"] = s.eval->precision;
    j["recall"] = s.eval->recall;
    j["f1"] = s.eval->f1;
  }
  j["runtime_seconds"] = s.runtime_seconds;
  j["model_evals"] = s.model_evals;
  j["max_step_model_evals"] = s.max_step_model_evals;
  j["budget_exhausted"] = s.budget_exhausted;
  j["seed"] = s.seed;
  j["final_subproblems"] = s.final_subproblems;
  j["final_log_effective_particles"] = s.final_log_effective_particles;
  return j;
}

void write_run_outputs(const RunOutput& out, const std::string& dir) {
  std::filesystem::create_directories(dir);
  const std::filesystem::path base(dir);
  auto open = [&](const char* name) {
    std::ofstream f(base / name);
    if (!f) throw std::runtime_error("cannot write `" + (base / name).string() + "`");
    return f;
  };
  {
    auto f = open("clustering.tsv");
    out.dataset.write_clustering(f, out.clustering);
  }
  {
    auto f = open("trace.tsv");
    out.trace.write_tsv(f);
  }
  {
    auto f = open("summary.json");
    f << summary_to_json(out.summary).dump(2) << '\n';
  }
}

// ------------------------------------------------------------------ Sweep

SweepConfig sweep_config_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("sweep config must be a JSON object");
  for (const auto& [k, v] : j.items())
    if (k != "base" && k != "grid" && k != "replications" && k != "master_seed")
      throw ConfigError("unknown key `" + k + "` in sweep config");
  SweepConfig c;
  c.base = run_config_from_json(j.value("base", json::object()));
  const json grid = j.value("grid", json::object());
  if (!grid.is_object()) throw ConfigError("`grid` must be an object");
  for (const auto& [k, v] : grid.items()) {
    if (k != "algorithm" && k != "m" && k != "m_prime") throw ConfigError("unknown grid axis `" + k + "`");
    if (!v.is_array() || v.empty()) throw ConfigError("grid axis `" + k + "` must be a non-empty array");
  }
  if (grid.contains("algorithm")) {
    for (const auto& a : grid["algorithm"]) {
      if (!a.is_string() || !parse_algorithm(a.get<std::string>()))
        throw ConfigError("bad algorithm in grid: " + a.dump());
      c.algorithms.push_back(*parse_algorithm(a.get<std::string>()));
    }
  } else {
    c.algorithms = {c.base.algorithm};
  }
  if (grid.contains("m")) {
    for (const auto& m : grid["m"]) {
      if (!m.is_number_integer() || m.get<long long>() < 1) throw ConfigError("grid m values must be integers >= 1");
      c.ms.push_back(m.get<std::size_t>());
    }
  } else {
    c.ms = {c.base.m};
  }
  if (grid.contains("m_prime")) {
    for (const auto& mp : grid["m_prime"]) {
      if (mp.is_null()) c.m_primes.push_back(std::nullopt);
      else if (mp.is_number_integer() && mp.get<long long>() >= 1) c.m_primes.push_back(mp.get<std::size_t>());
      else throw ConfigError("grid m_prime values must be integers >= 1 or null");
    }
  } else {
    c.m_primes = {c.base.m_prime};
  }
  if (auto it = j.find("replications"); it != j.end()) {
    if (!it->is_number_integer() || it->get<long long>() < 1) throw ConfigError("replications must be >= 1");
    c.replications = it->get<std::size_t>();
  }
  if (auto it = j.find("master_seed"); it != j.end()) {
    if (!it->is_number_integer() || it->get<long long>() < 0) throw ConfigError("master_seed must be >= 0");
    c.master_seed = it->get<std::uint64_t>();
  }
  return c;
}

SweepConfig load_sweep_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open sweep config `" + path + "`");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("sweep config `" + path + "` is not valid JSON: " + e.what());
  }
  return sweep_config_from_json(j);
}

std::uint64_t replication_seed(std::uint64_t master_seed, std::size_t r) {
  return mix64(master_seed + static_cast<std::uint64_t>(r));
}

namespace {

MeanSd mean_sd(const std::vector<double>& v) {
  MeanSd out{std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN()};
  if (v.empty()) return out;
  double sum = 0.0;
  for (double x : v) sum += x;
  out.mean = sum / static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - out.mean) * (x - out.mean);
  out.sd = v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0;
  return out;
}

}  // namespace

std::vector<SweepRow> execute_sweep(const SweepConfig& cfg) {
  std::vector<SweepRow> rows;
  for (Algorithm a : cfg.algorithms)
    for (std::size_t m : cfg.ms)
      for (const auto& mp : cfg.m_primes) {
        SweepRow row;
        row.algorithm = a;
        row.m = m;
        row.m_prime = mp;
        std::vector<double> f1, lp, rt, ev, nc;
        for (std::size_t r = 0; r < cfg.replications; ++r) {
          RunConfig rc = cfg.base;
          rc.algorithm = a;
          rc.m = m;
          rc.m_prime = mp;
          rc.seed = replication_seed(cfg.master_seed, r);
          rc.shuffle = true;
          try {
            const RunOutput out = execute_run(rc);
            if (out.summary.eval) f1.push_back(out.summary.eval->f1);
            lp.push_back(out.summary.log_posterior);
            rt.push_back(out.summary.runtime_seconds);
            ev.push_back(static_cast<double>(out.summary.model_evals));
            nc.push_back(static_cast<double>(out.summary.n_clusters));
            ++row.completed;
          } catch (const std::exception& e) {
            ++row.failed;
            row.last_error = e.what();
          }
        }
        row.f1 = mean_sd(f1);
        row.log_posterior = mean_sd(lp);
        row.runtime_seconds = mean_sd(rt);
        row.model_evals = mean_sd(ev);
        row.n_clusters = mean_sd(nc);
        rows.push_back(std::move(row));
      }
  return rows;
}

void write_sweep_table(std::ostream& os, const std::vector<SweepRow>& rows) {
  os << "algorithm\tm\tm_prime\tcompleted\tfailed\tf1_mean\tf1_sd\tlog_posterior_mean\tlog_posterior_sd\t"
        "runtime_mean\truntime_sd\tmodel_evals_mean\tmodel_evals_sd\tn_clusters_mean\tn_clusters_sd\terror\n";
  os << std::setprecision(10);
  for (const auto& r : rows) {
    os << algorithm_name(r.algorithm) << '\t' << r.m << '\t';
    if (r.m_prime) os << *r.m_prime;
    else os << '-';
    os << '\t' << r.completed << '\t' << r.failed;
    for (const MeanSd* v : {&r.f1, &r.log_posterior, &r.runtime_seconds, &r.model_evals, &r.n_clusters})
      os << '\t' << v->mean << '\t' << v->sd;
    std::string err = r.last_error;
    for (char& ch : err)
      if (ch == '\t' || ch == '\n') ch = ' ';
    os << '\t' << (err.empty() ? "-" : err) << '\n';
  }
}

}  // namespace splitsmc
