#include "splitsmc/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace splitsmc {

namespace {

using nlohmann::json;

void reject_unknown(const json& j, const std::set<std::string>& known, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be a JSON object");
  for (const auto& [k, v] : j.items())
    if (!known.count(k)) throw ConfigError("unknown key `" + k + "` in " + where);
}

template <typename T>
void read(const json& j, const char* key, T& out) {
  auto it = j.find(key);
  if (it == j.end()) return;
  try {
    if constexpr (std::is_same_v<T, std::size_t> || std::is_same_v<T, std::uint64_t>) {
      if (!it->is_number_integer() || it->get<long long>() < 0)
        throw ConfigError(std::string("`") + key + "` must be a non-negative integer");
    } else if constexpr (std::is_same_v<T, double>) {
      if (!it->is_number()) throw ConfigError(std::string("`") + key + "` must be a number");
    }
    out = it->get<T>();
  } catch (const json::exception&) {
    throw ConfigError(std::string("`") + key + "` has the wrong type");
  }
}

}  // namespace

std::optional<Algorithm> parse_algorithm(const std::string& name) {
  if (name == "greedy") return Algorithm::greedy;
  if (name == "smc") return Algorithm::smc;
  if (name == "split-smc") return Algorithm::split_smc;
  if (name == "gibbs") return Algorithm::gibbs;
  if (name == "mwg") return Algorithm::mwg;
  if (name == "agglom") return Algorithm::agglom;
  return std::nullopt;
}

std::string algorithm_name(Algorithm a) {
  switch (a) {
    case Algorithm::greedy: return "greedy";
    case Algorithm::smc: return "smc";
    case Algorithm::split_smc: return "split-smc";
    case Algorithm::gibbs: return "gibbs";
    case Algorithm::mwg: return "mwg";
    case Algorithm::agglom: return "agglom";
  }
  return "?";
}

ModelSpec model_spec_from_json(const json& j) {
  reject_unknown(j,
                 {"kind", "mu0", "lambda", "a", "b", "corpus", "rescale_c", "case_fold", "attribute",
                  "log_scale_per_point", "log_scale_per_cluster"},
                 "model spec");
  ModelSpec s;
  read(j, "kind", s.kind);
  if (auto it = j.find("mu0"); it != j.end()) {
    if (it->is_number()) s.mu0 = {it->get<double>()};
    else if (it->is_array() && !it->empty() && std::all_of(it->begin(), it->end(), [](const json& v) { return v.is_number(); }))
      s.mu0 = it->get<std::vector<double>>();
    else throw ConfigError("`mu0` must be a number or a non-empty array of numbers");
  }
  read(j, "lambda", s.lambda);
  read(j, "a", s.a);
  read(j, "b", s.b);
  read(j, "corpus", s.corpus);
  read(j, "rescale_c", s.rescale_c);
  read(j, "case_fold", s.case_fold);
  read(j, "attribute", s.attribute);
  read(j, "log_scale_per_point", s.log_scale_per_point);
  read(j, "log_scale_per_cluster", s.log_scale_per_cluster);
  if (s.kind != "nig" && s.kind != "bigram" && s.kind != "unit")
    throw ConfigError("model kind must be nig, bigram or unit (got `" + s.kind + "`)");
  if (s.kind == "nig" && !(s.lambda > 0.0 && s.a > 0.0 && s.b > 0.0))
    throw ConfigError("nig parameters lambda, a and b must be positive");
  if (s.kind == "bigram" && !(s.rescale_c > 0.0 && s.rescale_c <= 1.0))
    throw ConfigError("rescale_c must lie in (0, 1]");
  if (!std::isfinite(s.log_scale_per_point) || !std::isfinite(s.log_scale_per_cluster))
    throw ConfigError("log scales must be finite");
  return s;
}

json model_spec_to_json(const ModelSpec& s) {
  json j;
  j["kind"] = s.kind;
  if (s.kind == "nig") {
    j["mu0"] = s.mu0;
    j["lambda"] = s.lambda;
    j["a"] = s.a;
    j["b"] = s.b;
  } else if (s.kind == "bigram") {
    j["corpus"] = s.corpus;
    j["rescale_c"] = s.rescale_c;
    j["case_fold"] = s.case_fold;
    j["attribute"] = s.attribute;
  }
  j["log_scale_per_point"] = s.log_scale_per_point;
  j["log_scale_per_cluster"] = s.log_scale_per_cluster;
  return j;
}

RunConfig run_config_from_json(const json& j) {
  reject_unknown(j,
                 {"algorithm", "m", "m_prime", "alpha", "model", "surrogate", "seed", "shuffle", "budget_seconds",
                  "patience", "agglom_batch_size", "agglom_patience", "accept_threshold",
                  "explicit_joint_cap_factor", "cache_max_entries", "trace_f1", "input", "input_kind",
                  "output_dir"},
                 "run config");
  RunConfig c;
  if (auto it = j.find("algorithm"); it != j.end()) {
    if (!it->is_string()) throw ConfigError("`algorithm` must be a string");
    auto a = parse_algorithm(it->get<std::string>());
    if (!a) throw ConfigError("unknown algorithm `" + it->get<std::string>() + "`");
    c.algorithm = *a;
  }
  read(j, "m", c.m);
  if (auto it = j.find("m_prime"); it != j.end() && !it->is_null()) {
    std::size_t mp = 0;
    read(j, "m_prime", mp);
    c.m_prime = mp;
  }
  read(j, "alpha", c.alpha);
  if (auto it = j.find("model"); it != j.end()) c.model = model_spec_from_json(*it);
  if (auto it = j.find("surrogate"); it != j.end() && !it->is_null()) c.surrogate = model_spec_from_json(*it);
  read(j, "seed", c.seed);
  read(j, "shuffle", c.shuffle);
  if (auto it = j.find("budget_seconds"); it != j.end() && !it->is_null()) read(j, "budget_seconds", c.budget_seconds);
  read(j, "patience", c.patience);
  read(j, "agglom_batch_size", c.agglom_batch_size);
  read(j, "agglom_patience", c.agglom_patience);
  read(j, "accept_threshold", c.accept_threshold);
  read(j, "explicit_joint_cap_factor", c.explicit_joint_cap_factor);
  read(j, "cache_max_entries", c.cache_max_entries);
  read(j, "trace_f1", c.trace_f1);
  read(j, "input", c.input);
  read(j, "input_kind", c.input_kind);
  read(j, "output_dir", c.output_dir);
  validate(c);
  return c;
}

json run_config_to_json(const RunConfig& c) {
  json j;
  j["algorithm"] = algorithm_name(c.algorithm);
  j["m"] = c.m;
  j["m_prime"] = c.m_prime ? json(*c.m_prime) : json(nullptr);
  j["alpha"] = c.alpha;
  j["model"] = model_spec_to_json(c.model);
  j["surrogate"] = c.surrogate ? model_spec_to_json(*c.surrogate) : json(nullptr);
  j["seed"] = c.seed;
  j["shuffle"] = c.shuffle;
  j["budget_seconds"] = std::isfinite(c.budget_seconds) ? json(c.budget_seconds) : json(nullptr);
  j["patience"] = c.patience;
  j["agglom_batch_size"] = c.agglom_batch_size;
  j["agglom_patience"] = c.agglom_patience;
  j["accept_threshold"] = c.accept_threshold;
  j["explicit_joint_cap_factor"] = c.explicit_joint_cap_factor;
  j["cache_max_entries"] = c.cache_max_entries;
  j["trace_f1"] = c.trace_f1;
  j["input"] = c.input;
  j["input_kind"] = c.input_kind;
  j["output_dir"] = c.output_dir;
  return j;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config `" + path + "`");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("config `" + path + "` is not valid JSON: " + e.what());
  }
  return run_config_from_json(j);
}

void validate(const RunConfig& c) {
  if (c.m < 1) throw ConfigError("m must be at least 1");
  if (!(c.alpha > 0.0) || !std::isfinite(c.alpha)) throw ConfigError("alpha must be positive and finite");
  if (c.m_prime && *c.m_prime < 1) throw ConfigError("m_prime must be at least 1");
  const bool smc_family =
      c.algorithm == Algorithm::greedy || c.algorithm == Algorithm::smc || c.algorithm == Algorithm::split_smc;
  if (c.surrogate && smc_family && !c.m_prime) throw ConfigError("m_prime is required when a surrogate is set");
  if (c.algorithm == Algorithm::mwg && !c.surrogate) throw ConfigError("mwg needs a surrogate model");
  if (c.budget_seconds < 0.0 || std::isnan(c.budget_seconds)) throw ConfigError("budget_seconds must be >= 0");
  if (c.patience < 1) throw ConfigError("patience must be at least 1");
  if (c.agglom_patience < 1) throw ConfigError("agglom_patience must be at least 1");
  if (!(c.explicit_joint_cap_factor > 0.0)) throw ConfigError("explicit_joint_cap_factor must be positive");
  if (!c.input_kind.empty() && c.input_kind != "points" && c.input_kind != "fragments")
    throw ConfigError("input_kind must be points or fragments");
}

ModelPtr build_model(const ModelSpec& s, std::size_t dims) {
  ModelPtr base;
  if (s.kind == "unit") {
    base = std::make_shared<UnitModel>();
  } else if (s.kind == "nig") {
    if (dims == 0) throw ConfigError("nig model needs point data");
    std::vector<double> mu0 = s.mu0;
    if (mu0.size() == 1) mu0.assign(dims, mu0.front());
    if (mu0.size() != dims)
      throw ConfigError("mu0 has " + std::to_string(mu0.size()) + " entries but the data have " +
                        std::to_string(dims) + " dimensions");
    base = std::make_shared<NigGaussianModel>(std::move(mu0), s.lambda, s.a, s.b);
  } else {
    BigramAlphabet alphabet;
    alphabet.case_fold = s.case_fold;
    std::vector<std::vector<double>> counts;
    if (s.corpus.empty()) {
      const std::size_t v = alphabet.chars.size() + 2;
      counts.assign(v, std::vector<double>(v, s.rescale_c));
    } else {
      std::ifstream in(s.corpus);
      if (!in) throw ConfigError("cannot open bigram corpus `" + s.corpus + "`");
      std::vector<std::string> names;
      for (std::string line; std::getline(in, line);)
        if (!line.empty()) names.push_back(line);
      if (names.empty()) throw ConfigError("bigram corpus `" + s.corpus + "` is empty");
      const auto fitted = fit_bigram_pseudocounts(names, s.rescale_c, alphabet);
      counts.assign(fitted.num_symbols(), std::vector<double>(fitted.num_symbols()));
      for (std::size_t h = 0; h < counts.size(); ++h)
        for (std::size_t i = 0; i < counts.size(); ++i) counts[h][i] = fitted.pseudo_count(h, i);
    }
    base = std::make_shared<DirichletBigramModel>(alphabet, std::move(counts), s.rescale_c, s.attribute);
  }
  if (s.log_scale_per_point != 0.0 || s.log_scale_per_cluster != 0.0)
    return std::make_shared<ScaledModel>(base, s.log_scale_per_point, s.log_scale_per_cluster);
  return base;
}

std::string config_schema() {
  return R"(Run configuration (JSON object). Every key is optional unless noted.

  algorithm                  greedy | smc | split-smc | gibbs | mwg | agglom   (default split-smc)
  m                          particle count, >= 1 (default 100; greedy always uses 1)
  m_prime                    surrogate shortlist size, >= 1; required with a surrogate for
                             greedy/smc/split-smc
  alpha                      DP concentration, > 0 (default 1)
  model                      main likelihood, see below (default nig)
  surrogate                  optional proposal likelihood, same shape as model; required by mwg
  seed                       integer seed for the algorithm and the shuffle (default 0)
  shuffle                    shuffle the input order with seed (default false)
  budget_seconds             wall-clock budget for gibbs/mwg; null = unlimited
  patience                   gibbs/mwg sweeps without a MAP change before stopping (default 500)
  agglom_batch_size          candidate pairs per iteration; 0 = all pairs (default 0)
  agglom_patience            batched agglomerative iterations without a merge (default 100)
  accept_threshold           minimum log posterior gain for an agglomerative merge (default 0)
  explicit_joint_cap_factor  explicit-joint merges switch to multinomial past factor * m^2 (default 10)
  cache_max_entries          per-model likelihood cache limit; 0 = unbounded
  trace_f1                   record per-step F1 when gold labels exist (default true)
  input                      data file (required for `run`)
  input_kind                 points | fragments; empty infers from the extension
  output_dir                 directory for clustering.tsv, trace.tsv, summary.json (default out);
                             SPLITSMC_OUT_DIR overrides it

Model spec:
  kind                 nig | bigram | unit
  mu0, lambda, a, b    nig prior; mu0 is a number or one value per dimension
                       (defaults 0, 0.0002, 2, 0.5)
  corpus               bigram: file of names, one per line, for the pseudo-counts; empty = uniform
  rescale_c            bigram: multiplier on pseudo-counts, in (0, 1] (default 1)
  case_fold            bigram: lower-case names first (default true)
  attribute            bigram: fragment attribute to read (default name)
  log_scale_per_point    added to log p(c) once per member; posterior-neutral (default 0)
  log_scale_per_cluster  added to log p(c) once per cluster; same as alpha * exp(value) (default 0)
)";
}

}  // namespace splitsmc
