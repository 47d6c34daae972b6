#include "splitsmc/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <numbers>
#include <ostream>
#include <sstream>
#include <unordered_map>

#include "json.hpp"

namespace splitsmc {

namespace {

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t tab = line.find('\t', start);
    out.push_back(line.substr(start, tab - start));
    if (tab == std::string::npos) break;
    start = tab + 1;
  }
  return out;
}

std::string strip_cr(std::string s) {
  if (!s.empty() && s.back() == '\r') s.pop_back();
  return s;
}

std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

FormatError line_error(std::size_t lineno, const std::string& what) {
  return FormatError("line " + std::to_string(lineno) + ": " + what);
}

template <typename Record>
void shuffle_records(std::vector<Record>& records, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::shuffle(records.begin(), records.end(), rng);
}

}  // namespace

// -------------------------------------------------------------- Generators

std::vector<std::size_t> stick_breaking_sizes(double alpha_dp, std::size_t K, std::size_t n, std::mt19937_64& rng) {
  if (K == 0 || n == 0) throw std::invalid_argument("stick breaking needs positive K and n");
  if (!(alpha_dp > 0.0)) throw std::invalid_argument("stick breaking concentration must be positive");
  std::vector<double> pi(K);
  double rest = 1.0;
  for (std::size_t k = 0; k < K; ++k) {
    // Beta(1, alpha) as a ratio of Gamma draws.
    const double g1 = std::gamma_distribution<double>(1.0, 1.0)(rng);
    const double g2 = std::gamma_distribution<double>(alpha_dp, 1.0)(rng);
    const double v = g1 + g2 > 0.0 ? g1 / (g1 + g2) : 1.0;
    pi[k] = v * rest;
    rest *= 1.0 - v;
  }
  std::discrete_distribution<std::size_t> pick(pi.begin(), pi.end());
  std::vector<std::size_t> sizes(K, 0);
  for (std::size_t i = 0; i < n; ++i) ++sizes[pick(rng)];
  return sizes;
}

std::vector<PointRecord> gen_gmm(const GmmGenConfig& cfg) {
  if (cfg.n_groups == 0 || cfg.dims == 0) throw std::invalid_argument("gmm generator needs groups and dimensions");
  if (!(cfg.a > 0.0 && cfg.b > 0.0 && cfg.lambda > 0.0 && cfg.perturb_divisor > 0.0))
    throw std::invalid_argument("gmm generator parameters must be positive");
  std::mt19937_64 rng(cfg.seed);
  const auto sizes = stick_breaking_sizes(cfg.alpha_dp, cfg.K, cfg.n, rng);

  std::normal_distribution<double> std_normal(0.0, 1.0);
  std::vector<std::vector<double>> centres(cfg.n_groups, std::vector<double>(cfg.dims));
  const double centre_sd = 1.0 / std::sqrt(cfg.lambda);
  for (auto& c : centres)
    for (double& v : c) v = cfg.mu + centre_sd * std_normal(rng);

  std::gamma_distribution<double> precision(cfg.a, 1.0 / cfg.b);
  std::uniform_int_distribution<std::size_t> group(0, cfg.n_groups - 1);
  std::vector<PointRecord> out;
  out.reserve(cfg.n);
  std::size_t label = 0;
  for (std::size_t size : sizes) {
    if (size == 0) continue;
    const double sigma2 = 1.0 / precision(rng);
    const double sigma = std::sqrt(sigma2);
    const auto& g = centres[group(rng)];
    std::vector<double> mean(cfg.dims);
    const double perturb_sd = std::sqrt(sigma2 / (cfg.perturb_divisor * cfg.lambda));
    for (std::size_t d = 0; d < cfg.dims; ++d) mean[d] = g[d] + perturb_sd * std_normal(rng);
    for (std::size_t i = 0; i < size; ++i) {
      PointRecord r;
      r.x.resize(cfg.dims);
      for (std::size_t d = 0; d < cfg.dims; ++d) r.x[d] = mean[d] + sigma * std_normal(rng);
      r.gold = std::to_string(label);
      out.push_back(std::move(r));
    }
    ++label;
  }
  std::shuffle(out.begin(), out.end(), rng);
  for (std::size_t i = 0; i < out.size(); ++i) out[i].id = std::to_string(i);
  return out;
}

std::vector<PointRecord> gen_circles(const CirclesGenConfig& cfg) {
  if (cfg.n_clusters == 0 || cfg.min_size == 0 || cfg.min_size > cfg.max_size)
    throw std::invalid_argument("invalid circles generator configuration");
  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> coord(-cfg.half_width, cfg.half_width);
  std::uniform_int_distribution<std::size_t> size(cfg.min_size, cfg.max_size);
  std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
  std::vector<PointRecord> out;
  for (std::size_t k = 0; k < cfg.n_clusters; ++k) {
    const double cx = coord(rng);
    const double cy = coord(rng);
    const std::size_t n = size(rng);
    for (std::size_t i = 0; i < n; ++i) {
      const double th = angle(rng);
      out.push_back({"", {cx + cfg.radius * std::cos(th), cy + cfg.radius * std::sin(th)}, std::to_string(k)});
    }
  }
  std::shuffle(out.begin(), out.end(), rng);
  for (std::size_t i = 0; i < out.size(); ++i) out[i].id = std::to_string(i);
  return out;
}

// ------------------------------------------------------------------ Points

std::vector<PointRecord> read_points(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw line_error(1, "missing header");
  const auto header = split_tabs(strip_cr(line));
  if (header.size() < 2 || header[0] != "id") throw line_error(1, "header must start with `id` and a coordinate");
  const bool has_gold = header.back() == "gold";
  const std::size_t dims = header.size() - 1 - (has_gold ? 1 : 0);
  if (dims == 0) throw line_error(1, "no coordinate columns");
  std::vector<PointRecord> out;
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    line = strip_cr(line);
    if (line.empty()) continue;
    const auto f = split_tabs(line);
    if (f.size() != header.size())
      throw line_error(lineno, "expected " + std::to_string(header.size()) + " fields, got " + std::to_string(f.size()));
    PointRecord r;
    r.id = f[0];
    if (r.id.empty()) throw line_error(lineno, "empty id");
    r.x.resize(dims);
    for (std::size_t d = 0; d < dims; ++d) {
      const std::string& s = f[1 + d];
      const auto res = std::from_chars(s.data(), s.data() + s.size(), r.x[d]);
      if (res.ec != std::errc() || res.ptr != s.data() + s.size() || !std::isfinite(r.x[d]))
        throw line_error(lineno, "bad number `" + s + "`");
    }
    if (has_gold && !f.back().empty()) r.gold = f.back();
    out.push_back(std::move(r));
  }
  return out;
}

void write_points(std::ostream& os, const std::vector<PointRecord>& records) {
  if (records.empty()) throw std::invalid_argument("write_points: no records");
  const std::size_t dims = records.front().x.size();
  const bool has_gold = std::any_of(records.begin(), records.end(), [](const PointRecord& r) { return r.gold; });
  os << "id";
  for (std::size_t d = 0; d < dims; ++d) os << "\tx" << d + 1;
  if (has_gold) os << "\tgold";
  os << '\n';
  for (const auto& r : records) {
    if (r.x.size() != dims) throw std::invalid_argument("write_points: mixed dimensionality");
    os << r.id;
    for (double v : r.x) os << '\t' << format_double(v);
    if (has_gold) os << '\t' << r.gold.value_or("");
    os << '\n';
  }
}

// --------------------------------------------------------------- Fragments

std::vector<FragmentRecord> read_fragments(std::istream& is) {
  std::vector<FragmentRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    line = strip_cr(line);
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw line_error(lineno, std::string("invalid JSON: ") + e.what());
    }
    if (!j.is_object() || !j.contains("id") || !j.contains("attributes") || !j["attributes"].is_object())
      throw line_error(lineno, "record needs `id` and an `attributes` object");
    FragmentRecord r;
    const auto& id = j["id"];
    if (id.is_string()) r.id = id.get<std::string>();
    else if (id.is_number_integer()) r.id = std::to_string(id.get<long long>());
    else throw line_error(lineno, "`id` must be a string or integer");
    for (const auto& [k, v] : j["attributes"].items()) {
      if (!v.is_string()) throw line_error(lineno, "attribute `" + k + "` must be a string");
      r.attributes[k] = v.get<std::string>();
    }
    if (auto it = r.attributes.find("name"); it != r.attributes.end() && it->second.empty())
      throw line_error(lineno, "empty `name` attribute");
    if (j.contains("gold_entity") && !j["gold_entity"].is_null()) {
      if (!j["gold_entity"].is_string()) throw line_error(lineno, "`gold_entity` must be a string");
      r.gold_entity = j["gold_entity"].get<std::string>();
    }
    out.push_back(std::move(r));
  }
  return out;
}

void write_fragments(std::ostream& os, const std::vector<FragmentRecord>& records) {
  for (const auto& r : records) {
    nlohmann::ordered_json j;
    j["id"] = r.id;
    j["attributes"] = r.attributes;
    if (r.gold_entity) j["gold_entity"] = *r.gold_entity;
    os << j.dump() << '\n';
  }
}

// ----------------------------------------------------------------- Dataset

std::optional<DataKind> parse_data_kind(const std::string& name) {
  if (name == "points") return DataKind::points;
  if (name == "fragments") return DataKind::fragments;
  return std::nullopt;
}

DataKind infer_data_kind(const std::string& path) {
  auto ends_with = [&](const std::string& suffix) {
    return path.size() >= suffix.size() && path.compare(path.size() - suffix.size(), suffix.size(), suffix) == 0;
  };
  return ends_with(".jsonl") || ends_with(".json") ? DataKind::fragments : DataKind::points;
}

bool Dataset::has_gold() const {
  return !gold.empty() && std::all_of(gold.begin(), gold.end(), [](const auto& g) { return g.has_value(); });
}

Partition partition_from_labels(const std::vector<std::string>& labels) {
  std::unordered_map<std::string, int> dense;
  std::vector<int> ints(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i)
    ints[i] = dense.emplace(labels[i], static_cast<int>(dense.size())).first->second;
  const auto ids = iota_ids(labels.size());
  return Partition::from_labels(ids, ints);
}

Partition Dataset::gold_partition() const {
  if (!has_gold()) throw std::invalid_argument("dataset has no complete gold labelling");
  std::vector<std::string> labels(gold.size());
  for (std::size_t i = 0; i < gold.size(); ++i) labels[i] = *gold[i];
  return partition_from_labels(labels);
}

void Dataset::write_clustering(std::ostream& os, const Partition& p) const {
  if (p.num_items() != size()) throw std::invalid_argument("clustering does not cover the dataset");
  std::vector<std::size_t> label(size());
  for (std::size_t k = 0; k < p.num_clusters(); ++k)
    for (DataId id : p.cluster(k).members()) label.at(index_of(id)) = k;
  // Relabel by first appearance in original-id order of the file.
  std::unordered_map<std::size_t, std::size_t> dense;
  for (std::size_t i = 0; i < size(); ++i) {
    const std::size_t l = dense.emplace(label[i], dense.size()).first->second;
    os << original_ids[i] << '\t' << l << '\n';
  }
}

Dataset dataset_from_points(const std::vector<PointRecord>& records) {
  Dataset ds;
  ds.kind = DataKind::points;
  for (const auto& r : records) {
    if (!records.empty() && r.x.size() != records.front().x.size())
      throw std::invalid_argument("points have mixed dimensionality");
    ds.original_ids.push_back(r.id);
    ds.gold.push_back(r.gold);
    ds.store->add(r.x);
  }
  return ds;
}

Dataset dataset_from_fragments(const std::vector<FragmentRecord>& records) {
  Dataset ds;
  ds.kind = DataKind::fragments;
  for (const auto& r : records) {
    ds.original_ids.push_back(r.id);
    ds.gold.push_back(r.gold_entity);
    ds.store->add(Fragment{r.attributes});
  }
  return ds;
}

namespace {

void check_unique_ids(const std::vector<std::string>& ids) {
  std::unordered_map<std::string, std::size_t> seen;
  for (std::size_t i = 0; i < ids.size(); ++i)
    if (!seen.emplace(ids[i], i).second) throw FormatError("duplicate id `" + ids[i] + "`");
}

}  // namespace

Dataset load_stream(const std::string& path, DataKind kind, std::optional<std::uint64_t> shuffle_seed,
                    const std::string& required_attribute) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open `" + path + "`");
  Dataset ds;
  if (kind == DataKind::points) {
    auto records = read_points(in);
    if (shuffle_seed) shuffle_records(records, *shuffle_seed);
    ds = dataset_from_points(records);
  } else {
    auto records = read_fragments(in);
    if (!required_attribute.empty())
      for (const auto& r : records)
        if (!r.attributes.count(required_attribute))
          throw FormatError("record `" + r.id + "` lacks the `" + required_attribute + "` attribute");
    if (shuffle_seed) shuffle_records(records, *shuffle_seed);
    ds = dataset_from_fragments(records);
  }
  if (ds.size() == 0) throw FormatError("`" + path + "` holds no records");
  check_unique_ids(ds.original_ids);
  return ds;
}

Partition read_clustering(std::istream& is, const Dataset& ds) {
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < ds.size(); ++i) index.emplace(ds.original_ids[i], i);
  std::vector<std::optional<std::string>> labels(ds.size());
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    line = strip_cr(line);
    if (line.empty()) continue;
    const auto f = split_tabs(line);
    if (f.size() != 2) throw line_error(lineno, "expected `id<TAB>label`");
    auto it = index.find(f[0]);
    if (it == index.end()) throw std::invalid_argument("unknown id `" + f[0] + "` in clustering");
    if (labels[it->second]) throw std::invalid_argument("id `" + f[0] + "` listed twice in clustering");
    labels[it->second] = f[1];
  }
  std::vector<std::string> missing;
  for (std::size_t i = 0; i < ds.size(); ++i)
    if (!labels[i]) missing.push_back(ds.original_ids[i]);
  if (!missing.empty()) {
    std::string msg = "clustering is missing ids:";
    for (const auto& m : missing) msg += " " + m;
    throw std::invalid_argument(msg);
  }
  std::vector<std::string> flat(ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) flat[i] = *labels[i];
  return partition_from_labels(flat);
}

}  // namespace splitsmc
