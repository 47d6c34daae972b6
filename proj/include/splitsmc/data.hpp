#pragma once

// Synthetic dataset generators and on-disk record formats.
//
// Points: tab-separated text. The first line is a header `id x1 ... xd [gold]`;
// each further line holds one record. Fragments: one JSON object per line with
// `id`, `attributes` (string map) and an optional `gold_entity`.

#include <cstdint>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "splitsmc/core.hpp"
#include "splitsmc/models.hpp"

namespace splitsmc {

// Malformed input file; the message names the offending line.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct PointRecord {
  std::string id;
  std::vector<double> x;
  std::optional<std::string> gold;
};

struct FragmentRecord {
  std::string id;
  std::map<std::string, std::string> attributes;
  std::optional<std::string> gold_entity;
};

struct GmmGenConfig {
  double alpha_dp = 20.0;
  std::size_t K = 100;  // stick-breaking truncation
  std::size_t n = 700;
  std::size_t n_groups = 16;
  double a = 2.0;  // precision ~ Gamma(shape a, rate b)
  double b = 0.5;
  double mu = 0.0;
  double lambda = 0.0002;
  double perturb_divisor = 125.0;
  std::size_t dims = 2;
  std::uint64_t seed = 0;
};

struct CirclesGenConfig {
  std::size_t n_clusters = 15;
  double half_width = 5.0;
  double radius = 0.6;
  std::size_t min_size = 10;
  std::size_t max_size = 30;
  std::uint64_t seed = 0;
};

// K cluster sizes from a truncated stick-breaking draw followed by a
// multinomial assignment of n points. Sizes may be zero.
std::vector<std::size_t> stick_breaking_sizes(double alpha_dp, std::size_t K, std::size_t n, std::mt19937_64& rng);

// Records come out in random order with dense gold labels "0", "1", ...
std::vector<PointRecord> gen_gmm(const GmmGenConfig& cfg);
std::vector<PointRecord> gen_circles(const CirclesGenConfig& cfg);

std::vector<PointRecord> read_points(std::istream& is);
void write_points(std::ostream& os, const std::vector<PointRecord>& records);
std::vector<FragmentRecord> read_fragments(std::istream& is);
void write_fragments(std::ostream& os, const std::vector<FragmentRecord>& records);

enum class DataKind { points, fragments };

// Parses `kind` names; nullopt for unknown names.
std::optional<DataKind> parse_data_kind(const std::string& name);
// `.jsonl` and `.json` mean fragments, anything else points.
DataKind infer_data_kind(const std::string& path);

// A loaded stream: arrival index i has DataId i; original ids and gold labels
// are kept by arrival index.
struct Dataset {
  DataKind kind = DataKind::points;
  std::vector<std::string> original_ids;
  std::vector<std::optional<std::string>> gold;
  std::shared_ptr<PayloadStore> store = std::make_shared<PayloadStore>();

  std::size_t size() const { return original_ids.size(); }
  std::vector<DataId> stream() const { return iota_ids(size()); }
  bool has_gold() const;
  // Requires every record to carry a gold label.
  Partition gold_partition() const;
  // Clustering keyed by original ids: one `original_id <tab> label` line per
  // record, labels dense in order of first appearance.
  void write_clustering(std::ostream& os, const Partition& p) const;
};

Dataset dataset_from_points(const std::vector<PointRecord>& records);
Dataset dataset_from_fragments(const std::vector<FragmentRecord>& records);

// Reads a file; with a seed the record order is shuffled deterministically
// before ids are assigned. Fragments must all carry `required_attribute`
// when it is non-empty.
Dataset load_stream(const std::string& path, DataKind kind, std::optional<std::uint64_t> shuffle_seed = std::nullopt,
                    const std::string& required_attribute = "");

// Reads a clustering file (`original_id <tab> label`) into a partition over
// `ds`'s arrival ids. Throws std::invalid_argument naming any id of `ds`
// missing from the file or any unknown id in it.
Partition read_clustering(std::istream& is, const Dataset& ds);

// Partition of arrival ids from a gold column, for evaluation.
Partition partition_from_labels(const std::vector<std::string>& labels);

}  // namespace splitsmc
