#pragma once

// Partition algebra, the Chinese-restaurant-process prior and the Ewens
// unnormalised log posterior over clusterings.

#include <compare>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

namespace splitsmc {

// Arrival index of an observation. Two observations with identical payloads
// are still distinct if their indices differ.
enum class DataId : std::uint32_t {};

constexpr DataId make_id(std::uint32_t index) { return static_cast<DataId>(index); }
constexpr std::uint32_t index_of(DataId id) { return static_cast<std::uint32_t>(id); }

std::vector<DataId> iota_ids(std::size_t n);

// Sentinel cluster index meaning "open a new cluster".
inline constexpr std::size_t kNewCluster = std::numeric_limits<std::size_t>::max();

// Non-empty set of ids stored in ascending order. The order-independent
// hash makes hash(c ∪ {x}) = hash(c) + id_hash(x).
class Cluster {
 public:
  explicit Cluster(std::vector<DataId> members);
  static Cluster singleton(DataId id);

  std::span<const DataId> members() const { return members_; }
  std::size_t size() const { return members_.size(); }
  DataId min() const { return members_.front(); }
  std::uint64_t hash() const { return hash_; }
  bool contains(DataId id) const;

  // Copy of this cluster with `id` added; `id` must not be a member.
  Cluster with(DataId id) const;

  friend bool operator==(const Cluster& a, const Cluster& b) {
    return a.hash_ == b.hash_ && a.members_ == b.members_;
  }
  friend std::strong_ordering operator<=>(const Cluster& a, const Cluster& b);

 private:
  struct Trusted {};
  Cluster(Trusted, std::vector<DataId> members, std::uint64_t hash)
      : members_(std::move(members)), hash_(hash) {}

  std::vector<DataId> members_;
  std::uint64_t hash_ = 0;
};

std::uint64_t id_hash(DataId id);
std::uint64_t members_hash(std::span<const DataId> members);

// Set of disjoint clusters kept in canonical form: clusters ordered by their
// smallest member. Canonical form is the equality and hashing key.
class Partition {
 public:
  Partition() = default;
  explicit Partition(std::vector<Cluster> clusters);

  // Builds a partition from parallel arrays of ids and integer labels.
  static Partition from_labels(std::span<const DataId> ids, std::span<const int> labels);
  static Partition all_singletons(std::span<const DataId> ids);

  std::span<const Cluster> clusters() const { return clusters_; }
  const Cluster& cluster(std::size_t k) const { return clusters_[k]; }
  std::size_t num_clusters() const { return clusters_.size(); }
  std::size_t num_items() const { return num_items_; }
  bool empty() const { return clusters_.empty(); }
  std::uint64_t hash() const { return hash_; }

  // Sorted list of all covered ids.
  std::vector<DataId> ids() const;
  // Index of the cluster holding `id`, or kNewCluster when absent.
  std::size_t find(DataId id) const;

  // Partition obtained by putting `id` into cluster `k`, or into a fresh
  // singleton when k == kNewCluster.
  Partition with_assignment(std::size_t k, DataId id) const;
  // hash() of with_assignment(k, id), computed in O(1).
  std::uint64_t hash_with_assignment(std::size_t k, DataId id) const;

  // Union with a partition over a disjoint id set.
  Partition joined(const Partition& other) const;

  // Keeps only the clusters for which `keep` returns true.
  Partition filtered(const std::function<bool(const Cluster&)>& keep) const;

  std::string to_string() const;

  friend bool operator==(const Partition& a, const Partition& b) {
    return a.hash_ == b.hash_ && a.clusters_ == b.clusters_;
  }
  friend std::strong_ordering operator<=>(const Partition& a, const Partition& b);

 private:
  struct Trusted {};
  Partition(Trusted, std::vector<Cluster> clusters);
  void recompute();

  std::vector<Cluster> clusters_;
  std::size_t num_items_ = 0;
  std::uint64_t hash_ = 0;
};

struct PartitionHash {
  std::size_t operator()(const Partition& p) const { return static_cast<std::size_t>(p.hash()); }
};

// Source of cluster log marginal likelihoods log p(c).
class ClusterLikelihood {
 public:
  virtual ~ClusterLikelihood() = default;
  virtual double log_marginal(std::span<const DataId> members) const = 0;

  // log p(members ∪ {extra}); implementations may avoid building the union.
  virtual double log_marginal_with(std::span<const DataId> members, DataId extra) const;

  double log_marginal(const Cluster& c) const { return log_marginal(c.members()); }
  // log p(x | c) = log p(c ∪ {x}) - log p(c); the empty cluster gives the prior predictive.
  double log_predictive(DataId x, std::span<const DataId> members) const;
};

// Likelihood that assigns log p(c) = 0 to every cluster.
class UnitLikelihood final : public ClusterLikelihood {
 public:
  double log_marginal(std::span<const DataId>) const override { return 0.0; }
  double log_marginal_with(std::span<const DataId>, DataId) const override { return 0.0; }
};

class CrpPrior {
 public:
  explicit CrpPrior(double alpha);
  double alpha() const { return alpha_; }

 private:
  double alpha_;
};

// log Pr(z_t = target | sizes) under the CRP, with t = 1 + sum(sizes).
double crp_assignment_log_prior(std::span<const std::size_t> cluster_sizes, double alpha,
                                std::size_t t, std::size_t target);

// Unnormalised Ewens log posterior of a clustering of t observations:
//   log[ alpha^(K-1) / prod_{i=0}^{t-1}(alpha+1+i) * prod_k Gamma(|c_k|) p(c_k) ].
double ewens_log_posterior(const Partition& partition, double alpha,
                           const ClusterLikelihood& model);

// Prior part of the above, without the likelihood terms.
double ewens_log_prior(const Partition& partition, double alpha);

inline constexpr std::size_t kMaxEnumerationSize = 10;

std::uint64_t bell_number(std::size_t n);

// All set partitions of ids 0..n-1, canonical and distinct (n <= 10).
std::vector<Partition> enumerate_partitions(std::size_t n);
// Same, over an arbitrary id list.
std::vector<Partition> enumerate_partitions(std::span<const DataId> ids);

struct PosteriorAtom {
  Partition partition;
  double log_prob = 0.0;
  double prob = 0.0;
};

// Brute-force normalised posterior over all partitions of `ids` (|ids| <= 10).
std::vector<PosteriorAtom> exact_posterior(std::span<const DataId> ids, double alpha,
                                           const ClusterLikelihood& model);

}  // namespace splitsmc
