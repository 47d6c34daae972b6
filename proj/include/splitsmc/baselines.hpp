#pragma once

// Offline comparison algorithms: Gibbs and Metropolis-within-Gibbs sampling
// over cluster assignments, and greedy agglomerative merging.

#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <span>
#include <vector>

#include "splitsmc/core.hpp"
#include "splitsmc/trace.hpp"

namespace splitsmc {

// Dense cluster labels for a fixed id list. Clusters that become empty are
// removed immediately by moving the last cluster into the freed label.
class AssignmentVector {
 public:
  // All singletons.
  explicit AssignmentVector(std::vector<DataId> ids);
  static AssignmentVector from_partition(const Partition& p);

  const std::vector<DataId>& ids() const { return ids_; }
  std::size_t size() const { return ids_.size(); }
  std::span<const std::size_t> labels() const { return labels_; }
  std::size_t label(std::size_t i) const { return labels_[i]; }
  std::size_t num_clusters() const { return clusters_.size(); }
  // Sorted members of cluster k.
  std::span<const DataId> members(std::size_t k) const { return clusters_[k]; }

  // Detaches item i; its former cluster is compacted away if emptied.
  void remove(std::size_t i);
  // Attaches a detached item i to cluster k, or to a new cluster when
  // k == num_clusters().
  void insert(std::size_t i, std::size_t k);
  // remove + insert with `k` given in pre-move labels (num_clusters() = new).
  void move(std::size_t i, std::size_t k);

  Partition to_partition() const;

 private:
  static constexpr std::size_t kDetached = std::numeric_limits<std::size_t>::max();
  std::vector<DataId> ids_;
  std::vector<std::size_t> labels_;
  std::vector<std::vector<DataId>> clusters_;
};

using Rng = std::mt19937_64;

// One Gibbs sweep: items in a fresh random order, each label drawn from its
// exact conditional given all other labels.
void gibbs_sweep(AssignmentVector& z, const ClusterLikelihood& model, const CrpPrior& prior, Rng& rng);

// One Metropolis-within-Gibbs sweep: the proposal is the Gibbs conditional
// under `surrogate`, corrected by an accept/reject step under `model`. With
// surrogate == model every proposal is accepted and no accept draw is made, so
// the chain equals gibbs_sweep's for the same rng stream.
void mwg_sweep(AssignmentVector& z, const ClusterLikelihood& model, const ClusterLikelihood& surrogate,
               const CrpPrior& prior, Rng& rng);

enum class McmcVariant { gibbs, mwg };

struct McmcConfig {
  double max_runtime_seconds = std::numeric_limits<double>::infinity();
  std::size_t patience_sweeps = 500;  // sweeps without a MAP improvement before stopping
  std::size_t max_sweeps = std::numeric_limits<std::size_t>::max();
  std::uint64_t seed = 0;
};

struct McmcResult {
  Partition map;
  double map_log_posterior = 0.0;
  std::size_t sweeps = 0;
  bool budget_exhausted = false;
  RunTrace trace;
};

// Runs sweeps from the all-singleton state until patience or budget; returns
// the best clustering visited. A zero budget returns the initial state.
McmcResult mcmc_run(std::span<const DataId> ids, const ClusterLikelihood& model, const CrpPrior& prior,
                    const McmcConfig& cfg, McmcVariant variant = McmcVariant::gibbs,
                    const ClusterLikelihood* surrogate = nullptr, const TraceSink& sink = {});

struct AgglomConfig {
  std::size_t batch_size = 0;  // 0 scores every pair each iteration
  std::size_t patience_iterations = 100;
  double accept_threshold = 0.0;
  std::uint64_t seed = 0;
};

struct AgglomResult {
  Partition partition;
  std::size_t merges = 0;
  std::size_t iterations = 0;
  RunTrace trace;
};

// Change in the Ewens log posterior from merging clusters a and b.
double merge_delta(std::span<const DataId> a, std::span<const DataId> b, const ClusterLikelihood& model,
                   double alpha);

// Starts from all singletons and repeatedly applies the best-scoring pair
// merge while it beats the threshold.
AgglomResult agglomerative_run(std::span<const DataId> ids, const ClusterLikelihood& model, const CrpPrior& prior,
                               const AgglomConfig& cfg, const TraceSink& sink = {});

}  // namespace splitsmc
