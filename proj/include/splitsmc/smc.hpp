#pragma once

// Vanilla SMC over clusterings with greedy resampling. Each particle holds a
// distinct partition; a new observation expands every particle into one
// putative per possible assignment, weighted by prior weight x CRP prior x
// predictive likelihood, and the m heaviest putatives survive.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "splitsmc/core.hpp"
#include "splitsmc/numeric.hpp"
#include "splitsmc/trace.hpp"

namespace splitsmc {

struct WeightedParticle {
  Partition partition;
  double log_weight = 0.0;
};

// Weighted set of distinct partitions, all covering exactly `ids()`.
class ParticleSet {
 public:
  ParticleSet() = default;
  ParticleSet(std::vector<DataId> ids, std::vector<WeightedParticle> particles);
  // Single particle with weight one.
  static ParticleSet single(Partition partition);

  std::span<const WeightedParticle> particles() const { return particles_; }
  const WeightedParticle& operator[](std::size_t i) const { return particles_[i]; }
  std::size_t size() const { return particles_.size(); }
  bool empty() const { return particles_.empty(); }
  const std::vector<DataId>& ids() const { return ids_; }
  bool covers(DataId id) const { return std::binary_search(ids_.begin(), ids_.end(), id); }

  // Index of the highest-weight particle (ties: canonical order).
  std::size_t top() const;
  void normalise();
  // Throws std::logic_error if a set invariant is broken.
  void validate(double tolerance = 1e-9) const;

 private:
  std::vector<DataId> ids_;
  std::vector<WeightedParticle> particles_;
};

// One candidate assignment of a new observation: particle `source` of
// subproblem `subproblem` with the observation placed in cluster `target`
// (kNewCluster for a fresh singleton).
struct PutativeParticle {
  std::size_t subproblem = 0;
  std::size_t source = 0;
  std::size_t target = kNewCluster;
  double log_weight = 0.0;

  bool is_singleton() const { return target == kNewCluster; }
};

// log of w * Pr(z_t = target | p) * p(x | c_target), with t the total number
// of observations including x. Cluster sizes inside `p` need not sum to t-1
// (p may be a subproblem's partition).
double putative_log_weight(const Partition& p, double log_w, std::size_t target, DataId x,
                           const ClusterLikelihood& model, double alpha, std::size_t t);

// All putatives for `set`; weights are unnormalised. `t` defaults to
// |ids| + 1.
std::vector<PutativeParticle> expand_putative(const ParticleSet& set, DataId x,
                                              const ClusterLikelihood& model, const CrpPrior& prior,
                                              std::size_t t = 0, std::size_t subproblem = 0);

// Re-evaluates putative weights under `model` (prior and source weights unchanged).
void rescore_putatives(std::span<PutativeParticle> putatives, std::span<const ParticleSet* const> sets,
                       DataId x, const ClusterLikelihood& model, const CrpPrior& prior, std::size_t t);

Partition materialise(const PutativeParticle& p, std::span<const ParticleSet* const> sets, DataId x);

// Indices of the min(m, n) largest weights, ordered by (weight desc, tie_less
// asc). `tie_less(i, j)` breaks exact weight ties deterministically.
template <typename TieLess>
std::vector<std::size_t> greedy_select(std::span<const double> log_weights, std::size_t m,
                                       TieLess&& tie_less) {
  if (m == 0) throw std::invalid_argument("greedy resample size m must be positive");
  for (double w : log_weights)
    if (std::isnan(w)) throw std::invalid_argument("NaN weight in greedy resample");
  std::vector<std::size_t> idx(log_weights.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  const std::size_t keep = std::min(m, idx.size());
  auto cmp = [&](std::size_t a, std::size_t b) {
    if (log_weights[a] != log_weights[b]) return log_weights[a] > log_weights[b];
    return tie_less(a, b);
  };
  std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(keep), idx.end(), cmp);
  idx.resize(keep);
  return idx;
}

// Keeps the min(m, |items|) highest-weight items and renormalises their log
// weights. Ties go to the item that compares lower under `tie_less`.
template <typename T, typename TieLess = std::less<T>>
std::vector<std::pair<T, double>> greedy_resample(std::vector<std::pair<T, double>> items, std::size_t m,
                                                  TieLess tie_less = {}) {
  if (items.empty()) throw std::invalid_argument("greedy resample needs at least one item");
  std::vector<double> w(items.size());
  for (std::size_t i = 0; i < items.size(); ++i) w[i] = items[i].second;
  auto keep = greedy_select(w, m, [&](std::size_t a, std::size_t b) {
    if (tie_less(items[a].first, items[b].first)) return true;
    if (tie_less(items[b].first, items[a].first)) return false;
    return a < b;
  });
  std::vector<std::pair<T, double>> out;
  out.reserve(keep.size());
  for (std::size_t i : keep) out.push_back(std::move(items[i]));
  std::vector<double> lw(out.size());
  for (std::size_t i = 0; i < out.size(); ++i) lw[i] = out[i].second;
  const double z = log_sum_exp(lw);
  for (auto& [item, weight] : out) weight -= z;
  return out;
}

// Merges putatives that yield the same partition (same subproblem and equal
// canonical partitions) by log-sum-exp of their weights. Keeps first-seen order.
std::vector<PutativeParticle> coalesce_putatives(std::vector<PutativeParticle> putatives,
                                                 std::span<const ParticleSet* const> sets, DataId x);

// Greedy resample of putatives to m with the (weight desc, canonical partition
// asc) order. Returned weights are renormalised over the survivors.
std::vector<PutativeParticle> greedy_resample_putatives(std::vector<PutativeParticle> putatives,
                                                        std::span<const ParticleSet* const> sets,
                                                        DataId x, std::size_t m);

// Optional surrogate proposal used inside an SMC step.
struct SurrogateSpec {
  const ClusterLikelihood* surrogate = nullptr;
  std::size_t m_prime = 0;
};

ParticleSet smc_step(const ParticleSet& set, DataId x, const ClusterLikelihood& model,
                     const CrpPrior& prior, std::size_t m, const SurrogateSpec& surrogate = {});

struct RunOptions {
  std::size_t m = 100;
  SurrogateSpec surrogate{};
  const Partition* gold = nullptr;               // enables per-step F1
  std::function<std::uint64_t()> eval_counter;   // cumulative main-model evaluations
  TraceSink sink;                                // called after each step
  bool trace_log_posterior = true;
};

struct SmcResult {
  ParticleSet particles;
  RunTrace trace;
};

SmcResult run_smc(std::span<const DataId> stream, const ClusterLikelihood& model, const CrpPrior& prior,
                  const RunOptions& options);

}  // namespace splitsmc
