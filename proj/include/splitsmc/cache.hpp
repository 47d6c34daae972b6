#pragma once

#include <atomic>
#include <cstdint>
#include <memory>
#include <mutex>
#include <shared_mutex>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "splitsmc/core.hpp"
#include "splitsmc/models.hpp"

namespace splitsmc {

// Memo of log marginals keyed by (model_id, canonical member list). Safe for
// concurrent lookup and insert; concurrent inserts of one key store the same
// value so the last writer wins harmlessly.
class LikelihoodCache {
 public:
  // `max_entries_per_model` == 0 means unbounded; otherwise a model's table is
  // dropped wholesale when it grows past the limit.
  explicit LikelihoodCache(std::size_t max_entries_per_model = 0)
      : max_entries_(max_entries_per_model) {}

  // Returns the cached value for `members` (∪ {extra} when given), computing
  // it with `compute` on a miss. `members` must be sorted ascending.
  template <typename Compute>
  double get_or_compute(const std::string& model_id, std::span<const DataId> members,
                        const DataId* extra, Compute&& compute);

  std::uint64_t hits() const { return hits_.load(); }
  std::uint64_t misses() const { return misses_.load(); }
  std::uint64_t misses(const std::string& model_id) const;
  std::size_t size() const;
  void clear();

 private:
  struct Key {
    std::vector<DataId> members;
    std::uint64_t hash;
  };
  // Lookup view: sorted `members` plus an optional extra id.
  struct Probe {
    std::span<const DataId> members;
    const DataId* extra;
    std::uint64_t hash;
  };
  struct KeyHash {
    using is_transparent = void;
    std::size_t operator()(const Key& k) const { return static_cast<std::size_t>(k.hash); }
    std::size_t operator()(const Probe& p) const { return static_cast<std::size_t>(p.hash); }
  };
  struct KeyEq {
    using is_transparent = void;
    bool operator()(const Key& a, const Key& b) const { return a.hash == b.hash && a.members == b.members; }
    bool operator()(const Probe& p, const Key& k) const { return equal(p, k); }
    bool operator()(const Key& k, const Probe& p) const { return equal(p, k); }
    static bool equal(const Probe& p, const Key& k);
  };
  struct Table {
    std::unordered_map<Key, double, KeyHash, KeyEq> values;
    std::uint64_t misses = 0;
  };

  Table& table_for(const std::string& model_id);
  static Key materialise(const Probe& p);

  std::size_t max_entries_;
  mutable std::shared_mutex mutex_;
  std::unordered_map<std::string, std::unique_ptr<Table>> tables_;
  std::atomic<std::uint64_t> hits_{0};
  std::atomic<std::uint64_t> misses_{0};
};

// Binds a model to a payload store and a shared cache, exposing it as a
// ClusterLikelihood. Every underlying model call is a cache miss, so the
// cache's miss counter is the single evaluation count.
class ModelEvaluator final : public ClusterLikelihood {
 public:
  ModelEvaluator(ModelPtr model, std::shared_ptr<const PayloadStore> store,
                 std::shared_ptr<LikelihoodCache> cache = std::make_shared<LikelihoodCache>());

  double log_marginal(std::span<const DataId> members) const override;
  double log_marginal_with(std::span<const DataId> members, DataId extra) const override;
  using ClusterLikelihood::log_marginal;

  const std::string& model_id() const { return model_id_; }
  const LikelihoodModel& model() const { return *model_; }
  const PayloadStore& store() const { return *store_; }
  const std::shared_ptr<LikelihoodCache>& cache() const { return cache_; }
  // Underlying model evaluations performed through the shared cache for this model id.
  std::uint64_t evaluations() const { return cache_->misses(model_id_); }

 private:
  ModelPtr model_;
  std::shared_ptr<const PayloadStore> store_;
  std::shared_ptr<LikelihoodCache> cache_;
  std::string model_id_;
};

// ------------------------------------------------------------------------

template <typename Compute>
double LikelihoodCache::get_or_compute(const std::string& model_id, std::span<const DataId> members,
                                       const DataId* extra, Compute&& compute) {
  Probe probe{members, extra, members_hash(members) + (extra ? id_hash(*extra) : 0)};
  Table* table;
  {
    std::shared_lock lock(mutex_);
    auto t = tables_.find(model_id);
    if (t != tables_.end()) {
      table = t->second.get();
      auto it = table->values.find(probe);
      if (it != table->values.end()) {
        hits_.fetch_add(1, std::memory_order_relaxed);
        return it->second;
      }
    }
  }
  Key key = materialise(probe);
  const double value = compute(std::span<const DataId>(key.members));
  std::unique_lock lock(mutex_);
  table = &table_for(model_id);
  ++table->misses;
  misses_.fetch_add(1, std::memory_order_relaxed);
  if (max_entries_ != 0 && table->values.size() >= max_entries_) table->values.clear();
  table->values.insert_or_assign(std::move(key), value);
  return value;
}

}  // namespace splitsmc
