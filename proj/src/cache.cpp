#include "splitsmc/cache.hpp"

#include <algorithm>
#include <mutex>
#include <stdexcept>

namespace splitsmc {

bool LikelihoodCache::KeyEq::equal(const Probe& p, const Key& k) {
  if (p.hash != k.hash) return false;
  const std::size_t n = p.members.size() + (p.extra ? 1 : 0);
  if (n != k.members.size()) return false;
  if (!p.extra) return std::equal(p.members.begin(), p.members.end(), k.members.begin());
  // Merge-compare members ∪ {extra} against the stored sorted key.
  std::size_t i = 0;
  bool used = false;
  for (DataId stored : k.members) {
    DataId next;
    if (!used && (i == p.members.size() || *p.extra < p.members[i])) {
      next = *p.extra;
      used = true;
    } else {
      next = p.members[i++];
    }
    if (next != stored) return false;
  }
  return true;
}

LikelihoodCache::Key LikelihoodCache::materialise(const Probe& p) {
  Key key{{p.members.begin(), p.members.end()}, p.hash};
  if (p.extra) {
    auto pos = std::upper_bound(key.members.begin(), key.members.end(), *p.extra);
    key.members.insert(pos, *p.extra);
  }
  return key;
}

LikelihoodCache::Table& LikelihoodCache::table_for(const std::string& model_id) {
  auto& slot = tables_[model_id];
  if (!slot) slot = std::make_unique<Table>();
  return *slot;
}

std::uint64_t LikelihoodCache::misses(const std::string& model_id) const {
  std::shared_lock lock(mutex_);
  auto it = tables_.find(model_id);
  return it == tables_.end() ? 0 : it->second->misses;
}

std::size_t LikelihoodCache::size() const {
  std::shared_lock lock(mutex_);
  std::size_t n = 0;
  for (const auto& [id, t] : tables_) n += t->values.size();
  return n;
}

void LikelihoodCache::clear() {
  std::unique_lock lock(mutex_);
  tables_.clear();
}

ModelEvaluator::ModelEvaluator(ModelPtr model, std::shared_ptr<const PayloadStore> store,
                               std::shared_ptr<LikelihoodCache> cache)
    : model_(std::move(model)), store_(std::move(store)), cache_(std::move(cache)) {
  if (!model_ || !store_ || !cache_) throw std::invalid_argument("ModelEvaluator: null argument");
  model_id_ = model_->model_id();
}

double ModelEvaluator::log_marginal(std::span<const DataId> members) const {
  if (members.empty()) return 0.0;
  if (!std::is_sorted(members.begin(), members.end())) {
    std::vector<DataId> sorted(members.begin(), members.end());
    std::sort(sorted.begin(), sorted.end());
    return log_marginal(std::span<const DataId>(sorted));
  }
  return cache_->get_or_compute(model_id_, members, nullptr, [this](std::span<const DataId> key) {
    return model_->log_marginal(key, *store_);
  });
}

double ModelEvaluator::log_marginal_with(std::span<const DataId> members, DataId extra) const {
  if (!std::is_sorted(members.begin(), members.end())) return ClusterLikelihood::log_marginal_with(members, extra);
  if (std::binary_search(members.begin(), members.end(), extra))
    throw std::invalid_argument("log_marginal_with: id already a member");
  return cache_->get_or_compute(model_id_, members, &extra, [this](std::span<const DataId> key) {
    return model_->log_marginal(key, *store_);
  });
}

}  // namespace splitsmc
