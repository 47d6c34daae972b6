#include "splitsmc/baselines.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <stdexcept>
#include <unordered_set>

#include "splitsmc/numeric.hpp"

namespace splitsmc {

// ------------------------------------------------------- AssignmentVector

AssignmentVector::AssignmentVector(std::vector<DataId> ids) : ids_(std::move(ids)) {
  std::sort(ids_.begin(), ids_.end());
  if (std::adjacent_find(ids_.begin(), ids_.end()) != ids_.end())
    throw std::invalid_argument("assignment vector ids must be distinct");
  labels_.resize(ids_.size());
  clusters_.reserve(ids_.size());
  for (std::size_t i = 0; i < ids_.size(); ++i) {
    labels_[i] = i;
    clusters_.push_back({ids_[i]});
  }
}

AssignmentVector AssignmentVector::from_partition(const Partition& p) {
  AssignmentVector z(p.ids());
  z.clusters_.clear();
  for (std::size_t k = 0; k < p.num_clusters(); ++k) {
    auto m = p.cluster(k).members();
    z.clusters_.emplace_back(m.begin(), m.end());
    for (DataId id : m)
      z.labels_[static_cast<std::size_t>(std::lower_bound(z.ids_.begin(), z.ids_.end(), id) - z.ids_.begin())] = k;
  }
  return z;
}

void AssignmentVector::remove(std::size_t i) {
  const std::size_t k = labels_[i];
  if (k == kDetached) throw std::logic_error("item already detached");
  auto& c = clusters_[k];
  c.erase(std::lower_bound(c.begin(), c.end(), ids_[i]));
  labels_[i] = kDetached;
  if (!c.empty()) return;
  const std::size_t last = clusters_.size() - 1;
  if (k != last) {
    clusters_[k] = std::move(clusters_[last]);
    for (DataId id : clusters_[k])
      labels_[static_cast<std::size_t>(std::lower_bound(ids_.begin(), ids_.end(), id) - ids_.begin())] = k;
  }
  clusters_.pop_back();
}

void AssignmentVector::insert(std::size_t i, std::size_t k) {
  if (labels_[i] != kDetached) throw std::logic_error("item is not detached");
  if (k > clusters_.size()) throw std::out_of_range("cluster label out of range");
  if (k == clusters_.size()) clusters_.emplace_back();
  auto& c = clusters_[k];
  c.insert(std::upper_bound(c.begin(), c.end(), ids_[i]), ids_[i]);
  labels_[i] = k;
}

void AssignmentVector::move(std::size_t i, std::size_t k) {
  const std::size_t from = labels_[i];
  const std::size_t before = clusters_.size();
  if (k > before) throw std::out_of_range("cluster label out of range");
  const bool alone = clusters_[from].size() == 1;
  if (alone && (k == from || k == before)) return;
  remove(i);
  // Labels are in pre-removal terms; compaction moved cluster `before - 1` to `from`.
  if (alone && k == before - 1) k = from;
  insert(i, k);
}

Partition AssignmentVector::to_partition() const {
  std::vector<Cluster> cs;
  cs.reserve(clusters_.size());
  for (const auto& c : clusters_) cs.emplace_back(c);
  return Partition(std::move(cs));
}

// ------------------------------------------------------------------ MCMC

namespace {

std::size_t sample_log_categorical(std::span<const double> log_weights, Rng& rng) {
  const double hi = *std::max_element(log_weights.begin(), log_weights.end());
  std::vector<double> cdf(log_weights.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < cdf.size(); ++i) {
    acc += std::exp(log_weights[i] - hi);
    cdf[i] = acc;
  }
  const double u = std::uniform_real_distribution<double>(0.0, acc)(rng);
  auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
  if (it == cdf.end()) --it;
  return static_cast<std::size_t>(it - cdf.begin());
}

// Unnormalised log conditional of one option for a detached item.
double option_log_weight(const AssignmentVector& z, std::size_t k, DataId x, const ClusterLikelihood& model,
                         double alpha) {
  if (k == z.num_clusters()) return std::log(alpha) + model.log_marginal_with({}, x);
  auto c = z.members(k);
  return std::log(static_cast<double>(c.size())) + model.log_marginal_with(c, x) - model.log_marginal(c);
}

std::vector<double> conditional(const AssignmentVector& z, DataId x, const ClusterLikelihood& model, double alpha) {
  std::vector<double> w(z.num_clusters() + 1);
  for (std::size_t k = 0; k < w.size(); ++k) w[k] = option_log_weight(z, k, x, model, alpha);
  return w;
}

std::vector<std::size_t> random_order(std::size_t n, Rng& rng) {
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::shuffle(order.begin(), order.end(), rng);
  return order;
}

}  // namespace

void gibbs_sweep(AssignmentVector& z, const ClusterLikelihood& model, const CrpPrior& prior, Rng& rng) {
  for (std::size_t i : random_order(z.size(), rng)) {
    z.remove(i);
    const auto w = conditional(z, z.ids()[i], model, prior.alpha());
    z.insert(i, sample_log_categorical(w, rng));
  }
}

void mwg_sweep(AssignmentVector& z, const ClusterLikelihood& model, const ClusterLikelihood& surrogate,
               const CrpPrior& prior, Rng& rng) {
  const double alpha = prior.alpha();
  for (std::size_t i : random_order(z.size(), rng)) {
    const DataId x = z.ids()[i];
    const bool alone = z.members(z.label(i)).size() == 1;
    std::size_t current = z.label(i);
    z.remove(i);
    if (alone) current = z.num_clusters();
    const auto q = conditional(z, x, surrogate, alpha);
    const std::size_t proposed = sample_log_categorical(q, rng);
    std::size_t chosen = current;
    if (proposed != current) {
      const double log_ratio = option_log_weight(z, proposed, x, model, alpha) -
                               option_log_weight(z, current, x, model, alpha) + q[current] - q[proposed];
      if (log_ratio >= 0.0 || std::log(std::uniform_real_distribution<double>(0.0, 1.0)(rng)) < log_ratio)
        chosen = proposed;
    }
    z.insert(i, chosen);
  }
}

McmcResult mcmc_run(std::span<const DataId> ids, const ClusterLikelihood& model, const CrpPrior& prior,
                    const McmcConfig& cfg, McmcVariant variant, const ClusterLikelihood* surrogate,
                    const TraceSink& sink) {
  if (cfg.patience_sweeps == 0) throw std::invalid_argument("MCMC patience must be at least 1");
  if (ids.empty()) throw std::invalid_argument("mcmc_run: no observations");
  if (variant == McmcVariant::mwg && surrogate == nullptr)
    throw std::invalid_argument("Metropolis-within-Gibbs needs a surrogate model");
  const auto start = std::chrono::steady_clock::now();
  auto elapsed = [&] { return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count(); };

  Rng rng(cfg.seed);
  AssignmentVector z(std::vector<DataId>(ids.begin(), ids.end()));
  McmcResult result;
  result.map = z.to_partition();
  result.map_log_posterior = ewens_log_posterior(result.map, prior.alpha(), model);
  std::size_t stale = 0;
  while (result.sweeps < cfg.max_sweeps) {
    if (elapsed() >= cfg.max_runtime_seconds) {
      result.budget_exhausted = true;
      break;
    }
    if (variant == McmcVariant::gibbs) gibbs_sweep(z, model, prior, rng);
    else mwg_sweep(z, model, *surrogate, prior, rng);
    ++result.sweeps;
    Partition p = z.to_partition();
    const double lp = ewens_log_posterior(p, prior.alpha(), model);
    if (lp > result.map_log_posterior) {
      result.map = std::move(p);
      result.map_log_posterior = lp;
      stale = 0;
    } else {
      ++stale;
    }
    TraceRecord rec;
    rec.step = result.sweeps;
    rec.log_posterior = result.map_log_posterior;
    rec.wall_seconds = elapsed();
    if (sink) sink(rec);
    result.trace.append(rec);
    if (stale >= cfg.patience_sweeps) break;
  }
  return result;
}

// --------------------------------------------------------- Agglomerative

double merge_delta(std::span<const DataId> a, std::span<const DataId> b, const ClusterLikelihood& model,
                   double alpha) {
  std::vector<DataId> u(a.size() + b.size());
  std::merge(a.begin(), a.end(), b.begin(), b.end(), u.begin());
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  return -std::log(alpha) + std::lgamma(na + nb) - std::lgamma(na) - std::lgamma(nb) + model.log_marginal(u) -
         model.log_marginal(a) - model.log_marginal(b);
}

AgglomResult agglomerative_run(std::span<const DataId> ids, const ClusterLikelihood& model, const CrpPrior& prior,
                               const AgglomConfig& cfg, const TraceSink& sink) {
  if (ids.empty()) throw std::invalid_argument("agglomerative_run: no observations");
  if (cfg.batch_size == 0 && cfg.patience_iterations == 0)
    throw std::invalid_argument("agglomerative patience must be at least 1");
  const auto start = std::chrono::steady_clock::now();
  const double alpha = prior.alpha();
  std::vector<std::vector<DataId>> slots;
  for (DataId id : ids) slots.push_back({id});
  std::sort(slots.begin(), slots.end());
  std::vector<bool> active(slots.size(), true);
  std::size_t n_active = slots.size();

  AgglomResult result;
  double lp = ewens_log_posterior(Partition::all_singletons(std::vector<DataId>(ids.begin(), ids.end())), alpha,
                                  model);
  auto record = [&] {
    TraceRecord rec;
    rec.step = result.iterations;
    rec.log_posterior = lp;
    rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (sink) sink(rec);
    result.trace.append(rec);
  };
  auto do_merge = [&](std::size_t a, std::size_t b, double delta) {
    std::vector<DataId> u(slots[a].size() + slots[b].size());
    std::merge(slots[a].begin(), slots[a].end(), slots[b].begin(), slots[b].end(), u.begin());
    slots[a] = std::move(u);
    slots[b].clear();
    active[b] = false;
    --n_active;
    lp += delta;
    ++result.merges;
  };

  if (cfg.batch_size == 0) {
    // Full mode: every active pair scored; delta[i][j] for i < j.
    const std::size_t s = slots.size();
    std::vector<double> delta(s * s, kNegInf);
    for (std::size_t i = 0; i < s; ++i)
      for (std::size_t j = i + 1; j < s; ++j) delta[i * s + j] = merge_delta(slots[i], slots[j], model, alpha);
    while (n_active > 1) {
      std::size_t bi = 0, bj = 0;
      double best = kNegInf;
      for (std::size_t i = 0; i < s; ++i) {
        if (!active[i]) continue;
        for (std::size_t j = i + 1; j < s; ++j)
          if (active[j] && delta[i * s + j] > best) {
            best = delta[i * s + j];
            bi = i;
            bj = j;
          }
      }
      ++result.iterations;
      if (!(best > cfg.accept_threshold)) {
        record();
        break;
      }
      do_merge(bi, bj, best);
      for (std::size_t k = 0; k < s; ++k) {
        if (!active[k] || k == bi) continue;
        const double d = merge_delta(slots[std::min(k, bi)], slots[std::max(k, bi)], model, alpha);
        delta[std::min(k, bi) * s + std::max(k, bi)] = d;
      }
      record();
    }
  } else {
    Rng rng(cfg.seed);
    std::size_t stale = 0;
    while (n_active > 1 && stale < cfg.patience_iterations) {
      std::vector<std::size_t> live;
      live.reserve(n_active);
      for (std::size_t i = 0; i < slots.size(); ++i)
        if (active[i]) live.push_back(i);
      const std::uint64_t k = live.size();
      const std::uint64_t pairs = k * (k - 1) / 2;
      std::vector<std::pair<std::size_t, std::size_t>> batch;
      if (cfg.batch_size >= pairs) {
        for (std::size_t i = 0; i < k; ++i)
          for (std::size_t j = i + 1; j < k; ++j) batch.emplace_back(live[i], live[j]);
      } else {
        std::unordered_set<std::uint64_t> seen;
        std::uniform_int_distribution<std::size_t> pick(0, k - 1);
        while (batch.size() < cfg.batch_size) {
          std::size_t i = pick(rng), j = pick(rng);
          if (i == j) continue;
          if (i > j) std::swap(i, j);
          if (!seen.insert(static_cast<std::uint64_t>(i) * k + j).second) continue;
          batch.emplace_back(live[i], live[j]);
        }
      }
      std::size_t bi = 0, bj = 0;
      double best = kNegInf;
      for (auto [i, j] : batch) {
        const double d = merge_delta(slots[i], slots[j], model, alpha);
        if (d > best) {
          best = d;
          bi = i;
          bj = j;
        }
      }
      ++result.iterations;
      if (best > cfg.accept_threshold) {
        do_merge(bi, bj, best);
        stale = 0;
      } else {
        ++stale;
      }
      record();
    }
  }

  std::vector<Cluster> cs;
  for (std::size_t i = 0; i < slots.size(); ++i)
    if (active[i]) cs.emplace_back(slots[i]);
  result.partition = Partition(std::move(cs));
  return result;
}

}  // namespace splitsmc
