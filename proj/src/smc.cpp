#include "splitsmc/smc.hpp"

#include <chrono>
#include <unordered_map>

#include "splitsmc/metrics.hpp"
#include "splitsmc/proposal.hpp"

namespace splitsmc {

// ------------------------------------------------------------ ParticleSet

ParticleSet::ParticleSet(std::vector<DataId> ids, std::vector<WeightedParticle> particles)
    : ids_(std::move(ids)), particles_(std::move(particles)) {
  std::sort(ids_.begin(), ids_.end());
  if (particles_.empty()) throw std::invalid_argument("particle set must hold at least one particle");
}

ParticleSet ParticleSet::single(Partition partition) {
  auto ids = partition.ids();
  std::vector<WeightedParticle> ps;
  ps.push_back({std::move(partition), 0.0});
  return ParticleSet(std::move(ids), std::move(ps));
}

std::size_t ParticleSet::top() const {
  std::size_t best = 0;
  for (std::size_t i = 1; i < particles_.size(); ++i) {
    const auto& a = particles_[i];
    const auto& b = particles_[best];
    if (a.log_weight > b.log_weight || (a.log_weight == b.log_weight && a.partition < b.partition)) best = i;
  }
  return best;
}

void ParticleSet::normalise() {
  std::vector<double> lw(particles_.size());
  for (std::size_t i = 0; i < lw.size(); ++i) lw[i] = particles_[i].log_weight;
  const double z = log_sum_exp(lw);
  for (auto& p : particles_) p.log_weight -= z;
}

void ParticleSet::validate(double tolerance) const {
  if (particles_.empty()) throw std::logic_error("empty particle set");
  std::vector<double> lw;
  std::unordered_map<std::uint64_t, std::vector<const Partition*>> seen;
  for (const auto& p : particles_) {
    if (p.partition.ids() != ids_) throw std::logic_error("particle does not cover the set's ids");
    auto& bucket = seen[p.partition.hash()];
    for (const Partition* q : bucket)
      if (*q == p.partition) throw std::logic_error("duplicate partition in particle set");
    bucket.push_back(&p.partition);
    lw.push_back(p.log_weight);
  }
  double total = 0.0;
  for (double w : lw) total += std::exp(w);
  if (std::abs(total - 1.0) > tolerance) throw std::logic_error("particle weights are not normalised");
}

// -------------------------------------------------------------- Putatives

double putative_log_weight(const Partition& p, double log_w, std::size_t target, DataId x,
                           const ClusterLikelihood& model, double alpha, std::size_t t) {
  const double denom = std::log(alpha + static_cast<double>(t) - 1.0);
  if (target == kNewCluster) return log_w + std::log(alpha) - denom + model.log_marginal_with({}, x);
  const Cluster& c = p.cluster(target);
  return log_w + std::log(static_cast<double>(c.size())) - denom + model.log_marginal_with(c.members(), x) -
         model.log_marginal(c.members());
}

std::vector<PutativeParticle> expand_putative(const ParticleSet& set, DataId x, const ClusterLikelihood& model,
                                              const CrpPrior& prior, std::size_t t, std::size_t subproblem) {
  if (set.covers(x)) throw std::invalid_argument("expand_putative: observation already covered");
  if (t == 0) t = set.ids().size() + 1;
  std::vector<PutativeParticle> out;
  for (std::size_t i = 0; i < set.size(); ++i) {
    const auto& wp = set[i];
    for (std::size_t k = 0; k < wp.partition.num_clusters(); ++k)
      out.push_back({subproblem, i, k,
                     putative_log_weight(wp.partition, wp.log_weight, k, x, model, prior.alpha(), t)});
    out.push_back({subproblem, i, kNewCluster,
                   putative_log_weight(wp.partition, wp.log_weight, kNewCluster, x, model, prior.alpha(), t)});
  }
  return out;
}

void rescore_putatives(std::span<PutativeParticle> putatives, std::span<const ParticleSet* const> sets, DataId x,
                       const ClusterLikelihood& model, const CrpPrior& prior, std::size_t t) {
  for (auto& p : putatives) {
    const auto& wp = (*sets[p.subproblem])[p.source];
    p.log_weight = putative_log_weight(wp.partition, wp.log_weight, p.target, x, model, prior.alpha(), t);
  }
}

Partition materialise(const PutativeParticle& p, std::span<const ParticleSet* const> sets, DataId x) {
  return (*sets[p.subproblem])[p.source].partition.with_assignment(p.target, x);
}

namespace {

std::uint64_t putative_hash(const PutativeParticle& p, std::span<const ParticleSet* const> sets, DataId x) {
  return (*sets[p.subproblem])[p.source].partition.hash_with_assignment(p.target, x);
}

}  // namespace

std::vector<PutativeParticle> coalesce_putatives(std::vector<PutativeParticle> putatives,
                                                 std::span<const ParticleSet* const> sets, DataId x) {
  std::vector<PutativeParticle> out;
  out.reserve(putatives.size());
  std::unordered_map<std::uint64_t, std::vector<std::size_t>> buckets;
  buckets.reserve(putatives.size());
  for (auto& p : putatives) {
    const std::uint64_t h = putative_hash(p, sets, x) ^ mix64(p.subproblem);
    auto& bucket = buckets[h];
    bool merged = false;
    if (!bucket.empty()) {
      const Partition mine = materialise(p, sets, x);
      for (std::size_t j : bucket) {
        if (out[j].subproblem == p.subproblem && materialise(out[j], sets, x) == mine) {
          out[j].log_weight = log_add_exp(out[j].log_weight, p.log_weight);
          merged = true;
          break;
        }
      }
    }
    if (!merged) {
      bucket.push_back(out.size());
      out.push_back(p);
    }
  }
  return out;
}

std::vector<PutativeParticle> greedy_resample_putatives(std::vector<PutativeParticle> putatives,
                                                        std::span<const ParticleSet* const> sets, DataId x,
                                                        std::size_t m) {
  if (putatives.empty()) throw std::invalid_argument("greedy resample needs at least one putative");
  std::vector<double> w(putatives.size());
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = putatives[i].log_weight;
  std::unordered_map<std::size_t, Partition> memo;
  auto part = [&](std::size_t i) -> const Partition& {
    auto it = memo.find(i);
    if (it == memo.end()) it = memo.emplace(i, materialise(putatives[i], sets, x)).first;
    return it->second;
  };
  auto keep = greedy_select(w, m, [&](std::size_t a, std::size_t b) {
    if (putatives[a].subproblem != putatives[b].subproblem)
      return putatives[a].subproblem < putatives[b].subproblem;
    return part(a) < part(b);
  });
  std::vector<PutativeParticle> out;
  out.reserve(keep.size());
  std::vector<double> lw;
  for (std::size_t i : keep) {
    out.push_back(putatives[i]);
    lw.push_back(putatives[i].log_weight);
  }
  const double z = log_sum_exp(lw);
  for (auto& p : out) p.log_weight -= z;
  return out;
}

// ------------------------------------------------------------------- Step

ParticleSet smc_step(const ParticleSet& set, DataId x, const ClusterLikelihood& model, const CrpPrior& prior,
                     std::size_t m, const SurrogateSpec& surrogate) {
  if (m == 0) throw std::invalid_argument("particle count m must be positive");
  const std::size_t t = set.ids().size() + 1;
  const ParticleSet* sets_arr[] = {&set};
  std::span<const ParticleSet* const> sets(sets_arr);
  std::vector<PutativeParticle> survivors;
  if (surrogate.surrogate) {
    auto proposals = expand_putative(set, x, *surrogate.surrogate, prior, t);
    auto shortlist = surrogate_propose(proposals, surrogate.m_prime, sets, x);
    survivors = rescore_and_resample(std::move(shortlist), model, prior, sets, x, t, m);
  } else {
    survivors = greedy_resample_putatives(coalesce_putatives(expand_putative(set, x, model, prior, t), sets, x),
                                          sets, x, m);
  }
  std::vector<DataId> ids = set.ids();
  ids.insert(std::upper_bound(ids.begin(), ids.end(), x), x);
  std::vector<WeightedParticle> particles;
  particles.reserve(survivors.size());
  for (const auto& s : survivors) particles.push_back({materialise(s, sets, x), s.log_weight});
  return ParticleSet(std::move(ids), std::move(particles));
}

SmcResult run_smc(std::span<const DataId> stream, const ClusterLikelihood& model, const CrpPrior& prior,
                  const RunOptions& options) {
  if (stream.empty()) throw std::invalid_argument("run_smc: empty stream");
  const auto start = std::chrono::steady_clock::now();
  SmcResult result{ParticleSet::single(Partition{}), {}};
  std::uint64_t last_evals = options.eval_counter ? options.eval_counter() : 0;
  std::size_t t = 0;
  for (DataId x : stream) {
    ++t;
    result.particles = smc_step(result.particles, x, model, prior, options.m, options.surrogate);
    TraceRecord rec;
    rec.step = t;
    const Partition& top = result.particles[result.particles.top()].partition;
    if (options.trace_log_posterior) rec.log_posterior = ewens_log_posterior(top, prior.alpha(), model);
    if (options.gold) rec.f1 = bcubed_restricted(top, *options.gold).f1;
    rec.n_subproblems = 1;
    rec.log_effective_particles = std::log(static_cast<double>(result.particles.size()));
    if (options.eval_counter) {
      rec.model_evals = options.eval_counter();
      rec.step_model_evals = rec.model_evals - last_evals;
      last_evals = rec.model_evals;
    }
    rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (options.sink) options.sink(rec);
    result.trace.append(rec);
  }
  return result;
}

}  // namespace splitsmc
