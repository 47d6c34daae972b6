#include "splitsmc/split_smc.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <unordered_map>

#include "splitsmc/metrics.hpp"
#include "splitsmc/numeric.hpp"
#include "splitsmc/proposal.hpp"

namespace splitsmc {

// -------------------------------------------------------- FactorisedState

namespace {

bool by_min_id(const Subproblem& a, const Subproblem& b) { return a.min_id() < b.min_id(); }

std::vector<const ParticleSet*> set_pointers(const FactorisedState& state) {
  std::vector<const ParticleSet*> out;
  out.reserve(state.num_subproblems());
  for (const auto& s : state.subproblems()) out.push_back(&s.particles);
  return out;
}

}  // namespace

FactorisedState::FactorisedState(std::vector<Subproblem> subproblems) : subproblems_(std::move(subproblems)) {
  for (const auto& s : subproblems_)
    if (s.ids().empty()) throw std::invalid_argument("subproblem must cover at least one id");
  std::sort(subproblems_.begin(), subproblems_.end(), by_min_id);
}

std::size_t FactorisedState::num_items() const {
  std::size_t n = 0;
  for (const auto& s : subproblems_) n += s.ids().size();
  return n;
}

std::size_t FactorisedState::find(DataId id) const {
  for (std::size_t s = 0; s < subproblems_.size(); ++s)
    if (subproblems_[s].particles.covers(id)) return s;
  return subproblems_.size();
}

Partition FactorisedState::top_partition() const {
  Partition out;
  for (const auto& s : subproblems_) out = out.joined(s.particles[s.particles.top()].partition);
  return out;
}

void FactorisedState::replace(std::span<const std::size_t> removed, std::vector<Subproblem> added) {
  std::vector<std::size_t> idx(removed.begin(), removed.end());
  std::sort(idx.begin(), idx.end(), std::greater<>());
  for (std::size_t s : idx) subproblems_.erase(subproblems_.begin() + static_cast<std::ptrdiff_t>(s));
  for (auto& a : added) {
    auto pos = std::upper_bound(subproblems_.begin(), subproblems_.end(), a, by_min_id);
    subproblems_.insert(pos, std::move(a));
  }
}

void FactorisedState::validate(double tolerance) const {
  std::vector<DataId> all;
  for (const auto& s : subproblems_) {
    s.particles.validate(tolerance);
    all.insert(all.end(), s.ids().begin(), s.ids().end());
  }
  std::sort(all.begin(), all.end());
  if (std::adjacent_find(all.begin(), all.end()) != all.end())
    throw std::logic_error("subproblems overlap");
  for (std::size_t s = 1; s < subproblems_.size(); ++s)
    if (!(subproblems_[s - 1].min_id() < subproblems_[s].min_id()))
      throw std::logic_error("subproblems are not ordered by smallest id");
}

// ---------------------------------------------------------------- Graph

namespace {

struct UnionFind {
  std::vector<std::size_t> parent;
  explicit UnionFind(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), std::size_t{0}); }
  std::size_t find(std::size_t i) {
    while (parent[i] != i) {
      parent[i] = parent[parent[i]];
      i = parent[i];
    }
    return i;
  }
  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    if (a > b) std::swap(a, b);
    parent[b] = a;
  }
};

std::size_t local_index(const std::vector<DataId>& ids, DataId id) {
  auto it = std::lower_bound(ids.begin(), ids.end(), id);
  if (it == ids.end() || *it != id) throw std::logic_error("particle id outside its subproblem");
  return static_cast<std::size_t>(it - ids.begin());
}

// Component label per local index, labels numbered by smallest member.
std::vector<std::size_t> component_labels(const Subproblem& sub, std::size_t& count) {
  const auto& ids = sub.ids();
  UnionFind uf(ids.size());
  for (const auto& wp : sub.particles.particles())
    for (const Cluster& c : wp.partition.clusters()) {
      auto m = c.members();
      if (m.size() < 2) continue;
      const std::size_t first = local_index(ids, m[0]);
      for (std::size_t i = 1; i < m.size(); ++i) uf.unite(first, local_index(ids, m[i]));
    }
  std::vector<std::size_t> label(ids.size());
  std::vector<std::size_t> root_label(ids.size(), std::numeric_limits<std::size_t>::max());
  count = 0;
  // Roots are the smallest index in their set, so labels come out ordered.
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const std::size_t r = uf.find(i);
    if (root_label[r] == std::numeric_limits<std::size_t>::max()) root_label[r] = count++;
    label[i] = root_label[r];
  }
  return label;
}

}  // namespace

CooccurrenceGraph build_cooccurrence_graph(const Subproblem& sub) {
  CooccurrenceGraph g;
  g.vertices_ = sub.ids();
  g.parent_.resize(g.vertices_.size());
  std::iota(g.parent_.begin(), g.parent_.end(), std::size_t{0});
  for (const auto& wp : sub.particles.particles())
    for (const Cluster& c : wp.partition.clusters()) {
      auto m = c.members();
      for (std::size_t i = 1; i < m.size(); ++i) {
        g.edges_.emplace_back(m[i - 1], m[i]);
        const std::size_t a = g.root(local_index(g.vertices_, m[i - 1]));
        const std::size_t b = g.root(local_index(g.vertices_, m[i]));
        if (a != b) g.parent_[std::max(a, b)] = std::min(a, b);
      }
    }
  std::sort(g.edges_.begin(), g.edges_.end());
  g.edges_.erase(std::unique(g.edges_.begin(), g.edges_.end()), g.edges_.end());
  return g;
}

std::size_t CooccurrenceGraph::root(std::size_t i) const {
  while (parent_[i] != i) {
    parent_[i] = parent_[parent_[i]];
    i = parent_[i];
  }
  return i;
}

bool CooccurrenceGraph::connected(DataId u, DataId v) const {
  return root(local_index(vertices_, u)) == root(local_index(vertices_, v));
}

std::vector<std::vector<DataId>> CooccurrenceGraph::components() const {
  std::vector<std::vector<DataId>> out;
  std::unordered_map<std::size_t, std::size_t> slot;
  for (std::size_t i = 0; i < vertices_.size(); ++i) {
    auto [it, fresh] = slot.emplace(root(i), out.size());
    if (fresh) out.emplace_back();
    out[it->second].push_back(vertices_[i]);
  }
  return out;
}

// ---------------------------------------------------------------- Split

std::vector<Subproblem> split(const Subproblem& sub) {
  std::size_t count = 0;
  const auto label = component_labels(sub, count);
  if (count <= 1) return {sub};

  const auto& ids = sub.ids();
  std::vector<std::vector<DataId>> comp_ids(count);
  for (std::size_t i = 0; i < ids.size(); ++i) comp_ids[label[i]].push_back(ids[i]);

  struct Restricted {
    std::vector<WeightedParticle> particles;
    std::unordered_map<std::uint64_t, std::vector<std::size_t>> index;
  };
  std::vector<Restricted> parts(count);
  for (const auto& wp : sub.particles.particles()) {
    std::vector<std::size_t> cluster_comp(wp.partition.num_clusters());
    for (std::size_t c = 0; c < cluster_comp.size(); ++c)
      cluster_comp[c] = label[local_index(ids, wp.partition.cluster(c).min())];
    for (std::size_t k = 0; k < count; ++k) {
      std::size_t next = 0;
      // `filtered` visits clusters in canonical order.
      Partition rp = wp.partition.filtered([&](const Cluster&) { return cluster_comp[next++] == k; });
      auto& part = parts[k];
      auto& bucket = part.index[rp.hash()];
      bool merged = false;
      for (std::size_t j : bucket)
        if (part.particles[j].partition == rp) {
          part.particles[j].log_weight = log_add_exp(part.particles[j].log_weight, wp.log_weight);
          merged = true;
          break;
        }
      if (!merged) {
        bucket.push_back(part.particles.size());
        part.particles.push_back({std::move(rp), wp.log_weight});
      }
    }
  }
  std::vector<Subproblem> out;
  out.reserve(count);
  for (std::size_t k = 0; k < count; ++k) {
    ParticleSet ps(std::move(comp_ids[k]), std::move(parts[k].particles));
    ps.normalise();
    out.push_back({std::move(ps)});
  }
  return out;
}

double log_effective_particle_count(const FactorisedState& state) {
  double total = 0.0;
  for (const auto& s : state.subproblems()) total += std::log(static_cast<double>(s.particles.size()));
  return total;
}

// ----------------------------------------------------------------- Joint

namespace {

// Element of the explicit joint: survivor `u` combined with the particle
// tuple encoded (mixed radix over the other affected subproblems) by `combo`.
struct JointEntry {
  double log_weight;
  std::uint64_t hash;
  std::size_t survivor;
  std::uint64_t combo;
};

class JointSpace {
 public:
  JointSpace(std::span<const ParticleSet* const> sets, std::span<const std::size_t> affected,
             std::span<const PutativeParticle> survivors, DataId x)
      : sets_(sets), affected_(affected.begin(), affected.end()), survivors_(survivors), x_(x) {
    std::sort(affected_.begin(), affected_.end());
    for (const auto& s : survivors_)
      if (!std::binary_search(affected_.begin(), affected_.end(), s.subproblem))
        throw std::invalid_argument("survivor outside the affected subproblems");
  }

  std::vector<std::size_t> others(std::size_t s) const {
    std::vector<std::size_t> out;
    for (std::size_t j : affected_)
      if (j != s) out.push_back(j);
    return out;
  }

  std::uint64_t combos(std::size_t s) const {
    std::uint64_t n = 1;
    for (std::size_t j : others(s)) n *= sets_[j]->size();
    return n;
  }

  std::uint64_t total_size() const {
    std::uint64_t n = 0;
    for (const auto& u : survivors_) n += combos(u.subproblem);
    return n;
  }

  std::vector<JointEntry> enumerate() const {
    std::vector<JointEntry> out;
    out.reserve(static_cast<std::size_t>(total_size()));
    for (std::size_t u = 0; u < survivors_.size(); ++u) {
      const auto& sv = survivors_[u];
      const auto other = others(sv.subproblem);
      const std::uint64_t base_hash = (*sets_[sv.subproblem])[sv.source].partition.hash_with_assignment(sv.target, x_);
      const std::uint64_t n = combos(sv.subproblem);
      std::vector<std::size_t> digit(other.size(), 0);
      for (std::uint64_t c = 0; c < n; ++c) {
        double w = sv.log_weight;
        std::uint64_t h = base_hash;
        for (std::size_t d = 0; d < other.size(); ++d) {
          const auto& wp = (*sets_[other[d]])[digit[d]];
          w += wp.log_weight;
          h += wp.partition.hash();
        }
        out.push_back({w, h, u, c});
        for (std::size_t d = 0; d < other.size(); ++d) {
          if (++digit[d] < sets_[other[d]]->size()) break;
          digit[d] = 0;
        }
      }
    }
    return out;
  }

  std::vector<std::size_t> decode(std::size_t survivor, std::uint64_t combo) const {
    const auto other = others(survivors_[survivor].subproblem);
    std::vector<std::size_t> idx(other.size());
    for (std::size_t d = 0; d < other.size(); ++d) {
      idx[d] = static_cast<std::size_t>(combo % sets_[other[d]]->size());
      combo /= sets_[other[d]]->size();
    }
    return idx;
  }

  Partition materialise(std::size_t survivor, std::uint64_t combo) const {
    const auto& sv = survivors_[survivor];
    Partition p = splitsmc::materialise(sv, sets_, x_);
    const auto other = others(sv.subproblem);
    const auto idx = decode(survivor, combo);
    for (std::size_t d = 0; d < other.size(); ++d) p = p.joined((*sets_[other[d]])[idx[d]].partition);
    return p;
  }

  std::vector<DataId> merged_ids() const {
    std::vector<DataId> ids;
    for (std::size_t j : affected_) ids.insert(ids.end(), sets_[j]->ids().begin(), sets_[j]->ids().end());
    ids.push_back(x_);
    std::sort(ids.begin(), ids.end());
    return ids;
  }

  // Sums weights of entries that denote the same joint partition.
  std::vector<JointEntry> coalesce(std::vector<JointEntry> entries) const {
    std::vector<JointEntry> out;
    out.reserve(entries.size());
    std::unordered_map<std::uint64_t, std::vector<std::size_t>> buckets;
    buckets.reserve(entries.size());
    for (const auto& e : entries) {
      auto& bucket = buckets[e.hash];
      bool merged = false;
      if (!bucket.empty()) {
        const Partition mine = materialise(e.survivor, e.combo);
        for (std::size_t j : bucket)
          if (materialise(out[j].survivor, out[j].combo) == mine) {
            out[j].log_weight = log_add_exp(out[j].log_weight, e.log_weight);
            merged = true;
            break;
          }
      }
      if (!merged) {
        bucket.push_back(out.size());
        out.push_back(e);
      }
    }
    return out;
  }

  ParticleSet build(const std::vector<JointEntry>& entries, std::span<const std::size_t> chosen) const {
    std::vector<WeightedParticle> ps;
    ps.reserve(chosen.size());
    for (std::size_t i : chosen)
      ps.push_back({materialise(entries[i].survivor, entries[i].combo), entries[i].log_weight});
    ParticleSet set(merged_ids(), std::move(ps));
    set.normalise();
    return set;
  }

  ParticleSet greedy(std::size_t m) const {
    auto entries = coalesce(enumerate());
    std::vector<double> w(entries.size());
    for (std::size_t i = 0; i < entries.size(); ++i) w[i] = entries[i].log_weight;
    std::unordered_map<std::size_t, Partition> memo;
    auto part = [&](std::size_t i) -> const Partition& {
      auto it = memo.find(i);
      if (it == memo.end()) it = memo.emplace(i, materialise(entries[i].survivor, entries[i].combo)).first;
      return it->second;
    };
    const auto keep = greedy_select(w, m, [&](std::size_t a, std::size_t b) { return part(a) < part(b); });
    return build(entries, keep);
  }

  std::span<const std::size_t> affected() const { return affected_; }
  std::span<const PutativeParticle> survivors() const { return survivors_; }

 private:
  std::span<const ParticleSet* const> sets_;
  std::vector<std::size_t> affected_;
  std::span<const PutativeParticle> survivors_;
  DataId x_;
};

// Draws an index with probability proportional to exp(log_weights[i]).
std::size_t sample_categorical(std::span<const double> cumulative, Rng& rng) {
  std::uniform_real_distribution<double> unif(0.0, cumulative.back());
  const double u = unif(rng);
  auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
  if (it == cumulative.end()) --it;
  return static_cast<std::size_t>(it - cumulative.begin());
}

std::vector<double> cumulative_weights(std::span<const double> log_weights) {
  const double hi = *std::max_element(log_weights.begin(), log_weights.end());
  std::vector<double> c(log_weights.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < log_weights.size(); ++i) {
    acc += std::exp(log_weights[i] - hi);
    c[i] = acc;
  }
  return c;
}

}  // namespace

ParticleSet full_joint(std::span<const ParticleSet* const> sets, std::span<const std::size_t> affected,
                       std::span<const PutativeParticle> survivors, DataId x) {
  JointSpace space(sets, affected, survivors, x);
  auto entries = space.coalesce(space.enumerate());
  std::vector<std::size_t> all(entries.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  return space.build(entries, all);
}

ParticleSet explicit_joint_merge(std::span<const ParticleSet* const> sets, std::span<const std::size_t> affected,
                                 std::span<const PutativeParticle> survivors, DataId x, std::size_t m) {
  if (m == 0) throw std::invalid_argument("particle count m must be positive");
  return JointSpace(sets, affected, survivors, x).greedy(m);
}

ParticleSet multinomial_merge(std::span<const ParticleSet* const> sets, std::span<const std::size_t> affected,
                              std::span<const PutativeParticle> survivors, DataId x, std::size_t m, Rng& rng) {
  if (m == 0) throw std::invalid_argument("particle count m must be positive");
  if (survivors.empty()) throw std::invalid_argument("multinomial merge needs survivors");
  JointSpace space(sets, affected, survivors, x);
  if (space.total_size() <= m) return full_joint(sets, affected, survivors, x);

  std::vector<double> sw(survivors.size());
  for (std::size_t i = 0; i < sw.size(); ++i) sw[i] = survivors[i].log_weight;
  const auto survivor_cdf = cumulative_weights(sw);
  std::unordered_map<std::size_t, std::vector<double>> particle_cdf;
  for (std::size_t j : space.affected()) {
    std::vector<double> w(sets[j]->size());
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = (*sets[j])[i].log_weight;
    particle_cdf[j] = cumulative_weights(w);
  }

  // Stage (i) and (ii): draw assignments, then independent partners.
  std::vector<JointEntry> draws;
  draws.reserve(m);
  for (std::size_t k = 0; k < m; ++k) {
    const std::size_t u = sample_categorical(survivor_cdf, rng);
    const auto& sv = survivors[u];
    std::uint64_t combo = 0;
    std::uint64_t radix = 1;
    std::uint64_t h = (*sets[sv.subproblem])[sv.source].partition.hash_with_assignment(sv.target, x);
    for (std::size_t j : space.others(sv.subproblem)) {
      const std::size_t i = sample_categorical(particle_cdf[j], rng);
      combo += radix * i;
      radix *= sets[j]->size();
      h += (*sets[j])[i].partition.hash();
    }
    draws.push_back({0.0, h, u, combo});
  }
  // Stage (iii): coalesce duplicates; weight = count / m.
  for (auto& d : draws) d.log_weight = -std::log(static_cast<double>(m));
  auto entries = space.coalesce(std::move(draws));
  std::vector<std::size_t> all(entries.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  return space.build(entries, all);
}

// ----------------------------------------------------------------- Update

PooledSurvivors pool_and_resample(const FactorisedState& state, DataId x, const ClusterLikelihood& model,
                                  const CrpPrior& prior, const SplitSmcOptions& options) {
  if (state.empty()) throw std::invalid_argument("pool_and_resample: empty state");
  const std::size_t t = state.num_items() + 1;
  const auto ptrs = set_pointers(state);
  std::span<const ParticleSet* const> sets(ptrs);
  const ClusterLikelihood& scorer = options.surrogate.surrogate ? *options.surrogate.surrogate : model;

  std::vector<PutativeParticle> pool;
  for (std::size_t s = 0; s < ptrs.size(); ++s) {
    auto part = expand_putative(*ptrs[s], x, scorer, prior, t, s);
    pool.insert(pool.end(), part.begin(), part.end());
  }
  // The singleton event is shared by every subproblem; keep it once, from the
  // subproblem holding the single heaviest assignment (earliest on ties).
  std::size_t best = 0;
  for (std::size_t i = 1; i < pool.size(); ++i)
    if (pool[i].log_weight > pool[best].log_weight) best = i;
  PooledSurvivors out;
  out.keeper = pool[best].subproblem;
  std::erase_if(pool, [&](const PutativeParticle& p) { return p.is_singleton() && p.subproblem != out.keeper; });
  out.pooled = pool.size();

  if (options.surrogate.surrogate) {
    auto shortlist = surrogate_propose(pool, options.surrogate.m_prime, sets, x);
    out.survivors = rescore_and_resample(std::move(shortlist), model, prior, sets, x, t, options.m);
  } else {
    out.survivors = greedy_resample_putatives(coalesce_putatives(std::move(pool), sets, x), sets, x, options.m);
  }
  return out;
}

namespace {

FactorisedState apply_in_place(FactorisedState state, std::size_t s, std::span<const PutativeParticle> survivors,
                               DataId x) {
  const auto ptrs = set_pointers(state);
  std::span<const ParticleSet* const> sets(ptrs);
  std::vector<DataId> ids = state.subproblem(s).ids();
  ids.insert(std::upper_bound(ids.begin(), ids.end(), x), x);
  std::vector<WeightedParticle> ps;
  ps.reserve(survivors.size());
  for (const auto& sv : survivors) ps.push_back({materialise(sv, sets, x), sv.log_weight});
  ParticleSet set(std::move(ids), std::move(ps));
  set.normalise();
  const std::size_t removed[] = {s};
  std::vector<Subproblem> added;
  added.push_back({std::move(set)});
  state.replace(removed, std::move(added));
  return state;
}

}  // namespace

FactorisedState merge(FactorisedState state, DataId x, std::vector<PutativeParticle> survivors,
                      const SplitSmcOptions& options, Rng& rng, UpdateReport* report) {
  if (survivors.empty()) throw std::invalid_argument("merge: no survivors");
  const std::size_t m = options.m;
  {
    std::vector<double> lw(survivors.size());
    for (std::size_t i = 0; i < lw.size(); ++i) lw[i] = survivors[i].log_weight;
    const double z = log_sum_exp(lw);
    for (auto& sv : survivors) sv.log_weight -= z;
  }
  std::size_t top = 0;
  for (std::size_t i = 1; i < survivors.size(); ++i)
    if (survivors[i].log_weight > survivors[top].log_weight) top = i;
  const std::size_t top_sub = survivors[top].subproblem;

  std::vector<std::size_t> affected;
  for (const auto& sv : survivors) affected.push_back(sv.subproblem);
  std::sort(affected.begin(), affected.end());
  affected.erase(std::unique(affected.begin(), affected.end()), affected.end());
  if (report) report->affected = affected.size();

  // Merge check: a subproblem whose assignments carry combined weight <= 1/m
  // would be resampled fewer than once in expectation; drop its assignments.
  std::vector<std::size_t> kept;
  const double threshold = 1.0 / static_cast<double>(m);
  for (std::size_t s : affected) {
    double combined = 0.0;
    for (const auto& sv : survivors)
      if (sv.subproblem == s) combined += std::exp(sv.log_weight);
    if (combined > threshold || s == top_sub) kept.push_back(s);
  }
  if (report) report->dropped_by_check = affected.size() - kept.size();
  std::erase_if(survivors, [&](const PutativeParticle& sv) {
    return !std::binary_search(kept.begin(), kept.end(), sv.subproblem);
  });
  {
    std::vector<double> lw(survivors.size());
    for (std::size_t i = 0; i < lw.size(); ++i) lw[i] = survivors[i].log_weight;
    const double z = log_sum_exp(lw);
    for (auto& sv : survivors) sv.log_weight -= z;
  }
  if (kept.size() == 1) return apply_in_place(std::move(state), kept.front(), survivors, x);

  const auto ptrs = set_pointers(state);
  std::span<const ParticleSet* const> sets(ptrs);
  std::size_t multi = 0;
  double worst_product = 0.0;
  for (std::size_t s : kept) {
    if (sets[s]->size() > 1) ++multi;
    double product = 1.0;
    for (std::size_t j : kept)
      if (j != s) product *= static_cast<double>(sets[j]->size());
    worst_product = std::max(worst_product, product);
  }
  const bool capped = worst_product > options.explicit_joint_cap_factor * static_cast<double>(m) * static_cast<double>(m);
  const bool use_multinomial = multi > 2 || capped;
  ParticleSet joint = use_multinomial ? multinomial_merge(sets, kept, survivors, x, m, rng)
                                      : explicit_joint_merge(sets, kept, survivors, x, m);
  if (report) {
    report->merged = true;
    report->multinomial = use_multinomial;
  }
  std::vector<Subproblem> added;
  added.push_back({std::move(joint)});
  state.replace(kept, std::move(added));
  return state;
}

FactorisedState factorised_update(FactorisedState state, DataId x, const ClusterLikelihood& model,
                                  const CrpPrior& prior, const SplitSmcOptions& options, Rng& rng,
                                  UpdateReport* report) {
  if (options.m == 0) throw std::invalid_argument("particle count m must be positive");
  if (state.find(x) != state.num_subproblems()) throw std::invalid_argument("observation already in state");
  UpdateReport local;
  UpdateReport& rep = report ? *report : local;
  rep = {};
  if (state.empty()) {
    // Scored like any other step so {x} is evaluated once, here.
    std::vector<Subproblem> subs;
    subs.push_back({smc_step(ParticleSet::single(Partition{}), x, model, prior, options.m, options.surrogate)});
    return FactorisedState(std::move(subs));
  }
  auto pooled = pool_and_resample(state, x, model, prior, options);
  rep.keeper = pooled.keeper;
  rep.pooled = pooled.pooled;

  const std::size_t first = pooled.survivors.front().subproblem;
  const bool single = std::all_of(pooled.survivors.begin(), pooled.survivors.end(),
                                  [&](const PutativeParticle& p) { return p.subproblem == first; });
  if (single) {
    state = apply_in_place(std::move(state), first, pooled.survivors, x);
  } else {
    state = merge(std::move(state), x, std::move(pooled.survivors), options, rng, &rep);
  }

  if (options.split_after_update) {
    const std::size_t s = state.find(x);
    auto parts = split(state.subproblem(s));
    rep.split_into = parts.size();
    if (parts.size() > 1) {
      const std::size_t removed[] = {s};
      state.replace(removed, std::move(parts));
    }
  }
  return state;
}

SplitSmcResult run_split_smc(std::span<const DataId> stream, const ClusterLikelihood& model, const CrpPrior& prior,
                             const SplitSmcOptions& options, std::uint64_t seed, const RunOptions& run) {
  if (stream.empty()) throw std::invalid_argument("run_split_smc: empty stream");
  const auto start = std::chrono::steady_clock::now();
  Rng rng(seed);
  SplitSmcResult result;
  std::uint64_t last_evals = run.eval_counter ? run.eval_counter() : 0;
  std::size_t merges = 0;
  std::size_t splits = 0;
  std::size_t t = 0;
  for (DataId x : stream) {
    ++t;
    UpdateReport rep;
    result.state = factorised_update(std::move(result.state), x, model, prior, options, rng, &rep);
    merges += rep.merged ? 1 : 0;
    splits += rep.split_into > 1 ? 1 : 0;
    TraceRecord rec;
    rec.step = t;
    const Partition top = result.state.top_partition();
    if (run.trace_log_posterior) rec.log_posterior = ewens_log_posterior(top, prior.alpha(), model);
    if (run.gold) rec.f1 = bcubed_restricted(top, *run.gold).f1;
    rec.n_subproblems = result.state.num_subproblems();
    rec.log_effective_particles = log_effective_particle_count(result.state);
    if (run.eval_counter) {
      rec.model_evals = run.eval_counter();
      rec.step_model_evals = rec.model_evals - last_evals;
      last_evals = rec.model_evals;
    }
    rec.merges = merges;
    rec.splits = splits;
    rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (run.sink) run.sink(rec);
    result.trace.append(rec);
  }
  return result;
}

}  // namespace splitsmc
