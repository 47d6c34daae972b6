#pragma once

// Split SMC: the posterior approximation is held as a product of per-
// subproblem particle sets. Subproblems are split whenever no particle puts
// points from two groups in the same cluster, and merged (through their
// explicit joint) when a new observation's plausible assignments span several
// of them.

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "splitsmc/core.hpp"
#include "splitsmc/smc.hpp"
#include "splitsmc/trace.hpp"

namespace splitsmc {

using Rng = std::mt19937_64;

// A subset of the observations with its own particle set.
struct Subproblem {
  ParticleSet particles;

  const std::vector<DataId>& ids() const { return particles.ids(); }
  DataId min_id() const { return particles.ids().front(); }
};

// Disjoint cover of the observed ids by subproblems, kept ordered by each
// subproblem's smallest id. Represents the product of its particle sets.
class FactorisedState {
 public:
  FactorisedState() = default;
  explicit FactorisedState(std::vector<Subproblem> subproblems);

  std::span<const Subproblem> subproblems() const { return subproblems_; }
  const Subproblem& subproblem(std::size_t s) const { return subproblems_[s]; }
  std::size_t num_subproblems() const { return subproblems_.size(); }
  std::size_t num_items() const;
  bool empty() const { return subproblems_.empty(); }

  // Index of the subproblem holding `id`, or num_subproblems() if none.
  std::size_t find(DataId id) const;

  // Mode of the product distribution: the union of each subproblem's top particle.
  Partition top_partition() const;

  // Replaces subproblems `removed` with `added`, restoring the ordering.
  void replace(std::span<const std::size_t> removed, std::vector<Subproblem> added);

  // Checks disjointness, weight normalisation and that no particle has a
  // cluster crossing subproblems. Throws std::logic_error on violation.
  void validate(double tolerance = 1e-9) const;

 private:
  std::vector<Subproblem> subproblems_;
};

// Co-occurrence graph of one subproblem: an edge joins two ids that share a
// cluster on at least one particle. Each cluster contributes the path through
// its sorted members, which preserves connectivity.
class CooccurrenceGraph {
 public:
  std::span<const DataId> vertices() const { return vertices_; }
  // Sorted, de-duplicated path edges (u < v).
  std::span<const std::pair<DataId, DataId>> edges() const { return edges_; }
  // Connected components, each sorted, ordered by smallest member.
  std::vector<std::vector<DataId>> components() const;
  bool connected(DataId u, DataId v) const;

 private:
  friend CooccurrenceGraph build_cooccurrence_graph(const Subproblem& sub);
  std::size_t root(std::size_t i) const;

  std::vector<DataId> vertices_;
  std::vector<std::pair<DataId, DataId>> edges_;
  mutable std::vector<std::size_t> parent_;
};

CooccurrenceGraph build_cooccurrence_graph(const Subproblem& sub);

// One subproblem per connected component, each holding the distinct
// restrictions of the original particles with summed weights. Returns the
// input unchanged when the graph is connected.
std::vector<Subproblem> split(const Subproblem& sub);

// log of prod_s |particles_s|.
double log_effective_particle_count(const FactorisedState& state);

struct SplitSmcOptions {
  std::size_t m = 100;
  SurrogateSpec surrogate{};
  // Explicit-joint merges switch to multinomial once the product of the other
  // subproblems' particle counts exceeds this factor times m^2.
  double explicit_joint_cap_factor = 10.0;
  bool split_after_update = true;
};

struct UpdateReport {
  bool merged = false;
  bool multinomial = false;
  std::size_t affected = 1;          // subproblems carrying surviving assignments
  std::size_t dropped_by_check = 0;  // removed by the 1/m merge check
  std::size_t split_into = 1;        // components produced by the final split
  std::size_t keeper = 0;            // subproblem whose singleton assignments were kept
  std::size_t pooled = 0;            // pooled putatives after singleton de-duplication
};

// Resampled putatives over the factorised state for observation `x`; used by
// factorised_update and exposed for testing.
struct PooledSurvivors {
  std::vector<PutativeParticle> survivors;  // greedy order, normalised weights
  std::size_t keeper = 0;
  std::size_t pooled = 0;
};

PooledSurvivors pool_and_resample(const FactorisedState& state, DataId x, const ClusterLikelihood& model,
                                  const CrpPrior& prior, const SplitSmcOptions& options);

// Processes one observation. Takes the state by value; callers should move.
FactorisedState factorised_update(FactorisedState state, DataId x, const ClusterLikelihood& model,
                                  const CrpPrior& prior, const SplitSmcOptions& options, Rng& rng,
                                  UpdateReport* report = nullptr);

// Resolves survivors spanning several subproblems: applies the 1/m merge
// check, then builds the explicit joint (or a multinomial merge) of the
// affected subproblems and replaces them with one merged subproblem.
FactorisedState merge(FactorisedState state, DataId x, std::vector<PutativeParticle> survivors,
                      const SplitSmcOptions& options, Rng& rng, UpdateReport* report = nullptr);

// Explicit joint of `survivors` (over subproblems `affected`, indices into
// `sets`) with the time-(t-1) particle sets of the other affected
// subproblems, greedily resampled to m.
ParticleSet explicit_joint_merge(std::span<const ParticleSet* const> sets, std::span<const std::size_t> affected,
                                 std::span<const PutativeParticle> survivors, DataId x, std::size_t m);

// Three-stage multinomial merge: m assignment draws, one independent particle
// draw per other affected subproblem, duplicates coalesced with weight
// count/m. Falls back to the exact joint when that has at most m elements.
ParticleSet multinomial_merge(std::span<const ParticleSet* const> sets, std::span<const std::size_t> affected,
                              std::span<const PutativeParticle> survivors, DataId x, std::size_t m, Rng& rng);

// Full unresampled joint (no truncation); used by tests as an oracle.
ParticleSet full_joint(std::span<const ParticleSet* const> sets, std::span<const std::size_t> affected,
                       std::span<const PutativeParticle> survivors, DataId x);

struct SplitSmcResult {
  FactorisedState state;
  RunTrace trace;
};

SplitSmcResult run_split_smc(std::span<const DataId> stream, const ClusterLikelihood& model, const CrpPrior& prior,
                             const SplitSmcOptions& options, std::uint64_t seed, const RunOptions& run = {});

}  // namespace splitsmc
