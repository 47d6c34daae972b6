#pragma once

// Surrogate proposal: rank putatives with a cheap likelihood, keep the m'
// best non-singleton assignments plus every singleton assignment, and only
// then score the shortlist with the main model.

#include <cstddef>
#include <span>
#include <vector>

#include "splitsmc/core.hpp"
#include "splitsmc/smc.hpp"

namespace splitsmc {

struct SurrogatePair {
  const ClusterLikelihood* surrogate = nullptr;
  const ClusterLikelihood* main = nullptr;
  std::size_t m_prime = 0;
};

// Greedy top-m' among non-singleton putatives (by their surrogate weights)
// followed by all singleton putatives. Order within the shortlist is the
// greedy order, then singletons in input order.
std::vector<PutativeParticle> surrogate_propose(std::span<const PutativeParticle> putatives,
                                                std::size_t m_prime,
                                                std::span<const ParticleSet* const> sets, DataId x);

// Recomputes weights of the shortlist under the main model and greedily
// resamples to m. At most m'+1 distinct new clusters reach the main model.
std::vector<PutativeParticle> rescore_and_resample(std::vector<PutativeParticle> shortlist,
                                                   const ClusterLikelihood& main, const CrpPrior& prior,
                                                   std::span<const ParticleSet* const> sets, DataId x,
                                                   std::size_t t, std::size_t m);

}  // namespace splitsmc
