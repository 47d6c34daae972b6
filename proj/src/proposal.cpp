#include "splitsmc/proposal.hpp"

#include <stdexcept>

namespace splitsmc {

std::vector<PutativeParticle> surrogate_propose(std::span<const PutativeParticle> putatives,
                                                std::size_t m_prime,
                                                std::span<const ParticleSet* const> sets, DataId x) {
  if (m_prime == 0) throw std::invalid_argument("surrogate proposal size m' must be positive");
  std::vector<PutativeParticle> joins;
  std::vector<PutativeParticle> out;
  for (const auto& p : putatives) (p.is_singleton() ? out : joins).push_back(p);
  std::vector<PutativeParticle> singletons = std::move(out);
  out.clear();
  if (!joins.empty()) {
    // Surrogate weights are kept as-is; only the selection matters here.
    std::vector<double> w(joins.size());
    for (std::size_t i = 0; i < joins.size(); ++i) w[i] = joins[i].log_weight;
    std::vector<Partition> memo(joins.size());
    std::vector<bool> built(joins.size(), false);
    auto part = [&](std::size_t i) -> const Partition& {
      if (!built[i]) {
        memo[i] = materialise(joins[i], sets, x);
        built[i] = true;
      }
      return memo[i];
    };
    auto keep = greedy_select(w, m_prime, [&](std::size_t a, std::size_t b) {
      if (joins[a].subproblem != joins[b].subproblem) return joins[a].subproblem < joins[b].subproblem;
      return part(a) < part(b);
    });
    for (std::size_t i : keep) out.push_back(joins[i]);
  }
  out.insert(out.end(), singletons.begin(), singletons.end());
  return out;
}

std::vector<PutativeParticle> rescore_and_resample(std::vector<PutativeParticle> shortlist,
                                                   const ClusterLikelihood& main, const CrpPrior& prior,
                                                   std::span<const ParticleSet* const> sets, DataId x,
                                                   std::size_t t, std::size_t m) {
  if (shortlist.empty()) throw std::invalid_argument("rescore_and_resample: empty shortlist");
  rescore_putatives(shortlist, sets, x, main, prior, t);
  return greedy_resample_putatives(coalesce_putatives(std::move(shortlist), sets, x), sets, x, m);
}

}  // namespace splitsmc
