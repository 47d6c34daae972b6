#pragma once

// Shared fixtures for the unit and acceptance tests.

#include <cmath>
#include <memory>
#include <random>
#include <unordered_map>
#include <vector>

#include "splitsmc/cache.hpp"
#include "splitsmc/core.hpp"
#include "splitsmc/models.hpp"
#include "splitsmc/numeric.hpp"
#include "splitsmc/split_smc.hpp"

namespace splitsmc::testing {

// Points stored under ids 0..n-1 with a NIG evaluator bound to them.
struct PointData {
  std::shared_ptr<PayloadStore> store = std::make_shared<PayloadStore>();
  std::vector<DataId> ids;
  std::unique_ptr<ModelEvaluator> model;

  PointData(const std::vector<std::vector<double>>& points, double mu0 = 0.0, double lambda = 0.0002,
            double a = 2.0, double b = 0.5) {
    for (const auto& p : points) ids.push_back(store->add(p));
    const std::size_t d = points.empty() ? 1 : points.front().size();
    model = std::make_unique<ModelEvaluator>(
        std::make_shared<NigGaussianModel>(NigGaussianModel::isotropic(d, mu0, lambda, a, b)), store);
  }

  static PointData line(const std::vector<double>& xs, double lambda = 0.0002, double b = 0.5) {
    std::vector<std::vector<double>> pts;
    for (double x : xs) pts.push_back({x});
    return PointData(pts, 0.0, lambda, 2.0, b);
  }
};

// 1-D values drawn around a few random centres, so small datasets still have
// cluster structure.
inline std::vector<double> clustered_values(std::size_t n, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> groups(1, 3);
  std::normal_distribution<double> centre(0.0, 3.0);
  std::normal_distribution<double> noise(0.0, 0.5);
  std::vector<double> c(static_cast<std::size_t>(groups(rng)));
  for (double& v : c) v = centre(rng);
  std::uniform_int_distribution<std::size_t> pick(0, c.size() - 1);
  std::vector<double> out(n);
  for (double& v : out) v = c[pick(rng)] + noise(rng);
  return out;
}

inline Partition random_partition(std::span<const DataId> ids, std::mt19937_64& rng) {
  std::vector<int> labels(ids.size());
  std::uniform_int_distribution<int> lab(0, static_cast<int>(ids.size()) - 1);
  for (int& l : labels) l = lab(rng);
  return Partition::from_labels(ids, labels);
}

// Explicit product distribution of a factorised state: every combination of
// one particle per subproblem, with the summed log weight.
inline std::vector<WeightedParticle> product_distribution(const FactorisedState& state) {
  std::vector<WeightedParticle> out{{Partition{}, 0.0}};
  for (const auto& sub : state.subproblems()) {
    std::vector<WeightedParticle> next;
    next.reserve(out.size() * sub.particles.size());
    for (const auto& a : out)
      for (const auto& b : sub.particles.particles())
        next.push_back({a.partition.joined(b.partition), a.log_weight + b.log_weight});
    out = std::move(next);
  }
  return out;
}

// Exact posterior log masses keyed by partition.
class ExactPosterior {
 public:
  ExactPosterior(std::span<const DataId> ids, double alpha, const ClusterLikelihood& model) {
    for (auto& atom : exact_posterior(ids, alpha, model)) table_.emplace(std::move(atom.partition), atom.log_prob);
  }
  double log_prob(const Partition& p) const { return table_.at(p); }

 private:
  std::unordered_map<Partition, double, PartitionHash> table_;
};

// Reverse KL(q || p) for q given by (possibly unnormalised) log weights.
inline double reverse_kl(const std::vector<WeightedParticle>& q, const ExactPosterior& p) {
  std::vector<double> lw;
  for (const auto& w : q) lw.push_back(w.log_weight);
  const double z = log_sum_exp(lw);
  double kl = 0.0;
  for (const auto& w : q) {
    const double lq = w.log_weight - z;
    kl += std::exp(lq) * (lq - p.log_prob(w.partition));
  }
  return kl;
}

// Largest deviation of q's log weights from p's log masses, after removing the
// best common offset (q is proportional to p on its support when this is ~0).
inline double proportionality_error(const std::vector<WeightedParticle>& q, const ExactPosterior& p) {
  if (q.empty()) return 0.0;
  const double offset = q.front().log_weight - p.log_prob(q.front().partition);
  double worst = 0.0;
  for (const auto& w : q) worst = std::max(worst, std::abs(w.log_weight - p.log_prob(w.partition) - offset));
  return worst;
}

}  // namespace splitsmc::testing
