#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "splitsmc/smc.hpp"
#include "support.hpp"

namespace splitsmc {
namespace {

// Independent greedy clusterer: each arrival joins the cluster maximising
// CRP prior times predictive, or opens a new one.
Partition greedy_reference(std::span<const DataId> stream, const ClusterLikelihood& model, double alpha) {
  Partition p;
  for (DataId x : stream) {
    std::vector<std::size_t> sizes;
    for (const auto& c : p.clusters()) sizes.push_back(c.size());
    const std::size_t t = p.num_items() + 1;
    std::size_t best = kNewCluster;
    double best_w = crp_assignment_log_prior(sizes, alpha, t, kNewCluster) + model.log_predictive(x, {});
    for (std::size_t k = 0; k < p.num_clusters(); ++k) {
      const double w = crp_assignment_log_prior(sizes, alpha, t, k) + model.log_predictive(x, p.cluster(k).members());
      if (w > best_w) {
        best_w = w;
        best = k;
      }
    }
    p = p.with_assignment(best, x);
  }
  return p;
}

TEST(Expand, SingleParticleUnitLikelihood) {
  UnitLikelihood unit;
  const auto set = ParticleSet::single(Partition({Cluster::singleton(make_id(0))}));
  const auto put = expand_putative(set, make_id(1), unit, CrpPrior(1.0));
  ASSERT_EQ(put.size(), 2u);
  EXPECT_EQ(put[0].target, 0u);
  EXPECT_TRUE(put[1].is_singleton());
  EXPECT_NEAR(put[0].log_weight, std::log(0.5), 1e-15);
  EXPECT_NEAR(put[1].log_weight, std::log(0.5), 1e-15);
  EXPECT_THROW(expand_putative(set, make_id(0), unit, CrpPrior(1.0)), std::invalid_argument);
}

TEST(Expand, CountsOnePutativePerClusterPlusNew) {
  UnitLikelihood unit;
  const auto ids = iota_ids(2);
  const int together[] = {0, 0}, apart[] = {0, 1};
  ParticleSet set(ids, {{Partition::from_labels(ids, together), std::log(0.5)},
                        {Partition::from_labels(ids, apart), std::log(0.5)}});
  EXPECT_EQ(expand_putative(set, make_id(2), unit, CrpPrior(1.0)).size(), 5u);
}

TEST(Expand, UntruncatedStreamGivesExactPosterior) {
  UnitLikelihood unit;
  const auto ids = iota_ids(3);
  RunOptions opt;
  opt.m = 1000;
  const auto run = run_smc(ids, unit, CrpPrior(1.0), opt);
  const testing::ExactPosterior exact(ids, 1.0, unit);
  ASSERT_EQ(run.particles.size(), 5u);
  for (const auto& wp : run.particles.particles()) EXPECT_NEAR(wp.log_weight, exact.log_prob(wp.partition), 1e-12);
}

TEST(GreedyResample, WorkedExample) {
  std::vector<std::pair<std::string, double>> items = {
      {"a", std::log(0.5)}, {"b", std::log(0.3)}, {"c", std::log(0.1)}, {"d", std::log(0.1)}};
  const auto out = greedy_resample(items, 2);
  ASSERT_EQ(out.size(), 2u);
  EXPECT_EQ(out[0].first, "a");
  EXPECT_NEAR(std::exp(out[0].second), 0.625, 1e-15);
  EXPECT_NEAR(std::exp(out[1].second), 0.375, 1e-15);
  EXPECT_THROW(greedy_resample(items, 0), std::invalid_argument);
  EXPECT_THROW(greedy_resample(std::vector<std::pair<std::string, double>>{}, 1), std::invalid_argument);
}

TEST(GreedyResample, LargeMIsNormalisationOnly) {
  std::vector<std::pair<int, double>> items = {{1, 2.0}, {2, 0.5}, {3, -1.0}};
  const auto out = greedy_resample(items, 10);
  ASSERT_EQ(out.size(), 3u);
  const double z = std::log(std::exp(2.0) + std::exp(0.5) + std::exp(-1.0));
  EXPECT_NEAR(out[0].second, 2.0 - z, 1e-14);
  EXPECT_NEAR(out[2].second, -1.0 - z, 1e-14);
}

TEST(GreedyResample, IdempotentAndTieBreakIsCanonical) {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> w(0.0, 2.0);
  std::vector<std::pair<int, double>> items;
  for (int i = 0; i < 20; ++i) items.push_back({i, w(rng)});
  const auto once = greedy_resample(items, 7);
  const auto twice = greedy_resample(once, 7);
  ASSERT_EQ(once.size(), twice.size());
  for (std::size_t i = 0; i < once.size(); ++i) {
    EXPECT_EQ(once[i].first, twice[i].first);
    EXPECT_NEAR(once[i].second, twice[i].second, 1e-14);
  }
  std::vector<std::pair<int, double>> tied = {{5, 0.0}, {3, 0.0}, {4, 0.0}};
  const auto t = greedy_resample(tied, 2);
  EXPECT_EQ(t[0].first, 3);
  EXPECT_EQ(t[1].first, 4);
}

TEST(GreedyResample, MinimisesReverseKlOverAllSupports) {
  std::mt19937_64 rng(17);
  std::gamma_distribution<double> g(0.7, 1.0);
  for (int rep = 0; rep < 50; ++rep) {
    std::vector<std::pair<int, double>> items;
    std::vector<double> p(8);
    double z = 0.0;
    for (double& v : p) z += (v = g(rng));
    for (int i = 0; i < 8; ++i) items.push_back({i, std::log(p[i] / z)});
    const auto greedy = greedy_resample(items, 3);
    double kl_greedy = 0.0;
    for (const auto& [i, lw] : greedy) kl_greedy += std::exp(lw) * (lw - items[i].second);
    for (int a = 0; a < 8; ++a)
      for (int b = a + 1; b < 8; ++b)
        for (int c = b + 1; c < 8; ++c) {
          const double mass = (p[a] + p[b] + p[c]) / z;
          EXPECT_LE(kl_greedy, -std::log(mass) + 1e-12);
        }
  }
}

TEST(SmcStep, InvariantsHoldAfterEveryStep) {
  std::mt19937_64 rng(4);
  auto data = testing::PointData::line(testing::clustered_values(25, rng));
  ParticleSet set = ParticleSet::single(Partition{});
  for (std::size_t t = 0; t < data.ids.size(); ++t) {
    set = smc_step(set, data.ids[t], *data.model, CrpPrior(1.0), 20);
    EXPECT_NO_THROW(set.validate(1e-9));
    EXPECT_EQ(set.ids().size(), t + 1);
    EXPECT_LE(set.size(), 20u);
  }
  EXPECT_THROW(smc_step(set, data.ids[0], *data.model, CrpPrior(1.0), 0), std::invalid_argument);
}

TEST(SmcStep, TracksExactPosteriorWhenUntruncated) {
  std::mt19937_64 rng(6);
  for (std::size_t n = 2; n <= 6; ++n) {
    auto data = testing::PointData::line(testing::clustered_values(n, rng));
    RunOptions opt;
    opt.m = bell_number(n);
    const auto run = run_smc(data.ids, *data.model, CrpPrior(1.3), opt);
    const testing::ExactPosterior exact(data.ids, 1.3, *data.model);
    EXPECT_EQ(run.particles.size(), bell_number(n));
    for (const auto& wp : run.particles.particles())
      EXPECT_NEAR(wp.log_weight, exact.log_prob(wp.partition), 1e-9);
  }
}

TEST(SmcStep, SingleParticleIsGreedyClustering) {
  std::mt19937_64 rng(8);
  for (int rep = 0; rep < 5; ++rep) {
    auto data = testing::PointData::line(testing::clustered_values(40, rng));
    RunOptions opt;
    opt.m = 1;
    const auto run = run_smc(data.ids, *data.model, CrpPrior(1.0), opt);
    EXPECT_EQ(run.particles[0].partition, greedy_reference(data.ids, *data.model, 1.0));
  }
}

TEST(SmcStep, FarApartPointsStaySeparate) {
  auto data = testing::PointData::line({0.0, 1000.0});
  RunOptions opt;
  opt.m = 10;
  const auto run = run_smc(data.ids, *data.model, CrpPrior(1.0), opt);
  const Partition top = run.particles[run.particles.top()].partition;
  EXPECT_EQ(top.num_clusters(), 2u);
  const int together[] = {0, 0};
  EXPECT_GT(ewens_log_posterior(top, 1.0, *data.model),
            ewens_log_posterior(Partition::from_labels(data.ids, together), 1.0, *data.model));
}

TEST(SmcStep, StreamOrderMatters) {
  // Negative control: no invariance to arrival order is claimed.
  std::mt19937_64 rng(10);
  auto data = testing::PointData::line(testing::clustered_values(30, rng));
  RunOptions opt;
  opt.m = 1;
  const Partition base = run_smc(data.ids, *data.model, CrpPrior(1.0), opt).particles[0].partition;
  bool differs = false;
  std::vector<DataId> order = data.ids;
  for (int rep = 0; rep < 20 && !differs; ++rep) {
    std::shuffle(order.begin(), order.end(), rng);
    differs = run_smc(order, *data.model, CrpPrior(1.0), opt).particles[0].partition != base;
  }
  EXPECT_TRUE(differs);
}

TEST(RunSmc, TraceRecordsEveryStep) {
  std::mt19937_64 rng(12);
  auto data = testing::PointData::line(testing::clustered_values(15, rng));
  RunOptions opt;
  opt.m = 5;
  opt.eval_counter = [&] { return data.model->evaluations(); };
  std::size_t sunk = 0;
  opt.sink = [&](const TraceRecord&) { ++sunk; };
  const auto run = run_smc(data.ids, *data.model, CrpPrior(1.0), opt);
  ASSERT_EQ(run.trace.records().size(), 15u);
  EXPECT_EQ(sunk, 15u);
  for (std::size_t i = 0; i < 15; ++i) EXPECT_EQ(run.trace.records()[i].step, i + 1);
  const Partition top = run.particles[run.particles.top()].partition;
  EXPECT_EQ(run.trace.back().log_posterior, ewens_log_posterior(top, 1.0, *data.model));
  EXPECT_EQ(run.trace.back().model_evals, data.model->evaluations());
  EXPECT_THROW(run_smc({}, *data.model, CrpPrior(1.0), opt), std::invalid_argument);
}

}  // namespace
}  // namespace splitsmc
