#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <set>

#include "splitsmc/core.hpp"
#include "splitsmc/numeric.hpp"
#include "support.hpp"

namespace splitsmc {
namespace {

Partition parts(std::initializer_list<std::initializer_list<std::uint32_t>> clusters) {
  std::vector<Cluster> cs;
  for (auto c : clusters) {
    std::vector<DataId> m;
    for (auto i : c) m.push_back(make_id(i));
    cs.emplace_back(m);
  }
  return Partition(cs);
}

TEST(Crp, JoinAndNewExamples) {
  const std::size_t one[] = {1};
  EXPECT_NEAR(crp_assignment_log_prior(one, 1.0, 2, 0), std::log(0.5), 1e-15);
  EXPECT_NEAR(crp_assignment_log_prior(one, 1.0, 2, kNewCluster), std::log(0.5), 1e-15);
  const std::size_t two_one[] = {2, 1};
  EXPECT_NEAR(crp_assignment_log_prior(two_one, 2.0, 4, 0), std::log(0.4), 1e-15);
}

TEST(Crp, SumsToOneOverTargets) {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<std::size_t> size(1, 6);
  std::uniform_real_distribution<double> alpha(0.05, 20.0);
  for (int rep = 0; rep < 200; ++rep) {
    std::vector<std::size_t> sizes(size(rng));
    std::size_t t = 1;
    for (auto& s : sizes) t += (s = size(rng));
    const double a = alpha(rng);
    std::vector<double> lp;
    for (std::size_t k = 0; k < sizes.size(); ++k) lp.push_back(crp_assignment_log_prior(sizes, a, t, k));
    lp.push_back(crp_assignment_log_prior(sizes, a, t, kNewCluster));
    EXPECT_NEAR(std::exp(log_sum_exp(lp)), 1.0, 1e-12);
  }
}

TEST(Crp, RejectsBadArguments) {
  const std::size_t one[] = {1};
  EXPECT_THROW(crp_assignment_log_prior(one, 1.0, 2, 1), std::out_of_range);
  EXPECT_THROW(crp_assignment_log_prior(one, 1.0, 3, 0), std::invalid_argument);
  EXPECT_THROW(CrpPrior(0.0), std::invalid_argument);
}

TEST(Ewens, UnitLikelihoodExamples) {
  UnitLikelihood unit;
  EXPECT_NEAR(ewens_log_posterior(parts({{0}}), 1.0, unit), std::log(0.5), 1e-14);
  EXPECT_NEAR(ewens_log_posterior(parts({{0, 1}}), 1.0, unit), std::log(1.0 / 6.0), 1e-14);
  EXPECT_NEAR(ewens_log_posterior(parts({{0}, {1}}), 1.0, unit), std::log(1.0 / 6.0), 1e-14);
  EXPECT_NEAR(ewens_log_posterior(parts({{0, 1, 2}}), 1.0, unit), std::log(1.0 / 12.0), 1e-14);
  EXPECT_THROW(ewens_log_posterior(Partition{}, 1.0, unit), std::invalid_argument);
}

TEST(Ewens, InvariantToRelabelling) {
  auto data = testing::PointData::line({0.0, 0.3, 4.0, 4.2, 9.0});
  const int a[] = {0, 0, 1, 1, 2};
  const int b[] = {7, 7, 3, 3, 1};
  const Partition pa = Partition::from_labels(data.ids, a);
  const Partition pb = Partition::from_labels(data.ids, b);
  EXPECT_EQ(pa, pb);
  EXPECT_EQ(ewens_log_posterior(pa, 1.5, *data.model), ewens_log_posterior(pb, 1.5, *data.model));
}

TEST(Partitions, BellNumbers) {
  const std::uint64_t bell[] = {1, 2, 5, 15, 52, 203, 877, 4140};
  for (std::size_t n = 1; n <= 8; ++n) {
    EXPECT_EQ(bell_number(n), bell[n - 1]);
    EXPECT_EQ(enumerate_partitions(n).size(), bell[n - 1]);
  }
}

TEST(Partitions, EnumerationIsCanonicalAndDistinct) {
  const auto all = enumerate_partitions(5);
  std::set<Partition> seen(all.begin(), all.end());
  EXPECT_EQ(seen.size(), all.size());
  for (const auto& p : all) {
    EXPECT_EQ(p.num_items(), 5u);
    for (std::size_t k = 1; k < p.num_clusters(); ++k) EXPECT_LT(p.cluster(k - 1).min(), p.cluster(k).min());
  }
  EXPECT_THROW(enumerate_partitions(0), std::out_of_range);
  EXPECT_THROW(enumerate_partitions(11), std::out_of_range);
}

TEST(ExactPosterior, UnitLikelihoodMasses) {
  UnitLikelihood unit;
  const auto two = exact_posterior(iota_ids(2), 1.0, unit);
  ASSERT_EQ(two.size(), 2u);
  for (const auto& a : two) EXPECT_NEAR(a.prob, 0.5, 1e-12);

  // Masses 2,1,1,1,1 over the five partitions of three items.
  const auto three = exact_posterior(iota_ids(3), 1.0, unit);
  ASSERT_EQ(three.size(), 5u);
  double total = 0.0;
  for (const auto& a : three) {
    total += a.prob;
    EXPECT_NEAR(a.prob, a.partition.num_clusters() == 1 ? 1.0 / 3.0 : 1.0 / 6.0, 1e-12);
  }
  EXPECT_NEAR(total, 1.0, 1e-12);
}

TEST(ExactPosterior, LargeAlphaFavoursSingletons) {
  UnitLikelihood unit;
  for (const auto& a : exact_posterior(iota_ids(3), 1e6, unit))
    if (a.partition.num_clusters() == 3) EXPECT_GT(a.prob, 0.9999);
}

TEST(ExactPosterior, SumsToOneUnderNig) {
  auto data = testing::PointData::line({0.0, 0.1, 3.0, 3.5, -2.0, 7.0});
  double total = 0.0;
  for (const auto& a : exact_posterior(data.ids, 0.7, *data.model)) total += a.prob;
  EXPECT_NEAR(total, 1.0, 1e-12);
  EXPECT_THROW(exact_posterior(iota_ids(11), 1.0, *data.model), std::out_of_range);
}

TEST(PartitionAlgebra, HashesAndAssignment) {
  const Partition p = parts({{2, 0}, {1}});
  EXPECT_EQ(p.cluster(0).min(), make_id(0));
  EXPECT_EQ(p.find(make_id(2)), 0u);
  EXPECT_EQ(p.find(make_id(7)), kNewCluster);
  for (std::size_t k : {std::size_t{0}, std::size_t{1}, kNewCluster})
    EXPECT_EQ(p.with_assignment(k, make_id(3)).hash(), p.hash_with_assignment(k, make_id(3)));
  EXPECT_EQ(p.with_assignment(1, make_id(3)), parts({{0, 2}, {1, 3}}));
  EXPECT_EQ(p.joined(parts({{4, 5}})), parts({{0, 2}, {1}, {4, 5}}));
  EXPECT_THROW(Partition({Cluster({make_id(0), make_id(1)}), Cluster({make_id(1)})}), std::invalid_argument);
  EXPECT_THROW(Cluster({make_id(1), make_id(1)}), std::invalid_argument);
}

}  // namespace
}  // namespace splitsmc
