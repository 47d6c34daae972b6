#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <sstream>

#include "splitsmc/metrics.hpp"
#include "support.hpp"

namespace splitsmc {
namespace {

// Direct per-element recomputation of B-cubed precision and recall.
std::pair<double, double> bcubed_oracle(const Partition& pred, const Partition& gold) {
  double p = 0.0, r = 0.0;
  for (const auto& c : pred.clusters()) {
    for (DataId e : c.members()) {
      const Cluster& g = gold.cluster(gold.find(e));
      std::size_t both = 0;
      for (DataId f : c.members()) both += g.contains(f) ? 1 : 0;
      p += static_cast<double>(both) / static_cast<double>(c.size());
      r += static_cast<double>(both) / static_cast<double>(g.size());
    }
  }
  const double n = static_cast<double>(pred.num_items());
  return {p / n, r / n};
}

TEST(Bcubed, WorkedExamples) {
  const auto ids = iota_ids(3);
  const Partition gold = Partition::from_labels(ids, std::vector<int>{0, 1, 2});
  const Partition pred = Partition::from_labels(ids, std::vector<int>{0, 0, 1});
  const auto r = bcubed(pred, gold);
  EXPECT_NEAR(r.precision, 2.0 / 3.0, 1e-12);
  EXPECT_NEAR(r.recall, 1.0, 1e-12);
  EXPECT_NEAR(r.f1, 0.8, 1e-12);

  const auto same = bcubed(pred, pred);
  EXPECT_EQ(same.precision, 1.0);
  EXPECT_EQ(same.recall, 1.0);
  EXPECT_EQ(same.f1, 1.0);

  const auto n7 = iota_ids(7);
  const auto s = bcubed(Partition::all_singletons(n7), Partition::from_labels(n7, std::vector<int>(7, 0)));
  EXPECT_NEAR(s.precision, 1.0, 1e-12);
  EXPECT_NEAR(s.recall, 1.0 / 7.0, 1e-12);
}

TEST(Bcubed, RejectsCoverMismatch) {
  EXPECT_THROW(bcubed(Partition::all_singletons(iota_ids(3)), Partition::all_singletons(iota_ids(4))),
               std::invalid_argument);
}

TEST(Bcubed, MatchesOracleDualityAndF1Bound) {
  std::mt19937_64 rng(21);
  std::uniform_int_distribution<std::size_t> size(1, 25);
  for (int rep = 0; rep < 1000; ++rep) {
    const auto ids = iota_ids(size(rng));
    const Partition p = testing::random_partition(ids, rng);
    const Partition g = testing::random_partition(ids, rng);
    const auto pg = bcubed(p, g);
    const auto gp = bcubed(g, p);
    const auto [op, orc] = bcubed_oracle(p, g);
    EXPECT_NEAR(pg.precision, op, 1e-12);
    EXPECT_NEAR(pg.recall, orc, 1e-12);
    EXPECT_NEAR(pg.precision, gp.recall, 1e-12);
    EXPECT_NEAR(pg.recall, gp.precision, 1e-12);
    const double lo = std::min(pg.precision, pg.recall);
    EXPECT_LE(pg.f1, 2.0 * lo / (1.0 + lo) + 1e-12);
    EXPECT_NEAR(pg.f1, f1_score(pg.precision, pg.recall), 1e-15);
  }
}

TEST(Bcubed, MergingLowersPrecisionSplittingLowersRecall) {
  std::mt19937_64 rng(22);
  for (int rep = 0; rep < 300; ++rep) {
    const auto ids = iota_ids(12);
    const Partition p = testing::random_partition(ids, rng);
    const Partition g = testing::random_partition(ids, rng);
    const auto base = bcubed(p, g);
    if (p.num_clusters() >= 2) {
      std::vector<Cluster> cs(p.clusters().begin() + 2, p.clusters().end());
      std::vector<DataId> u(p.cluster(0).members().begin(), p.cluster(0).members().end());
      u.insert(u.end(), p.cluster(1).members().begin(), p.cluster(1).members().end());
      cs.emplace_back(u);
      EXPECT_LE(bcubed(Partition(cs), g).precision, base.precision + 1e-12);
    }
    const Cluster& big = *std::max_element(p.clusters().begin(), p.clusters().end(),
                                           [](const Cluster& a, const Cluster& b) { return a.size() < b.size(); });
    if (big.size() >= 2) {
      std::vector<Cluster> cs;
      for (const auto& c : p.clusters())
        if (!(c == big)) cs.push_back(c);
      const auto m = big.members();
      const std::size_t half = m.size() / 2;
      cs.emplace_back(std::vector<DataId>(m.begin(), m.begin() + static_cast<std::ptrdiff_t>(half)));
      cs.emplace_back(std::vector<DataId>(m.begin() + static_cast<std::ptrdiff_t>(half), m.end()));
      EXPECT_LE(bcubed(Partition(cs), g).recall, base.recall + 1e-12);
    }
  }
}

TEST(Bcubed, RestrictedUsesPredictedCover) {
  const auto ids = iota_ids(4);
  const Partition gold = Partition::from_labels(ids, std::vector<int>{0, 0, 1, 1});
  const Partition pred({Cluster({make_id(0), make_id(1)}), Cluster::singleton(make_id(2))});
  const auto r = bcubed_restricted(pred, gold);
  EXPECT_NEAR(r.precision, 1.0, 1e-12);
  EXPECT_NEAR(r.recall, 1.0, 1e-12);
}

TEST(F1, DefinedAsZeroWhenBothZero) {
  EXPECT_EQ(f1_score(0.0, 0.0), 0.0);
  EXPECT_NEAR(f1_score(0.5, 1.0), 2.0 / 3.0, 1e-15);
}

TEST(ScoreClustering, DelegatesToEwens) {
  UnitLikelihood unit;
  const Partition p = Partition::from_labels(iota_ids(3), std::vector<int>{0, 0, 0});
  EXPECT_EQ(score_clustering(p, 1.0, unit), ewens_log_posterior(p, 1.0, unit));
}

TEST(Report, FlatKeyValueLines) {
  EvalReport r{0.5, 0.25, 1.0 / 3.0, -12.5, 4};
  std::ostringstream os;
  write_report(os, r);
  const std::string s = os.str();
  for (const char* key : {"precision=", "recall=", "f1=", "log_posterior=", "n_clusters=4"})
    EXPECT_NE(s.find(key), std::string::npos) << key;
}

}  // namespace
}  // namespace splitsmc
