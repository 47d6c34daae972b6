#include <gtest/gtest.h>

#include <algorithm>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <map>
#include <numbers>
#include <random>
#include <set>

#include "splitsmc/cache.hpp"
#include "splitsmc/models.hpp"
#include "support.hpp"

namespace splitsmc {
namespace {

using boost::math::quadrature::gauss_kronrod;

// log of ∫∫ prod_i N(v_i | mu, s) N(mu | mu0, s/lambda) InvGamma(s | a, b) dmu ds,
// integrated numerically over mu and u = log s.
double nig_quadrature(const std::vector<double>& v, double mu0, double lambda, double a, double b) {
  const double n = static_cast<double>(v.size());
  double sum = 0.0;
  for (double x : v) sum += x;
  const double centre = (lambda * mu0 + sum) / (lambda + n);
  auto inner = [&](double s) {
    const double sd = std::sqrt(s / (lambda + n));
    auto f = [&](double mu) {
      double lp = -0.5 * std::log(2.0 * std::numbers::pi * s / lambda) - 0.5 * lambda * (mu - mu0) * (mu - mu0) / s;
      for (double x : v) lp += -0.5 * std::log(2.0 * std::numbers::pi * s) - 0.5 * (x - mu) * (x - mu) / s;
      return std::exp(lp);
    };
    return gauss_kronrod<double, 61>::integrate(f, centre - 14.0 * sd, centre + 14.0 * sd, 12, 1e-13);
  };
  auto outer = [&](double u) {
    const double s = std::exp(u);
    const double log_ig = a * std::log(b) - std::lgamma(a) - (a + 1.0) * u - b / s;
    return inner(s) * std::exp(log_ig + u);
  };
  return std::log(gauss_kronrod<double, 61>::integrate(outer, -25.0, 25.0, 15, 1e-13));
}

// Sequential Polya-urn predictive for a bag of names inserted in the given
// order; independent of the Gamma-function closed form.
double bigram_sequential(const DirichletBigramModel& m, const std::vector<std::string>& names) {
  std::map<std::pair<std::size_t, std::size_t>, double> counts;
  std::map<std::size_t, double> totals;
  double lp = 0.0;
  for (const auto& name : names)
    for (auto [h, i] : m.transitions(name)) {
      double row = 0.0;
      for (std::size_t j = 0; j < m.num_symbols(); ++j) row += m.pseudo_count(h, j);
      lp += std::log((m.pseudo_count(h, i) + counts[{h, i}]) / (row + totals[h]));
      counts[{h, i}] += 1.0;
      totals[h] += 1.0;
    }
  return lp;
}

TEST(Nig, EmptyClusterIsZero) {
  auto data = testing::PointData::line({1.0});
  EXPECT_EQ(data.model->log_marginal(std::span<const DataId>{}), 0.0);
}

TEST(Nig, MatchesQuadratureOracle) {
  const NigGaussianModel m = NigGaussianModel::isotropic(1, 0.0, 0.0002, 2.0, 0.5);
  const std::vector<std::vector<double>> cases = {
      {0.0}, {1.3}, {0.3, -0.2}, {5.0, 6.0}, {1.0, 1.5, 0.7}, {0.1, 0.4, -0.3, 0.2}, {-2.0, -1.2, -2.5, -1.9}};
  for (const auto& v : cases) EXPECT_NEAR(m.log_marginal_1d(v, 0), nig_quadrature(v, 0.0, 0.0002, 2.0, 0.5), 1e-6);
  const NigGaussianModel wide = NigGaussianModel::isotropic(1, 1.0, 0.5, 3.0, 2.0);
  for (const auto& v : cases) EXPECT_NEAR(wide.log_marginal_1d(v, 0), nig_quadrature(v, 1.0, 0.5, 3.0, 2.0), 1e-6);
}

TEST(Nig, ProductOverDimensions) {
  testing::PointData data({{0.1, 5.0}, {0.4, 4.0}, {-0.3, 4.5}});
  const NigGaussianModel m = NigGaussianModel::isotropic(2, 0.0, 0.0002, 2.0, 0.5);
  const std::vector<double> d0 = {0.1, 0.4, -0.3}, d1 = {5.0, 4.0, 4.5};
  EXPECT_NEAR(m.log_marginal(data.ids, *data.store), m.log_marginal_1d(d0, 0) + m.log_marginal_1d(d1, 1), 1e-12);
}

TEST(Nig, PermutationInvariantToTheBit) {
  auto data = testing::PointData::line({0.13, 2.7, -1.1, 0.05, 3.3});
  std::vector<DataId> ids = data.ids;
  const double ref = data.model->model().log_marginal(ids, *data.store);
  std::mt19937_64 rng(5);
  for (int i = 0; i < 20; ++i) {
    std::shuffle(ids.begin(), ids.end(), rng);
    EXPECT_EQ(data.model->model().log_marginal(ids, *data.store), ref);
  }
}

TEST(Nig, PredictiveFavoursNearbyPoints) {
  auto data = testing::PointData::line({0.0, 0.0, 10.0});
  const DataId c[] = {make_id(0)};
  EXPECT_GT(data.model->log_predictive(make_id(1), c), data.model->log_predictive(make_id(2), c));
  // The empty cluster gives the prior predictive, log p({x}).
  EXPECT_EQ(data.model->log_predictive(make_id(2), {}), data.model->log_marginal(std::span<const DataId>(&data.ids[2], 1)));
  EXPECT_THROW(data.model->log_predictive(make_id(0), c), std::invalid_argument);
}

TEST(Nig, RejectsInvalidParameters) {
  EXPECT_THROW(NigGaussianModel({0.0}, 0.0, 2.0, 0.5), std::invalid_argument);
  EXPECT_THROW(NigGaussianModel({}, 1.0, 2.0, 0.5), std::invalid_argument);
}

TEST(Bigram, SingleNameHandChainRule) {
  const auto uniform = DirichletBigramModel::uniform();
  const double v = static_cast<double>(uniform.num_symbols());
  const std::string ab[] = {"ab"};
  EXPECT_NEAR(uniform.log_marginal_names(ab), 3.0 * std::log(1.0 / v), 1e-12);

  const std::string corpus[] = {"ab"};
  const auto fitted = fit_bigram_pseudocounts(corpus, 1.0);
  // Each of BOS->a, a->b, b->EOS has pseudo-count 2 in a row summing to v + 1.
  EXPECT_NEAR(fitted.log_marginal_names(ab), 3.0 * std::log(2.0 / (v + 1.0)), 1e-12);
}

TEST(Bigram, ChainRuleConsistency) {
  const auto m = DirichletBigramModel::uniform();
  const std::string both[] = {"ab", "ba"};
  const std::string first[] = {"ab"};
  const double v = static_cast<double>(m.num_symbols());
  // "ba" after "ab": BOS->b, b->a and a->EOS each meet a row that has seen one
  // other transition.
  const double predictive = 3.0 * std::log(1.0 / (v + 1.0));
  EXPECT_NEAR(m.log_marginal_names(both), m.log_marginal_names(first) + predictive, 1e-12);
}

TEST(Bigram, SequentialPredictivesInAnyOrder) {
  const std::string corpus[] = {"anna", "ann", "hannah", "bob"};
  const auto m = fit_bigram_pseudocounts(corpus, 0.3);
  std::vector<std::string> names = {"anna", "annie", "ann-marie", "bob", "b0b", "anna"};
  const double closed = m.log_marginal_names(names);
  std::mt19937_64 rng(9);
  for (int i = 0; i < 10; ++i) {
    std::shuffle(names.begin(), names.end(), rng);
    EXPECT_NEAR(bigram_sequential(m, names), closed, 1e-10);
    EXPECT_EQ(m.log_marginal_names(names), closed);
  }
}

TEST(Bigram, FitExamples) {
  const std::string aa[] = {"aa"};
  const auto full = fit_bigram_pseudocounts(aa, 1.0);
  const std::size_t a = full.symbol_of('a');
  EXPECT_EQ(full.pseudo_count(a, a), 2.0);
  EXPECT_EQ(full.pseudo_count(a, full.symbol_of('b')), 1.0);
  EXPECT_EQ(full.pseudo_count(full.boundary_symbol(), a), 2.0);

  const auto half = fit_bigram_pseudocounts(aa, 0.5);
  EXPECT_EQ(half.pseudo_count(a, a), 1.0);
  EXPECT_EQ(half.pseudo_count(a, half.symbol_of('z')), 0.5);

  const std::string abab[] = {"ab", "ab"};
  const auto twice = fit_bigram_pseudocounts(abab, 1.0);
  EXPECT_EQ(twice.pseudo_count(twice.symbol_of('a'), twice.symbol_of('b')), 3.0);
  EXPECT_EQ(twice.num_symbols(), twice.alphabet().chars.size() + 2);
}

TEST(Bigram, SymbolsAndErrors) {
  const auto m = DirichletBigramModel::uniform();
  EXPECT_EQ(m.symbol_of('A'), m.symbol_of('a'));
  EXPECT_EQ(m.symbol_of('#'), m.other_symbol());
  EXPECT_EQ(m.symbol_of('~'), m.other_symbol());
  EXPECT_EQ(m.transitions("x").size(), 2u);
  EXPECT_THROW(fit_bigram_pseudocounts({}, 1.0), std::invalid_argument);
  const std::string one[] = {"a"};
  EXPECT_THROW(fit_bigram_pseudocounts(one, 0.0), std::invalid_argument);
  EXPECT_THROW(fit_bigram_pseudocounts(one, 1.5), std::invalid_argument);
}

TEST(Bigram, ReadsNameAttributeOfFragments) {
  PayloadStore store;
  const DataId a = store.add(Fragment{{{"name", "Ann"}, {"type", "person"}}});
  const DataId b = store.add(Fragment{{{"name", "anna"}}});
  const DataId c = store.add(Fragment{{{"title", "x"}}});
  const auto m = DirichletBigramModel::uniform();
  const DataId ab[] = {a, b};
  const std::string names[] = {"Ann", "anna"};
  EXPECT_EQ(m.log_marginal(ab, store), m.log_marginal_names(names));
  const DataId bad[] = {c};
  EXPECT_THROW(m.log_marginal(bad, store), std::invalid_argument);
  const DataId wrong[] = {store.add(std::vector<double>{1.0})};
  EXPECT_THROW(m.log_marginal(wrong, store), std::invalid_argument);
}

class CountingModel final : public LikelihoodModel {
 public:
  std::string model_id() const override { return "counting"; }
  double log_marginal(std::span<const DataId> members, const PayloadStore&) const override {
    ++calls;
    double v = 0.0;
    for (DataId id : members) v += std::sin(1.0 + index_of(id));
    return v;
  }
  mutable std::size_t calls = 0;
};

TEST(Cache, OneUnderlyingCallPerDistinctCluster) {
  auto store = std::make_shared<PayloadStore>();
  for (int i = 0; i < 8; ++i) store->add(std::vector<double>{0.0});
  auto counting = std::make_shared<CountingModel>();
  ModelEvaluator eval(counting, store);
  std::mt19937_64 rng(11);
  std::bernoulli_distribution coin(0.4);
  std::set<std::vector<DataId>> distinct;
  std::map<std::vector<DataId>, double> first_value;
  for (int rep = 0; rep < 1000; ++rep) {
    std::vector<DataId> members;
    for (std::uint32_t i = 0; i < 7; ++i)
      if (coin(rng)) members.push_back(make_id(i));
    double value;
    std::vector<DataId> key = members;
    if (coin(rng)) {
      value = eval.log_marginal_with(members, make_id(7));
      key.push_back(make_id(7));
    } else {
      value = eval.log_marginal(members);
    }
    if (!key.empty()) distinct.insert(key);  // the empty cluster is 0 without a model call
    auto [it, fresh] = first_value.emplace(key, value);
    if (!fresh) EXPECT_EQ(it->second, value);
  }
  EXPECT_EQ(counting->calls, distinct.size());
  EXPECT_EQ(eval.evaluations(), distinct.size());
}

TEST(Cache, ModelsWithDifferentIdsDoNotShareEntries) {
  auto store = std::make_shared<PayloadStore>();
  store->add(std::vector<double>{0.5});
  auto cache = std::make_shared<LikelihoodCache>();
  ModelEvaluator a(std::make_shared<NigGaussianModel>(NigGaussianModel::isotropic(1, 0, 0.1, 2, 0.5)), store, cache);
  ModelEvaluator b(std::make_shared<NigGaussianModel>(NigGaussianModel::isotropic(1, 0, 0.1, 2, 2.0)), store, cache);
  const DataId one[] = {make_id(0)};
  EXPECT_NE(a.log_marginal(one), b.log_marginal(one));
  EXPECT_EQ(a.evaluations(), 1u);
  EXPECT_EQ(b.evaluations(), 1u);
}

TEST(Scaled, AddsPerPointAndPerClusterTerms) {
  auto data = testing::PointData::line({0.0, 1.0, 2.0});
  auto base = std::make_shared<NigGaussianModel>(NigGaussianModel::isotropic(1, 0.0, 0.0002, 2.0, 0.5));
  const ScaledModel scaled(base, 0.25, -1.5);
  EXPECT_NEAR(scaled.log_marginal(data.ids, *data.store), base->log_marginal(data.ids, *data.store) + 0.75 - 1.5, 1e-12);
  EXPECT_EQ(scaled.log_marginal({}, *data.store), 0.0);
  EXPECT_NE(scaled.model_id(), base->model_id());
}

TEST(Scaled, PerPointTermLeavesPosteriorUnchanged) {
  auto data = testing::PointData::line({0.0, 0.4, 3.0, 3.1});
  ModelEvaluator scaled(std::make_shared<ScaledModel>(
                            std::make_shared<NigGaussianModel>(NigGaussianModel::isotropic(1, 0, 0.0002, 2, 0.5)), 3.0),
                        data.store);
  const auto plain = exact_posterior(data.ids, 1.0, *data.model);
  const auto shifted = exact_posterior(data.ids, 1.0, scaled);
  for (std::size_t i = 0; i < plain.size(); ++i) EXPECT_NEAR(plain[i].prob, shifted[i].prob, 1e-12);
}

TEST(Scaled, PerClusterTermEqualsAlphaRescaling) {
  auto data = testing::PointData::line({0.0, 0.4, 3.0, 3.1, 9.0});
  const double k = std::log(500.0);
  ModelEvaluator scaled(std::make_shared<ScaledModel>(
                            std::make_shared<NigGaussianModel>(NigGaussianModel::isotropic(1, 0, 0.0002, 2, 0.5)), 0.0, k),
                        data.store);
  const auto with_scale = exact_posterior(data.ids, 1.0, scaled);
  const auto with_alpha = exact_posterior(data.ids, 500.0, *data.model);
  ASSERT_EQ(with_scale.size(), with_alpha.size());
  for (std::size_t i = 0; i < with_scale.size(); ++i) {
    EXPECT_EQ(with_scale[i].partition, with_alpha[i].partition);
    EXPECT_NEAR(with_scale[i].prob, with_alpha[i].prob, 1e-12);
  }
}

}  // namespace
}  // namespace splitsmc
