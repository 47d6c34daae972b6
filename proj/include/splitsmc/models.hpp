#pragma once

// Cluster likelihood models. Every model maps an unordered collection of
// observations to log p(c), the marginal likelihood with cluster parameters
// integrated out. log p(∅) = 0.

#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "splitsmc/core.hpp"

namespace splitsmc {

struct Fragment {
  std::map<std::string, std::string> attributes;
};

using Payload = std::variant<std::vector<double>, Fragment>;

// Observation payloads indexed by DataId.
class PayloadStore {
 public:
  DataId add(Payload payload);
  void set(DataId id, Payload payload);

  const Payload& at(DataId id) const;
  const std::vector<double>& point(DataId id) const;
  const Fragment& fragment(DataId id) const;
  std::size_t size() const { return items_.size(); }

 private:
  std::vector<std::optional<Payload>> items_;
};

class LikelihoodModel {
 public:
  virtual ~LikelihoodModel() = default;
  // Stable identifier; two models with equal ids must agree on every cluster.
  virtual std::string model_id() const = 0;
  virtual double log_marginal(std::span<const DataId> members, const PayloadStore& store) const = 0;
};

using ModelPtr = std::shared_ptr<const LikelihoodModel>;

class UnitModel final : public LikelihoodModel {
 public:
  std::string model_id() const override { return "unit"; }
  double log_marginal(std::span<const DataId>, const PayloadStore&) const override { return 0.0; }
};

// Normal-inverse-Gamma conjugate Gaussian model, independent per dimension:
//   sigma_d^2 ~ InvGamma(a, b),  mu_d | sigma_d^2 ~ N(mu0_d, sigma_d^2 / lambda),
//   x_d | mu_d, sigma_d^2 ~ N(mu_d, sigma_d^2).
class NigGaussianModel final : public LikelihoodModel {
 public:
  NigGaussianModel(std::vector<double> mu0, double lambda, double a, double b);
  // Same prior mean in every one of `dims` dimensions.
  static NigGaussianModel isotropic(std::size_t dims, double mu0, double lambda, double a, double b);

  std::string model_id() const override;
  double log_marginal(std::span<const DataId> members, const PayloadStore& store) const override;

  // Marginal of a single dimension's values; exposed for testing.
  double log_marginal_1d(std::span<const double> values, std::size_t dim) const;

  std::size_t dims() const { return mu0_.size(); }
  const std::vector<double>& mu0() const { return mu0_; }
  double lambda() const { return lambda_; }
  double a() const { return a_; }
  double b() const { return b_; }

 private:
  std::vector<double> mu0_;
  double lambda_;
  double a_;
  double b_;
};

struct BigramAlphabet {
  std::string chars = "abcdefghijklmnopqrstuvwxyz0123456789 .,-'&";
  bool case_fold = true;
};

// Character bigram model with a Dirichlet prior on each history's next-symbol
// distribution, integrated out per cluster (pooled Dirichlet-multinomial).
// Names are framed as BOS c1 ... cn EOS; characters outside the alphabet
// collapse to a single OTHER symbol.
//
// Symbol layout: 0..L-1 alphabet characters, L = OTHER, L+1 = BOS as a
// history or EOS as a next symbol. Pseudo-counts form an (L+2)x(L+2) table
// indexed [history][next].
class DirichletBigramModel final : public LikelihoodModel {
 public:
  DirichletBigramModel(BigramAlphabet alphabet, std::vector<std::vector<double>> pseudo_counts,
                       double rescale_c = 1.0, std::string attribute = "name");
  // Uniform Dirichlet(1) prior on every history.
  static DirichletBigramModel uniform(BigramAlphabet alphabet = {});

  std::string model_id() const override;
  double log_marginal(std::span<const DataId> members, const PayloadStore& store) const override;

  // Log marginal of a bag of raw strings; used by tests and by log_marginal.
  double log_marginal_names(std::span<const std::string> names) const;

  std::size_t num_symbols() const { return pseudo_counts_.size(); }
  std::size_t other_symbol() const { return alphabet_.chars.size(); }
  std::size_t boundary_symbol() const { return alphabet_.chars.size() + 1; }
  std::size_t symbol_of(char c) const;
  double pseudo_count(std::size_t history, std::size_t next) const { return pseudo_counts_[history][next]; }
  double rescale_c() const { return rescale_c_; }
  const BigramAlphabet& alphabet() const { return alphabet_; }

  // Symbol-index transitions of a framed name, BOS -> ... -> EOS.
  std::vector<std::pair<std::size_t, std::size_t>> transitions(const std::string& name) const;

 private:
  BigramAlphabet alphabet_;
  std::vector<std::vector<double>> pseudo_counts_;
  std::vector<double> row_sums_;
  double rescale_c_;
  std::string attribute_;
  std::string id_;
};

// alpha_{i|h} = c * (1 + count(h, i)) from the framed transitions of a corpus.
DirichletBigramModel fit_bigram_pseudocounts(std::span<const std::string> corpus, double rescale_c,
                                             BigramAlphabet alphabet = {});

// Likelihood calibration wrapper composing with any model.
class ScaledModel final : public LikelihoodModel {
 public:
  // Adds |c|·per_point + per_cluster to every non-empty cluster. The per-point
  // term sums to t·s over any partition and so leaves the posterior unchanged;
  // the per-cluster term is equivalent to multiplying alpha by exp(per_cluster).
  ScaledModel(ModelPtr inner, double log_scale_per_point, double log_scale_per_cluster = 0.0);
  std::string model_id() const override;
  double log_marginal(std::span<const DataId> members, const PayloadStore& store) const override;
  double log_scale_per_point() const { return log_scale_; }
  double log_scale_per_cluster() const { return log_cluster_scale_; }

 private:
  ModelPtr inner_;
  double log_scale_;
  double log_cluster_scale_;
};

}  // namespace splitsmc
