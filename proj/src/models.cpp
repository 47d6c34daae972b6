#include "splitsmc/models.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <numbers>
#include <stdexcept>

#include "splitsmc/numeric.hpp"

namespace splitsmc {

namespace {

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// Copy of `members` in ascending order so that evaluation order, and hence
// floating-point rounding, never depends on how the caller listed them.
std::vector<DataId> sorted_copy(std::span<const DataId> members) {
  std::vector<DataId> ids(members.begin(), members.end());
  std::sort(ids.begin(), ids.end());
  return ids;
}

}  // namespace

// ----------------------------------------------------------- PayloadStore

DataId PayloadStore::add(Payload payload) {
  items_.emplace_back(std::move(payload));
  return make_id(static_cast<std::uint32_t>(items_.size() - 1));
}

void PayloadStore::set(DataId id, Payload payload) {
  const auto i = index_of(id);
  if (i >= items_.size()) items_.resize(i + 1);
  items_[i] = std::move(payload);
}

const Payload& PayloadStore::at(DataId id) const {
  const auto i = index_of(id);
  if (i >= items_.size() || !items_[i]) throw std::out_of_range("missing payload for id " + std::to_string(i));
  return *items_[i];
}

const std::vector<double>& PayloadStore::point(DataId id) const {
  const auto* v = std::get_if<std::vector<double>>(&at(id));
  if (!v) throw std::invalid_argument("payload " + std::to_string(index_of(id)) + " is not a point");
  return *v;
}

const Fragment& PayloadStore::fragment(DataId id) const {
  const auto* f = std::get_if<Fragment>(&at(id));
  if (!f) throw std::invalid_argument("payload " + std::to_string(index_of(id)) + " is not a fragment");
  return *f;
}

// ------------------------------------------------------------------- NIG

NigGaussianModel::NigGaussianModel(std::vector<double> mu0, double lambda, double a, double b)
    : mu0_(std::move(mu0)), lambda_(lambda), a_(a), b_(b) {
  if (mu0_.empty()) throw std::invalid_argument("NIG model needs at least one dimension");
  if (!(lambda_ > 0) || !(a_ > 0) || !(b_ > 0))
    throw std::invalid_argument("NIG parameters lambda, a, b must be positive");
}

NigGaussianModel NigGaussianModel::isotropic(std::size_t dims, double mu0, double lambda, double a,
                                             double b) {
  return NigGaussianModel(std::vector<double>(dims, mu0), lambda, a, b);
}

std::string NigGaussianModel::model_id() const {
  std::string id = "nig(mu0=[";
  for (std::size_t d = 0; d < mu0_.size(); ++d) id += (d ? "," : "") + fmt_double(mu0_[d]);
  id += "],lambda=" + fmt_double(lambda_) + ",a=" + fmt_double(a_) + ",b=" + fmt_double(b_) + ")";
  return id;
}

double NigGaussianModel::log_marginal_1d(std::span<const double> values, std::size_t dim) const {
  const std::size_t n = values.size();
  if (n == 0) return 0.0;
  const double nn = static_cast<double>(n);
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= nn;
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  const double dev = mean - mu0_[dim];
  const double lambda_n = lambda_ + nn;
  const double a_n = a_ + 0.5 * nn;
  const double b_n = b_ + 0.5 * ss + 0.5 * lambda_ * nn * dev * dev / lambda_n;
  return -0.5 * nn * std::log(2.0 * std::numbers::pi) + 0.5 * (std::log(lambda_) - std::log(lambda_n)) +
         a_ * std::log(b_) - a_n * std::log(b_n) + std::lgamma(a_n) - std::lgamma(a_);
}

double NigGaussianModel::log_marginal(std::span<const DataId> members, const PayloadStore& store) const {
  if (members.empty()) return 0.0;
  const std::vector<DataId> ids = sorted_copy(members);
  std::vector<double> column(ids.size());
  double total = 0.0;
  for (std::size_t d = 0; d < mu0_.size(); ++d) {
    for (std::size_t i = 0; i < ids.size(); ++i) {
      const auto& x = store.point(ids[i]);
      if (x.size() != mu0_.size())
        throw std::invalid_argument("point dimensionality does not match the NIG model");
      column[i] = x[d];
    }
    total += log_marginal_1d(column, d);
  }
  return total;
}

// ---------------------------------------------------------------- Bigram

DirichletBigramModel::DirichletBigramModel(BigramAlphabet alphabet,
                                           std::vector<std::vector<double>> pseudo_counts,
                                           double rescale_c, std::string attribute)
    : alphabet_(std::move(alphabet)),
      pseudo_counts_(std::move(pseudo_counts)),
      rescale_c_(rescale_c),
      attribute_(std::move(attribute)) {
  const std::size_t v = alphabet_.chars.size() + 2;
  if (pseudo_counts_.size() != v) throw std::invalid_argument("bigram pseudo-count table has wrong shape");
  if (!(rescale_c_ > 0.0 && rescale_c_ <= 1.0)) throw std::invalid_argument("rescale c must lie in (0,1]");
  row_sums_.assign(v, 0.0);
  for (std::size_t h = 0; h < v; ++h) {
    if (pseudo_counts_[h].size() != v) throw std::invalid_argument("bigram pseudo-count table has wrong shape");
    for (double a : pseudo_counts_[h]) {
      if (!(a > 0.0)) throw std::invalid_argument("bigram pseudo-counts must be positive");
      row_sums_[h] += a;
    }
  }
  // The table is identified by a content hash; equal tables share cache entries.
  std::uint64_t h = 0x243f6a8885a308d3ULL;
  for (const auto& row : pseudo_counts_)
    for (double a : row) {
      std::uint64_t bits;
      static_assert(sizeof bits == sizeof a);
      std::memcpy(&bits, &a, sizeof bits);
      h = mix64(h ^ bits);
    }
  for (char c : alphabet_.chars) h = mix64(h ^ static_cast<unsigned char>(c));
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  id_ = "bigram(attr=" + attribute_ + ",fold=" + (alphabet_.case_fold ? "1" : "0") + ",table=" + buf + ")";
}

DirichletBigramModel DirichletBigramModel::uniform(BigramAlphabet alphabet) {
  const std::size_t v = alphabet.chars.size() + 2;
  return DirichletBigramModel(std::move(alphabet), std::vector<std::vector<double>>(v, std::vector<double>(v, 1.0)));
}

std::string DirichletBigramModel::model_id() const { return id_; }

std::size_t DirichletBigramModel::symbol_of(char c) const {
  if (alphabet_.case_fold) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  const auto pos = alphabet_.chars.find(c);
  return pos == std::string::npos ? other_symbol() : pos;
}

std::vector<std::pair<std::size_t, std::size_t>> DirichletBigramModel::transitions(const std::string& name) const {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  out.reserve(name.size() + 1);
  std::size_t prev = boundary_symbol();
  for (char c : name) {
    const std::size_t s = symbol_of(c);
    out.emplace_back(prev, s);
    prev = s;
  }
  out.emplace_back(prev, boundary_symbol());
  return out;
}

double DirichletBigramModel::log_marginal_names(std::span<const std::string> names) const {
  if (names.empty()) return 0.0;
  const std::size_t v = num_symbols();
  // Sparse pooled counts keyed by history * v + next; sorted so that the
  // summation order is canonical.
  std::vector<std::size_t> keys;
  for (const auto& name : names)
    for (auto [h, i] : transitions(name)) keys.push_back(h * v + i);
  std::sort(keys.begin(), keys.end());

  double lp = 0.0;
  std::size_t pos = 0;
  while (pos < keys.size()) {
    const std::size_t h = keys[pos] / v;
    double n_h = 0.0;
    while (pos < keys.size() && keys[pos] / v == h) {
      const std::size_t key = keys[pos];
      std::size_t run = 0;
      while (pos < keys.size() && keys[pos] == key) {
        ++run;
        ++pos;
      }
      const double alpha = pseudo_counts_[h][key % v];
      lp += std::lgamma(alpha + static_cast<double>(run)) - std::lgamma(alpha);
      n_h += static_cast<double>(run);
    }
    lp += std::lgamma(row_sums_[h]) - std::lgamma(row_sums_[h] + n_h);
  }
  return lp;
}

double DirichletBigramModel::log_marginal(std::span<const DataId> members, const PayloadStore& store) const {
  if (members.empty()) return 0.0;
  std::vector<std::string> names;
  names.reserve(members.size());
  for (DataId id : members) {
    const Fragment& f = store.fragment(id);
    auto it = f.attributes.find(attribute_);
    if (it == f.attributes.end())
      throw std::invalid_argument("fragment " + std::to_string(index_of(id)) + " has no '" + attribute_ + "' attribute");
    names.push_back(it->second);
  }
  return log_marginal_names(names);
}

DirichletBigramModel fit_bigram_pseudocounts(std::span<const std::string> corpus, double rescale_c,
                                             BigramAlphabet alphabet) {
  if (corpus.empty()) throw std::invalid_argument("bigram corpus is empty");
  if (!(rescale_c > 0.0 && rescale_c <= 1.0)) throw std::invalid_argument("rescale c must lie in (0,1]");
  // Count with a throwaway uniform model so framing and symbol mapping are shared.
  const DirichletBigramModel framing = DirichletBigramModel::uniform(alphabet);
  const std::size_t v = framing.num_symbols();
  std::vector<std::vector<double>> counts(v, std::vector<double>(v, 1.0));
  for (const auto& s : corpus)
    for (auto [h, i] : framing.transitions(s)) counts[h][i] += 1.0;
  for (auto& row : counts)
    for (double& a : row) a *= rescale_c;
  return DirichletBigramModel(std::move(alphabet), std::move(counts), rescale_c);
}

// ---------------------------------------------------------------- Scaled

ScaledModel::ScaledModel(ModelPtr inner, double log_scale_per_point, double log_scale_per_cluster)
    : inner_(std::move(inner)), log_scale_(log_scale_per_point), log_cluster_scale_(log_scale_per_cluster) {
  if (!inner_) throw std::invalid_argument("ScaledModel needs an inner model");
  if (!std::isfinite(log_scale_) || !std::isfinite(log_cluster_scale_))
    throw std::invalid_argument("log scale must be finite");
}

std::string ScaledModel::model_id() const {
  return "scaled(" + inner_->model_id() + ",s=" + fmt_double(log_scale_) + ",k=" + fmt_double(log_cluster_scale_) + ")";
}

double ScaledModel::log_marginal(std::span<const DataId> members, const PayloadStore& store) const {
  if (members.empty()) return inner_->log_marginal(members, store);
  return inner_->log_marginal(members, store) + static_cast<double>(members.size()) * log_scale_ + log_cluster_scale_;
}

}  // namespace splitsmc
