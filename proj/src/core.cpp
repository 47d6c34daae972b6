#include "splitsmc/core.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

#include "splitsmc/numeric.hpp"

namespace splitsmc {

std::vector<DataId> iota_ids(std::size_t n) {
  std::vector<DataId> ids(n);
  for (std::size_t i = 0; i < n; ++i) ids[i] = make_id(static_cast<std::uint32_t>(i));
  return ids;
}

std::uint64_t id_hash(DataId id) { return mix64(index_of(id)); }

std::uint64_t members_hash(std::span<const DataId> members) {
  std::uint64_t h = 0;
  for (DataId id : members) h += id_hash(id);
  return h;
}

// ---------------------------------------------------------------- Cluster

Cluster::Cluster(std::vector<DataId> members) : members_(std::move(members)) {
  if (members_.empty()) throw std::invalid_argument("cluster must be non-empty");
  std::sort(members_.begin(), members_.end());
  if (std::adjacent_find(members_.begin(), members_.end()) != members_.end())
    throw std::invalid_argument("cluster has duplicate ids");
  hash_ = members_hash(members_);
}

Cluster Cluster::singleton(DataId id) { return Cluster(Trusted{}, {id}, id_hash(id)); }

bool Cluster::contains(DataId id) const {
  return std::binary_search(members_.begin(), members_.end(), id);
}

Cluster Cluster::with(DataId id) const {
  std::vector<DataId> out;
  out.reserve(members_.size() + 1);
  auto pos = std::lower_bound(members_.begin(), members_.end(), id);
  if (pos != members_.end() && *pos == id)
    throw std::invalid_argument("id already in cluster");
  out.insert(out.end(), members_.begin(), pos);
  out.push_back(id);
  out.insert(out.end(), pos, members_.end());
  return Cluster(Trusted{}, std::move(out), hash_ + id_hash(id));
}

std::strong_ordering operator<=>(const Cluster& a, const Cluster& b) {
  return std::lexicographical_compare_three_way(a.members_.begin(), a.members_.end(),
                                                b.members_.begin(), b.members_.end());
}

// -------------------------------------------------------------- Partition

namespace {

bool by_min(const Cluster& a, const Cluster& b) { return a.min() < b.min(); }

std::uint64_t cluster_slot_hash(const Cluster& c) { return mix64(c.hash() ^ 0x5bd1e995ULL); }

}  // namespace

Partition::Partition(std::vector<Cluster> clusters) : clusters_(std::move(clusters)) {
  std::sort(clusters_.begin(), clusters_.end(), by_min);
  std::unordered_set<DataId> seen;
  for (const Cluster& c : clusters_)
    for (DataId id : c.members())
      if (!seen.insert(id).second) throw std::invalid_argument("partition clusters overlap");
  recompute();
}

Partition::Partition(Trusted, std::vector<Cluster> clusters) : clusters_(std::move(clusters)) {
  recompute();
}

void Partition::recompute() {
  num_items_ = 0;
  hash_ = 0;
  for (const Cluster& c : clusters_) {
    num_items_ += c.size();
    hash_ += cluster_slot_hash(c);
  }
}

Partition Partition::from_labels(std::span<const DataId> ids, std::span<const int> labels) {
  if (ids.size() != labels.size()) throw std::invalid_argument("ids/labels length mismatch");
  std::vector<int> distinct(labels.begin(), labels.end());
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  std::vector<std::vector<DataId>> groups(distinct.size());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    auto k = std::lower_bound(distinct.begin(), distinct.end(), labels[i]) - distinct.begin();
    groups[static_cast<std::size_t>(k)].push_back(ids[i]);
  }
  std::vector<Cluster> clusters;
  clusters.reserve(groups.size());
  for (auto& g : groups) clusters.emplace_back(std::move(g));
  return Partition(std::move(clusters));
}

Partition Partition::all_singletons(std::span<const DataId> ids) {
  std::vector<Cluster> clusters;
  clusters.reserve(ids.size());
  for (DataId id : ids) clusters.push_back(Cluster::singleton(id));
  return Partition(std::move(clusters));
}

std::vector<DataId> Partition::ids() const {
  std::vector<DataId> out;
  out.reserve(num_items_);
  for (const Cluster& c : clusters_) out.insert(out.end(), c.members().begin(), c.members().end());
  std::sort(out.begin(), out.end());
  return out;
}

std::size_t Partition::find(DataId id) const {
  for (std::size_t k = 0; k < clusters_.size(); ++k)
    if (clusters_[k].contains(id)) return k;
  return kNewCluster;
}

Partition Partition::with_assignment(std::size_t k, DataId id) const {
  std::vector<Cluster> out;
  out.reserve(clusters_.size() + 1);
  if (k == kNewCluster) {
    Cluster fresh = Cluster::singleton(id);
    bool placed = false;
    for (const Cluster& c : clusters_) {
      if (c.contains(id)) throw std::invalid_argument("id already in partition");
      if (!placed && id < c.min()) {
        out.push_back(fresh);
        placed = true;
      }
      out.push_back(c);
    }
    if (!placed) out.push_back(std::move(fresh));
    return Partition(Trusted{}, std::move(out));
  }
  if (k >= clusters_.size()) throw std::out_of_range("cluster index out of range");
  out = clusters_;
  out[k] = out[k].with(id);
  if (id < clusters_[k].min()) std::sort(out.begin(), out.end(), by_min);
  return Partition(Trusted{}, std::move(out));
}

std::uint64_t Partition::hash_with_assignment(std::size_t k, DataId id) const {
  if (k == kNewCluster) return hash_ + mix64(id_hash(id) ^ 0x5bd1e995ULL);
  const Cluster& c = clusters_.at(k);
  return hash_ - cluster_slot_hash(c) + mix64((c.hash() + id_hash(id)) ^ 0x5bd1e995ULL);
}

Partition Partition::joined(const Partition& other) const {
  std::vector<Cluster> out;
  out.reserve(clusters_.size() + other.clusters_.size());
  std::merge(clusters_.begin(), clusters_.end(), other.clusters_.begin(), other.clusters_.end(),
             std::back_inserter(out), by_min);
  return Partition(Trusted{}, std::move(out));
}

Partition Partition::filtered(const std::function<bool(const Cluster&)>& keep) const {
  std::vector<Cluster> out;
  for (const Cluster& c : clusters_)
    if (keep(c)) out.push_back(c);
  return Partition(Trusted{}, std::move(out));
}

std::string Partition::to_string() const {
  std::ostringstream os;
  os << '{';
  for (std::size_t k = 0; k < clusters_.size(); ++k) {
    if (k) os << ',';
    os << '{';
    auto m = clusters_[k].members();
    for (std::size_t i = 0; i < m.size(); ++i) os << (i ? "," : "") << index_of(m[i]);
    os << '}';
  }
  os << '}';
  return os.str();
}

std::strong_ordering operator<=>(const Partition& a, const Partition& b) {
  return std::lexicographical_compare_three_way(a.clusters_.begin(), a.clusters_.end(),
                                                b.clusters_.begin(), b.clusters_.end());
}

// ------------------------------------------------------------- Likelihood

double ClusterLikelihood::log_marginal_with(std::span<const DataId> members, DataId extra) const {
  std::vector<DataId> merged(members.begin(), members.end());
  merged.insert(std::upper_bound(merged.begin(), merged.end(), extra), extra);
  return log_marginal(merged);
}

double ClusterLikelihood::log_predictive(DataId x, std::span<const DataId> members) const {
  if (std::binary_search(members.begin(), members.end(), x))
    throw std::invalid_argument("log_predictive: x is already a member");
  if (members.empty()) return log_marginal_with({}, x);
  return log_marginal_with(members, x) - log_marginal(members);
}

// -------------------------------------------------------------------- CRP

CrpPrior::CrpPrior(double alpha) : alpha_(alpha) {
  if (!(alpha > 0.0) || !std::isfinite(alpha))
    throw std::invalid_argument("CRP concentration must be positive and finite");
}

double crp_assignment_log_prior(std::span<const std::size_t> cluster_sizes, double alpha,
                                std::size_t t, std::size_t target) {
  if (!(alpha > 0.0)) throw std::invalid_argument("alpha must be positive");
  const std::size_t total = std::accumulate(cluster_sizes.begin(), cluster_sizes.end(),
                                            std::size_t{0});
  if (t != total + 1) throw std::invalid_argument("t must equal 1 + sum(cluster_sizes)");
  const double denom = std::log(alpha + static_cast<double>(t) - 1.0);
  if (target == kNewCluster) return std::log(alpha) - denom;
  if (target >= cluster_sizes.size()) throw std::out_of_range("invalid CRP target index");
  if (cluster_sizes[target] == 0) throw std::invalid_argument("cluster sizes must be positive");
  return std::log(static_cast<double>(cluster_sizes[target])) - denom;
}

double ewens_log_prior(const Partition& partition, double alpha) {
  if (partition.empty()) throw std::invalid_argument("ewens_log_posterior: empty partition");
  if (!(alpha > 0.0)) throw std::invalid_argument("alpha must be positive");
  const double t = static_cast<double>(partition.num_items());
  const double k = static_cast<double>(partition.num_clusters());
  // prod_{i=0}^{t-1} (alpha + 1 + i) = Gamma(alpha + 1 + t) / Gamma(alpha + 1)
  double lp = (k - 1.0) * std::log(alpha) - (std::lgamma(alpha + 1.0 + t) - std::lgamma(alpha + 1.0));
  for (const Cluster& c : partition.clusters()) lp += std::lgamma(static_cast<double>(c.size()));
  return lp;
}

double ewens_log_posterior(const Partition& partition, double alpha,
                           const ClusterLikelihood& model) {
  double lp = ewens_log_prior(partition, alpha);
  for (const Cluster& c : partition.clusters()) lp += model.log_marginal(c);
  return lp;
}

// ------------------------------------------------------------ Enumeration

std::uint64_t bell_number(std::size_t n) {
  // Bell triangle.
  std::vector<std::uint64_t> row{1};
  for (std::size_t i = 1; i <= n; ++i) {
    std::vector<std::uint64_t> next{row.back()};
    for (std::uint64_t v : row) next.push_back(next.back() + v);
    row = std::move(next);
  }
  return row.front();
}

std::vector<Partition> enumerate_partitions(std::span<const DataId> ids) {
  const std::size_t n = ids.size();
  if (n == 0 || n > kMaxEnumerationSize)
    throw std::out_of_range("enumerate_partitions: size must be in 1..10");
  std::vector<Partition> out;
  out.reserve(bell_number(n));
  // Restricted growth strings: a[0] = 0, a[i] <= 1 + max(a[0..i-1]).
  std::vector<int> a(n, 0);
  std::vector<int> prefix_max(n, 0);
  while (true) {
    out.push_back(Partition::from_labels(ids, a));
    std::size_t i = n - 1;
    while (i > 0 && a[i] == prefix_max[i - 1] + 1) --i;
    if (i == 0) break;
    ++a[i];
    prefix_max[i] = std::max(prefix_max[i - 1], a[i]);
    for (std::size_t j = i + 1; j < n; ++j) {
      a[j] = 0;
      prefix_max[j] = prefix_max[i];
    }
  }
  return out;
}

std::vector<Partition> enumerate_partitions(std::size_t n) {
  if (n == 0 || n > kMaxEnumerationSize)
    throw std::out_of_range("enumerate_partitions: size must be in 1..10");
  return enumerate_partitions(iota_ids(n));
}

std::vector<PosteriorAtom> exact_posterior(std::span<const DataId> ids, double alpha,
                                           const ClusterLikelihood& model) {
  if (ids.size() > kMaxEnumerationSize)
    throw std::out_of_range("exact_posterior: at most 10 ids");
  std::vector<PosteriorAtom> atoms;
  std::vector<double> lw;
  for (Partition& p : enumerate_partitions(ids)) {
    lw.push_back(ewens_log_posterior(p, alpha, model));
    atoms.push_back({std::move(p), 0.0, 0.0});
  }
  const double z = log_sum_exp(lw);
  for (std::size_t i = 0; i < atoms.size(); ++i) {
    atoms[i].log_prob = lw[i] - z;
    atoms[i].prob = std::exp(atoms[i].log_prob);
  }
  return atoms;
}

}  // namespace splitsmc
