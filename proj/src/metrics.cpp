#include "splitsmc/metrics.hpp"

#include <cstdio>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

namespace splitsmc {

namespace {

// Maps every id to the index of its cluster.
std::unordered_map<DataId, std::size_t> label_map(const Partition& p) {
  std::unordered_map<DataId, std::size_t> out;
  out.reserve(p.num_items());
  for (std::size_t k = 0; k < p.num_clusters(); ++k)
    for (DataId id : p.cluster(k).members()) out.emplace(id, k);
  return out;
}

}  // namespace

double f1_score(double precision, double recall) {
  if (precision + recall <= 0.0) return 0.0;
  return 2.0 * precision * recall / (precision + recall);
}

EvalReport bcubed(const Partition& pred, const Partition& gold) {
  if (pred.num_items() != gold.num_items()) throw std::invalid_argument("bcubed: id covers differ");
  const auto gold_of = label_map(gold);
  EvalReport r;
  r.n_clusters = pred.num_clusters();
  if (pred.num_items() == 0) return r;
  // Overlap counts |pred_k ∩ gold_j| per pred cluster.
  double precision = 0.0;
  double recall = 0.0;
  for (const Cluster& c : pred.clusters()) {
    std::unordered_map<std::size_t, std::size_t> overlap;
    for (DataId id : c.members()) {
      auto it = gold_of.find(id);
      if (it == gold_of.end())
        throw std::invalid_argument("bcubed: id " + std::to_string(index_of(id)) + " missing from gold");
      ++overlap[it->second];
    }
    for (const auto& [j, n] : overlap) {
      const double nn = static_cast<double>(n);
      // n elements each contribute n/|pred_k| and n/|gold_j|.
      precision += nn * nn / static_cast<double>(c.size());
      recall += nn * nn / static_cast<double>(gold.cluster(j).size());
    }
  }
  const double total = static_cast<double>(pred.num_items());
  r.precision = precision / total;
  r.recall = recall / total;
  r.f1 = f1_score(r.precision, r.recall);
  return r;
}

EvalReport bcubed_restricted(const Partition& pred, const Partition& gold) {
  if (pred.num_items() == gold.num_items()) return bcubed(pred, gold);
  std::unordered_map<DataId, bool> present;
  present.reserve(pred.num_items());
  for (const Cluster& c : pred.clusters())
    for (DataId id : c.members()) present.emplace(id, true);
  std::vector<Cluster> kept;
  for (const Cluster& c : gold.clusters()) {
    std::vector<DataId> m;
    for (DataId id : c.members())
      if (present.count(id)) m.push_back(id);
    if (!m.empty()) kept.emplace_back(std::move(m));
  }
  return bcubed(pred, Partition(std::move(kept)));
}

double score_clustering(const Partition& partition, double alpha, const ClusterLikelihood& model) {
  return ewens_log_posterior(partition, alpha, model);
}

void write_report(std::ostream& os, const EvalReport& r) {
  os << std::setprecision(17);
  os << "precision=" << r.precision << '\n'
     << "recall=" << r.recall << '\n'
     << "f1=" << r.f1 << '\n'
     << "log_posterior=" << r.log_posterior << '\n'
     << "n_clusters=" << r.n_clusters << '\n';
}

// --------------------------------------------------------------- RunTrace

void RunTrace::append(TraceRecord record) {
  if (!records_.empty() && record.step <= records_.back().step)
    throw std::invalid_argument("trace step indices must be strictly increasing");
  records_.push_back(record);
}

const char* RunTrace::header() {
  return "step\tlog_posterior\tf1\tn_subproblems\tlog_effective_particles\tmodel_evals\tstep_model_evals\t"
         "merges\tsplits\twall_seconds";
}

void RunTrace::write_tsv(std::ostream& os) const {
  os << header() << '\n';
  os << std::setprecision(12);
  for (const auto& r : records_) {
    os << r.step << '\t' << r.log_posterior << '\t' << r.f1 << '\t' << r.n_subproblems << '\t'
       << r.log_effective_particles << '\t' << r.model_evals << '\t' << r.step_model_evals << '\t' << r.merges
       << '\t' << r.splits << '\t' << r.wall_seconds << '\n';
  }
}

RunTrace RunTrace::read_tsv(std::istream& is) {
  RunTrace trace;
  std::string line;
  if (!std::getline(is, line) || line != header()) throw std::runtime_error("trace: missing or unexpected header");
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ls(line);
    TraceRecord r;
    std::string lp, f1;
    if (!(ls >> r.step >> lp >> f1 >> r.n_subproblems >> r.log_effective_particles >> r.model_evals >>
          r.step_model_evals >> r.merges >> r.splits >> r.wall_seconds))
      throw std::runtime_error("trace: parse error at line " + std::to_string(lineno));
    r.log_posterior = std::stod(lp);
    r.f1 = std::stod(f1);
    trace.append(r);
  }
  return trace;
}

}  // namespace splitsmc
