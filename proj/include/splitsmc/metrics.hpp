#pragma once

#include <iosfwd>
#include <string>

#include "splitsmc/core.hpp"
#include "splitsmc/trace.hpp"

namespace splitsmc {

struct EvalReport {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double log_posterior = 0.0;
  std::size_t n_clusters = 0;
};

// B-cubed scores: per element, precision = |pred(e) ∩ gold(e)| / |pred(e)| and
// recall = |pred(e) ∩ gold(e)| / |gold(e)|, averaged over elements. Both
// partitions must cover the same ids.
EvalReport bcubed(const Partition& pred, const Partition& gold);

// As bcubed, with `gold` first restricted to the ids covered by `pred`.
EvalReport bcubed_restricted(const Partition& pred, const Partition& gold);

double f1_score(double precision, double recall);

// Ewens log posterior of a reported clustering.
double score_clustering(const Partition& partition, double alpha, const ClusterLikelihood& model);

// Flat `key=value` lines.
void write_report(std::ostream& os, const EvalReport& report);

}  // namespace splitsmc
