#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <limits>
#include <string>
#include <vector>

namespace splitsmc {

// One row per observed datapoint.
struct TraceRecord {
  std::size_t step = 0;  // number of observations seen so far (1-based)
  double log_posterior = std::numeric_limits<double>::quiet_NaN();  // top clustering, Ewens
  double f1 = std::numeric_limits<double>::quiet_NaN();             // vs gold, when known
  std::size_t n_subproblems = 1;
  double log_effective_particles = 0.0;
  std::uint64_t model_evals = 0;       // cumulative main-model evaluations
  std::uint64_t step_model_evals = 0;  // main-model evaluations during this step
  std::size_t merges = 0;              // cumulative merge events
  std::size_t splits = 0;              // cumulative split events
  double wall_seconds = 0.0;           // cumulative
};

class RunTrace {
 public:
  // Step indices must be strictly increasing.
  void append(TraceRecord record);
  const std::vector<TraceRecord>& records() const { return records_; }
  bool empty() const { return records_.empty(); }
  const TraceRecord& back() const { return records_.back(); }

  static const char* header();
  void write_tsv(std::ostream& os) const;
  static RunTrace read_tsv(std::istream& is);

 private:
  std::vector<TraceRecord> records_;
};

using TraceSink = std::function<void(const TraceRecord&)>;

}  // namespace splitsmc
