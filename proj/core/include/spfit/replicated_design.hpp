#pragma once

#include <vector>

#include <Eigen/Dense>

namespace spfit {

struct Observation {
  double time;
  double value;
};

/// Sufficient-statistic representation of replicated time-series data: the
/// n unique input times, replicate counts, per-replicate values (stored
/// sorted within each location) and per-location means and variances. All
/// likelihoods in the library work on this O(n) form instead of the raw
/// length-N vector.
struct ReplicatedDesign {
  std::vector<double> times;                    // strictly increasing
  std::vector<int> counts;                      // a_i >= 1
  std::vector<std::vector<double>> replicates;  // sorted within location
  std::vector<double> means;
  std::vector<double> biased_var;    // (1/a_i) sum (d - mean)^2
  std::vector<double> unbiased_var;  // (1/(a_i-1)) sum (d - mean)^2; NaN if a_i == 1

  int size() const { return static_cast<int>(times.size()); }
  int total() const;  // N = sum a_i

  Eigen::VectorXd means_vector() const;
  /// Per-location sum of squared deviations, a_i * s_i^2.
  double deviation_ss(int i) const;
};

/// Groups observations by exactly-equal time and computes the statistics.
/// Throws EmptyInputError / DataError (naming the offending row).
ReplicatedDesign build_design(const std::vector<Observation>& observations);

/// Moment-based per-location noise variance estimates, diag entries
/// unbiased_var_i / a_i. Requires a_i >= 2 everywhere
/// (throws InsufficientReplicationError otherwise).
Eigen::VectorXd moment_variances(const ReplicatedDesign& design);

}  // namespace spfit
