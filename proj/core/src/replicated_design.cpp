#include "spfit/replicated_design.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>

#include "spfit/errors.hpp"

namespace spfit {

int ReplicatedDesign::total() const {
  return std::accumulate(counts.begin(), counts.end(), 0);
}

Eigen::VectorXd ReplicatedDesign::means_vector() const {
  return Eigen::Map<const Eigen::VectorXd>(means.data(), static_cast<Eigen::Index>(means.size()));
}

double ReplicatedDesign::deviation_ss(int i) const {
  return counts[static_cast<std::size_t>(i)] * biased_var[static_cast<std::size_t>(i)];
}

ReplicatedDesign build_design(const std::vector<Observation>& observations) {
  if (observations.empty()) {
    throw EmptyInputError("build_design: no observations");
  }
  std::map<double, std::vector<double>> groups;
  for (std::size_t row = 0; row < observations.size(); ++row) {
    const auto& obs = observations[row];
    if (!std::isfinite(obs.time) || !std::isfinite(obs.value)) {
      std::ostringstream msg;
      msg << "build_design: non-finite observation at row " << row << " (time=" << obs.time
          << ", value=" << obs.value << ")";
      throw DataError(msg.str());
    }
    groups[obs.time].push_back(obs.value);
  }

  ReplicatedDesign design;
  design.times.reserve(groups.size());
  design.counts.reserve(groups.size());
  design.replicates.reserve(groups.size());
  design.means.reserve(groups.size());
  design.biased_var.reserve(groups.size());
  design.unbiased_var.reserve(groups.size());
  for (auto& [time, values] : groups) {
    std::sort(values.begin(), values.end());
    const int a = static_cast<int>(values.size());
    const double mean = std::accumulate(values.begin(), values.end(), 0.0) / a;
    double ss = 0.0;
    for (double v : values) ss += (v - mean) * (v - mean);
    design.times.push_back(time);
    design.counts.push_back(a);
    design.means.push_back(mean);
    design.biased_var.push_back(ss / a);
    design.unbiased_var.push_back(a >= 2 ? ss / (a - 1)
                                         : std::numeric_limits<double>::quiet_NaN());
    design.replicates.push_back(std::move(values));
  }
  return design;
}

Eigen::VectorXd moment_variances(const ReplicatedDesign& design) {
  Eigen::VectorXd out(design.size());
  for (int i = 0; i < design.size(); ++i) {
    const auto k = static_cast<std::size_t>(i);
    if (design.counts[k] < 2) {
      std::ostringstream msg;
      msg << "moment_variances: location t=" << design.times[k]
          << " has a single replicate; moment noise estimation needs replication";
      throw InsufficientReplicationError(msg.str());
    }
    out[i] = design.unbiased_var[k] / design.counts[k];
  }
  return out;
}

}  // namespace spfit
