#include "spfit/censoring.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>

#include "spfit/errors.hpp"
#include "spfit/sampler.hpp"

namespace spfit {

namespace {

bool decreasing_along(const Eigen::VectorXd& values, const std::vector<int>& constrained) {
  for (std::size_t k = 0; k + 1 < constrained.size(); ++k) {
    if (!(values[constrained[k]] > values[constrained[k + 1]])) return false;
  }
  return true;
}

}  // namespace

std::vector<double> draw_monotone_path(const SurrogateFit& fit, std::span<const double> grid,
                                       const std::vector<int>& constrained, int max_attempts,
                                       std::mt19937_64& rng) {
  if (max_attempts < 1) {
    throw InvalidArgumentError("draw_monotone_path: max_attempts must be positive");
  }
  for (int idx : constrained) {
    if (idx < 0 || idx >= static_cast<int>(grid.size())) {
      throw InvalidArgumentError("draw_monotone_path: constrained index outside the grid");
    }
  }
  const PredictiveDistribution pred = predict(fit, grid, false);
  for (int attempt = 1; attempt <= max_attempts; ++attempt) {
    Eigen::VectorXd values = draw_predictive(pred, rng, true);
    if (decreasing_along(values, constrained)) {
      return {values.data(), values.data() + values.size()};
    }
  }
  std::ostringstream msg;
  msg << "draw_monotone_path: no accepted draw in " << max_attempts
      << " attempts (empirical acceptance rate 0/" << max_attempts << ")";
  throw RejectionExhaustedError(msg.str());
}

std::vector<double> draw_truncated_noise(const SurrogateFit& fit, double t, double threshold,
                                         double center, int count, std::mt19937_64& rng) {
  if (count < 1) {
    throw InvalidArgumentError("draw_truncated_noise: count must be positive");
  }
  const double variance = noise_variance_at(fit, t);
  const double sd = std::sqrt(std::max(variance, 0.0));
  const std::optional<double> dof = posterior_dof(fit);

  std::vector<double> draws;
  draws.reserve(static_cast<std::size_t>(count));
  std::uniform_real_distribution<double> uniform(0.0, 1.0);

  if (!std::isfinite(threshold)) {
    // No truncation: plain noise draws.
    for (int k = 0; k < count; ++k) {
      const double u = std::max(uniform(rng), 1e-300);
      if (dof) {
        boost::math::students_t_distribution<double> law(*dof);
        draws.push_back(center + sd * boost::math::quantile(law, u));
      } else {
        boost::math::normal_distribution<double> law(0.0, 1.0);
        draws.push_back(center + sd * boost::math::quantile(law, u));
      }
    }
    return draws;
  }

  const double standardized = (threshold - center) / (sd > 0.0 ? sd : 1e-300);
  double mass;
  if (dof) {
    boost::math::students_t_distribution<double> law(*dof);
    mass = boost::math::cdf(law, standardized);
  } else {
    boost::math::normal_distribution<double> law(0.0, 1.0);
    mass = boost::math::cdf(law, standardized);
  }
  if (!(mass > 1e-12)) {
    std::ostringstream msg;
    msg << "draw_truncated_noise: truncated mass " << mass << " below threshold " << threshold
        << " around center " << center << " (sd " << sd << ") is numerically degenerate";
    throw DegenerateTruncationError(msg.str());
  }

  for (int k = 0; k < count; ++k) {
    const double u = std::max(uniform(rng), 1e-300) * mass;
    double value;
    if (dof) {
      boost::math::students_t_distribution<double> law(*dof);
      value = center + sd * boost::math::quantile(law, u);
    } else {
      boost::math::normal_distribution<double> law(0.0, 1.0);
      value = center + sd * boost::math::quantile(law, u);
    }
    if (!(value < threshold)) {
      value = std::nextafter(threshold, -std::numeric_limits<double>::infinity());
    }
    draws.push_back(value);
  }
  return draws;
}

ReplicatedDesign augment_censored(const SurrogateFit& fit, const ReplicatedDesign& design,
                                  const CensoringSpec& spec, std::mt19937_64& rng) {
  if (spec.censored.empty()) return design;
  for (std::size_t k = 0; k < spec.censored.size(); ++k) {
    if (spec.censored[k].count < 1) {
      throw InvalidArgumentError("augment_censored: censored replicate counts must be positive");
    }
    if (k > 0 && !(spec.censored[k].time > spec.censored[k - 1].time)) {
      throw InvalidArgumentError("augment_censored: censored times must be strictly increasing");
    }
  }
  if (!std::isfinite(spec.threshold)) {
    throw InvalidArgumentError("augment_censored: threshold must be finite");
  }

  // Flat observation rows, extended step by step.
  std::vector<Observation> rows;
  for (int i = 0; i < design.size(); ++i) {
    for (double v : design.replicates[static_cast<std::size_t>(i)]) {
      rows.push_back({design.times[static_cast<std::size_t>(i)], v});
    }
  }

  const bool rightward = spec.direction == MonotoneDirection::kDecreasingRight;
  std::vector<CensoredBlock> blocks = spec.censored;
  if (!rightward) std::reverse(blocks.begin(), blocks.end());

  ReplicatedDesign current = design;
  SurrogateFit current_fit = rebase(fit, current);

  for (const CensoredBlock& block : blocks) {
    // Prediction grid: every current design time on the data side of the
    // censored time, plus the censored time itself.
    std::vector<double> grid;
    for (double t : current.times) {
      if (rightward ? t <= block.time : t >= block.time) grid.push_back(t);
    }
    if (std::find(grid.begin(), grid.end(), block.time) == grid.end()) {
      grid.push_back(block.time);
    }
    std::sort(grid.begin(), grid.end());

    const int target = static_cast<int>(
        std::find(grid.begin(), grid.end(), block.time) - grid.begin());
    const bool constrain = rightward ? block.time <= spec.monotone_limit
                                     : block.time >= spec.monotone_limit;
    std::vector<int> constrained;
    if (constrain) {
      if (rightward && target > 0) {
        constrained = {target - 1, target};
      } else if (!rightward && target + 1 < static_cast<int>(grid.size())) {
        constrained = {target + 1, target};
      }
    }

    const std::vector<double> path =
        draw_monotone_path(current_fit, grid, constrained, spec.max_attempts, rng);
    const std::vector<double> imputed = draw_truncated_noise(
        current_fit, block.time, spec.threshold, path[static_cast<std::size_t>(target)],
        block.count, rng);

    for (double v : imputed) rows.push_back({block.time, v});
    current = build_design(rows);
    current_fit = rebase(fit, current);
  }
  return current;
}

}  // namespace spfit
