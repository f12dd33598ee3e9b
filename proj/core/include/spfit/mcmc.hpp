#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "spfit/ode.hpp"
#include "spfit/replicated_design.hpp"

namespace spfit {

/// Random-walk Metropolis configuration: uniform box prior, isotropic
/// Gaussian proposals with standard deviation `proposal_sd` per coordinate.
struct McmcConfig {
  Eigen::VectorXd prior_lo;
  Eigen::VectorXd prior_hi;
  Eigen::VectorXd start;
  double proposal_sd = 0.4472135954999579;  // variance 1/5
  int n_burn = 100000;
  int n_keep = 100000;
  std::uint64_t seed = 0;
  double ode_step = 0.0;  // 0 -> integration span / 512

  void validate() const;
};

struct McmcResult {
  Eigen::MatrixXd samples;  // n_keep rows
  double acceptance_rate = 0.0;
  bool mixing_warning = false;
};

/// Log posterior: -inf outside the prior box, otherwise -1/2 the squared
/// misfit between the model observation and every replicate value, summed
/// over all observed series.
double log_posterior(const ODEModel& model, const std::vector<ReplicatedDesign>& data,
                     std::span<const double> params, const McmcConfig& config);

/// Single-chain random-walk Metropolis (strictly sequential by construction).
McmcResult metropolis_run(const ODEModel& model, const std::vector<ReplicatedDesign>& data,
                          const McmcConfig& config);

/// Same chain against an arbitrary log target (used for diagnostics and tests).
McmcResult metropolis_run(const std::function<double(std::span<const double>)>& log_target,
                          const McmcConfig& config);

}  // namespace spfit
