#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "spfit/ode.hpp"
#include "spfit/sampler.hpp"

namespace spfit {

struct OptimizerConfig {
  int max_iterations = 5000;
  double simplex_tolerance = 1e-8;   // relative simplex diameter
  double objective_floor = 1e-12;    // early exit when the misfit is already this small
  double initial_step = 0.25;        // simplex step in the log-parameter coordinates
  double ode_step = 0.0;             // 0 -> integration span / 2048
  int multistarts = 1;               // log-uniform extra starts over [start_lo, start_hi]
  std::vector<double> start_lo;      // natural units; defaults to the model bounds
  std::vector<double> start_hi;
  std::uint64_t seed = 0;            // drives the multistart substreams
};

struct ShootingResult {
  Eigen::VectorXd parameters;
  double objective = 0.0;
  int iterations = 0;
  bool converged = false;
  std::int64_t path_index = -1;
};

struct PosteriorEnsemble {
  std::vector<ShootingResult> results;
  int failures = 0;
  std::vector<double> probs{0.025, 0.25, 0.5, 0.75, 0.975};
  Eigen::MatrixXd quantiles;  // one row per parameter, one column per prob
};

/// Mean squared misfit between the model observation and one sample path over
/// the path's grid (equal quadrature weights on the equidistant grid).
/// ODE blow-ups yield +inf so the optimizer treats the point as rejected.
double shooting_objective(const ODEModel& model, std::span<const double> params,
                          const SamplePath& path, double ode_step = 0.0);

/// Inverts one sample path by Nelder-Mead in log-parameter coordinates
/// starting from p0 (which must be feasible).
ShootingResult estimate_one(const ODEModel& model, const SamplePath& path,
                            std::span<const double> p0, const OptimizerConfig& config = {});

struct EnsembleConfig {
  OptimizerConfig optimizer;
  std::vector<double> p0;  // empty -> multistart draws only
  int threads = 0;         // 0 -> hardware concurrency
};

/// Applies estimate_one independently to every path; result order matches
/// path order regardless of the execution schedule, so the ensemble is a
/// deterministic function of (paths, config). Throws EnsembleQualityError
/// when more than half of the inversions fail to converge.
PosteriorEnsemble estimate_ensemble(const ODEModel& model, const std::vector<SamplePath>& paths,
                                    const EnsembleConfig& config);

}  // namespace spfit
