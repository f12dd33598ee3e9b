#pragma once

#include <optional>
#include <vector>

#include <Eigen/Dense>

namespace spfit {

/// Joint predictive law of a fitted surrogate over a grid of time points.
/// `covariance` is the latent (signal) covariance; when `noise_included` is
/// set the pointwise noise variances have additionally been added to its
/// diagonal. `dof` carries the Student-t degrees of freedom where applicable.
struct PredictiveDistribution {
  std::vector<double> grid;
  Eigen::VectorXd mean;
  Eigen::MatrixXd covariance;
  Eigen::VectorXd noise_variance;
  std::optional<double> dof;
  bool noise_included = false;
};

}  // namespace spfit
