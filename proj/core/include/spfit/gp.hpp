#pragma once

#include <optional>
#include <span>
#include <utility>

#include "spfit/kernels.hpp"
#include "spfit/linalg.hpp"
#include "spfit/predictive.hpp"
#include "spfit/replicated_design.hpp"

namespace spfit {

/// Relative diagonal conditioning guard. It acts as additional observation
/// noise of size kJitter * (kernel scale), so sufficient-statistic and full-N
/// computations of the same quantity remain exactly equal.
inline constexpr double kJitter = 1e-8;

struct FitConfig {
  KernelFamily family = KernelFamily::kSquaredExponential;
  int starts = 5;
  int max_iterations = 200;
  double rel_tolerance = 1e-8;
  std::optional<std::pair<double, double>> lengthscale_bounds;
  std::optional<std::pair<double, double>> scale_bounds;
  std::optional<std::pair<double, double>> noise_bounds;
};

/// Homoskedastic Gaussian-process surrogate conditioned on a replicated
/// design, with the reduced-rank (unique-n) factorization cached.
struct GPFit {
  KernelSpec kernel;
  double noise_variance = 0.0;
  ReplicatedDesign design;
  double log_likelihood = 0.0;

  // Cached factorization of the averaged-data covariance and its data solve.
  Cholesky chol;
  Eigen::VectorXd alpha;
};

/// Exact full-N zero-mean Gaussian log density of the design's data,
/// computed through the unique-n sufficient statistics.
double gp_loglik(const KernelSpec& kernel, double noise_variance,
                 const ReplicatedDesign& design);

GPFit fit_gp(const ReplicatedDesign& design, const FitConfig& config = {});

/// Builds a GPFit from explicit hyperparameters (no optimization).
GPFit make_gp_fit(const KernelSpec& kernel, double noise_variance, ReplicatedDesign design);

PredictiveDistribution gp_predict(const GPFit& fit, std::span<const double> grid,
                                  bool include_noise = false);

}  // namespace spfit
