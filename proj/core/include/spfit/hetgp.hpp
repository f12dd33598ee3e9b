#pragma once

#include <span>

#include "spfit/gp.hpp"
#include "spfit/latent_noise.hpp"
#include "spfit/linalg.hpp"
#include "spfit/predictive.hpp"
#include "spfit/replicated_design.hpp"

namespace spfit {

/// Hyperparameters and latent variables of the heteroskedastic GP before the
/// concentrated quantities are computed. Noise enters relative to the process
/// scale: the observation variance at location i is scale * lambda_i with
/// log lambda the latent-GP smoothing of `latents`.
struct HetGPState {
  KernelFamily family = KernelFamily::kSquaredExponential;
  double mean_lengthscale = 1.0;
  double noise_lengthscale = 1.0;
  double nugget = 1e-2;
  Eigen::VectorXd latents;

  void validate(int design_size) const;
};

struct HetGPFit {
  KernelFamily family = KernelFamily::kSquaredExponential;
  double mean_lengthscale = 1.0;
  double scale = 1.0;          // concentrated process-variance MLE
  Eigen::VectorXd log_noise;   // smoothed relative log noise at the design points
  LatentNoiseModel noise_model;
  ReplicatedDesign design;
  double log_likelihood = 0.0;

  // Cached factorization of C_n + Lambda A^{-1} (plus conditioning guard)
  // and its solve against the averaged data.
  Cholesky chol;
  Eigen::VectorXd alpha;
};

/// Smoothed relative log noise (log Lambda) at the design points implied by a state.
Eigen::VectorXd hetgp_smooth_log_noise(const HetGPState& state, const ReplicatedDesign& design);

/// Closed-form concentrated MLE of the process variance.
double hetgp_nu_hat(const HetGPState& state, const ReplicatedDesign& design);

/// Concentrated joint log-likelihood over mean-process and latent-noise
/// hyperparameters (process variance and latent scale concentrated out).
double hetgp_joint_loglik(const HetGPState& state, const ReplicatedDesign& design);

/// Analytic gradient blocks of hetgp_joint_loglik in the mean lengthscale and
/// the latent variables (the latent-kernel pair is finite-differenced by the
/// fitter); finite-difference certified by the test suite.
struct HetGPJointGradient {
  double mean_lengthscale = 0.0;
  Eigen::VectorXd latents;
};
HetGPJointGradient hetgp_joint_grad(const HetGPState& state, const ReplicatedDesign& design);

HetGPFit fit_hetgp(const ReplicatedDesign& design, const FitConfig& config = {});

/// Builds the fit for an explicit state (no optimization).
HetGPFit make_hetgp_fit(const HetGPState& state, ReplicatedDesign design);

/// Re-poses the fit on a different design with identical hyperparameters
/// (including the process variance); per-location noise at new design points
/// comes from the latent noise model.
HetGPFit rebase_hetgp(const HetGPFit& fit, ReplicatedDesign design);

PredictiveDistribution hetgp_predict(const HetGPFit& fit, std::span<const double> grid,
                                     bool include_noise = false);

/// Predicted observation-noise variance at t: scale * exp(smoothed log noise).
double hetgp_noise_predict(const HetGPFit& fit, double t);

}  // namespace spfit
