#pragma once

#include <span>

#include "spfit/gp.hpp"
#include "spfit/latent_noise.hpp"
#include "spfit/linalg.hpp"
#include "spfit/predictive.hpp"
#include "spfit/replicated_design.hpp"

namespace spfit {

/// Student-t process state with explicit per-location noise variances
/// (absolute units). The degrees of freedom must exceed 2 so the kernel
/// matrix is the covariance of the process.
struct TPState {
  KernelFamily family = KernelFamily::kSquaredExponential;
  double dof = 10.0;         // alpha > 2
  double lengthscale = 1.0;  // theta
  double scale = 1.0;        // tau^2
  Eigen::VectorXd noise;     // lambda_i, one per design point

  void validate(int design_size) const;
};

/// Gradient of hettp_loglik over (dof, lengthscale, scale, noise).
struct TPGradient {
  double dof = 0.0;
  double lengthscale = 0.0;
  double scale = 0.0;
  Eigen::VectorXd noise;
};

/// Unique-n Student-t process log-likelihood of the design's full data vector.
double hettp_loglik(const TPState& state, const ReplicatedDesign& design);

/// Analytic gradient of hettp_loglik; every block is finite-difference
/// certified by the test suite.
TPGradient hettp_loglik_grad(const TPState& state, const ReplicatedDesign& design);

/// Heteroskedastic Student-t process fit: TP likelihood for the mean process,
/// latent GP smoothing of the (absolute) log noise variances.
struct HetTPFit {
  KernelFamily family = KernelFamily::kSquaredExponential;
  double dof = 10.0;    // alpha
  double mean_lengthscale = 1.0;
  double scale = 1.0;   // tau^2
  Eigen::VectorXd log_noise;  // smoothed absolute log noise at the design points
  LatentNoiseModel noise_model;
  ReplicatedDesign design;
  double log_likelihood = 0.0;
  double beta = 0.0;  // cached data quadratic form

  Cholesky chol;          // of tau^2 C_n + A^{-1} Sigma (plus conditioning guard)
  Eigen::VectorXd alpha;  // solve against the averaged data

  double dof_posterior() const { return dof + design.total(); }
  bool effectively_gaussian() const { return dof > 1e4; }
};

HetTPFit fit_hettp(const ReplicatedDesign& design, const FitConfig& config = {});

/// Builds the fit for explicit hyperparameters (no optimization). The latents
/// are relative: the observation variance at t is scale * exp(smoothed latent).
HetTPFit make_hettp_fit(KernelFamily family, double dof, double mean_lengthscale, double scale,
                        double noise_lengthscale, double nugget, const Eigen::VectorXd& latents,
                        ReplicatedDesign design);

/// Same hyperparameters, new conditioning data (data-dependent quantities,
/// including the quadratic form and posterior dof, are recomputed).
HetTPFit rebase_hettp(const HetTPFit& fit, ReplicatedDesign design);

PredictiveDistribution hettp_predict(const HetTPFit& fit, std::span<const double> grid,
                                     bool include_noise = false);

/// Predicted observation-noise variance at t (absolute units).
double hettp_noise_predict(const HetTPFit& fit, double t);

}  // namespace spfit
