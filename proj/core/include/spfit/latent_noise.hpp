#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>

#include "spfit/kernels.hpp"

namespace spfit {

/// Zero-mean latent Gaussian process smoothing per-location log noise
/// variances. The latent variables live at the anchor design points; the
/// smoothed log noise at any time t is the GP posterior mean
/// c_g(t)^T (C_g + g A^{-1})^{-1} latents. Far from the anchors the
/// prediction reverts to the zero prior mean.
struct LatentNoiseModel {
  KernelFamily family = KernelFamily::kSquaredExponential;
  double lengthscale = 1.0;  // latent kernel lengthscale
  double nugget = 1e-2;      // latent observation noise (per anchor, scaled by 1/a_i)
  std::vector<double> anchor_times;
  std::vector<int> anchor_counts;
  Eigen::VectorXd latents;
  Eigen::VectorXd weights;       // (C_g + g A^{-1})^{-1} latents, cached
  double latent_scale = 0.0;     // concentrated latent-process scale estimate
  double prior_log_det = 0.0;    // log|C_g + g A^{-1}|, cached for the likelihood

  /// Smoothed log noise at arbitrary times.
  Eigen::VectorXd predict_log(std::span<const double> times) const;
  double predict_log(double t) const;
};

/// Solves the latent smoothing system and caches the pieces reused by both
/// prediction and the concentrated likelihood.
LatentNoiseModel make_latent_noise_model(KernelFamily family, double lengthscale, double nugget,
                                         std::vector<double> anchor_times,
                                         std::vector<int> anchor_counts,
                                         Eigen::VectorXd latents);

/// Floor applied to the concentrated latent scale; keeps the joint
/// log-likelihood bounded when the latents are driven toward zero.
inline constexpr double kLatentScaleFloor = 1e-8;

/// Concentrated log-likelihood contribution of the latent process,
/// -(n/2) log max(latent_scale, floor) - (1/2) log|C_g + g A^{-1}| + const.
double latent_loglik(const LatentNoiseModel& model);

}  // namespace spfit
