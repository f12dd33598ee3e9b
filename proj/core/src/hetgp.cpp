#include "spfit/hetgp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "spfit/errors.hpp"
#include "spfit/optim.hpp"

namespace spfit {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

/// C_n + Lambda A^{-1} with the relative conditioning guard folded into Lambda.
Eigen::MatrixXd averaged_correlation(KernelFamily family, double lengthscale,
                                     const Eigen::VectorXd& log_noise,
                                     const ReplicatedDesign& design) {
  Eigen::MatrixXd c = correlation_matrix(family, lengthscale, design.times, design.times);
  for (int i = 0; i < design.size(); ++i) {
    c(i, i) += (std::exp(log_noise[i]) + kJitter) / design.counts[static_cast<std::size_t>(i)];
  }
  return c;
}

struct ConcentratedParts {
  Cholesky chol;
  Eigen::VectorXd alpha;
  double nu_hat = 0.0;
};

ConcentratedParts concentrate(KernelFamily family, double lengthscale,
                              const Eigen::VectorXd& log_noise,
                              const ReplicatedDesign& design) {
  ConcentratedParts parts;
  Eigen::MatrixXd c = averaged_correlation(family, lengthscale, log_noise, design);
  parts.chol = factorize_spd(c, 1.0, 0.0, kJitter);
  const Eigen::VectorXd mean = design.means_vector();
  parts.alpha = parts.chol.solve(mean);
  double quad = mean.dot(parts.alpha);
  for (int i = 0; i < design.size(); ++i) {
    if (design.counts[static_cast<std::size_t>(i)] >= 2) {
      quad += design.deviation_ss(i) / (std::exp(log_noise[i]) + kJitter);
    }
  }
  parts.nu_hat = quad / design.total();
  return parts;
}

}  // namespace

void HetGPState::validate(int design_size) const {
  if (!(mean_lengthscale > 0.0) || !std::isfinite(mean_lengthscale) ||
      !(noise_lengthscale > 0.0) || !std::isfinite(noise_lengthscale) || !(nugget > 0.0) ||
      !std::isfinite(nugget)) {
    throw InvalidHyperparameterError(
        "heteroskedastic state requires positive finite lengthscales and nugget");
  }
  if (latents.size() != design_size || !latents.allFinite()) {
    throw InvalidHyperparameterError("latent vector must be finite with one entry per design point");
  }
}

Eigen::VectorXd LatentNoiseModel::predict_log(std::span<const double> times) const {
  if (anchor_times.empty()) return Eigen::VectorXd::Zero(static_cast<Eigen::Index>(times.size()));
  const Eigen::MatrixXd cross = correlation_matrix(family, lengthscale, times, anchor_times);
  return cross * weights;
}

double LatentNoiseModel::predict_log(double t) const {
  const double ts[1] = {t};
  return predict_log(std::span<const double>(ts, 1))[0];
}

LatentNoiseModel make_latent_noise_model(KernelFamily family, double lengthscale, double nugget,
                                         std::vector<double> anchor_times,
                                         std::vector<int> anchor_counts,
                                         Eigen::VectorXd latents) {
  LatentNoiseModel model;
  model.family = family;
  model.lengthscale = lengthscale;
  model.nugget = nugget;
  model.anchor_times = std::move(anchor_times);
  model.anchor_counts = std::move(anchor_counts);
  model.latents = std::move(latents);

  const auto n = static_cast<Eigen::Index>(model.anchor_times.size());
  Eigen::MatrixXd c = correlation_matrix(family, lengthscale, model.anchor_times,
                                         model.anchor_times);
  for (Eigen::Index i = 0; i < n; ++i) {
    c(i, i) += nugget / model.anchor_counts[static_cast<std::size_t>(i)] + kJitter;
  }
  Cholesky chol = factorize_spd(c, 1.0, 0.0, kJitter);
  model.weights = chol.solve(model.latents);
  model.prior_log_det = chol.log_det();
  model.latent_scale = model.latents.dot(model.weights) / std::max<Eigen::Index>(n, 1);
  return model;
}

double latent_loglik(const LatentNoiseModel& model) {
  const auto n = static_cast<double>(model.anchor_times.size());
  const double scale = std::max(model.latent_scale, kLatentScaleFloor);
  return -0.5 * n * std::log(scale) - 0.5 * model.prior_log_det -
         0.5 * n * (std::log(2.0 * std::numbers::pi) + 1.0);
}

Eigen::VectorXd hetgp_smooth_log_noise(const HetGPState& state, const ReplicatedDesign& design) {
  state.validate(design.size());
  LatentNoiseModel model = make_latent_noise_model(state.family, state.noise_lengthscale,
                                                   state.nugget, design.times, design.counts,
                                                   state.latents);
  return model.predict_log(design.times);
}

double hetgp_nu_hat(const HetGPState& state, const ReplicatedDesign& design) {
  state.validate(design.size());
  const Eigen::VectorXd log_noise = hetgp_smooth_log_noise(state, design);
  return concentrate(state.family, state.mean_lengthscale, log_noise, design).nu_hat;
}

double hetgp_joint_loglik(const HetGPState& state, const ReplicatedDesign& design) {
  state.validate(design.size());
  const int n = design.size();
  const int total = design.total();

  LatentNoiseModel latent = make_latent_noise_model(state.family, state.noise_lengthscale,
                                                    state.nugget, design.times, design.counts,
                                                    state.latents);
  const Eigen::VectorXd log_noise = latent.predict_log(design.times);
  ConcentratedParts parts = concentrate(state.family, state.mean_lengthscale, log_noise, design);
  if (!(parts.nu_hat > 0.0)) {
    // Identically-zero data: the concentrated variance degenerates.
    parts.nu_hat = std::numeric_limits<double>::min();
  }

  double value = -0.5 * total * std::log(parts.nu_hat) - 0.5 * parts.chol.log_det();
  for (int i = 0; i < n; ++i) {
    const auto idx = static_cast<std::size_t>(i);
    value -= 0.5 * ((design.counts[idx] - 1) * std::log(std::exp(log_noise[i]) + kJitter) +
                    std::log(static_cast<double>(design.counts[idx])));
  }
  value -= 0.5 * total * (std::log(2.0 * std::numbers::pi) + 1.0);
  value += latent_loglik(latent);
  return value;
}

HetGPJointGradient hetgp_joint_grad(const HetGPState& state, const ReplicatedDesign& design) {
  state.validate(design.size());
  const int n = design.size();
  const double total = design.total();

  LatentNoiseModel latent = make_latent_noise_model(state.family, state.noise_lengthscale,
                                                    state.nugget, design.times, design.counts,
                                                    state.latents);
  const Eigen::VectorXd log_noise = latent.predict_log(design.times);
  const Eigen::VectorXd noise_eff = (log_noise.array().exp() + kJitter).matrix();
  ConcentratedParts parts = concentrate(state.family, state.mean_lengthscale, log_noise, design);
  const double quad = parts.nu_hat * total;
  const Eigen::VectorXd& u = parts.alpha;

  const Eigen::MatrixXd identity = Eigen::MatrixXd::Identity(n, n);
  const Eigen::MatrixXd k_inv = parts.chol.solve(identity);
  const Eigen::MatrixXd corr_dl = correlation_matrix_dlengthscale(
      state.family, state.mean_lengthscale, design.times, design.times);

  HetGPJointGradient grad;
  grad.mean_lengthscale =
      (total / (2.0 * quad)) * u.dot(corr_dl * u) - 0.5 * (k_inv.cwiseProduct(corr_dl)).sum();

  Eigen::VectorXd d_noise(n);
  for (int i = 0; i < n; ++i) {
    const auto idx = static_cast<std::size_t>(i);
    const double count = design.counts[idx];
    const double lam = noise_eff[i];
    d_noise[i] = (total / (2.0 * quad)) *
                     (design.deviation_ss(i) / (lam * lam) + u[i] * u[i] / count) -
                 k_inv(i, i) / (2.0 * count) - (count - 1.0) / (2.0 * lam);
  }

  // Chain through the smoothing matrix taking latents to log noise, plus the
  // concentrated latent-prior term.
  Eigen::MatrixXd smoother =
      correlation_matrix(state.family, state.noise_lengthscale, design.times, design.times);
  Eigen::MatrixXd c_g = smoother;
  for (int i = 0; i < n; ++i) {
    smoother(i, i) += state.nugget / design.counts[static_cast<std::size_t>(i)] + kJitter;
  }
  const Eigen::MatrixXd smooth_t = factorize_spd(smoother, 1.0, 0.0, kJitter).solve(c_g);
  const Eigen::VectorXd chain = d_noise.cwiseProduct(log_noise.array().exp().matrix());
  grad.latents = smooth_t * chain;
  if (latent.latent_scale > kLatentScaleFloor) {
    grad.latents -= latent.weights / latent.latent_scale;
  }
  return grad;
}

HetGPFit make_hetgp_fit(const HetGPState& state, ReplicatedDesign design) {
  state.validate(design.size());
  HetGPFit fit;
  fit.family = state.family;
  fit.mean_lengthscale = state.mean_lengthscale;
  fit.design = std::move(design);
  fit.noise_model = make_latent_noise_model(state.family, state.noise_lengthscale, state.nugget,
                                            fit.design.times, fit.design.counts, state.latents);
  fit.log_noise = fit.noise_model.predict_log(fit.design.times);
  ConcentratedParts parts = concentrate(state.family, state.mean_lengthscale, fit.log_noise,
                                        fit.design);
  fit.scale = parts.nu_hat;
  fit.chol = std::move(parts.chol);
  fit.alpha = std::move(parts.alpha);
  fit.log_likelihood = hetgp_joint_loglik(state, fit.design);
  return fit;
}

HetGPFit rebase_hetgp(const HetGPFit& fit, ReplicatedDesign design) {
  HetGPFit out;
  out.family = fit.family;
  out.mean_lengthscale = fit.mean_lengthscale;
  out.scale = fit.scale;  // process variance kept from the original fit
  out.noise_model = fit.noise_model;
  out.design = std::move(design);
  out.log_noise = out.noise_model.predict_log(out.design.times);
  ConcentratedParts parts = concentrate(out.family, out.mean_lengthscale, out.log_noise,
                                        out.design);
  out.chol = std::move(parts.chol);
  out.alpha = std::move(parts.alpha);
  out.log_likelihood = std::numeric_limits<double>::quiet_NaN();
  return out;
}

HetGPFit fit_hetgp(const ReplicatedDesign& design, const FitConfig& config) {
  const int n = design.size();
  if (n < 3) {
    throw InvalidArgumentError("fit_hetgp: need at least three unique design points");
  }

  // Homoskedastic pre-fit seeds the scale, lengthscale and latents.
  GPFit prefit = fit_gp(design, config);
  const double nu0 = prefit.kernel.scale;
  double var_all = 0.0;
  {
    double sum = 0.0, sum_sq = 0.0;
    int total = 0;
    for (const auto& reps : design.replicates) {
      for (double v : reps) {
        sum += v;
        sum_sq += v * v;
        ++total;
      }
    }
    var_all = std::max(0.0, sum_sq / total - (sum / total) * (sum / total));
  }
  const double var_floor = std::max(1e-6 * var_all, 1e-12 * std::max(nu0, 1.0));

  Eigen::VectorXd latents0(n);
  for (int i = 0; i < n; ++i) {
    const auto idx = static_cast<std::size_t>(i);
    const double empirical = design.counts[idx] >= 2 ? design.unbiased_var[idx]
                                                     : prefit.noise_variance;
    latents0[i] = std::log(std::max(empirical, var_floor) / nu0);
  }

  double dt_min = kInf;
  for (int i = 1; i < n; ++i) {
    dt_min = std::min(dt_min, design.times[static_cast<std::size_t>(i)] -
                                  design.times[static_cast<std::size_t>(i - 1)]);
  }
  const double range = design.times.back() - design.times.front();
  auto theta_box = config.lengthscale_bounds.value_or(std::make_pair(dt_min / 2.0, 2.0 * range));

  const Eigen::Index dim = n + 3;
  Eigen::VectorXd lo(dim), hi(dim), u0(dim);
  lo[0] = std::log(theta_box.first);
  hi[0] = std::log(theta_box.second);
  lo[1] = std::log(theta_box.first);
  hi[1] = std::log(theta_box.second);
  lo[2] = std::log(1e-2);  // keeps the latent smoother away from its degenerate ridge
  hi[2] = std::log(1e2);
  lo.segment(3, n).setConstant(-40.0);
  hi.segment(3, n).setConstant(40.0);
  u0[0] = std::log(std::clamp(prefit.kernel.lengthscale, theta_box.first, theta_box.second));
  u0[1] = std::log(std::clamp(range / 3.0, theta_box.first, theta_box.second));
  u0[2] = std::log(1e-1);
  u0.segment(3, n) = latents0.cwiseMax(lo.segment(3, n)).cwiseMin(hi.segment(3, n));

  auto unpack = [&](const Eigen::VectorXd& u) {
    HetGPState state;
    state.family = config.family;
    state.mean_lengthscale = std::exp(u[0]);
    state.noise_lengthscale = std::exp(u[1]);
    state.nugget = std::exp(u[2]);
    state.latents = u.segment(3, n);
    return state;
  };
  // The concentrated latent scale degenerates as the latents shrink toward
  // zero (the smoothed-noise prior density grows without bound there). The
  // fitter walls that ridge off at a fraction of the initialization's scale,
  // which is anchored on the empirical per-location variances.
  const double init_latent_scale =
      make_latent_noise_model(config.family, std::exp(u0[1]), std::exp(u0[2]), design.times,
                              design.counts, u0.segment(3, n))
          .latent_scale;
  const double latent_scale_wall = std::max(0.05 * init_latent_scale, 1e-6);

  auto objective = [&](const Eigen::VectorXd& u) -> double {
    try {
      const HetGPState state = unpack(u);
      LatentNoiseModel latent =
          make_latent_noise_model(state.family, state.noise_lengthscale, state.nugget,
                                  design.times, design.counts, state.latents);
      if (latent.latent_scale < latent_scale_wall) return kInf;
      return -hetgp_joint_loglik(state, design);
    } catch (const Error&) {
      return kInf;
    }
  };
  // Analytic blocks for the mean lengthscale and the latents; central
  // differences for the latent-kernel pair.
  auto gradient = [&](const Eigen::VectorXd& u) -> Eigen::VectorXd {
    Eigen::VectorXd g(dim);
    HetGPState state;
    HetGPJointGradient analytic;
    try {
      state = unpack(u);
      analytic = hetgp_joint_grad(state, design);
    } catch (const Error&) {
      g.setZero();
      return g;
    }
    g[0] = -analytic.mean_lengthscale * state.mean_lengthscale;
    g.segment(3, n) = -analytic.latents;
    for (Eigen::Index k = 1; k <= 2; ++k) {
      const double h = 1e-5 * std::max(1.0, std::abs(u[k]));
      Eigen::VectorXd up = u, dn = u;
      up[k] = std::min(u[k] + h, hi[k]);
      dn[k] = std::max(u[k] - h, lo[k]);
      g[k] = (objective(up) - objective(dn)) / (up[k] - dn[k]);
    }
    return g;
  };

  LbfgsOptions opt;
  opt.max_iterations = std::max(config.max_iterations, 50 * n);
  opt.rel_f_tolerance = config.rel_tolerance;
  OptimResult run = minimize_lbfgs_box(objective, gradient, u0, lo, hi, opt);
  OptimResult polish = minimize_lbfgs_box(objective, gradient, run.x, lo, hi, opt);
  if (polish.value <= run.value) run = polish;
  if (!std::isfinite(run.value)) {
    std::ostringstream msg;
    msg << "fit_hetgp failed: " << run.message << "; best objective " << run.value;
    throw OptimizationFailureError(msg.str());
  }
  return make_hetgp_fit(unpack(run.x), design);
}

PredictiveDistribution hetgp_predict(const HetGPFit& fit, std::span<const double> grid,
                                     bool include_noise) {
  PredictiveDistribution pred;
  pred.grid.assign(grid.begin(), grid.end());
  const auto g = static_cast<Eigen::Index>(grid.size());
  if (g == 0) {
    pred.mean = Eigen::VectorXd(0);
    pred.covariance = Eigen::MatrixXd(0, 0);
    pred.noise_variance = Eigen::VectorXd(0);
    return pred;
  }
  const Eigen::MatrixXd cross =
      correlation_matrix(fit.family, fit.mean_lengthscale, grid, fit.design.times);
  pred.mean = cross * fit.alpha;
  const Eigen::MatrixXd w = fit.chol.forward(cross.transpose());
  pred.covariance =
      fit.scale *
      (correlation_matrix(fit.family, fit.mean_lengthscale, grid, grid) - w.transpose() * w)
          .eval();
  pred.noise_variance = (fit.noise_model.predict_log(grid).array().exp() * fit.scale).matrix();
  if (include_noise) {
    pred.covariance.diagonal() += pred.noise_variance;
    pred.noise_included = true;
  }
  return pred;
}

double hetgp_noise_predict(const HetGPFit& fit, double t) {
  return fit.scale * std::exp(fit.noise_model.predict_log(t));
}

}  // namespace spfit
