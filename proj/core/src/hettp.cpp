#include "spfit/hettp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include <boost/math/special_functions/digamma.hpp>

#include "spfit/errors.hpp"
#include "spfit/optim.hpp"

namespace spfit {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct TPParts {
  Cholesky chol;          // of Upsilon = tau^2 C + A^{-1} Sigma
  Eigen::VectorXd alpha;  // Upsilon^{-1} dbar
  Eigen::VectorXd noise_eff;
  double beta = 0.0;
};

TPParts tp_parts(const TPState& state, const ReplicatedDesign& design) {
  TPParts parts;
  const int n = design.size();
  parts.noise_eff = state.noise.array() + kJitter * state.scale;
  Eigen::MatrixXd ups =
      state.scale * correlation_matrix(state.family, state.lengthscale, design.times, design.times);
  for (int i = 0; i < n; ++i) {
    ups(i, i) += parts.noise_eff[i] / design.counts[static_cast<std::size_t>(i)];
  }
  parts.chol = factorize_spd(ups, state.scale, 0.0, kJitter);
  const Eigen::VectorXd mean = design.means_vector();
  parts.alpha = parts.chol.solve(mean);
  parts.beta = mean.dot(parts.alpha);
  for (int i = 0; i < n; ++i) {
    if (design.counts[static_cast<std::size_t>(i)] >= 2) {
      parts.beta += design.deviation_ss(i) / parts.noise_eff[i];
    }
  }
  return parts;
}

double tp_loglik_from_parts(const TPState& state, const ReplicatedDesign& design,
                            const TPParts& parts) {
  const int n = design.size();
  const double total = design.total();
  const double a = state.dof;

  double value = -0.5 * total * std::log((a - 2.0) * std::numbers::pi);
  value -= 0.5 * parts.chol.log_det();
  for (int i = 0; i < n; ++i) {
    const auto idx = static_cast<std::size_t>(i);
    value -= 0.5 * ((design.counts[idx] - 1) * std::log(parts.noise_eff[i]) +
                    std::log(static_cast<double>(design.counts[idx])));
  }
  value += std::lgamma((a + total) / 2.0) - std::lgamma(a / 2.0);
  value -= 0.5 * (a + total) * std::log1p(parts.beta / (a - 2.0));
  return value;
}

}  // namespace

void TPState::validate(int design_size) const {
  if (!(dof > 2.0) || !std::isfinite(dof)) {
    std::ostringstream msg;
    msg << "Student-t degrees of freedom must exceed 2, got " << dof;
    throw InvalidDofError(msg.str());
  }
  if (!(lengthscale > 0.0) || !std::isfinite(lengthscale) || !(scale > 0.0) ||
      !std::isfinite(scale)) {
    throw InvalidHyperparameterError("TP lengthscale and scale must be positive finite");
  }
  if (noise.size() != design_size || !noise.allFinite() || (noise.array() <= 0.0).any()) {
    throw InvalidHyperparameterError("TP noise variances must be positive, one per design point");
  }
}

double hettp_loglik(const TPState& state, const ReplicatedDesign& design) {
  state.validate(design.size());
  return tp_loglik_from_parts(state, design, tp_parts(state, design));
}

TPGradient hettp_loglik_grad(const TPState& state, const ReplicatedDesign& design) {
  state.validate(design.size());
  const int n = design.size();
  const double total = design.total();
  const double a = state.dof;
  const TPParts parts = tp_parts(state, design);
  const double beta = parts.beta;

  const Eigen::MatrixXd identity = Eigen::MatrixXd::Identity(n, n);
  const Eigen::MatrixXd ups_inv = parts.chol.solve(identity);
  const Eigen::MatrixXd corr =
      correlation_matrix(state.family, state.lengthscale, design.times, design.times);
  const Eigen::MatrixXd corr_dl = correlation_matrix_dlengthscale(
      state.family, state.lengthscale, design.times, design.times);
  const Eigen::VectorXd& u = parts.alpha;
  const double tail = (a + total) / (2.0 * (a + beta - 2.0));

  TPGradient grad;
  grad.dof = -total / (2.0 * (a - 2.0)) + 0.5 * boost::math::digamma((a + total) / 2.0) -
             0.5 * boost::math::digamma(a / 2.0) - 0.5 * std::log1p(beta / (a - 2.0)) +
             (a + total) * beta / (2.0 * (a - 2.0) * (a + beta - 2.0));

  grad.lengthscale = -0.5 * state.scale * (ups_inv.cwiseProduct(corr_dl)).sum() +
                     tail * state.scale * u.dot(corr_dl * u);

  grad.scale = -0.5 * (ups_inv.cwiseProduct(corr)).sum() + tail * u.dot(corr * u);

  grad.noise.resize(n);
  for (int i = 0; i < n; ++i) {
    const auto idx = static_cast<std::size_t>(i);
    const double count = design.counts[idx];
    const double lam = parts.noise_eff[i];
    grad.noise[i] = -ups_inv(i, i) / (2.0 * count) - (count - 1.0) / (2.0 * lam) +
                    tail * (design.deviation_ss(i) / (lam * lam) + u[i] * u[i] / count);
  }
  return grad;
}

HetTPFit make_hettp_fit(KernelFamily family, double dof, double mean_lengthscale, double scale,
                        double noise_lengthscale, double nugget, const Eigen::VectorXd& latents,
                        ReplicatedDesign design) {
  HetTPFit fit;
  fit.family = family;
  fit.dof = dof;
  fit.mean_lengthscale = mean_lengthscale;
  fit.scale = scale;
  fit.design = std::move(design);
  fit.noise_model = make_latent_noise_model(family, noise_lengthscale, nugget, fit.design.times,
                                            fit.design.counts, latents);
  // Latents are relative: observation variance = scale * exp(smoothed latent).
  fit.log_noise =
      (fit.noise_model.predict_log(fit.design.times).array() + std::log(scale)).matrix();

  TPState state{family, dof, mean_lengthscale, scale, fit.log_noise.array().exp()};
  state.validate(fit.design.size());
  TPParts parts = tp_parts(state, fit.design);
  fit.beta = parts.beta;
  fit.chol = std::move(parts.chol);
  fit.alpha = std::move(parts.alpha);
  fit.log_likelihood = hettp_loglik(state, fit.design) + latent_loglik(fit.noise_model);
  return fit;
}

HetTPFit rebase_hettp(const HetTPFit& fit, ReplicatedDesign design) {
  HetTPFit out;
  out.family = fit.family;
  out.dof = fit.dof;
  out.mean_lengthscale = fit.mean_lengthscale;
  out.scale = fit.scale;
  out.noise_model = fit.noise_model;
  out.design = std::move(design);
  out.log_noise =
      (out.noise_model.predict_log(out.design.times).array() + std::log(out.scale)).matrix();

  TPState state{out.family, out.dof, out.mean_lengthscale, out.scale,
                out.log_noise.array().exp()};
  TPParts parts = tp_parts(state, out.design);
  out.beta = parts.beta;
  out.chol = std::move(parts.chol);
  out.alpha = std::move(parts.alpha);
  out.log_likelihood = tp_loglik_from_parts(state, out.design, parts);
  return out;
}

HetTPFit fit_hettp(const ReplicatedDesign& design, const FitConfig& config) {
  const int n = design.size();
  if (n < 3) {
    throw InvalidArgumentError("fit_hettp: need at least three unique design points");
  }

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

  // Layout: log(alpha - 2), log theta, log theta_g, log g, relative latents.
  // The process scale is concentrated out in closed form: with noise relative
  // to the scale the stationarity condition gives
  //   scale = alpha * q / (N (alpha - 2)),  q the unit-scale quadratic form.
  const Eigen::Index dim = n + 4;
  Eigen::VectorXd lo(dim), hi(dim), u0(dim);
  lo[0] = std::log(1e-2);
  hi[0] = std::log(1e8);
  lo[1] = std::log(theta_box.first);
  hi[1] = std::log(theta_box.second);
  lo[2] = std::log(theta_box.first);
  hi[2] = std::log(theta_box.second);
  lo[3] = std::log(1e-2);  // keeps the latent smoother away from its degenerate ridge
  hi[3] = std::log(1e2);
  lo.segment(4, n).setConstant(-40.0);
  hi.segment(4, n).setConstant(40.0);

  u0[0] = std::log(8.0);  // alpha = 10
  u0[1] = std::log(std::clamp(prefit.kernel.lengthscale, theta_box.first, theta_box.second));
  u0[2] = std::log(std::clamp(range / 3.0, theta_box.first, theta_box.second));
  u0[3] = std::log(1e-1);
  u0.segment(4, n) = latents0.cwiseMax(lo.segment(4, n)).cwiseMin(hi.segment(4, n));

  struct Unpacked {
    TPState core;  // absolute units, with the concentrated scale plugged in
    LatentNoiseModel latent;
  };
  const double total = design.total();
  auto unpack = [&](const Eigen::VectorXd& u) {
    Unpacked up;
    up.latent = make_latent_noise_model(config.family, std::exp(u[2]), std::exp(u[3]),
                                        design.times, design.counts, u.segment(4, n));
    const double alpha = 2.0 + std::exp(u[0]);
    TPState unit;
    unit.family = config.family;
    unit.dof = alpha;
    unit.lengthscale = std::exp(u[1]);
    unit.scale = 1.0;
    unit.noise = up.latent.predict_log(design.times).array().exp();
    const double q = tp_parts(unit, design).beta;
    const double scale = alpha * q / (total * (alpha - 2.0));
    up.core = unit;
    up.core.scale = scale;
    up.core.noise = scale * unit.noise;
    return up;
  };
  // Same degenerate-ridge wall as the Gaussian heteroskedastic fitter: the
  // concentrated latent scale must stay near the data-anchored magnitude.
  const double init_latent_scale =
      make_latent_noise_model(config.family, std::exp(u0[2]), std::exp(u0[3]), design.times,
                              design.counts, u0.segment(4, n))
          .latent_scale;
  const double latent_scale_wall = std::max(0.05 * init_latent_scale, 1e-6);

  auto objective = [&](const Eigen::VectorXd& u) -> double {
    try {
      Unpacked up = unpack(u);
      if (up.latent.latent_scale < latent_scale_wall) return kInf;
      return -(hettp_loglik(up.core, design) + latent_loglik(up.latent));
    } catch (const Error&) {
      return kInf;
    }
  };

  // Analytic blocks for the dof, the mean lengthscale and the latents; the
  // concentrated scale is a stationary point, so its indirect contributions
  // vanish and the partial derivatives are the totals. Finite differences
  // cover the latent-kernel pair.
  auto gradient = [&](const Eigen::VectorXd& u) -> Eigen::VectorXd {
    Eigen::VectorXd g(dim);
    Unpacked up;
    TPGradient core_grad;
    try {
      up = unpack(u);
      if (up.latent.latent_scale < latent_scale_wall) {
        g.setZero();
        return g;
      }
      core_grad = hettp_loglik_grad(up.core, design);
    } catch (const Error&) {
      g.setZero();
      return g;
    }
    g[0] = -core_grad.dof * std::exp(u[0]);
    g[1] = -core_grad.lengthscale * up.core.lengthscale;

    // d loglik / d latents = M^T (dL/dlambda .* lambda) + latent prior part,
    // M the smoothing matrix taking latents to log noise.
    const Eigen::MatrixXd cross = correlation_matrix(config.family, up.latent.lengthscale,
                                                     design.times, design.times);
    const Eigen::MatrixXd smooth_t = [&] {
      Eigen::MatrixXd c = cross;
      for (int i = 0; i < n; ++i) {
        c(i, i) += up.latent.nugget / design.counts[static_cast<std::size_t>(i)] + kJitter;
      }
      return factorize_spd(c, 1.0, 0.0, kJitter).solve(cross);
    }();
    const Eigen::VectorXd chain = core_grad.noise.cwiseProduct(up.core.noise);
    Eigen::VectorXd latent_grad = smooth_t * chain;
    if (up.latent.latent_scale > kLatentScaleFloor) {
      latent_grad -= up.latent.weights / up.latent.latent_scale;
    }
    g.segment(4, n) = -latent_grad;

    // Latent-kernel hyperparameters by central differences on the objective.
    for (Eigen::Index k = 2; k <= 3; ++k) {
      const double h = 1e-5 * std::max(1.0, std::abs(u[k]));
      Eigen::VectorXd up_v = u, dn_v = u;
      up_v[k] = std::min(u[k] + h, hi[k]);
      dn_v[k] = std::max(u[k] - h, lo[k]);
      g[k] = (objective(up_v) - objective(dn_v)) / (up_v[k] - dn_v[k]);
    }
    return g;
  };

  LbfgsOptions opt;
  opt.max_iterations = std::max(config.max_iterations, 50 * n);
  opt.rel_f_tolerance = config.rel_tolerance;
  OptimResult run = minimize_lbfgs_box(objective, gradient, u0, lo, hi, opt);
  // Fresh-history restart polishes flat directions (the dof in particular).
  OptimResult polish = minimize_lbfgs_box(objective, gradient, run.x, lo, hi, opt);
  if (polish.value <= run.value) run = polish;
  if (!std::isfinite(run.value)) {
    std::ostringstream msg;
    msg << "fit_hettp failed: " << run.message << "; best objective " << run.value;
    throw OptimizationFailureError(msg.str());
  }
  const Eigen::VectorXd& u = run.x;
  const Unpacked best = unpack(u);
  return make_hettp_fit(config.family, best.core.dof, best.core.lengthscale, best.core.scale,
                        std::exp(u[2]), std::exp(u[3]), u.segment(4, n), design);
}

PredictiveDistribution hettp_predict(const HetTPFit& fit, std::span<const double> grid,
                                     bool include_noise) {
  PredictiveDistribution pred;
  pred.grid.assign(grid.begin(), grid.end());
  pred.dof = fit.dof_posterior();
  const auto g = static_cast<Eigen::Index>(grid.size());
  if (g == 0) {
    pred.mean = Eigen::VectorXd(0);
    pred.covariance = Eigen::MatrixXd(0, 0);
    pred.noise_variance = Eigen::VectorXd(0);
    return pred;
  }
  const double total = fit.design.total();
  const double factor = (fit.dof + fit.beta - 2.0) / (fit.dof + total - 2.0);
  const Eigen::MatrixXd cross =
      fit.scale * correlation_matrix(fit.family, fit.mean_lengthscale, grid, fit.design.times);
  pred.mean = cross * fit.alpha;
  const Eigen::MatrixXd w = fit.chol.forward(cross.transpose());
  pred.covariance =
      factor * (fit.scale * correlation_matrix(fit.family, fit.mean_lengthscale, grid, grid) -
                w.transpose() * w);
  pred.noise_variance =
      (fit.noise_model.predict_log(grid).array().exp() * fit.scale).matrix();
  if (include_noise) {
    pred.covariance.diagonal() += pred.noise_variance;
    pred.noise_included = true;
  }
  return pred;
}

double hettp_noise_predict(const HetTPFit& fit, double t) {
  return fit.scale * std::exp(fit.noise_model.predict_log(t));
}

}  // namespace spfit
