#include "spfit/gp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>
#include <vector>

#include "spfit/errors.hpp"
#include "spfit/optim.hpp"

namespace spfit {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

/// Averaged-data covariance: kernel matrix at the unique times plus
/// per-location noise (v + kJitter * scale) / a_i on the diagonal.
Eigen::MatrixXd averaged_covariance(const KernelSpec& kernel, double noise_variance,
                                    const ReplicatedDesign& design) {
  Eigen::MatrixXd k = kernel_matrix(kernel, design.times, design.times);
  const double v_eff = noise_variance + kJitter * kernel.scale;
  for (int i = 0; i < design.size(); ++i) {
    k(i, i) += v_eff / design.counts[static_cast<std::size_t>(i)];
  }
  return k;
}

void validate_noise(double v) {
  if (v < 0.0 || !std::isfinite(v)) {
    std::ostringstream msg;
    msg << "noise variance must be nonnegative finite, got " << v;
    throw InvalidHyperparameterError(msg.str());
  }
}

}  // namespace

double gp_loglik(const KernelSpec& kernel, double noise_variance,
                 const ReplicatedDesign& design) {
  kernel.validate();
  validate_noise(noise_variance);
  const int n = design.size();
  if (n == 0) return 0.0;
  const int total = design.total();
  const double v_eff = noise_variance + kJitter * kernel.scale;

  Eigen::MatrixXd k = averaged_covariance(kernel, noise_variance, design);
  Cholesky chol = factorize_spd(k, kernel.scale, 0.0, kJitter);
  const Eigen::VectorXd mean = design.means_vector();
  const Eigen::VectorXd alpha = chol.solve(mean);

  double log_det = chol.log_det();
  double quad = mean.dot(alpha);
  for (int i = 0; i < n; ++i) {
    const auto idx = static_cast<std::size_t>(i);
    const int a = design.counts[idx];
    log_det += (a - 1) * std::log(v_eff) + std::log(static_cast<double>(a));
    if (a >= 2) quad += design.deviation_ss(i) / v_eff;
  }
  return -0.5 * (total * std::log(2.0 * std::numbers::pi) + log_det + quad);
}

GPFit make_gp_fit(const KernelSpec& kernel, double noise_variance, ReplicatedDesign design) {
  kernel.validate();
  validate_noise(noise_variance);
  GPFit fit;
  fit.kernel = kernel;
  fit.noise_variance = noise_variance;
  fit.design = std::move(design);
  if (fit.design.size() > 0) {
    Eigen::MatrixXd k = averaged_covariance(kernel, noise_variance, fit.design);
    fit.chol = factorize_spd(k, kernel.scale, 0.0, kJitter);
    fit.alpha = fit.chol.solve(fit.design.means_vector());
    fit.log_likelihood = gp_loglik(kernel, noise_variance, fit.design);
  }
  return fit;
}

GPFit fit_gp(const ReplicatedDesign& design, const FitConfig& config) {
  if (design.size() < 2) {
    throw InvalidArgumentError("fit_gp: need at least two unique design points");
  }

  // Data-driven default hyperparameter box.
  double dt_min = kInf;
  for (int i = 1; i < design.size(); ++i) {
    dt_min = std::min(dt_min, design.times[static_cast<std::size_t>(i)] -
                                  design.times[static_cast<std::size_t>(i - 1)]);
  }
  const double range = design.times.back() - design.times.front();
  double sum = 0.0, sum_sq = 0.0;
  int total = 0;
  for (const auto& reps : design.replicates) {
    for (double v : reps) {
      sum += v;
      sum_sq += v * v;
      ++total;
    }
  }
  const double mean_all = sum / total;
  const double var_all = std::max(0.0, sum_sq / total - mean_all * mean_all);
  const double second_moment = sum_sq / total;
  const double scale_ref = std::max({var_all, second_moment, 1e-12});
  const double v_ref = std::max(var_all, 1e-10 * scale_ref);

  auto theta_box = config.lengthscale_bounds.value_or(std::make_pair(dt_min / 2.0, 2.0 * range));
  auto scale_box =
      config.scale_bounds.value_or(std::make_pair(1e-6 * scale_ref, 1e3 * scale_ref));
  auto noise_box = config.noise_bounds.value_or(std::make_pair(1e-8 * v_ref, v_ref));

  Eigen::VectorXd lo(3), hi(3);
  lo << std::log(theta_box.first), std::log(scale_box.first), std::log(noise_box.first);
  hi << std::log(theta_box.second), std::log(scale_box.second), std::log(noise_box.second);

  auto objective = [&](const Eigen::VectorXd& u) -> double {
    KernelSpec kernel{config.family, std::exp(u[0]), std::exp(u[1])};
    const double v = std::exp(u[2]);
    try {
      return -gp_loglik(kernel, v, design);
    } catch (const Error&) {
      return kInf;
    }
  };

  LbfgsOptions opt;
  opt.max_iterations = config.max_iterations;
  opt.rel_f_tolerance = config.rel_tolerance;

  bool any_success = false;
  double best = kInf;
  Eigen::VectorXd best_u;
  std::vector<std::string> failures;
  const int starts = std::max(1, config.starts);
  for (int s = 0; s < starts; ++s) {
    const double frac = (s + 0.5) / starts;
    Eigen::VectorXd u0(3);
    u0[0] = lo[0] + frac * (hi[0] - lo[0]);
    u0[1] = std::log(scale_ref);
    u0[2] = lo[2] + (1.0 - frac) * (hi[2] - lo[2]);
    u0 = u0.cwiseMax(lo).cwiseMin(hi);

    OptimResult run = minimize_lbfgs_box(objective, nullptr, u0, lo, hi, opt);
    if (std::isfinite(run.value)) {
      any_success = true;
      if (run.value < best) {
        best = run.value;
        best_u = run.x;
      }
    } else {
      failures.push_back(run.message);
    }
  }
  if (!any_success) {
    std::ostringstream msg;
    msg << "fit_gp: all " << starts << " starts failed";
    for (const auto& m : failures) msg << "; " << m;
    throw OptimizationFailureError(msg.str());
  }

  KernelSpec kernel{config.family, std::exp(best_u[0]), std::exp(best_u[1])};
  return make_gp_fit(kernel, std::exp(best_u[2]), design);
}

PredictiveDistribution gp_predict(const GPFit& fit, std::span<const double> grid,
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
  pred.noise_variance = Eigen::VectorXd::Constant(g, fit.noise_variance);
  if (fit.design.size() == 0) {
    // Prior predictive.
    pred.mean = Eigen::VectorXd::Zero(g);
    pred.covariance = kernel_matrix(fit.kernel, grid, grid);
  } else {
    const Eigen::MatrixXd cross = kernel_matrix(fit.kernel, grid, fit.design.times);
    pred.mean = cross * fit.alpha;
    const Eigen::MatrixXd w = fit.chol.forward(cross.transpose());
    pred.covariance = kernel_matrix(fit.kernel, grid, grid) - w.transpose() * w;
  }
  if (include_noise) {
    pred.covariance.diagonal() += pred.noise_variance;
    pred.noise_included = true;
  }
  return pred;
}

}  // namespace spfit
