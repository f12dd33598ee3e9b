#include "spfit/mcmc.hpp"

#include <cmath>
#include <limits>
#include <random>

#include "spfit/errors.hpp"
#include "spfit/rng.hpp"

namespace spfit {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

}  // namespace

void McmcConfig::validate() const {
  const Eigen::Index dim = prior_lo.size();
  if (dim == 0 || prior_hi.size() != dim || start.size() != dim) {
    throw InvalidArgumentError("mcmc config: prior bounds / start dimension mismatch");
  }
  for (Eigen::Index i = 0; i < dim; ++i) {
    if (!(prior_lo[i] < prior_hi[i])) {
      throw InvalidArgumentError("mcmc config: prior_lo must be below prior_hi");
    }
    if (!(start[i] >= prior_lo[i]) || !(start[i] <= prior_hi[i])) {
      throw InvalidArgumentError("mcmc config: start outside the prior box");
    }
  }
  if (n_burn < 1 || n_keep < 1) {
    throw InvalidArgumentError("mcmc config: iteration counts must be positive");
  }
  if (!(proposal_sd > 0.0)) {
    throw InvalidArgumentError("mcmc config: proposal_sd must be positive");
  }
}

double log_posterior(const ODEModel& model, const std::vector<ReplicatedDesign>& data,
                     std::span<const double> params, const McmcConfig& config) {
  for (Eigen::Index i = 0; i < config.prior_lo.size(); ++i) {
    const auto k = static_cast<std::size_t>(i);
    if (!(params[k] >= config.prior_lo[i]) || !(params[k] <= config.prior_hi[i])) {
      return kNegInf;
    }
  }
  if (static_cast<int>(data.size()) != model.series) {
    throw InvalidArgumentError("log_posterior: one design per observed series required");
  }
  const double step = config.ode_step > 0.0
                          ? config.ode_step
                          : (model.time_span[1] - model.time_span[0]) / 512.0;
  try {
    const Eigen::VectorXd y0 = model.initial_state(params);
    const Trajectory traj =
        rk4_solve(model, params, y0, model.time_span[0], model.time_span[1], step);
    double sse = 0.0;
    for (int s = 0; s < model.series; ++s) {
      const auto& design = data[static_cast<std::size_t>(s)];
      const Eigen::MatrixXd observed = observe(model, traj, design.times);
      for (int i = 0; i < design.size(); ++i) {
        const double fit_value = observed(i, s);
        for (double d : design.replicates[static_cast<std::size_t>(i)]) {
          sse += (fit_value - d) * (fit_value - d);
        }
      }
    }
    if (!std::isfinite(sse)) return kNegInf;
    return -0.5 * sse;
  } catch (const BlowUpError&) {
    return kNegInf;
  } catch (const SingularityError&) {
    return kNegInf;
  }
}

McmcResult metropolis_run(const ODEModel& model, const std::vector<ReplicatedDesign>& data,
                          const McmcConfig& config) {
  return metropolis_run(
      [&](std::span<const double> p) { return log_posterior(model, data, p, config); }, config);
}

McmcResult metropolis_run(const std::function<double(std::span<const double>)>& log_target,
                          const McmcConfig& config) {
  config.validate();
  const Eigen::Index dim = config.start.size();
  std::mt19937_64 rng = substream(config.seed, 0, stream::kMcmc);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);

  auto boxed = [&](const Eigen::VectorXd& p) -> double {
    for (Eigen::Index i = 0; i < dim; ++i) {
      if (!(p[i] >= config.prior_lo[i]) || !(p[i] <= config.prior_hi[i])) return kNegInf;
    }
    return log_target({p.data(), static_cast<std::size_t>(dim)});
  };

  Eigen::VectorXd current = config.start;
  double current_lp = boxed(current);

  McmcResult result;
  result.samples.resize(config.n_keep, dim);
  long accepted = 0, accepted_burn = 0;
  const long total = static_cast<long>(config.n_burn) + config.n_keep;
  Eigen::VectorXd proposal(dim);
  for (long iter = 0; iter < total; ++iter) {
    for (Eigen::Index i = 0; i < dim; ++i) {
      proposal[i] = current[i] + config.proposal_sd * normal(rng);
    }
    const double lp = boxed(proposal);
    const double log_u = std::log(std::max(uniform(rng), 1e-300));
    if (lp - current_lp > log_u) {
      current = proposal;
      current_lp = lp;
      ++accepted;
      if (iter < config.n_burn) ++accepted_burn;
    }
    if (iter >= config.n_burn) {
      result.samples.row(iter - config.n_burn) = current;
    }
  }
  result.acceptance_rate = static_cast<double>(accepted) / static_cast<double>(total);
  const double burn_rate = static_cast<double>(accepted_burn) / config.n_burn;
  result.mixing_warning = burn_rate < 1e-3;
  return result;
}

}  // namespace spfit
