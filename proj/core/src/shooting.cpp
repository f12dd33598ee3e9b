#include "spfit/shooting.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "spfit/errors.hpp"
#include "spfit/linalg.hpp"
#include "spfit/optim.hpp"
#include "spfit/rng.hpp"
#include "spfit/stats.hpp"

namespace spfit {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double default_step(const ODEModel& model, double requested) {
  if (requested > 0.0) return requested;
  return (model.time_span[1] - model.time_span[0]) / 2048.0;
}

bool feasible(const ODEModel& model, std::span<const double> params) {
  for (Eigen::Index i = 0; i < model.lower_bounds.size(); ++i) {
    const auto k = static_cast<std::size_t>(i);
    if (!(params[k] >= model.lower_bounds[i]) || !(params[k] <= model.upper_bounds[i])) {
      return false;
    }
  }
  return true;
}

}  // namespace

double shooting_objective(const ODEModel& model, std::span<const double> params,
                          const SamplePath& path, double ode_step) {
  if (path.grid.empty()) {
    throw InvalidArgumentError("shooting_objective: empty path grid");
  }
  if (path.values.cols() != model.series) {
    throw InvalidArgumentError("shooting_objective: path series count does not match the model");
  }
  try {
    const Eigen::VectorXd y0 = model.initial_state(params);
    const Trajectory traj = rk4_solve(model, params, y0, model.time_span[0], model.time_span[1],
                                      default_step(model, ode_step));
    const Eigen::MatrixXd observed = observe(model, traj, path.grid);
    const double sse = (observed - path.values).squaredNorm();
    if (!std::isfinite(sse)) return kInf;
    return sse / static_cast<double>(path.grid.size());
  } catch (const BlowUpError&) {
    return kInf;
  } catch (const SingularityError&) {
    return kInf;
  }
}

ShootingResult estimate_one(const ODEModel& model, const SamplePath& path,
                            std::span<const double> p0, const OptimizerConfig& config) {
  const auto dim = static_cast<Eigen::Index>(model.param_names.size());
  if (static_cast<Eigen::Index>(p0.size()) != dim) {
    throw InvalidArgumentError("estimate_one: start point dimension mismatch");
  }
  if (!feasible(model, p0)) {
    std::ostringstream msg;
    msg << "estimate_one: start point outside the feasible box";
    throw InvalidArgumentError(msg.str());
  }

  auto objective = [&](const Eigen::VectorXd& z) -> double {
    Eigen::VectorXd p = z.array().exp();
    if (!p.allFinite() ||
        !feasible(model, {p.data(), static_cast<std::size_t>(p.size())})) {
      return kInf;
    }
    return shooting_objective(model, {p.data(), static_cast<std::size_t>(p.size())}, path,
                              config.ode_step);
  };

  Eigen::VectorXd z0(dim);
  for (Eigen::Index i = 0; i < dim; ++i) z0[i] = std::log(p0[static_cast<std::size_t>(i)]);

  NelderMeadOptions options;
  options.max_iterations = config.max_iterations;
  options.rel_diameter_tolerance = config.simplex_tolerance;
  options.initial_step = config.initial_step;
  options.objective_floor = config.objective_floor;
  const OptimResult run = nelder_mead(objective, z0, options);

  ShootingResult result;
  result.parameters = run.x.array().exp();
  result.objective = run.value;
  result.iterations = run.iterations;
  result.converged = run.converged && std::isfinite(run.value);
  return result;
}

PosteriorEnsemble estimate_ensemble(const ODEModel& model, const std::vector<SamplePath>& paths,
                                    const EnsembleConfig& config) {
  if (paths.empty()) {
    throw InvalidArgumentError("estimate_ensemble: need at least one path");
  }
  const auto dim = static_cast<Eigen::Index>(model.param_names.size());
  const std::vector<double> start_lo =
      config.optimizer.start_lo.empty()
          ? std::vector<double>(model.lower_bounds.data(), model.lower_bounds.data() + dim)
          : config.optimizer.start_lo;
  const std::vector<double> start_hi =
      config.optimizer.start_hi.empty()
          ? std::vector<double>(model.upper_bounds.data(), model.upper_bounds.data() + dim)
          : config.optimizer.start_hi;
  if (static_cast<Eigen::Index>(start_lo.size()) != dim ||
      static_cast<Eigen::Index>(start_hi.size()) != dim) {
    throw InvalidArgumentError("estimate_ensemble: start box dimension mismatch");
  }
  if (!config.p0.empty() && static_cast<Eigen::Index>(config.p0.size()) != dim) {
    throw InvalidArgumentError("estimate_ensemble: p0 dimension mismatch");
  }
  const int extra_starts =
      std::max(0, config.optimizer.multistarts - (config.p0.empty() ? 0 : 1));
  if (config.p0.empty() && extra_starts == 0) {
    throw InvalidArgumentError("estimate_ensemble: no start policy (empty p0, no multistarts)");
  }

  PosteriorEnsemble ensemble;
  ensemble.results.resize(paths.size());

  parallel_for(paths.size(), config.threads, [&](std::size_t j) {
    // Per-path substream: the start draws depend only on (seed, path index).
    std::mt19937_64 rng = substream(config.optimizer.seed, j, stream::kStart);
    std::uniform_real_distribution<double> uniform(0.0, 1.0);

    ShootingResult best;
    best.objective = kInf;
    bool have = false;
    auto consider = [&](std::span<const double> start) {
      ShootingResult run = estimate_one(model, paths[j], start, config.optimizer);
      run.path_index = static_cast<std::int64_t>(j);
      if (!have || run.objective < best.objective ||
          (run.objective == best.objective && run.converged && !best.converged)) {
        best = run;
        have = true;
      }
    };

    if (!config.p0.empty()) consider(config.p0);
    for (int s = 0; s < extra_starts; ++s) {
      std::vector<double> start(static_cast<std::size_t>(dim));
      for (Eigen::Index i = 0; i < dim; ++i) {
        const auto k = static_cast<std::size_t>(i);
        const double lo = std::log(start_lo[k]);
        const double hi = std::log(start_hi[k]);
        start[k] = std::exp(lo + (hi - lo) * uniform(rng));
      }
      consider(start);
    }
    ensemble.results[j] = best;
  });

  std::vector<std::vector<double>> converged_params(static_cast<std::size_t>(dim));
  for (const auto& r : ensemble.results) {
    if (!r.converged) {
      ++ensemble.failures;
      continue;
    }
    for (Eigen::Index i = 0; i < dim; ++i) {
      converged_params[static_cast<std::size_t>(i)].push_back(r.parameters[i]);
    }
  }
  if (2 * ensemble.failures > static_cast<int>(paths.size())) {
    std::ostringstream msg;
    msg << "estimate_ensemble: " << ensemble.failures << " of " << paths.size()
        << " inversions failed to converge";
    throw EnsembleQualityError(msg.str());
  }

  ensemble.quantiles.resize(dim, static_cast<Eigen::Index>(ensemble.probs.size()));
  for (Eigen::Index i = 0; i < dim; ++i) {
    for (std::size_t q = 0; q < ensemble.probs.size(); ++q) {
      ensemble.quantiles(i, static_cast<Eigen::Index>(q)) =
          quantile(converged_params[static_cast<std::size_t>(i)], ensemble.probs[q]);
    }
  }
  return ensemble;
}

}  // namespace spfit
