#include <cmath>
#include <cstring>

#include "doctest.h"
#include "spfit/errors.hpp"
#include "spfit/ode.hpp"
#include "spfit/shooting.hpp"

using namespace spfit;

namespace {

const std::vector<double> kTruth{1.0, 1.0, 2.0, 0.5};

SamplePath exact_path(const ODEModel& model, const std::vector<double>& p, int points) {
  const Eigen::VectorXd y0 = model.initial_state(p);
  const Trajectory traj = rk4_solve(model, p, y0, model.time_span[0], model.time_span[1],
                                    (model.time_span[1] - model.time_span[0]) / 2048.0);
  SamplePath path;
  path.grid.resize(static_cast<std::size_t>(points));
  for (int i = 0; i < points; ++i) {
    path.grid[static_cast<std::size_t>(i)] =
        model.time_span[0] +
        (model.time_span[1] - model.time_span[0]) * static_cast<double>(i) / (points - 1);
  }
  path.values = observe(model, traj, path.grid);
  return path;
}

}  // namespace

TEST_SUITE("shooting") {

TEST_CASE("self-residual is zero to solver tolerance") {
  const ODEModel model = make_lotka_volterra();
  const SamplePath path = exact_path(model, kTruth, 201);
  CHECK(shooting_objective(model, kTruth, path) < 1e-10);
}

TEST_CASE("constant offset shifts the objective by its square") {
  const ODEModel model = make_lotka_volterra();
  SamplePath path = exact_path(model, kTruth, 201);
  path.values.array() += 0.7;
  // Both observed series are offset, so the misfit is 2 * 0.7^2 per grid point.
  CHECK(shooting_objective(model, kTruth, path) ==
        doctest::Approx(2.0 * 0.49).epsilon(1e-8));
}

TEST_CASE("objective matches an independent residual summation") {
  const ODEModel model = make_lotka_volterra();
  const SamplePath path = exact_path(model, {1.1, 1.0, 2.0, 0.5}, 101);
  const std::vector<double> p{1.0, 1.0, 2.0, 0.5};
  const double value = shooting_objective(model, p, path);
  CHECK(value > 0.0);

  const Eigen::VectorXd y0 = model.initial_state(p);
  const Trajectory traj = rk4_solve(model, p, y0, 0.0, 10.0, 10.0 / 2048.0);
  const Eigen::MatrixXd obs = observe(model, traj, path.grid);
  double sse = 0.0;
  for (Eigen::Index i = 0; i < obs.rows(); ++i) {
    for (Eigen::Index s = 0; s < obs.cols(); ++s) {
      sse += std::pow(obs(i, s) - path.values(i, s), 2);
    }
  }
  CHECK(value == doctest::Approx(sse / static_cast<double>(path.grid.size())).epsilon(1e-12));
}

TEST_CASE("blow-up regions yield an infinite-objective sentinel") {
  const ODEModel model = make_influenza_tiv();
  SamplePath path;
  path.grid = {1.0, 6.0, 11.0};
  path.values = Eigen::MatrixXd::Zero(3, 1);
  const std::vector<double> wild{0.9, 9.9e6, 1e-3, 1e-3, 1e-6, 9.9e9};
  CHECK(shooting_objective(model, wild, path) ==
        std::numeric_limits<double>::infinity());
}

TEST_CASE("noise-free inversion recovers the generator") {
  const ODEModel model = make_lotka_volterra();
  const SamplePath path = exact_path(model, kTruth, 201);
  std::vector<double> start(4);
  for (int i = 0; i < 4; ++i) start[static_cast<std::size_t>(i)] = 1.2 * kTruth[static_cast<std::size_t>(i)];
  const ShootingResult result = estimate_one(model, path, start, {});
  CHECK(result.converged);
  for (int i = 0; i < 4; ++i) {
    CHECK(std::abs(result.parameters[i] - kTruth[static_cast<std::size_t>(i)]) /
              kTruth[static_cast<std::size_t>(i)] <
          1e-3);
  }
}

TEST_CASE("an already-converged start returns immediately") {
  const ODEModel model = make_lotka_volterra();
  const SamplePath path = exact_path(model, kTruth, 201);
  OptimizerConfig config;
  config.objective_floor = 1e-9;
  const ShootingResult result = estimate_one(model, path, kTruth, config);
  CHECK(result.converged);
  CHECK(result.iterations == 0);
  for (int i = 0; i < 4; ++i) {
    CHECK(result.parameters[i] == doctest::Approx(kTruth[static_cast<std::size_t>(i)]));
  }
}

TEST_CASE("infeasible start points are rejected") {
  const ODEModel model = make_lotka_volterra();
  const SamplePath path = exact_path(model, kTruth, 51);
  const std::vector<double> outside{1e9, 1.0, 2.0, 0.5};
  CHECK_THROWS_AS(estimate_one(model, path, outside, {}), InvalidArgumentError);
}

TEST_CASE("ensemble determinism across worker counts") {
  const ODEModel model = make_lotka_volterra();
  std::vector<SamplePath> paths;
  for (int j = 0; j < 8; ++j) {
    SamplePath p = exact_path(model, {1.0 + 0.01 * j, 1.0, 2.0, 0.5}, 101);
    p.seed = static_cast<std::uint64_t>(j);
    paths.push_back(std::move(p));
  }
  EnsembleConfig config;
  config.p0 = kTruth;
  config.optimizer.max_iterations = 400;

  config.threads = 1;
  const PosteriorEnsemble serial = estimate_ensemble(model, paths, config);
  config.threads = 8;
  const PosteriorEnsemble parallel = estimate_ensemble(model, paths, config);
  REQUIRE(serial.results.size() == parallel.results.size());
  for (std::size_t j = 0; j < serial.results.size(); ++j) {
    const auto& a = serial.results[j].parameters;
    const auto& b = parallel.results[j].parameters;
    CHECK(std::memcmp(a.data(), b.data(), sizeof(double) * static_cast<std::size_t>(a.size())) ==
          0);
    CHECK(serial.results[j].objective == parallel.results[j].objective);
  }
}

TEST_CASE("permuting paths permutes results identically") {
  const ODEModel model = make_lotka_volterra();
  std::vector<SamplePath> paths;
  for (int j = 0; j < 4; ++j) {
    paths.push_back(exact_path(model, {1.0 + 0.02 * j, 1.0, 2.0, 0.5}, 101));
  }
  EnsembleConfig config;
  config.p0 = kTruth;
  config.optimizer.max_iterations = 300;
  config.optimizer.multistarts = 1;
  config.threads = 1;
  const PosteriorEnsemble forward = estimate_ensemble(model, paths, config);
  std::vector<SamplePath> reversed(paths.rbegin(), paths.rend());
  const PosteriorEnsemble backward = estimate_ensemble(model, reversed, config);
  for (std::size_t j = 0; j < paths.size(); ++j) {
    CHECK(forward.results[j].parameters ==
          backward.results[paths.size() - 1 - j].parameters);
  }
}

TEST_CASE("feasibility of every returned estimate") {
  const ODEModel model = make_lotka_volterra();
  std::vector<SamplePath> paths{exact_path(model, {1.3, 0.8, 2.2, 0.6}, 101)};
  EnsembleConfig config;
  config.p0 = kTruth;
  const PosteriorEnsemble ensemble = estimate_ensemble(model, paths, config);
  for (const auto& r : ensemble.results) {
    for (Eigen::Index i = 0; i < r.parameters.size(); ++i) {
      CHECK(r.parameters[i] >= model.lower_bounds[i]);
      CHECK(r.parameters[i] <= model.upper_bounds[i]);
    }
  }
}

TEST_CASE("single-path ensemble wraps the single result") {
  const ODEModel model = make_lotka_volterra();
  std::vector<SamplePath> paths{exact_path(model, kTruth, 101)};
  EnsembleConfig config;
  config.p0 = kTruth;
  const PosteriorEnsemble ensemble = estimate_ensemble(model, paths, config);
  CHECK(ensemble.results.size() == 1);
  for (Eigen::Index i = 0; i < 4; ++i) {
    for (Eigen::Index q = 0; q < ensemble.quantiles.cols(); ++q) {
      CHECK(ensemble.quantiles(i, q) == doctest::Approx(ensemble.results[0].parameters[i]));
    }
  }
}

TEST_CASE("overwhelming non-convergence raises an ensemble-quality error") {
  const ODEModel model = make_lotka_volterra();
  std::vector<SamplePath> paths;
  for (int j = 0; j < 4; ++j) {
    paths.push_back(exact_path(model, {1.4, 0.7, 2.4, 0.4}, 101));
  }
  EnsembleConfig config;
  config.p0 = kTruth;
  config.optimizer.max_iterations = 1;  // cannot converge
  config.optimizer.objective_floor = 0.0;
  CHECK_THROWS_AS(estimate_ensemble(model, paths, config), EnsembleQualityError);
}

TEST_CASE("objective never increases from the start point for converged runs") {
  const ODEModel model = make_lotka_volterra();
  const SamplePath path = exact_path(model, {1.15, 0.9, 1.9, 0.55}, 101);
  const std::vector<double> p0{1.0, 1.0, 2.0, 0.5};
  const double at_start = shooting_objective(model, p0, path);
  const ShootingResult result = estimate_one(model, path, p0, {});
  CHECK(result.objective <= at_start);
}

}  // TEST_SUITE
