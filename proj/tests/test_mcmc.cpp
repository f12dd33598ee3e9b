#include <cmath>

#include "doctest.h"
#include "spfit/mcmc.hpp"
#include "spfit/ode.hpp"
#include "spfit/stats.hpp"

using namespace spfit;

namespace {

const std::vector<double> kTruth{1.0, 1.0, 2.0, 0.5};

std::vector<ReplicatedDesign> noise_free_data(const ODEModel& model, int points) {
  const Eigen::VectorXd y0 = model.initial_state(kTruth);
  const Trajectory traj = rk4_solve(model, kTruth, y0, 0.0, 10.0, 10.0 / 2048.0);
  std::vector<double> times(static_cast<std::size_t>(points));
  for (int j = 0; j < points; ++j) {
    times[static_cast<std::size_t>(j)] = 10.0 * static_cast<double>(j) / (points - 1);
  }
  const Eigen::MatrixXd observed = observe(model, traj, times);
  std::vector<ReplicatedDesign> designs;
  for (int s = 0; s < model.series; ++s) {
    std::vector<Observation> obs;
    for (int j = 0; j < points; ++j) {
      obs.push_back({times[static_cast<std::size_t>(j)], observed(j, s)});
    }
    designs.push_back(build_design(obs));
  }
  return designs;
}

McmcConfig lv_config() {
  McmcConfig config;
  config.prior_lo = Eigen::VectorXd::Zero(4);
  config.prior_hi = Eigen::VectorXd::Constant(4, 10.0);
  config.start = Eigen::Map<const Eigen::VectorXd>(kTruth.data(), 4);
  config.n_burn = 200;
  config.n_keep = 200;
  config.seed = 7;
  config.ode_step = 10.0 / 2048.0;  // same solve as the test data generator
  return config;
}

}  // namespace

TEST_SUITE("mcmc") {

TEST_CASE("log posterior: box, optimum, and ordering") {
  const ODEModel model = make_lotka_volterra();
  const auto data = noise_free_data(model, 20);
  const McmcConfig config = lv_config();

  const std::vector<double> outside{-1.0, 1.0, 2.0, 0.5};
  CHECK(log_posterior(model, data, outside, config) ==
        -std::numeric_limits<double>::infinity());

  // Noise-free data generated at the truth: the posterior peaks at zero.
  const double at_truth = log_posterior(model, data, kTruth, config);
  CHECK(at_truth == doctest::Approx(0.0).epsilon(1e-8));

  const std::vector<double> off{2.0, 2.0, 2.0, 0.5};
  CHECK(at_truth > log_posterior(model, data, off, config));
}

TEST_CASE("vanishing proposals freeze the chain with full acceptance") {
  const ODEModel model = make_lotka_volterra();
  const auto data = noise_free_data(model, 10);
  McmcConfig config = lv_config();
  config.proposal_sd = 1e-12;
  const McmcResult result = metropolis_run(model, data, config);
  CHECK(result.acceptance_rate > 0.99);
  for (Eigen::Index i = 0; i < result.samples.rows(); ++i) {
    for (int p = 0; p < 4; ++p) {
      CHECK(result.samples(i, p) == doctest::Approx(kTruth[static_cast<std::size_t>(p)])
                                        .epsilon(1e-6));
    }
  }
}

TEST_CASE("flat target fills the box uniformly") {
  McmcConfig config;
  config.prior_lo = Eigen::VectorXd::Zero(1);
  config.prior_hi = Eigen::VectorXd::Ones(1);
  config.start = Eigen::VectorXd::Constant(1, 0.5);
  config.proposal_sd = 0.35;
  config.n_burn = 2000;
  config.n_keep = 100000;
  config.seed = 11;
  const McmcResult result =
      metropolis_run([](std::span<const double>) { return 0.0; }, config);

  std::vector<double> draws(static_cast<std::size_t>(result.samples.rows()));
  for (Eigen::Index i = 0; i < result.samples.rows(); ++i) {
    draws[static_cast<std::size_t>(i)] = result.samples(i, 0);
  }
  std::sort(draws.begin(), draws.end());
  double ks = 0.0;
  const double n = static_cast<double>(draws.size());
  for (std::size_t i = 0; i < draws.size(); ++i) {
    ks = std::max(ks, std::abs(draws[i] - static_cast<double>(i) / n));
    ks = std::max(ks, std::abs(draws[i] - static_cast<double>(i + 1) / n));
  }
  CHECK(ks < 0.02);
}

TEST_CASE("quadratic target reproduces its closed-form moments") {
  // One-dimensional Gaussian with sd 0.5, well inside a wide box.
  McmcConfig config;
  config.prior_lo = Eigen::VectorXd::Constant(1, -50.0);
  config.prior_hi = Eigen::VectorXd::Constant(1, 50.0);
  config.start = Eigen::VectorXd::Zero(1);
  config.proposal_sd = 0.8;
  config.n_burn = 2000;
  config.n_keep = 50000;
  config.seed = 13;
  const double sd = 0.5;
  const McmcResult result = metropolis_run(
      [&](std::span<const double> p) { return -0.5 * p[0] * p[0] / (sd * sd); }, config);

  std::vector<double> draws(static_cast<std::size_t>(result.samples.rows()));
  for (Eigen::Index i = 0; i < result.samples.rows(); ++i) {
    draws[static_cast<std::size_t>(i)] = result.samples(i, 0);
  }
  // Monte Carlo standard errors padded for chain autocorrelation.
  const double n_eff = static_cast<double>(draws.size()) / 10.0;
  CHECK(std::abs(sample_mean(draws)) < 3.0 * sd / std::sqrt(n_eff));
  CHECK(std::abs(sample_variance(draws) - sd * sd) < 3.0 * sd * sd * std::sqrt(2.0 / n_eff));
}

TEST_CASE("chain states stay inside the prior box") {
  const ODEModel model = make_lotka_volterra();
  const auto data = noise_free_data(model, 10);
  McmcConfig config = lv_config();
  config.proposal_sd = 2.0;  // aggressive proposals probe the edges
  config.n_burn = 500;
  config.n_keep = 500;
  const McmcResult result = metropolis_run(model, data, config);
  CHECK(result.samples.minCoeff() >= 0.0);
  CHECK(result.samples.maxCoeff() <= 10.0);
}

TEST_CASE("fixed seeds reproduce the chain bitwise") {
  const ODEModel model = make_lotka_volterra();
  const auto data = noise_free_data(model, 10);
  const McmcConfig config = lv_config();
  const McmcResult a = metropolis_run(model, data, config);
  const McmcResult b = metropolis_run(model, data, config);
  CHECK(a.samples == b.samples);
  CHECK(a.acceptance_rate == b.acceptance_rate);
}

TEST_CASE("configuration validation") {
  McmcConfig config = lv_config();
  config.start[0] = 20.0;
  CHECK_THROWS(config.validate());
  config = lv_config();
  config.prior_hi[1] = config.prior_lo[1];
  CHECK_THROWS(config.validate());
  config = lv_config();
  config.n_keep = 0;
  CHECK_THROWS(config.validate());
}

}  // TEST_SUITE
