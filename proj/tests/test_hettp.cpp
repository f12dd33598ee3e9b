#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "helpers.hpp"
#include "spfit/errors.hpp"
#include "spfit/gp.hpp"
#include "spfit/hetgp.hpp"
#include "spfit/hettp.hpp"

using namespace spfit;
using spfit_test::FullData;

namespace {

TPState random_tp_state(std::mt19937_64& rng, int n) {
  std::uniform_real_distribution<double> theta(0.6, 2.0);
  std::uniform_real_distribution<double> tau2(0.5, 3.0);
  std::uniform_real_distribution<double> dof(3.0, 50.0);
  std::uniform_real_distribution<double> lam(0.05, 2.0);
  TPState state;
  state.dof = dof(rng);
  state.lengthscale = theta(rng);
  state.scale = tau2(rng);
  state.noise.resize(n);
  for (int i = 0; i < n; ++i) state.noise[i] = lam(rng);
  return state;
}

Eigen::VectorXd per_observation_noise(const TPState& state, const FullData& full) {
  Eigen::VectorXd noise(full.values.size());
  for (Eigen::Index r = 0; r < noise.size(); ++r) {
    noise[r] = state.noise[full.location[static_cast<std::size_t>(r)]] + kJitter * state.scale;
  }
  return noise;
}

bool close_rel(double a, double b, double tol) {
  return std::abs(a - b) <= tol * std::max({std::abs(a), std::abs(b), 1e-9});
}

}  // namespace

TEST_SUITE("hettp") {

TEST_CASE("unique-n likelihood equals the dense full-N density") {
  std::mt19937_64 rng(127);
  for (int trial = 0; trial < 25; ++trial) {
    FullData full;
    const ReplicatedDesign d = spfit_test::random_design(rng, 6, 4, &full);
    const TPState state = random_tp_state(rng, d.size());
    const KernelSpec spec{state.family, state.lengthscale, state.scale};
    const Eigen::MatrixXd cov =
        spfit_test::naive_covariance(spec, full, per_observation_noise(state, full));
    const double naive = spfit_test::naive_tp_loglik(cov, full.values, state.dof);
    CHECK(hettp_loglik(state, d) == doctest::Approx(naive).epsilon(1e-8));
  }
}

TEST_CASE("huge dof recovers the Gaussian likelihood") {
  std::mt19937_64 rng(131);
  FullData full;
  const ReplicatedDesign d = spfit_test::random_design(rng, 6, 4, &full);
  TPState state = random_tp_state(rng, d.size());
  state.dof = 1e7;
  const KernelSpec spec{state.family, state.lengthscale, state.scale};
  const Eigen::MatrixXd cov =
      spfit_test::naive_covariance(spec, full, per_observation_noise(state, full));
  const double gaussian = spfit_test::naive_mvn_loglik(cov, full.values);
  CHECK(std::abs(hettp_loglik(state, d) - gaussian) < 1e-3);
}

TEST_CASE("zero data removes the data-dependent tail term") {
  std::mt19937_64 rng(137);
  std::vector<Observation> obs{{0.0, 0.0}, {0.0, 0.0}, {1.0, 0.0}, {2.2, 0.0}};
  const ReplicatedDesign d = build_design(obs);
  const TPState state = random_tp_state(rng, d.size());

  // Direct transcription without the tail term.
  const int n = d.size();
  const double total = d.total();
  Eigen::MatrixXd ups =
      state.scale * correlation_matrix(state.family, state.lengthscale, d.times, d.times);
  double logdet_extra = 0.0;
  for (int i = 0; i < n; ++i) {
    const auto k = static_cast<std::size_t>(i);
    const double lam = state.noise[i] + kJitter * state.scale;
    ups(i, i) += lam / d.counts[k];
    logdet_extra += (d.counts[k] - 1) * std::log(lam) + std::log(double(d.counts[k]));
  }
  const double logdet =
      2.0 * Eigen::MatrixXd(ups.llt().matrixL()).diagonal().array().log().sum();
  const double expected = -0.5 * total * std::log((state.dof - 2.0) * std::numbers::pi) -
                          0.5 * logdet - 0.5 * logdet_extra +
                          std::lgamma((state.dof + total) / 2.0) - std::lgamma(state.dof / 2.0);
  CHECK(hettp_loglik(state, d) == doctest::Approx(expected).epsilon(1e-10));
}

TEST_CASE("dof at the boundary is rejected") {
  const ReplicatedDesign d = build_design({{0.0, 1.0}, {1.0, 2.0}});
  TPState state;
  state.dof = 2.0;
  state.lengthscale = 1.0;
  state.scale = 1.0;
  state.noise = Eigen::VectorXd::Constant(2, 0.5);
  CHECK_THROWS_AS(hettp_loglik(state, d), InvalidDofError);
}

TEST_CASE("analytic gradient matches central finite differences at random states") {
  std::mt19937_64 rng(139);
  const double h = 1e-6;
  int checked = 0;
  for (int trial = 0; trial < 20; ++trial) {
    FullData full;
    const ReplicatedDesign d = spfit_test::random_design(rng, 6, 4, &full);
    const TPState state = random_tp_state(rng, d.size());
    const TPGradient grad = hettp_loglik_grad(state, d);

    auto fd = [&](auto&& bump) {
      TPState up = state, dn = state;
      bump(up, h);
      bump(dn, -h);
      return (hettp_loglik(up, d) - hettp_loglik(dn, d)) / (2.0 * h);
    };
    CHECK(close_rel(grad.dof, fd([](TPState& s, double e) { s.dof += e; }), 1e-4));
    CHECK(close_rel(grad.lengthscale, fd([](TPState& s, double e) { s.lengthscale += e; }),
                    1e-4));
    CHECK(close_rel(grad.scale, fd([](TPState& s, double e) { s.scale += e; }), 1e-4));
    for (int i = 0; i < d.size(); ++i) {
      CHECK(close_rel(grad.noise[i],
                      fd([i](TPState& s, double e) { s.noise[i] += e; }), 1e-4));
    }
    ++checked;
  }
  CHECK(checked == 20);
}

TEST_CASE("dof gradient is flat in the Gaussian limit") {
  std::mt19937_64 rng(149);
  FullData full;
  const ReplicatedDesign d = spfit_test::random_design(rng, 6, 4, &full);
  TPState state = random_tp_state(rng, d.size());
  state.dof = 1e7;
  const TPGradient grad = hettp_loglik_grad(state, d);
  CHECK(std::abs(grad.dof) < 1e-6);
}

TEST_CASE("quadratic form matches the dense full-N value and doubles quadratically") {
  std::mt19937_64 rng(151);
  FullData full;
  const ReplicatedDesign d = spfit_test::random_design(rng, 6, 4, &full);
  const TPState state = random_tp_state(rng, d.size());

  HetTPFit fit =
      make_hettp_fit(state.family, state.dof, state.lengthscale, state.scale, 1.0, 1e-8,
                     (state.noise.array() / state.scale).log(), d);
  const KernelSpec spec{state.family, state.lengthscale, state.scale};
  // The fit smooths log noise; with a tiny nugget the smoothed values sit on
  // the inputs, so the dense oracle can reuse them.
  Eigen::VectorXd obs_noise(full.values.size());
  for (Eigen::Index r = 0; r < obs_noise.size(); ++r) {
    obs_noise[r] =
        std::exp(fit.log_noise[full.location[static_cast<std::size_t>(r)]]) + kJitter * state.scale;
  }
  const Eigen::MatrixXd cov = spfit_test::naive_covariance(spec, full, obs_noise);
  const double beta_dense = full.values.dot(cov.llt().solve(full.values));
  CHECK(fit.beta == doctest::Approx(beta_dense).epsilon(1e-6));

  std::vector<Observation> doubled;
  for (int i = 0; i < d.size(); ++i) {
    for (double v : d.replicates[static_cast<std::size_t>(i)]) {
      doubled.push_back({d.times[static_cast<std::size_t>(i)], 2.0 * v});
    }
  }
  const HetTPFit fit2 = rebase_hettp(fit, build_design(doubled));
  CHECK(fit2.beta == doctest::Approx(4.0 * fit.beta).epsilon(1e-9));

  const std::vector<double> grid{0.4, 1.9};
  const PredictiveDistribution a = hettp_predict(fit, grid);
  const PredictiveDistribution b = hettp_predict(fit2, grid);
  CHECK((b.mean - 2.0 * a.mean).cwiseAbs().maxCoeff() < 1e-9 * (1.0 + a.mean.cwiseAbs().maxCoeff()));
  // Covariances relate through the tail factors built from beta and 4*beta.
  const double total = d.total();
  const double fa = (state.dof + fit.beta - 2.0) / (state.dof + total - 2.0);
  const double fb = (state.dof + 4.0 * fit.beta - 2.0) / (state.dof + total - 2.0);
  CHECK((b.covariance / fb - a.covariance / fa).cwiseAbs().maxCoeff() <
        1e-8 * (1.0 + a.covariance.cwiseAbs().maxCoeff()));
}

TEST_CASE("tail factor of one reproduces the Gaussian-form variance") {
  std::mt19937_64 rng(157);
  FullData full;
  const ReplicatedDesign d = spfit_test::random_design(rng, 5, 4, &full);
  TPState state = random_tp_state(rng, d.size());
  HetTPFit fit =
      make_hettp_fit(state.family, state.dof, state.lengthscale, state.scale, 1.0, 1e-8,
                     (state.noise.array() / state.scale).log(), d);
  // Rescale the data so the quadratic form equals N exactly.
  const double c = std::sqrt(d.total() / fit.beta);
  std::vector<Observation> scaled;
  for (int i = 0; i < d.size(); ++i) {
    for (double v : d.replicates[static_cast<std::size_t>(i)]) {
      scaled.push_back({d.times[static_cast<std::size_t>(i)], c * v});
    }
  }
  const HetTPFit unit = rebase_hettp(fit, build_design(scaled));
  CHECK(unit.beta == doctest::Approx(static_cast<double>(d.total())).epsilon(1e-9));

  const std::vector<double> grid{0.3, 1.2, 2.5};
  const PredictiveDistribution pred = hettp_predict(unit, grid);
  // Gaussian-form latent covariance computed directly.
  const Eigen::MatrixXd cross =
      unit.scale * correlation_matrix(unit.family, unit.mean_lengthscale, grid, d.times);
  const Eigen::MatrixXd w = unit.chol.forward(cross.transpose());
  const Eigen::MatrixXd gaussian_form =
      unit.scale * correlation_matrix(unit.family, unit.mean_lengthscale, grid, grid) -
      w.transpose() * w;
  CHECK((pred.covariance - gaussian_form).cwiseAbs().maxCoeff() <
        1e-9 * (1.0 + gaussian_form.cwiseAbs().maxCoeff()));
}

TEST_CASE("huge dof prediction matches the Gaussian heteroskedastic surrogate") {
  std::mt19937_64 rng(163);
  FullData full;
  const ReplicatedDesign d = spfit_test::random_design(rng, 6, 4, &full);
  HetGPState gp_state;
  gp_state.mean_lengthscale = 1.2;
  gp_state.noise_lengthscale = 1.0;
  gp_state.nugget = 1e-8;
  std::normal_distribution<double> latent(0.0, 0.6);
  gp_state.latents.resize(d.size());
  for (int i = 0; i < d.size(); ++i) gp_state.latents[i] = latent(rng);
  const HetGPFit gp_fit = make_hetgp_fit(gp_state, d);

  // Same covariance model: the TP scale is the concentrated process variance
  // and both latent noise models are relative, so the latents carry over.
  const HetTPFit tp_fit = make_hettp_fit(gp_state.family, 1e7, gp_state.mean_lengthscale,
                                         gp_fit.scale, gp_state.noise_lengthscale,
                                         gp_state.nugget, gp_state.latents, d);

  const std::vector<double> grid{0.1, 0.9, 1.7, 2.8, 4.0};
  const PredictiveDistribution a = hettp_predict(tp_fit, grid);
  const PredictiveDistribution b = hetgp_predict(gp_fit, grid);
  for (Eigen::Index i = 0; i < a.mean.size(); ++i) {
    CHECK(close_rel(a.mean[i], b.mean[i], 1e-5));
    CHECK(close_rel(a.covariance(i, i), b.covariance(i, i), 1e-3));
  }
  CHECK(a.dof.has_value());
  CHECK(*a.dof == doctest::Approx(1e7 + d.total()));
}

TEST_CASE("monotone tail effect: larger quadratic form widens every variance") {
  std::mt19937_64 rng(167);
  FullData full;
  const ReplicatedDesign d = spfit_test::random_design(rng, 5, 4, &full);
  const TPState state = random_tp_state(rng, d.size());
  HetTPFit fit =
      make_hettp_fit(state.family, state.dof, state.lengthscale, state.scale, 1.0, 1e-8,
                     (state.noise.array() / state.scale).log(), d);
  std::vector<Observation> scaled;
  for (int i = 0; i < d.size(); ++i) {
    for (double v : d.replicates[static_cast<std::size_t>(i)]) {
      scaled.push_back({d.times[static_cast<std::size_t>(i)], 3.0 * v});
    }
  }
  const HetTPFit wider = rebase_hettp(fit, build_design(scaled));
  CHECK(wider.beta > fit.beta);
  const std::vector<double> grid{0.3, 1.4, 2.6};
  const PredictiveDistribution a = hettp_predict(fit, grid);
  const PredictiveDistribution b = hettp_predict(wider, grid);
  for (Eigen::Index i = 0; i < a.mean.size(); ++i) {
    CHECK(b.covariance(i, i) > a.covariance(i, i));
  }
}

TEST_CASE("fit on Gaussian data reports heavy dof; outliers lower it") {
  std::mt19937_64 rng(173);
  std::normal_distribution<double> z(0.0, 1.0);
  std::vector<Observation> clean;
  for (int i = 0; i < 10; ++i) {
    const double t = 0.6 * i;
    const double level = std::cos(0.5 * t);
    for (int r = 0; r < 6; ++r) clean.push_back({t, level + 0.3 * z(rng)});
  }
  FitConfig config;
  config.max_iterations = 400;
  const HetTPFit gaussian_fit = fit_hettp(build_design(clean), config);
  CHECK(gaussian_fit.dof > 30.0);

  // Corrupt 10% of the rows with gross outliers.
  std::vector<Observation> dirty = clean;
  std::uniform_int_distribution<std::size_t> pick(0, dirty.size() - 1);
  for (std::size_t k = 0; k < dirty.size() / 10; ++k) {
    dirty[pick(rng)].value += (k % 2 ? 6.0 : -6.0);
  }
  const HetTPFit outlier_fit = fit_hettp(build_design(dirty), config);
  CHECK(outlier_fit.dof < gaussian_fit.dof);
}

TEST_CASE("fitted state is near-stationary in the smooth hyperparameters") {
  std::mt19937_64 rng(179);
  std::normal_distribution<double> z(0.0, 1.0);
  std::vector<Observation> obs;
  for (int i = 0; i < 8; ++i) {
    const double t = 0.7 * i;
    for (int r = 0; r < 5; ++r) obs.push_back({t, std::sin(t) + 0.25 * z(rng)});
  }
  const ReplicatedDesign d = build_design(obs);
  FitConfig config;
  config.max_iterations = 800;
  config.rel_tolerance = 1e-12;
  const HetTPFit fit = fit_hettp(d, config);

  TPState state{fit.family, fit.dof, fit.mean_lengthscale, fit.scale,
                fit.log_noise.array().exp()};
  const TPGradient grad = hettp_loglik_grad(state, d);
  const double scale_ref = 1.0 + std::abs(fit.log_likelihood);
  // Interior coordinates of the joint objective have near-zero gradients;
  // the dof may sit at its upper bound when the data are effectively Gaussian.
  CHECK(std::abs(grad.lengthscale * fit.mean_lengthscale) < 1e-3 * scale_ref);
  CHECK(std::abs(grad.scale * fit.scale) < 1e-3 * scale_ref);
}

}  // TEST_SUITE
