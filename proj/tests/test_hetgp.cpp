#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "helpers.hpp"
#include "spfit/errors.hpp"
#include "spfit/gp.hpp"
#include "spfit/hetgp.hpp"

using namespace spfit;
using spfit_test::FullData;

namespace {

HetGPState random_state(std::mt19937_64& rng, int n) {
  std::uniform_real_distribution<double> theta(0.6, 2.0);
  std::uniform_real_distribution<double> nugget(0.05, 0.5);
  std::normal_distribution<double> latent(0.0, 0.8);
  HetGPState state;
  state.mean_lengthscale = theta(rng);
  state.noise_lengthscale = theta(rng);
  state.nugget = nugget(rng);
  state.latents.resize(n);
  for (int i = 0; i < n; ++i) state.latents[i] = latent(rng);
  return state;
}

/// Literal dense transcription of the smoothing, variance MLE and the
/// concentrated joint likelihood, written independently of the library path.
struct Transcription {
  Eigen::VectorXd log_noise;
  double nu_hat = 0.0;
  double joint = 0.0;
};

Transcription transcribe(const HetGPState& state, const ReplicatedDesign& design,
                         const FullData& full) {
  const int n = design.size();
  const auto total = static_cast<Eigen::Index>(full.times.size());

  Eigen::MatrixXd c_g =
      correlation_matrix(state.family, state.noise_lengthscale, design.times, design.times);
  Eigen::MatrixXd smoother = c_g;
  for (int i = 0; i < n; ++i) {
    smoother(i, i) += state.nugget / design.counts[static_cast<std::size_t>(i)] + kJitter;
  }
  Transcription out;
  const Eigen::VectorXd weights = smoother.llt().solve(state.latents);
  out.log_noise = c_g * weights;

  // Full-N covariance of the mean process at unit scale.
  const KernelSpec unit{state.family, state.mean_lengthscale, 1.0};
  Eigen::VectorXd obs_noise(total);
  for (Eigen::Index r = 0; r < total; ++r) {
    obs_noise[r] = std::exp(out.log_noise[full.location[static_cast<std::size_t>(r)]]) + kJitter;
  }
  const Eigen::MatrixXd cov_unit = spfit_test::naive_covariance(unit, full, obs_noise);
  out.nu_hat = full.values.dot(cov_unit.llt().solve(full.values)) / static_cast<double>(total);

  const double nu_g =
      std::max(state.latents.dot(weights) / static_cast<double>(n), kLatentScaleFloor);
  out.joint = spfit_test::naive_mvn_loglik(out.nu_hat * cov_unit, full.values) +
              spfit_test::naive_mvn_loglik(nu_g * smoother, state.latents);
  return out;
}

}  // namespace

TEST_SUITE("hetgp") {

TEST_CASE("variance MLE: zero data gives zero") {
  std::mt19937_64 rng(61);
  FullData full;
  ReplicatedDesign d = spfit_test::random_design(rng, 5, 3, &full);
  std::vector<Observation> zeros;
  for (int i = 0; i < d.size(); ++i) {
    for (int r = 0; r < d.counts[static_cast<std::size_t>(i)]; ++r) {
      zeros.push_back({d.times[static_cast<std::size_t>(i)], 0.0});
    }
  }
  const ReplicatedDesign zero_design = build_design(zeros);
  const HetGPState state = random_state(rng, zero_design.size());
  CHECK(hetgp_nu_hat(state, zero_design) == doctest::Approx(0.0));
}

TEST_CASE("variance MLE: replicate-free limit keeps only the quadratic form") {
  // All counts of one: the within-replicate scatter term vanishes.
  std::mt19937_64 rng(67);
  std::vector<Observation> obs{{0.0, 1.2}, {1.0, -0.4}, {2.3, 0.8}, {3.1, 0.1}};
  const ReplicatedDesign d = build_design(obs);
  const HetGPState state = random_state(rng, d.size());
  const Eigen::VectorXd log_noise = hetgp_smooth_log_noise(state, d);

  Eigen::MatrixXd k = correlation_matrix(state.family, state.mean_lengthscale, d.times, d.times);
  for (int i = 0; i < d.size(); ++i) k(i, i) += std::exp(log_noise[i]) + kJitter;
  const Eigen::VectorXd mean = d.means_vector();
  const double expected = mean.dot(k.llt().solve(mean)) / d.total();
  CHECK(hetgp_nu_hat(state, d) == doctest::Approx(expected).epsilon(1e-10));
}

TEST_CASE("variance MLE matches a dense transcription on random designs") {
  std::mt19937_64 rng(71);
  for (int trial = 0; trial < 10; ++trial) {
    FullData full;
    const ReplicatedDesign d = spfit_test::random_design(rng, 4, 4, &full);
    const HetGPState state = random_state(rng, d.size());
    const Transcription t = transcribe(state, d, full);
    CHECK(hetgp_nu_hat(state, d) == doctest::Approx(t.nu_hat).epsilon(1e-8));
  }
}

TEST_CASE("concentrated variance is a stationary point of the unconcentrated likelihood") {
  // The two-level normalization the display typography suggests is not
  // stationary; the single-level normalization is.
  std::mt19937_64 rng(73);
  FullData full;
  const ReplicatedDesign d = spfit_test::random_design(rng, 5, 4, &full);
  const HetGPState state = random_state(rng, d.size());
  const Transcription t = transcribe(state, d, full);

  const KernelSpec unit{state.family, state.mean_lengthscale, 1.0};
  Eigen::VectorXd obs_noise(full.values.size());
  for (Eigen::Index r = 0; r < full.values.size(); ++r) {
    obs_noise[r] = std::exp(t.log_noise[full.location[static_cast<std::size_t>(r)]]) + kJitter;
  }
  const Eigen::MatrixXd cov_unit = spfit_test::naive_covariance(unit, full, obs_noise);
  auto profiled = [&](double nu) {
    return spfit_test::naive_mvn_loglik(nu * cov_unit, full.values);
  };
  const double h = 1e-6 * t.nu_hat;
  const double slope_at_mle = (profiled(t.nu_hat + h) - profiled(t.nu_hat - h)) / (2.0 * h);
  CHECK(std::abs(slope_at_mle) * t.nu_hat < 1e-4 * d.total());

  const double doubly_normalized = t.nu_hat / d.total();  // the rejected reading
  const double h2 = 1e-6 * doubly_normalized;
  const double slope_rejected =
      (profiled(doubly_normalized + h2) - profiled(doubly_normalized - h2)) / (2.0 * h2);
  CHECK(std::abs(slope_rejected) * doubly_normalized > 1.0);
}

TEST_CASE("joint likelihood equals the dense two-process density") {
  std::mt19937_64 rng(79);
  for (int trial = 0; trial < 10; ++trial) {
    FullData full;
    const ReplicatedDesign d = spfit_test::random_design(rng, 6, 4, &full);
    const HetGPState state = random_state(rng, d.size());
    const Transcription t = transcribe(state, d, full);
    CHECK(hetgp_joint_loglik(state, d) == doctest::Approx(t.joint).epsilon(1e-8));
  }
}

TEST_CASE("joint likelihood is invariant to input row order") {
  std::mt19937_64 rng(83);
  std::vector<Observation> obs{{0.0, 1.0}, {0.0, 1.4}, {1.0, -0.2}, {2.0, 0.7}, {2.0, 0.9}};
  const ReplicatedDesign a = build_design(obs);
  std::shuffle(obs.begin(), obs.end(), rng);
  const ReplicatedDesign b = build_design(obs);
  const HetGPState state = random_state(rng, a.size());
  CHECK(hetgp_joint_loglik(state, a) == hetgp_joint_loglik(state, b));
}

TEST_CASE("joint likelihood stays finite over the latent domain") {
  std::mt19937_64 rng(89);
  FullData full;
  const ReplicatedDesign d = spfit_test::random_design(rng, 5, 3, &full);
  HetGPState state = random_state(rng, d.size());
  for (double shift : {-8.0, -2.0, 0.0, 2.0, 8.0}) {
    HetGPState s = state;
    s.latents.array() += shift;
    CHECK(std::isfinite(hetgp_joint_loglik(s, d)));
  }
  HetGPState zero = state;
  zero.latents.setZero();  // hits the concentrated-scale floor
  CHECK(std::isfinite(hetgp_joint_loglik(zero, d)));
}

TEST_CASE("homoskedastic reduction: constant noise matches the plain process") {
  std::mt19937_64 rng(97);
  FullData full;
  const ReplicatedDesign d = spfit_test::random_design(rng, 6, 4, &full);
  HetGPState state;
  state.mean_lengthscale = 1.1;
  state.noise_lengthscale = 1.0;
  state.nugget = 1e-8;  // smoothing is then essentially the identity
  state.latents = Eigen::VectorXd::Constant(d.size(), std::log(0.3));
  const HetGPFit fit = make_hetgp_fit(state, d);

  const GPFit plain = make_gp_fit({state.family, state.mean_lengthscale, fit.scale},
                                  fit.scale * 0.3, d);
  const std::vector<double> grid{0.2, 1.1, 2.7, 4.0};
  const PredictiveDistribution a = hetgp_predict(fit, grid);
  const PredictiveDistribution b = gp_predict(plain, grid);
  CHECK((a.mean - b.mean).cwiseAbs().maxCoeff() < 1e-6 * (1.0 + b.mean.cwiseAbs().maxCoeff()));
  CHECK((a.covariance - b.covariance).cwiseAbs().maxCoeff() <
        1e-6 * (1.0 + b.covariance.cwiseAbs().maxCoeff()));
}

TEST_CASE("interpolation in the vanishing-noise limit") {
  std::mt19937_64 rng(101);
  FullData full;
  const ReplicatedDesign d = spfit_test::random_design(rng, 6, 3, &full);
  HetGPState state;
  state.mean_lengthscale = 1.0;
  state.noise_lengthscale = 1.0;
  state.nugget = 1e-8;
  state.latents = Eigen::VectorXd::Constant(d.size(), -30.0);
  const HetGPFit fit = make_hetgp_fit(state, d);
  const PredictiveDistribution pred = hetgp_predict(fit, d.times);
  for (int i = 0; i < d.size(); ++i) {
    CHECK(pred.mean[i] ==
          doctest::Approx(d.means[static_cast<std::size_t>(i)]).epsilon(1e-5));
  }
}

TEST_CASE("predictive variance bounded by the process scale") {
  std::mt19937_64 rng(103);
  FullData full;
  const ReplicatedDesign d = spfit_test::random_design(rng, 6, 4, &full);
  const HetGPState state = random_state(rng, d.size());
  const HetGPFit fit = make_hetgp_fit(state, d);
  std::uniform_real_distribution<double> pick(-1.0, d.times.back() + 2.0);
  for (int i = 0; i < 30; ++i) {
    const double t = pick(rng);
    const std::vector<double> grid{t};
    const PredictiveDistribution pred = hetgp_predict(fit, grid);
    CHECK(pred.covariance(0, 0) >= -1e-10);
    CHECK(pred.covariance(0, 0) <= fit.scale * (1.0 + 1e-8));
  }
}

TEST_CASE("noise prediction: design points, reversion, and a latent oracle") {
  std::mt19937_64 rng(107);
  FullData full;
  const ReplicatedDesign d = spfit_test::random_design(rng, 5, 3, &full);
  HetGPState state = random_state(rng, d.size());
  state.nugget = 1e-8;
  const HetGPFit fit = make_hetgp_fit(state, d);

  SUBCASE("nugget-free limit recovers the smoothed values at design points") {
    for (int i = 0; i < d.size(); ++i) {
      const double at_design = hetgp_noise_predict(fit, d.times[static_cast<std::size_t>(i)]);
      CHECK(at_design ==
            doctest::Approx(fit.scale * std::exp(fit.log_noise[i])).epsilon(1e-6));
    }
  }
  SUBCASE("far from the data the noise reverts to the process scale") {
    const double far = hetgp_noise_predict(fit, d.times.back() + 100.0);
    CHECK(far == doctest::Approx(fit.scale).epsilon(1e-9));
  }
  SUBCASE("between design points a dense latent prediction agrees") {
    const double t = 0.5 * (d.times[0] + d.times[1]);
    Eigen::MatrixXd c_g =
        correlation_matrix(state.family, state.noise_lengthscale, d.times, d.times);
    Eigen::MatrixXd smoother = c_g;
    for (int i = 0; i < d.size(); ++i) {
      smoother(i, i) += state.nugget / d.counts[static_cast<std::size_t>(i)] + kJitter;
    }
    const std::vector<double> at{t};
    const Eigen::MatrixXd cross =
        correlation_matrix(state.family, state.noise_lengthscale, at, d.times);
    const double log_noise = (cross * smoother.llt().solve(state.latents))(0, 0);
    CHECK(hetgp_noise_predict(fit, t) ==
          doctest::Approx(fit.scale * std::exp(log_noise)).epsilon(1e-9));
  }
}

TEST_CASE("fit on constant-noise data produces near-constant latent noise") {
  std::mt19937_64 rng(109);
  std::normal_distribution<double> noise(0.0, 0.3);
  std::vector<Observation> obs;
  for (int i = 0; i < 12; ++i) {
    const double t = 0.5 * i;
    const double level = std::sin(0.7 * t);
    for (int r = 0; r < 6; ++r) obs.push_back({t, level + noise(rng)});
  }
  const HetGPFit fit = fit_hetgp(build_design(obs));
  const double mean_log = fit.log_noise.mean();
  CHECK((fit.log_noise.array() - mean_log).abs().maxCoeff() < 1.0);
}

TEST_CASE("fit recovers a ramping noise profile") {
  // Noise variance ramps 0.01 -> 1 over [0, 1]; n=50 locations, 10 replicates.
  std::mt19937_64 rng(113);
  std::normal_distribution<double> z(0.0, 1.0);
  const int n = 50, reps = 10;
  std::vector<Observation> obs;
  std::vector<double> truth_var(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / (n - 1);
    const double var = 0.01 + (1.0 - 0.01) * t;
    truth_var[static_cast<std::size_t>(i)] = var;
    const double level = std::sin(4.0 * t);
    for (int r = 0; r < reps; ++r) obs.push_back({t, level + std::sqrt(var) * z(rng)});
  }
  const HetGPFit fit = fit_hetgp(build_design(obs));

  std::vector<double> fitted(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    fitted[static_cast<std::size_t>(i)] =
        hetgp_noise_predict(fit, static_cast<double>(i) / (n - 1));
  }
  // Pearson correlation between fitted and true noise profiles.
  double mx = 0, my = 0;
  for (int i = 0; i < n; ++i) {
    mx += truth_var[static_cast<std::size_t>(i)];
    my += fitted[static_cast<std::size_t>(i)];
  }
  mx /= n;
  my /= n;
  double sxy = 0, sxx = 0, syy = 0;
  for (int i = 0; i < n; ++i) {
    const double dx = truth_var[static_cast<std::size_t>(i)] - mx;
    const double dy = fitted[static_cast<std::size_t>(i)] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  CHECK(sxy / std::sqrt(sxx * syy) > 0.9);
}

TEST_CASE("fit requires at least three unique locations") {
  const ReplicatedDesign d = build_design({{0.0, 1.0}, {1.0, 2.0}});
  CHECK_THROWS_AS(fit_hetgp(d), InvalidArgumentError);
}

}  // TEST_SUITE
