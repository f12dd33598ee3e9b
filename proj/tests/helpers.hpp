#pragma once

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "spfit/gp.hpp"
#include "spfit/kernels.hpp"
#include "spfit/replicated_design.hpp"

namespace spfit_test {

/// Raw full-length data rows backing a replicated design.
struct FullData {
  std::vector<double> times;  // length N, duplicates included
  Eigen::VectorXd values;
  std::vector<int> location;  // unique-location index per row
};

inline spfit::ReplicatedDesign random_design(std::mt19937_64& rng, int max_n, int max_reps,
                                             FullData* full = nullptr) {
  std::uniform_int_distribution<int> n_dist(2, max_n);
  std::uniform_int_distribution<int> rep_dist(1, max_reps);
  std::uniform_real_distribution<double> gap(0.2, 1.0);
  std::normal_distribution<double> value(0.0, 1.0);

  const int n = n_dist(rng);
  std::vector<spfit::Observation> obs;
  FullData data;
  double t = 0.0;
  for (int i = 0; i < n; ++i) {
    t += gap(rng);
    const int reps = rep_dist(rng);
    for (int r = 0; r < reps; ++r) {
      const double v = value(rng);
      obs.push_back({t, v});
      data.times.push_back(t);
      data.location.push_back(i);
    }
  }
  data.values.resize(static_cast<Eigen::Index>(data.times.size()));
  for (std::size_t i = 0; i < obs.size(); ++i) data.values[static_cast<Eigen::Index>(i)] = obs[i].value;
  if (full) *full = data;
  return spfit::build_design(obs);
}

/// Dense N-by-N covariance with per-observation noise on the diagonal.
inline Eigen::MatrixXd naive_covariance(const spfit::KernelSpec& spec, const FullData& data,
                                        const Eigen::VectorXd& obs_noise) {
  const auto total = static_cast<Eigen::Index>(data.times.size());
  Eigen::MatrixXd k(total, total);
  for (Eigen::Index i = 0; i < total; ++i) {
    for (Eigen::Index j = 0; j < total; ++j) {
      k(i, j) = spfit::kernel_eval(spec, data.times[static_cast<std::size_t>(i)],
                                   data.times[static_cast<std::size_t>(j)]);
    }
    k(i, i) += obs_noise[i];
  }
  return k;
}

/// Zero-mean Gaussian log density via a dense factorization.
inline double naive_mvn_loglik(const Eigen::MatrixXd& cov, const Eigen::VectorXd& x) {
  const Eigen::LLT<Eigen::MatrixXd> llt(cov);
  const Eigen::VectorXd alpha = llt.solve(x);
  const double log_det = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
  return -0.5 * (static_cast<double>(x.size()) * std::log(2.0 * std::numbers::pi) + log_det +
                 x.dot(alpha));
}

/// Dense Student-t process log density (covariance parameterization).
inline double naive_tp_loglik(const Eigen::MatrixXd& cov, const Eigen::VectorXd& x, double dof) {
  const Eigen::LLT<Eigen::MatrixXd> llt(cov);
  const double n = static_cast<double>(x.size());
  const double beta = x.dot(llt.solve(x));
  const double log_det = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
  return -0.5 * n * std::log((dof - 2.0) * std::numbers::pi) - 0.5 * log_det +
         std::lgamma((dof + n) / 2.0) - std::lgamma(dof / 2.0) -
         0.5 * (dof + n) * std::log1p(beta / (dof - 2.0));
}

/// Homoskedastic per-observation noise vector including the library's
/// conditioning guard, so oracle and implementation describe one model.
inline Eigen::VectorXd effective_noise(double noise_variance, double kernel_scale,
                                       Eigen::Index total) {
  return Eigen::VectorXd::Constant(total, noise_variance + spfit::kJitter * kernel_scale);
}

}  // namespace spfit_test
