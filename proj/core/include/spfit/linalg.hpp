#pragma once

#include <functional>

#include <Eigen/Dense>

namespace spfit {

/// Cholesky factor of a symmetric positive (semi-)definite matrix, together
/// with the diagonal jitter that was required to factorize it.
struct Cholesky {
  Eigen::MatrixXd lower;
  double jitter = 0.0;

  double log_det() const;
  Eigen::VectorXd solve(const Eigen::VectorXd& b) const;
  Eigen::MatrixXd solve(const Eigen::MatrixXd& b) const;
  /// L^{-1} b, i.e. half of a full solve; useful for quadratic forms.
  Eigen::MatrixXd forward(const Eigen::MatrixXd& b) const;
};

/// Factorizes `m + jitter*scale*I`, escalating jitter from `jitter0` to
/// `jitter_max` (relative to `scale`) until the factorization succeeds.
/// Throws IllConditionedError when even the largest jitter fails, reporting
/// the smallest pivot encountered.
Cholesky factorize_spd(const Eigen::MatrixXd& m, double scale, double jitter0 = 1e-8,
                       double jitter_max = 1e-4);

/// Parallel loop over [0, count) with `threads` workers (<=1 runs inline).
/// `fn` must write results only to caller-owned per-index slots; the first
/// exception thrown by any worker is rethrown after all workers join.
void parallel_for(std::size_t count, int threads, const std::function<void(std::size_t)>& fn);

}  // namespace spfit
