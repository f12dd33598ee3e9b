#pragma once

#include <span>
#include <string>

#include <Eigen/Dense>

namespace spfit {

enum class KernelFamily { kSquaredExponential, kMatern52 };

KernelFamily kernel_family_from_string(const std::string& name);
std::string to_string(KernelFamily family);

/// Stationary covariance kernel k(t, t') = scale * c((t - t') / lengthscale),
/// with c a correlation form satisfying c(0) = 1 and |c(h)| <= 1.
struct KernelSpec {
  KernelFamily family = KernelFamily::kSquaredExponential;
  double lengthscale = 1.0;
  double scale = 1.0;

  void validate() const;  // throws InvalidHyperparameterError
};

/// Correlation form at (already lengthscale-normalized) lag h.
double correlation(KernelFamily family, double h);

double kernel_eval(const KernelSpec& spec, double t, double t2);

/// Matrix with element (i, j) = kernel_eval(spec, rows[i], cols[j]).
/// Throws EmptyInputError on empty inputs.
Eigen::MatrixXd kernel_matrix(const KernelSpec& spec, std::span<const double> rows,
                              std::span<const double> cols);

/// Unit-scale correlation matrix c((rows_i - cols_j) / lengthscale).
Eigen::MatrixXd correlation_matrix(KernelFamily family, double lengthscale,
                                   std::span<const double> rows, std::span<const double> cols);

/// Elementwise derivative of correlation_matrix with respect to the lengthscale.
Eigen::MatrixXd correlation_matrix_dlengthscale(KernelFamily family, double lengthscale,
                                                std::span<const double> rows,
                                                std::span<const double> cols);

}  // namespace spfit
