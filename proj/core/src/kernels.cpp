#include "spfit/kernels.hpp"

#include <cmath>
#include <sstream>

#include "spfit/errors.hpp"

namespace spfit {

namespace {

constexpr double kSqrt5 = 2.2360679774997896964091736687747;

double correlation_dh(KernelFamily family, double h) {
  // d c / d h at h >= 0 (both forms are even in h).
  switch (family) {
    case KernelFamily::kSquaredExponential:
      return -2.0 * h * std::exp(-h * h);
    case KernelFamily::kMatern52: {
      const double a = kSqrt5 * h;
      return -(5.0 * h / 3.0) * (1.0 + a) * std::exp(-a);
    }
  }
  return 0.0;
}

}  // namespace

KernelFamily kernel_family_from_string(const std::string& name) {
  if (name == "squared-exponential" || name == "se" || name == "gaussian") {
    return KernelFamily::kSquaredExponential;
  }
  if (name == "matern-5/2" || name == "matern52") {
    return KernelFamily::kMatern52;
  }
  throw InvalidArgumentError("unknown kernel family: " + name);
}

std::string to_string(KernelFamily family) {
  switch (family) {
    case KernelFamily::kSquaredExponential:
      return "squared-exponential";
    case KernelFamily::kMatern52:
      return "matern-5/2";
  }
  return "?";
}

void KernelSpec::validate() const {
  if (!(lengthscale > 0.0) || !std::isfinite(lengthscale) || !(scale > 0.0) ||
      !std::isfinite(scale)) {
    std::ostringstream msg;
    msg << "kernel hyperparameters must be positive finite: lengthscale=" << lengthscale
        << ", scale=" << scale;
    throw InvalidHyperparameterError(msg.str());
  }
}

double correlation(KernelFamily family, double h) {
  h = std::abs(h);
  switch (family) {
    case KernelFamily::kSquaredExponential:
      return std::exp(-h * h);
    case KernelFamily::kMatern52: {
      const double a = kSqrt5 * h;
      return (1.0 + a + 5.0 * h * h / 3.0) * std::exp(-a);
    }
  }
  return 0.0;
}

double kernel_eval(const KernelSpec& spec, double t, double t2) {
  spec.validate();
  return spec.scale * correlation(spec.family, (t - t2) / spec.lengthscale);
}

Eigen::MatrixXd kernel_matrix(const KernelSpec& spec, std::span<const double> rows,
                              std::span<const double> cols) {
  spec.validate();
  if (rows.empty() || cols.empty()) {
    throw EmptyInputError("kernel_matrix: empty input location list");
  }
  return spec.scale * correlation_matrix(spec.family, spec.lengthscale, rows, cols);
}

Eigen::MatrixXd correlation_matrix(KernelFamily family, double lengthscale,
                                   std::span<const double> rows, std::span<const double> cols) {
  Eigen::MatrixXd out(rows.size(), cols.size());
  for (std::size_t j = 0; j < cols.size(); ++j) {
    for (std::size_t i = 0; i < rows.size(); ++i) {
      out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          correlation(family, (rows[i] - cols[j]) / lengthscale);
    }
  }
  return out;
}

Eigen::MatrixXd correlation_matrix_dlengthscale(KernelFamily family, double lengthscale,
                                                std::span<const double> rows,
                                                std::span<const double> cols) {
  // dc/dtheta = -(h / theta) * dc/dh with h = |t - t'| / theta.
  Eigen::MatrixXd out(rows.size(), cols.size());
  for (std::size_t j = 0; j < cols.size(); ++j) {
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const double h = std::abs(rows[i] - cols[j]) / lengthscale;
      out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          -(h / lengthscale) * correlation_dh(family, h);
    }
  }
  return out;
}

}  // namespace spfit
