#include "spfit/stats.hpp"

#include <algorithm>
#include <cmath>

#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>

#include "spfit/errors.hpp"

namespace spfit {

double quantile(std::vector<double> values, double prob) {
  if (values.empty()) {
    throw EmptyInputError("quantile: empty sample");
  }
  if (!(prob >= 0.0 && prob <= 1.0)) {
    throw InvalidArgumentError("quantile: probability outside [0, 1]");
  }
  std::sort(values.begin(), values.end());
  const double h = prob * (static_cast<double>(values.size()) - 1.0);
  const auto lo = static_cast<std::size_t>(h);
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double w = h - static_cast<double>(lo);
  return (1.0 - w) * values[lo] + w * values[hi];
}

double sample_mean(const std::vector<double>& values) {
  if (values.empty()) throw EmptyInputError("sample_mean: empty sample");
  double sum = 0.0;
  for (double v : values) sum += v;
  return sum / static_cast<double>(values.size());
}

double sample_variance(const std::vector<double>& values) {
  if (values.size() < 2) throw EmptyInputError("sample_variance: need two values");
  const double mean = sample_mean(values);
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return ss / (static_cast<double>(values.size()) - 1.0);
}

double excess_kurtosis(const std::vector<double>& values) {
  const double mean = sample_mean(values);
  double m2 = 0.0, m4 = 0.0;
  for (double v : values) {
    const double d = v - mean;
    m2 += d * d;
    m4 += d * d * d * d;
  }
  const double n = static_cast<double>(values.size());
  m2 /= n;
  m4 /= n;
  return m4 / (m2 * m2) - 3.0;
}

double silverman_bandwidth(const std::vector<double>& values) {
  const double n = static_cast<double>(values.size());
  double sd = values.size() >= 2 ? std::sqrt(sample_variance(values)) : 0.0;
  const double iqr = quantile(values, 0.75) - quantile(values, 0.25);
  double spread = sd;
  if (iqr > 0.0) spread = std::min(spread > 0.0 ? spread : iqr, iqr / 1.34);
  double bw = 0.9 * spread * std::pow(n, -0.2);
  const double scale = std::abs(sample_mean(values));
  const double floor = std::max(1e-12, 1e-9 * std::max(1.0, scale));
  return std::max(bw, floor);
}

KdeCurve kde_curve(const std::vector<double>& values, int grid_points) {
  if (values.empty()) throw EmptyInputError("kde_curve: empty sample");
  const double bw = silverman_bandwidth(values);
  const auto [min_it, max_it] = std::minmax_element(values.begin(), values.end());
  const double lo = *min_it - 3.0 * bw;
  const double hi = *max_it + 3.0 * bw;
  KdeCurve curve;
  curve.grid.resize(static_cast<std::size_t>(grid_points));
  curve.density.resize(static_cast<std::size_t>(grid_points));
  const double inv = 1.0 / (bw * std::sqrt(2.0 * M_PI) * static_cast<double>(values.size()));
  for (int i = 0; i < grid_points; ++i) {
    const double x = lo + (hi - lo) * i / std::max(1, grid_points - 1);
    double density = 0.0;
    for (double v : values) {
      const double z = (x - v) / bw;
      density += std::exp(-0.5 * z * z);
    }
    curve.grid[static_cast<std::size_t>(i)] = x;
    curve.density[static_cast<std::size_t>(i)] = density * inv;
  }
  return curve;
}

double normal_cdf(double z) {
  boost::math::normal_distribution<double> law(0.0, 1.0);
  return boost::math::cdf(law, z);
}

double normal_quantile(double p) {
  boost::math::normal_distribution<double> law(0.0, 1.0);
  return boost::math::quantile(law, p);
}

double student_t_cdf(double x, double dof) {
  boost::math::students_t_distribution<double> law(dof);
  return boost::math::cdf(law, x);
}

double student_t_quantile(double p, double dof) {
  boost::math::students_t_distribution<double> law(dof);
  return boost::math::quantile(law, p);
}

}  // namespace spfit
