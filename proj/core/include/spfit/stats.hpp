#pragma once

#include <vector>

namespace spfit {

/// Linear-interpolation sample quantile (the common "type 7" rule).
double quantile(std::vector<double> values, double prob);

double sample_mean(const std::vector<double>& values);
double sample_variance(const std::vector<double>& values);  // unbiased
double excess_kurtosis(const std::vector<double>& values);

/// Silverman's rule-of-thumb kernel bandwidth with a positive floor so
/// degenerate (constant) samples stay usable.
double silverman_bandwidth(const std::vector<double>& values);

struct KdeCurve {
  std::vector<double> grid;
  std::vector<double> density;
};

/// Gaussian-kernel density estimate on an automatic grid.
KdeCurve kde_curve(const std::vector<double>& values, int grid_points = 256);

double normal_cdf(double z);
double normal_quantile(double p);
double student_t_cdf(double x, double dof);
double student_t_quantile(double p, double dof);

}  // namespace spfit
