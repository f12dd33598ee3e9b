#pragma once

#include <functional>
#include <string>

#include <Eigen/Dense>

namespace spfit {

using ObjectiveFn = std::function<double(const Eigen::VectorXd&)>;
using GradientFn = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

struct OptimResult {
  Eigen::VectorXd x;
  double value = 0.0;
  int iterations = 0;
  int evaluations = 0;
  bool converged = false;
  std::string message;
};

struct LbfgsOptions {
  int max_iterations = 200;
  int history = 8;
  double grad_tolerance = 1e-6;
  double rel_f_tolerance = 1e-8;
  double fd_step = 1e-6;  // used when no analytic gradient is supplied
};

/// Minimizes f over the box [lo, hi] (entries may be +-inf) by limited-memory
/// BFGS with projected iterates and a backtracking Armijo line search. When
/// `grad` is empty a central finite-difference gradient is used.
OptimResult minimize_lbfgs_box(const ObjectiveFn& f, const GradientFn& grad,
                               Eigen::VectorXd x0, const Eigen::VectorXd& lo,
                               const Eigen::VectorXd& hi, const LbfgsOptions& options = {});

struct NelderMeadOptions {
  int max_iterations = 5000;
  double rel_diameter_tolerance = 1e-8;
  double initial_step = 0.25;       // absolute step in the search coordinates
  double objective_floor = -1e308;  // early exit when the best value falls below
};

/// Standard Nelder-Mead simplex search. The objective may return +inf to
/// reject a point. Convergence is declared when the simplex diameter shrinks
/// below rel_diameter_tolerance relative to the best vertex.
OptimResult nelder_mead(const ObjectiveFn& f, const Eigen::VectorXd& x0,
                        const NelderMeadOptions& options = {});

/// Golden-section minimum of a one-dimensional function on [lo, hi];
/// used to polish nearly-flat coordinates after a quasi-Newton run.
double golden_section(const std::function<double(double)>& f, double lo, double hi,
                      int iterations = 80);

}  // namespace spfit
