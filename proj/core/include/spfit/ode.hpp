#pragma once

#include <array>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace spfit {

/// Fixed-step solution: `times` covers the requested span inclusively with a
/// uniform step (final step shortened when the span is not a multiple);
/// `states` holds one row per time.
struct Trajectory {
  std::vector<double> times;
  Eigen::MatrixXd states;
};

using RhsFn =
    std::function<void(double, std::span<const double>, std::span<const double>, std::span<double>)>;

/// A parameterized initial value problem plus the operator mapping its state
/// solution onto the observation space (one column per observed series).
struct ODEModel {
  std::string name;
  int state_dim = 0;
  int series = 1;
  std::vector<std::string> param_names;
  RhsFn rhs;
  std::function<Eigen::VectorXd(std::span<const double>)> initial_state;
  std::function<Eigen::MatrixXd(const ODEModel&, const Trajectory&, std::span<const double>)>
      observe_fn;
  Eigen::VectorXd lower_bounds;  // feasible parameter box
  Eigen::VectorXd upper_bounds;
  std::array<double, 2> time_span{0.0, 1.0};  // integration span
  std::array<double, 2> observed_span{0.0, 1.0};
};

/// Classical explicit Runge-Kutta 4 over [t0, t1]. Throws BlowUpError when a
/// non-finite state appears, reporting the time and parameters.
Trajectory rk4_solve(const ODEModel& model, std::span<const double> params,
                     const Eigen::VectorXd& y0, double t0, double t1, double step);

/// Predator-prey right-hand side: [-y1 + a1*y1*y2, y2 - a2*y1*y2].
void lotka_volterra_rhs(double t, std::span<const double> y, std::span<const double> alpha,
                        std::span<double> dy);

/// Within-host viral kinetics right-hand side over state [T, I1, I2, V] with
/// parameters [beta, rho, c, delta, Kd] and fixed eclipse rate kappa.
void influenza_rhs(double t, std::span<const double> y, std::span<const double> params,
                   double kappa, std::span<double> dy);

/// Maps the trajectory onto the model's observation space at the grid times
/// (linear interpolation between solver nodes). Throws ExtrapolationError
/// for grid points outside the trajectory span.
Eigen::MatrixXd observe(const ODEModel& model, const Trajectory& trajectory,
                        std::span<const double> grid);

/// Linear interpolation of all state columns at one time.
Eigen::VectorXd interpolate_state(const Trajectory& trajectory, double t);

ODEModel make_lotka_volterra();

struct InfluenzaConstants {
  double kappa = 4.0;  // eclipse-phase rate, 1/day
  double infected_eclipse0 = 10.0;
  double infected_productive0 = 0.02;
  double virus0 = 0.07;
  double observation_floor = 0.1;  // log10 plotting floor for the titer
};
ODEModel make_influenza_tiv(const InfluenzaConstants& constants = {});

/// Name-based model registry; "lotka-volterra" and "influenza-tiv" are
/// pre-registered, further models may be added through the library API.
void register_model(const std::string& name, std::function<ODEModel()> factory);
ODEModel make_model(const std::string& name);
std::vector<std::string> registered_models();

}  // namespace spfit
