#include <cmath>
#include <map>
#include <sstream>

#include "spfit/errors.hpp"
#include "spfit/ode.hpp"

namespace spfit {

void lotka_volterra_rhs(double /*t*/, std::span<const double> y, std::span<const double> alpha,
                        std::span<double> dy) {
  dy[0] = -y[0] + alpha[0] * y[0] * y[1];
  dy[1] = y[1] - alpha[1] * y[0] * y[1];
}

void influenza_rhs(double /*t*/, std::span<const double> y, std::span<const double> params,
                   double kappa, std::span<double> dy) {
  const double target = y[0], eclipse = y[1], productive = y[2], virus = y[3];
  const double beta = params[0], rho = params[1], clearance = params[2], delta = params[3],
               half_sat = params[4];
  const double denom = half_sat + productive;
  if (denom < 1e-300 && denom > -1e-300) {
    std::ostringstream msg;
    msg << "influenza dynamics: density-dependent clearance denominator " << denom
        << " vanished (Kd=" << half_sat << ", I2=" << productive << ")";
    throw SingularityError(msg.str());
  }
  dy[0] = -beta * target * virus;
  dy[1] = beta * target * virus - kappa * eclipse;
  dy[2] = kappa * eclipse - delta * productive / denom;
  dy[3] = rho * productive - clearance * virus;
}

ODEModel make_lotka_volterra() {
  ODEModel model;
  model.name = "lotka-volterra";
  model.state_dim = 2;
  model.series = 2;
  model.param_names = {"alpha1", "alpha2", "y1_0", "y2_0"};
  model.rhs = [](double t, std::span<const double> y, std::span<const double> p,
                 std::span<double> dy) { lotka_volterra_rhs(t, y, p.first(2), dy); };
  model.initial_state = [](std::span<const double> p) {
    Eigen::VectorXd y0(2);
    y0 << p[2], p[3];
    return y0;
  };
  model.observe_fn = [](const ODEModel&, const Trajectory& traj, std::span<const double> grid) {
    Eigen::MatrixXd out(static_cast<Eigen::Index>(grid.size()), 2);
    for (std::size_t i = 0; i < grid.size(); ++i) {
      out.row(static_cast<Eigen::Index>(i)) = interpolate_state(traj, grid[i]);
    }
    return out;
  };
  model.lower_bounds = Eigen::VectorXd::Constant(4, 1e-6);
  model.upper_bounds = Eigen::VectorXd::Constant(4, 1e2);
  model.time_span = {0.0, 10.0};
  model.observed_span = {0.0, 10.0};
  return model;
}

ODEModel make_influenza_tiv(const InfluenzaConstants& constants) {
  ODEModel model;
  model.name = "influenza-tiv";
  model.state_dim = 4;
  model.series = 1;
  model.param_names = {"beta", "rho", "c", "delta", "Kd", "T0"};
  const double kappa = constants.kappa;
  model.rhs = [kappa](double t, std::span<const double> y, std::span<const double> p,
                      std::span<double> dy) { influenza_rhs(t, y, p.first(5), kappa, dy); };
  model.initial_state = [constants](std::span<const double> p) {
    Eigen::VectorXd y0(4);
    y0 << p[5], constants.infected_eclipse0, constants.infected_productive0, constants.virus0;
    return y0;
  };
  const double floor = constants.observation_floor;
  model.observe_fn = [floor](const ODEModel&, const Trajectory& traj,
                             std::span<const double> grid) {
    Eigen::MatrixXd out(static_cast<Eigen::Index>(grid.size()), 1);
    for (std::size_t i = 0; i < grid.size(); ++i) {
      const Eigen::VectorXd state = interpolate_state(traj, grid[i]);
      out(static_cast<Eigen::Index>(i), 0) = std::log10(std::max(state[3], floor));
    }
    return out;
  };
  model.lower_bounds = Eigen::VectorXd(6);
  model.lower_bounds << 1e-9, 1e-3, 1e-3, 1e-3, 1e-6, 1e-2;
  model.upper_bounds = Eigen::VectorXd(6);
  model.upper_bounds << 1.0, 1e7, 1e3, 1e4, 1e8, 1e10;
  model.time_span = {0.0, 11.0};
  model.observed_span = {1.0, 11.0};
  return model;
}

namespace {

std::map<std::string, std::function<ODEModel()>>& registry() {
  static std::map<std::string, std::function<ODEModel()>> models = {
      {"lotka-volterra", [] { return make_lotka_volterra(); }},
      {"influenza-tiv", [] { return make_influenza_tiv(); }},
  };
  return models;
}

}  // namespace

void register_model(const std::string& name, std::function<ODEModel()> factory) {
  registry()[name] = std::move(factory);
}

ODEModel make_model(const std::string& name) {
  const auto& models = registry();
  const auto it = models.find(name);
  if (it == models.end()) {
    throw InvalidArgumentError("unknown ODE model: " + name);
  }
  return it->second();
}

std::vector<std::string> registered_models() {
  std::vector<std::string> names;
  for (const auto& [name, factory] : registry()) names.push_back(name);
  return names;
}

}  // namespace spfit
