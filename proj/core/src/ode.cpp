#include "spfit/ode.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "spfit/errors.hpp"

namespace spfit {

namespace {

void check_finite(const Eigen::VectorXd& y, double t, std::span<const double> params) {
  if (y.allFinite()) return;
  std::ostringstream msg;
  msg << "ODE state became non-finite at t=" << t << " with parameters [";
  for (std::size_t i = 0; i < params.size(); ++i) {
    msg << (i ? ", " : "") << params[i];
  }
  msg << "]";
  throw BlowUpError(msg.str());
}

}  // namespace

Trajectory rk4_solve(const ODEModel& model, std::span<const double> params,
                     const Eigen::VectorXd& y0, double t0, double t1, double step) {
  if (!(step > 0.0) || !(t1 > t0)) {
    throw InvalidArgumentError("rk4_solve: need step > 0 and t1 > t0");
  }
  const double span = t1 - t0;
  const auto whole = static_cast<std::size_t>(span / step + 1e-9);
  const bool partial = t0 + static_cast<double>(whole) * step < t1 - 1e-12 * span;
  const std::size_t steps = whole + (partial ? 1 : 0);

  Trajectory out;
  out.times.resize(steps + 1);
  out.states.resize(static_cast<Eigen::Index>(steps + 1), model.state_dim);
  out.times[0] = t0;
  out.states.row(0) = y0;

  Eigen::VectorXd y = y0;
  Eigen::VectorXd k1(model.state_dim), k2(model.state_dim), k3(model.state_dim),
      k4(model.state_dim), work(model.state_dim);
  auto eval = [&](double t, const Eigen::VectorXd& state, Eigen::VectorXd& dy) {
    model.rhs(t, {state.data(), static_cast<std::size_t>(state.size())}, params,
              {dy.data(), static_cast<std::size_t>(dy.size())});
  };

  double t = t0;
  for (std::size_t i = 0; i < steps; ++i) {
    const double h = std::min(step, t1 - t);
    eval(t, y, k1);
    work = y + 0.5 * h * k1;
    eval(t + 0.5 * h, work, k2);
    work = y + 0.5 * h * k2;
    eval(t + 0.5 * h, work, k3);
    work = y + h * k3;
    eval(t + h, work, k4);
    y += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    t = (i + 1 == steps) ? t1 : t0 + static_cast<double>(i + 1) * step;
    check_finite(y, t, params);
    out.times[i + 1] = t;
    out.states.row(static_cast<Eigen::Index>(i + 1)) = y;
  }
  return out;
}

Eigen::VectorXd interpolate_state(const Trajectory& trajectory, double t) {
  const auto& times = trajectory.times;
  const double t0 = times.front();
  const double t1 = times.back();
  const double slack = 1e-9 * std::max(1.0, std::abs(t1 - t0));
  if (t < t0 - slack || t > t1 + slack) {
    std::ostringstream msg;
    msg << "grid point " << t << " outside the trajectory span [" << t0 << ", " << t1 << "]";
    throw ExtrapolationError(msg.str());
  }
  const double tc = std::clamp(t, t0, t1);
  const auto upper = std::upper_bound(times.begin(), times.end(), tc);
  std::size_t hi = std::min<std::size_t>(
      static_cast<std::size_t>(upper - times.begin()), times.size() - 1);
  if (hi == 0) hi = 1;
  const std::size_t lo = hi - 1;
  const double width = times[hi] - times[lo];
  const double w = width > 0.0 ? (tc - times[lo]) / width : 0.0;
  return (1.0 - w) * trajectory.states.row(static_cast<Eigen::Index>(lo)) +
         w * trajectory.states.row(static_cast<Eigen::Index>(hi));
}

Eigen::MatrixXd observe(const ODEModel& model, const Trajectory& trajectory,
                        std::span<const double> grid) {
  return model.observe_fn(model, trajectory, grid);
}

}  // namespace spfit
