#include "spfit/optim.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <vector>

#include "spfit/errors.hpp"

namespace spfit {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

Eigen::VectorXd project(const Eigen::VectorXd& x, const Eigen::VectorXd& lo,
                        const Eigen::VectorXd& hi) {
  return x.cwiseMax(lo).cwiseMin(hi);
}

Eigen::VectorXd fd_gradient(const ObjectiveFn& f, const Eigen::VectorXd& x,
                            const Eigen::VectorXd& lo, const Eigen::VectorXd& hi, double step,
                            int& evals) {
  Eigen::VectorXd g(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double h = step * std::max(1.0, std::abs(x[i]));
    Eigen::VectorXd xp = x, xm = x;
    xp[i] = std::min(x[i] + h, hi[i]);
    xm[i] = std::max(x[i] - h, lo[i]);
    const double denom = xp[i] - xm[i];
    if (denom <= 0.0) {
      g[i] = 0.0;
      continue;
    }
    g[i] = (f(xp) - f(xm)) / denom;
    evals += 2;
  }
  return g;
}

}  // namespace

OptimResult minimize_lbfgs_box(const ObjectiveFn& f, const GradientFn& grad,
                               Eigen::VectorXd x0, const Eigen::VectorXd& lo,
                               const Eigen::VectorXd& hi, const LbfgsOptions& options) {
  const Eigen::Index dim = x0.size();
  if (lo.size() != dim || hi.size() != dim) {
    throw InvalidArgumentError("minimize_lbfgs_box: bound dimensions mismatch");
  }
  OptimResult result;
  Eigen::VectorXd x = project(x0, lo, hi);
  double fx = f(x);
  result.evaluations = 1;
  if (!std::isfinite(fx)) {
    result.x = x;
    result.value = fx;
    result.message = "objective not finite at the start point";
    return result;
  }

  auto gradient = [&](const Eigen::VectorXd& p) {
    if (grad) return grad(p);
    return fd_gradient(f, p, lo, hi, options.fd_step, result.evaluations);
  };

  Eigen::VectorXd g = gradient(x);
  std::deque<Eigen::VectorXd> s_hist, y_hist;
  std::deque<double> rho_hist;
  int small_improvements = 0;

  for (int iter = 0; iter < options.max_iterations; ++iter) {
    result.iterations = iter + 1;

    // Projected-gradient stationarity test.
    const double pg_norm = (x - project(x - g, lo, hi)).lpNorm<Eigen::Infinity>();
    if (pg_norm <= options.grad_tolerance * (1.0 + std::abs(fx))) {
      result.converged = true;
      result.message = "projected gradient below tolerance";
      break;
    }

    // Two-loop recursion.
    Eigen::VectorXd q = g;
    std::vector<double> alpha(s_hist.size());
    for (int i = static_cast<int>(s_hist.size()) - 1; i >= 0; --i) {
      alpha[static_cast<std::size_t>(i)] =
          rho_hist[static_cast<std::size_t>(i)] * s_hist[static_cast<std::size_t>(i)].dot(q);
      q -= alpha[static_cast<std::size_t>(i)] * y_hist[static_cast<std::size_t>(i)];
    }
    if (!s_hist.empty()) {
      const Eigen::VectorXd& s = s_hist.back();
      const Eigen::VectorXd& y = y_hist.back();
      q *= s.dot(y) / y.squaredNorm();
    }
    for (std::size_t i = 0; i < s_hist.size(); ++i) {
      const double beta = rho_hist[i] * y_hist[i].dot(q);
      q += (alpha[i] - beta) * s_hist[i];
    }
    Eigen::VectorXd direction = -q;
    if (!direction.allFinite() || direction.dot(g) >= 0.0) {
      direction = -g;  // fall back to steepest descent
    }

    // Backtracking Armijo line search on the projected path.
    const double slope = direction.dot(g);
    double step = 1.0;
    bool accepted = false;
    Eigen::VectorXd x_new;
    double f_new = fx;
    for (int ls = 0; ls < 40; ++ls) {
      x_new = project(x + step * direction, lo, hi);
      f_new = f(x_new);
      ++result.evaluations;
      const double gain = fx + 1e-4 * step * slope;
      if (std::isfinite(f_new) && f_new <= gain && (x_new - x).lpNorm<Eigen::Infinity>() > 0.0) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      // Try a plain projected-gradient step before giving up.
      bool rescued = false;
      double gstep = 1.0 / std::max(1.0, g.lpNorm<Eigen::Infinity>());
      for (int ls = 0; ls < 40; ++ls) {
        x_new = project(x - gstep * g, lo, hi);
        f_new = f(x_new);
        ++result.evaluations;
        if (std::isfinite(f_new) && f_new < fx && (x_new - x).lpNorm<Eigen::Infinity>() > 0.0) {
          rescued = true;
          break;
        }
        gstep *= 0.5;
      }
      if (!rescued) {
        result.converged = pg_norm <= 1e2 * options.grad_tolerance * (1.0 + std::abs(fx));
        result.message = "line search stalled";
        break;
      }
      s_hist.clear();
      y_hist.clear();
      rho_hist.clear();
    }

    Eigen::VectorXd g_new = gradient(x_new);
    const Eigen::VectorXd s = x_new - x;
    const Eigen::VectorXd y = g_new - g;
    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      s_hist.push_back(s);
      y_hist.push_back(y);
      rho_hist.push_back(1.0 / sy);
      if (static_cast<int>(s_hist.size()) > options.history) {
        s_hist.pop_front();
        y_hist.pop_front();
        rho_hist.pop_front();
      }
    }

    const double improvement = fx - f_new;
    x = x_new;
    g = g_new;
    fx = f_new;
    // A single flat iteration is common mid-run; require a sustained stall.
    if (improvement >= 0.0 && improvement <= options.rel_f_tolerance * (1.0 + std::abs(fx))) {
      if (++small_improvements >= 5) {
        result.converged = true;
        result.message = "relative improvement below tolerance";
        break;
      }
    } else {
      small_improvements = 0;
    }
  }

  if (result.message.empty()) result.message = "iteration limit reached";
  result.x = x;
  result.value = fx;
  return result;
}

OptimResult nelder_mead(const ObjectiveFn& f, const Eigen::VectorXd& x0,
                        const NelderMeadOptions& options) {
  const Eigen::Index dim = x0.size();
  OptimResult result;

  std::vector<Eigen::VectorXd> simplex;
  std::vector<double> values;
  simplex.reserve(static_cast<std::size_t>(dim) + 1);
  values.reserve(static_cast<std::size_t>(dim) + 1);
  simplex.push_back(x0);
  values.push_back(f(x0));
  result.evaluations = 1;

  if (values[0] <= options.objective_floor) {
    result.x = x0;
    result.value = values[0];
    result.converged = true;
    result.message = "objective floor reached at the start point";
    return result;
  }

  for (Eigen::Index i = 0; i < dim; ++i) {
    Eigen::VectorXd v = x0;
    v[i] += options.initial_step;
    simplex.push_back(v);
    values.push_back(f(v));
    ++result.evaluations;
  }

  auto order = [&]() {
    std::vector<std::size_t> idx(simplex.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::stable_sort(idx.begin(), idx.end(),
                     [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    std::vector<Eigen::VectorXd> s2(simplex.size());
    std::vector<double> v2(values.size());
    for (std::size_t i = 0; i < idx.size(); ++i) {
      s2[i] = simplex[idx[i]];
      v2[i] = values[idx[i]];
    }
    simplex.swap(s2);
    values.swap(v2);
  };

  constexpr double kReflect = 1.0;
  constexpr double kExpand = 2.0;
  constexpr double kContract = 0.5;
  constexpr double kShrink = 0.5;

  for (int iter = 0; iter < options.max_iterations; ++iter) {
    result.iterations = iter + 1;
    order();

    if (values.front() <= options.objective_floor) {
      result.converged = true;
      result.message = "objective floor reached";
      break;
    }
    double diameter = 0.0;
    for (std::size_t i = 1; i < simplex.size(); ++i) {
      diameter = std::max(diameter, (simplex[i] - simplex[0]).lpNorm<Eigen::Infinity>());
    }
    const double ref = std::max(1.0, simplex[0].lpNorm<Eigen::Infinity>());
    if (diameter <= options.rel_diameter_tolerance * ref) {
      result.converged = true;
      result.message = "simplex diameter below tolerance";
      break;
    }

    Eigen::VectorXd centroid = Eigen::VectorXd::Zero(dim);
    for (std::size_t i = 0; i + 1 < simplex.size(); ++i) centroid += simplex[i];
    centroid /= static_cast<double>(dim);

    const Eigen::VectorXd& worst = simplex.back();
    Eigen::VectorXd reflected = centroid + kReflect * (centroid - worst);
    double f_reflected = f(reflected);
    ++result.evaluations;

    if (f_reflected < values.front()) {
      Eigen::VectorXd expanded = centroid + kExpand * (reflected - centroid);
      double f_expanded = f(expanded);
      ++result.evaluations;
      if (f_expanded < f_reflected) {
        simplex.back() = expanded;
        values.back() = f_expanded;
      } else {
        simplex.back() = reflected;
        values.back() = f_reflected;
      }
      continue;
    }
    if (f_reflected < values[values.size() - 2]) {
      simplex.back() = reflected;
      values.back() = f_reflected;
      continue;
    }

    // Contraction (outside when the reflection improved on the worst vertex).
    Eigen::VectorXd contracted;
    double f_contracted;
    if (f_reflected < values.back()) {
      contracted = centroid + kContract * (reflected - centroid);
      f_contracted = f(contracted);
      ++result.evaluations;
      if (f_contracted <= f_reflected) {
        simplex.back() = contracted;
        values.back() = f_contracted;
        continue;
      }
    } else {
      contracted = centroid - kContract * (centroid - worst);
      f_contracted = f(contracted);
      ++result.evaluations;
      if (f_contracted < values.back()) {
        simplex.back() = contracted;
        values.back() = f_contracted;
        continue;
      }
    }

    for (std::size_t i = 1; i < simplex.size(); ++i) {
      simplex[i] = simplex[0] + kShrink * (simplex[i] - simplex[0]);
      values[i] = f(simplex[i]);
      ++result.evaluations;
    }
  }

  order();
  if (result.message.empty()) result.message = "iteration limit reached";
  result.x = simplex.front();
  result.value = values.front();
  return result;
}

}  // namespace spfit
