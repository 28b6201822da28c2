#pragma once

// Small bounded Levenberg-Marquardt solver with central-difference Jacobians.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

namespace v2spin {

struct LmConfig {
  int max_iter = 200;
  double tol = 1e-10;        // relative cost change
  double grad_tol = 1e-8;    // infinity norm of J^T r
  double lambda0 = 1e-3;
};

struct LmOutcome {
  Eigen::VectorXd x;
  Eigen::VectorXd residuals;
  Eigen::MatrixXd jacobian;   // at x
  double cost = 0.0;          // sum of squared residuals
  int iterations = 0;
  bool converged = false;
  std::string stop_reason;
  std::vector<double> cost_history;  // one entry per accepted step, plus the start
};

/// Step max(1e-4, 1e-6 |x_i|) per coordinate.
inline double fd_step(double xi) { return std::max(1e-4, 1e-6 * std::abs(xi)); }

template <class Residual>
Eigen::MatrixXd central_jacobian(Residual&& f, const Eigen::VectorXd& x, Eigen::Index m) {
  Eigen::MatrixXd jac(m, x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double h = fd_step(x(i));
    Eigen::VectorXd xp = x, xm = x;
    xp(i) += h;
    xm(i) -= h;
    jac.col(i) = (f(xp) - f(xm)) / (2.0 * h);
  }
  return jac;
}

/// Minimizes sum f(x)^2 with x projected onto [lower, upper] after each step.
/// Accepted steps never increase the cost.
template <class Residual>
LmOutcome levenberg_marquardt(Residual&& f, Eigen::VectorXd x, const Eigen::VectorXd& lower,
                              const Eigen::VectorXd& upper, const LmConfig& cfg = {}) {
  auto project = [&](Eigen::VectorXd v) { return v.cwiseMax(lower).cwiseMin(upper); };
  x = project(std::move(x));
  LmOutcome out;
  Eigen::VectorXd r = f(x);
  double cost = r.squaredNorm();
  Eigen::MatrixXd jac = central_jacobian(f, x, r.size());
  out.cost_history.push_back(cost);
  double lambda = cfg.lambda0;

  for (int it = 0; it < cfg.max_iter; ++it) {
    out.iterations = it + 1;
    const Eigen::VectorXd grad = jac.transpose() * r;
    if (grad.lpNorm<Eigen::Infinity>() < cfg.grad_tol) {
      out.converged = true;
      out.stop_reason = "gradient";
      break;
    }
    if (cost == 0.0) {
      out.converged = true;
      out.stop_reason = "zero cost";
      break;
    }
    const Eigen::MatrixXd normal = jac.transpose() * jac;
    Eigen::VectorXd diag = normal.diagonal().cwiseMax(1e-12 * std::max(1.0, normal.diagonal().maxCoeff()));
    bool accepted = false;
    while (lambda < 1e16) {
      Eigen::MatrixXd damped = normal;
      damped.diagonal() += lambda * diag;
      const Eigen::VectorXd step = damped.ldlt().solve(-grad);
      const Eigen::VectorXd x_new = project(x + step);
      const Eigen::VectorXd r_new = f(x_new);
      const double cost_new = r_new.squaredNorm();
      if (std::isfinite(cost_new) && cost_new < cost) {
        const double rel = (cost - cost_new) / std::max(cost, std::numeric_limits<double>::min());
        x = x_new;
        r = r_new;
        cost = cost_new;
        out.cost_history.push_back(cost);
        jac = central_jacobian(f, x, r.size());
        lambda = std::max(lambda / 10.0, 1e-12);
        accepted = true;
        if (rel < cfg.tol) {
          out.converged = true;
          out.stop_reason = "relative cost change";
        }
        break;
      }
      lambda *= 10.0;
    }
    if (!accepted) {
      // No descent direction left at working precision.
      out.converged = true;
      out.stop_reason = "stalled";
      break;
    }
    if (out.converged) break;
  }
  if (!out.converged) out.stop_reason = "max iterations";
  out.x = x;
  out.residuals = r;
  out.jacobian = jac;
  out.cost = cost;
  return out;
}

}  // namespace v2spin
