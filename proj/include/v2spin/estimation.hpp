#pragma once

// Fitting {B, D, A_zz, A_xx, A_yy, A_zx} of a single-nucleus system to
// labelled transition frequencies.

#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "v2spin/least_squares.hpp"
#include "v2spin/transitions.hpp"

namespace v2spin {

enum class FitParameter { B = 0, D, A_zz, A_xx, A_yy, A_zx };

inline constexpr std::size_t kFitParameterCount = 6;
inline constexpr std::array<const char*, kFitParameterCount> kFitParameterNames{"B", "D", "A_zz", "A_xx", "A_yy", "A_zx"};

inline std::string parameter_name(FitParameter p) { return kFitParameterNames[static_cast<std::size_t>(p)]; }

inline FitParameter parse_parameter(const std::string& s) {
  for (std::size_t i = 0; i < kFitParameterCount; ++i)
    if (s == kFitParameterNames[i]) return static_cast<FitParameter>(i);
  fail(ErrorKind::Parse, "unknown fit parameter '" + s + "'");
}

/// Full parameter vector in FitParameter order: B (G), D (MHz), then tensor
/// components (MHz).
using ParameterVector = std::array<double, kFitParameterCount>;

struct Measurement {
  TransitionKind kind = TransitionKind::Electron;
  std::string label;
  std::string branch;
  double freq = 0.0;     // MHz
  double sigma = 0.01;   // MHz

  std::string key() const { return kind_name(kind) + "/" + label + "/" + branch; }
};

struct ParameterBounds {
  ParameterVector lower{0.0, 0.0, -500.0, -500.0, -500.0, -500.0};
  ParameterVector upper{1000.0, 100.0, 500.0, 500.0, 500.0, 500.0};
};

struct FitProblem {
  SpinSystem system;     // one nucleus; supplies gamma_e, gamma_n and fixed values
  double field_z = 0.0;  // G, value of B when it is not free
  std::vector<Measurement> measurements;
  std::vector<FitParameter> free_params;
  std::optional<ParameterVector> initial_guess;  // defaults to the system values
  ParameterBounds bounds;

  ParameterVector nominal() const {
    const auto& a = system.nuclei.at(0).A;
    return {field_z, system.D, a.zz, a.xx, a.yy, a.xz};
  }

  void validate() const {
    if (system.nuclear_count() != 1) fail(ErrorKind::Validation, "fit problems use a single-nucleus system");
    if (free_params.empty()) fail(ErrorKind::Validation, "no free parameters");
    for (std::size_t i = 0; i < free_params.size(); ++i)
      for (std::size_t j = i + 1; j < free_params.size(); ++j)
        if (free_params[i] == free_params[j]) fail(ErrorKind::Validation, "duplicate free parameter");
    for (const auto& m : measurements)
      if (!(m.sigma > 0.0) || !std::isfinite(m.freq))
        fail(ErrorKind::Validation, "measurement " + m.key() + " needs finite freq and sigma > 0");
  }
};

inline SpinSystem system_at(const FitProblem& problem, const ParameterVector& theta) {
  SpinSystem s = problem.system;
  s.D = theta[1];
  auto& a = s.nuclei.at(0).A;
  a.zz = theta[2];
  a.xx = theta[3];
  a.yy = theta[4];
  a.xz = theta[5];
  return s;
}

/// Model transition frequencies for every measurement, matched by
/// (kind, label, branch); ties go to the nearest frequency.
inline std::vector<double> model_frequencies(const ParameterVector& theta, const FitProblem& problem) {
  const SpinSystem s = system_at(problem, theta);
  const auto eig = solve(s, theta[0]);
  TransitionOptions opts;
  opts.allow_mixed = true;
  const auto table = all_transitions(eig, s, opts);
  std::vector<double> out;
  out.reserve(problem.measurements.size());
  for (const auto& m : problem.measurements) {
    const auto* e = table.match(m.kind, m.label, m.branch, m.freq);
    if (!e) fail(ErrorKind::Matching, "no model transition for key " + m.key());
    out.push_back(e->freq);
  }
  return out;
}

/// (model - measured) / sigma for each measurement.
inline Eigen::VectorXd residuals(const ParameterVector& theta, const FitProblem& problem) {
  const auto model = model_frequencies(theta, problem);
  Eigen::VectorXd r(static_cast<Eigen::Index>(model.size()));
  for (std::size_t i = 0; i < model.size(); ++i)
    r(static_cast<Eigen::Index>(i)) = (model[i] - problem.measurements[i].freq) / problem.measurements[i].sigma;
  return r;
}

struct FittedParameter {
  std::string name;
  double value = 0.0;
  double sigma = 0.0;  // 1 sigma
};

struct FitResult {
  std::vector<FittedParameter> params;          // free parameters, in problem order
  ParameterVector theta{};                      // full vector at the optimum
  std::optional<Eigen::MatrixXd> covariance;    // absent when not identifiable
  std::vector<double> null_direction;           // set when not identifiable
  std::vector<double> residuals_mhz;            // model - measured
  double rms_residual = 0.0;                    // MHz
  double reduced_chi2 = 0.0;
  double condition_number = 0.0;                // of column-scaled J^T J
  bool converged = false;
  int iterations = 0;
  std::string stop_reason;
  std::vector<double> cost_history;
};

struct FitConfig {
  int max_iter = 200;
  double tol = 1e-10;
  double singular_condition = 1e14;  // cond(J^T J) above this is singular
  bool throw_on_singular = true;
};

struct Identifiability {
  double condition_number = 0.0;
  std::vector<double> null_direction;  // unit vector in free-parameter order
  bool singular = false;
};

/// Condition of the column-scaled normal matrix and its weakest direction
/// (mapped back to unscaled parameters).
inline Identifiability analyze_jacobian(const Eigen::MatrixXd& jac, double singular_condition) {
  Identifiability out;
  const Eigen::Index n = jac.cols();
  Eigen::VectorXd scale(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const double c = jac.col(j).norm();
    scale(j) = c > 0.0 ? c : 1.0;
  }
  const Eigen::MatrixXd scaled = jac * scale.cwiseInverse().asDiagonal();
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(scaled, Eigen::ComputeFullV);
  const Eigen::VectorXd sv = svd.singularValues();
  double smin = jac.rows() < n ? 0.0 : sv(n - 1);
  for (Eigen::Index j = 0; j < n; ++j)
    if (jac.col(j).norm() == 0.0) smin = 0.0;
  const double smax = sv.size() ? sv(0) : 0.0;
  out.condition_number = smin > 0.0 ? (smax / smin) * (smax / smin) : std::numeric_limits<double>::infinity();
  out.singular = !(out.condition_number < singular_condition);
  Eigen::VectorXd dir = scale.cwiseInverse().asDiagonal() * svd.matrixV().col(n - 1);
  dir.normalize();
  // Deterministic sign: largest component positive.
  Eigen::Index imax = 0;
  dir.cwiseAbs().maxCoeff(&imax);
  if (dir(imax) < 0.0) dir = -dir;
  out.null_direction.assign(dir.data(), dir.data() + dir.size());
  return out;
}

inline FitResult fit_hamiltonian(const FitProblem& problem, const FitConfig& config = {}) {
  problem.validate();
  const std::size_t n = problem.free_params.size();
  const ParameterVector start = problem.initial_guess.value_or(problem.nominal());
  ParameterVector fixed = problem.nominal();
  for (auto p : problem.free_params) fixed[static_cast<std::size_t>(p)] = start[static_cast<std::size_t>(p)];

  auto expand = [&](const Eigen::VectorXd& x) {
    ParameterVector theta = fixed;
    for (std::size_t i = 0; i < n; ++i) theta[static_cast<std::size_t>(problem.free_params[i])] = x(static_cast<Eigen::Index>(i));
    return theta;
  };
  auto f = [&](const Eigen::VectorXd& x) { return residuals(expand(x), problem); };

  Eigen::VectorXd x0(static_cast<Eigen::Index>(n)), lo(static_cast<Eigen::Index>(n)), hi(static_cast<Eigen::Index>(n));
  std::vector<std::string> names;
  for (std::size_t i = 0; i < n; ++i) {
    const auto idx = static_cast<std::size_t>(problem.free_params[i]);
    x0(static_cast<Eigen::Index>(i)) = start[idx];
    lo(static_cast<Eigen::Index>(i)) = problem.bounds.lower[idx];
    hi(static_cast<Eigen::Index>(i)) = problem.bounds.upper[idx];
    names.push_back(kFitParameterNames[idx]);
  }
  x0 = x0.cwiseMax(lo).cwiseMin(hi);

  // Fewer measurements than parameters, or a rank-deficient start, cannot be fitted.
  if (problem.measurements.size() < n || config.throw_on_singular) {
    const Eigen::VectorXd r0 = f(x0);
    const auto ident = analyze_jacobian(central_jacobian(f, x0, r0.size()), config.singular_condition);
    if (ident.singular)
      throw NonIdentifiableError("parameter combination is not constrained by the measurements (cond=" +
                                     std::to_string(ident.condition_number) + ")",
                                 names, ident.null_direction);
  }

  LmConfig lm;
  lm.max_iter = config.max_iter;
  lm.tol = config.tol;
  const auto outcome = levenberg_marquardt(f, x0, lo, hi, lm);

  FitResult result;
  result.theta = expand(outcome.x);
  result.converged = outcome.converged;
  result.iterations = outcome.iterations;
  result.stop_reason = outcome.stop_reason;
  result.cost_history = outcome.cost_history;
  const auto m = problem.measurements.size();
  double sum_sq = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    const double r = outcome.residuals(static_cast<Eigen::Index>(i)) * problem.measurements[i].sigma;
    result.residuals_mhz.push_back(r);
    sum_sq += r * r;
  }
  result.rms_residual = m ? std::sqrt(sum_sq / static_cast<double>(m)) : 0.0;
  result.reduced_chi2 = m > n ? outcome.cost / static_cast<double>(m - n) : 0.0;

  const auto ident = analyze_jacobian(outcome.jacobian, config.singular_condition);
  result.condition_number = ident.condition_number;
  if (ident.singular) {
    result.null_direction = ident.null_direction;
    if (config.throw_on_singular)
      throw NonIdentifiableError("normal matrix is singular at the optimum", names, ident.null_direction);
  } else {
    const Eigen::MatrixXd normal = outcome.jacobian.transpose() * outcome.jacobian;
    Eigen::MatrixXd cov = result.reduced_chi2 * normal.inverse();
    cov = 0.5 * (cov + cov.transpose());
    result.covariance = cov;
  }
  for (std::size_t i = 0; i < n; ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    const double var = result.covariance ? (*result.covariance)(ii, ii) : std::numeric_limits<double>::quiet_NaN();
    result.params.push_back({names[i], outcome.x(ii), std::sqrt(std::max(var, 0.0))});
  }
  return result;
}

/// Synthetic measurements: every transition of the model at theta.
inline std::vector<Measurement> synthesize_measurements(const SpinSystem& system, double field_z, double sigma = 0.01) {
  const auto eig = solve(system, field_z);
  TransitionOptions opts;
  opts.allow_mixed = true;
  std::vector<Measurement> out;
  for (const auto& e : all_transitions(eig, system, opts).entries)
    out.push_back({e.kind, e.label, e.branch, e.freq, sigma});
  return out;
}

struct TensorDecomposition {
  double a_iso = 0.0;  // MHz
  double t = 0.0;      // MHz
};

/// A_iso = (A_xx + A_yy + A_zz)/3, T = (A_zz - A_iso)/2.
inline TensorDecomposition decompose_tensor(double a_xx, double a_yy, double a_zz) {
  const double iso = (a_xx + a_yy + a_zz) / 3.0;
  return {iso, (a_zz - iso) / 2.0};
}

}  // namespace v2spin
