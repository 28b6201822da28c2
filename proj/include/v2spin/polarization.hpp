#pragma once

// Classical rate model for dynamic nuclear polarization near the ground-state
// level anticrossing.
//
// States are the product-basis states |mS, mI...> (same indexing as the
// Hamiltonian). Three kinds of processes move population between them:
//   * optical cycling on A1 (mS = +-1/2) or A2 (mS = +-3/2): the pumped
//     sublevels are emptied into the complementary manifold through the
//     intersystem crossing, nuclear configuration unchanged;
//   * flip-flop mixing between every pair of states with different nuclear
//     configuration that the hyperfine Hamiltonian couples, at the rate
//     Gamma_opt V^2 / (V^2 + delta^2) with V = |H_ij| and delta = H_ii - H_jj;
//   * optional uniform electron and nuclear relaxation.
// Time is in microseconds and rates in 1/us.

#include <unsupported/Eigen/MatrixFunctions>

#include <array>
#include <cmath>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "v2spin/least_squares.hpp"
#include "v2spin/spin_core.hpp"

namespace v2spin {

enum class OpticalLine { A1, A2 };

inline std::string optical_line_name(OpticalLine l) { return l == OpticalLine::A1 ? "A1" : "A2"; }

inline OpticalLine parse_optical_line(const std::string& s) {
  if (s == "A1") return OpticalLine::A1;
  if (s == "A2") return OpticalLine::A2;
  fail(ErrorKind::Parse, "unknown optical line '" + s + "' (expected A1 or A2)");
}

/// Sublevels excited by the line: A1 -> +-1/2, A2 -> +-3/2.
inline bool is_pumped(OpticalLine line, int two_ms) {
  const bool half = std::abs(two_ms) == 1;
  return line == OpticalLine::A1 ? half : !half;
}

struct FlipFlopParams {
  double A_perp = 0.0;     // MHz
  double delta = 0.0;      // MHz
  double Gamma_opt = 10.0; // 1/us
};

inline double flip_flop_rate(const FlipFlopParams& p) {
  if (p.A_perp < 0.0) fail(ErrorKind::Validation, "A_perp must be >= 0");
  if (!(p.Gamma_opt > 0.0)) fail(ErrorKind::Validation, "Gamma_opt must be > 0");
  const double a2 = p.A_perp * p.A_perp;
  if (a2 == 0.0) return 0.0;
  return p.Gamma_opt * a2 / (a2 + p.delta * p.delta);
}

enum class RateChannel { OpticalA1, OpticalA2, ISC, FlipFlop, Relaxation };

inline std::string channel_name(RateChannel c) {
  switch (c) {
    case RateChannel::OpticalA1: return "optical-A1";
    case RateChannel::OpticalA2: return "optical-A2";
    case RateChannel::ISC: return "ISC";
    case RateChannel::FlipFlop: return "flip-flop";
    case RateChannel::Relaxation: return "relaxation";
  }
  return "?";
}

/// Module defaults. None of these values is a measured property of the
/// defect; they are illustrative and meant to be overridden.
struct OpticalParams {
  double cycling_rate = 10.0;                  // Gamma_opt, 1/us
  std::array<double, 2> isc_branching{0.5, 0.5};  // into the unpumped sublevels, higher mS first
  bool flip_flop = true;
  double electron_relaxation = 0.0;            // per pair of mS, 1/us
  double nuclear_relaxation = 0.0;             // per nuclear flip, 1/us
  double coupling_cutoff = 1e-9;               // MHz; smaller |H_ij| are ignored
};

struct RateEntry {
  std::size_t from = 0, to = 0;
  double rate = 0.0;
  RateChannel channel = RateChannel::FlipFlop;
};

struct RateModel {
  std::size_t n_nuclei = 0;
  double field_z = 0.0;
  OpticalLine line = OpticalLine::A1;
  Eigen::MatrixXd generator;  // dp/dt = generator * p; columns sum to zero
  std::vector<RateEntry> rates;
  std::vector<BasisLabel> states;

  std::size_t dimension() const { return static_cast<std::size_t>(generator.rows()); }

  double max_column_sum() const { return generator.colwise().sum().cwiseAbs().maxCoeff(); }

  void validate() const {
    for (Eigen::Index j = 0; j < generator.cols(); ++j)
      for (Eigen::Index i = 0; i < generator.rows(); ++i)
        if (i != j && generator(i, j) < 0.0) fail(ErrorKind::Validation, "negative transition rate in generator");
    if (max_column_sum() > 1e-12 * std::max(1.0, generator.cwiseAbs().maxCoeff()))
      fail(ErrorKind::Validation, "generator columns do not sum to zero");
  }
};

inline RateModel rate_model_from_entries(std::size_t n_nuclei, std::vector<RateEntry> rates) {
  RateModel m;
  m.n_nuclei = n_nuclei;
  const std::size_t dim = std::size_t{4} << n_nuclei;
  for (std::size_t i = 0; i < dim; ++i) m.states.push_back(basis_label(i, n_nuclei));
  m.generator = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim));
  for (const auto& r : rates) {
    if (!(r.rate >= 0.0) || !std::isfinite(r.rate)) fail(ErrorKind::Validation, "unphysical rate " + std::to_string(r.rate));
    if (r.from >= dim || r.to >= dim || r.from == r.to) fail(ErrorKind::Validation, "rate entry indices invalid");
    const auto f = static_cast<Eigen::Index>(r.from), t = static_cast<Eigen::Index>(r.to);
    m.generator(t, f) += r.rate;
  }
  for (Eigen::Index j = 0; j < m.generator.cols(); ++j) {
    double out = 0.0;
    for (Eigen::Index i = 0; i < m.generator.rows(); ++i)
      if (i != j) out += m.generator(i, j);
    m.generator(j, j) = -out;
  }
  m.rates = std::move(rates);
  return m;
}

inline RateModel build_rate_model(const SpinSystem& system, double field_z, OpticalLine line,
                                  const OpticalParams& params = {}) {
  if (!(params.cycling_rate > 0.0)) fail(ErrorKind::Validation, "optical cycling rate must be > 0");
  if (params.isc_branching[0] < 0.0 || params.isc_branching[1] < 0.0 ||
      std::abs(params.isc_branching[0] + params.isc_branching[1] - 1.0) > 1e-12)
    fail(ErrorKind::Validation, "ISC branching must be non-negative and sum to 1");
  if (params.electron_relaxation < 0.0 || params.nuclear_relaxation < 0.0)
    fail(ErrorKind::Validation, "relaxation rates must be >= 0");

  const std::size_t n = system.nuclear_count();
  const std::size_t dim = system.dimension();
  const CMatrix h = build_hamiltonian(system, field_z);
  std::vector<BasisLabel> labels;
  for (std::size_t i = 0; i < dim; ++i) labels.push_back(basis_label(i, n));

  std::vector<RateEntry> rates;
  const RateChannel optical = line == OpticalLine::A1 ? RateChannel::OpticalA1 : RateChannel::OpticalA2;
  std::vector<int> dark;
  for (int two_ms : {3, 1, -1, -3})
    if (!is_pumped(line, two_ms)) dark.push_back(two_ms);

  for (std::size_t i = 0; i < dim; ++i) {
    if (!is_pumped(line, labels[i].two_ms)) continue;
    for (std::size_t d = 0; d < dark.size(); ++d) {
      BasisLabel target = labels[i];
      target.two_ms = dark[d];
      const double r = params.cycling_rate * params.isc_branching[d];
      if (r > 0.0) rates.push_back({i, basis_index(target), r, optical});
    }
  }

  if (params.flip_flop) {
    for (std::size_t i = 0; i < dim; ++i)
      for (std::size_t j = i + 1; j < dim; ++j) {
        if (labels[i].two_mi == labels[j].two_mi) continue;
        const auto ii = static_cast<Eigen::Index>(i), jj = static_cast<Eigen::Index>(j);
        const double v = std::abs(h(ii, jj));
        if (v <= params.coupling_cutoff) continue;
        const double delta = (h(ii, ii) - h(jj, jj)).real();
        const double r = flip_flop_rate({v, delta, params.cycling_rate});
        rates.push_back({i, j, r, RateChannel::FlipFlop});
        rates.push_back({j, i, r, RateChannel::FlipFlop});
      }
  }

  if (params.electron_relaxation > 0.0 || params.nuclear_relaxation > 0.0) {
    for (std::size_t i = 0; i < dim; ++i)
      for (std::size_t j = 0; j < dim; ++j) {
        if (i == j) continue;
        const bool same_nuclear = labels[i].two_mi == labels[j].two_mi;
        if (same_nuclear && params.electron_relaxation > 0.0) {
          rates.push_back({i, j, params.electron_relaxation, RateChannel::Relaxation});
        } else if (labels[i].two_ms == labels[j].two_ms && params.nuclear_relaxation > 0.0) {
          int flips = 0;
          for (std::size_t k = 0; k < n; ++k) flips += labels[i].two_mi[k] != labels[j].two_mi[k];
          if (flips == 1) rates.push_back({i, j, params.nuclear_relaxation, RateChannel::Relaxation});
        }
      }
  }

  RateModel model = rate_model_from_entries(n, std::move(rates));
  model.field_z = field_z;
  model.line = line;
  model.validate();
  return model;
}

inline void check_distribution(const Eigen::VectorXd& p, std::size_t dim) {
  if (static_cast<std::size_t>(p.size()) != dim) fail(ErrorKind::Validation, "population vector has wrong length");
  if (p.minCoeff() < -1e-12) fail(ErrorKind::Validation, "populations must be non-negative");
  if (std::abs(p.sum() - 1.0) > 1e-9) fail(ErrorKind::Validation, "populations must sum to 1");
}

/// p(t) = exp(generator t) p0 by scaling and squaring; renormalized.
inline Eigen::VectorXd evolve_populations(const RateModel& model, const Eigen::VectorXd& p0, double t) {
  check_distribution(p0, model.dimension());
  if (!(t >= 0.0)) fail(ErrorKind::Domain, "time must be >= 0");
  if (t == 0.0) return p0;
  const Eigen::MatrixXd prop = (model.generator * t).exp();
  Eigen::VectorXd p = (prop * p0).cwiseMax(0.0);
  return p / p.sum();
}

/// Stationary distribution: generator p = 0 with sum p = 1, solved by
/// replacing one balance equation with the normalization. Only unique when
/// the chain has a single closed class.
inline Eigen::VectorXd steady_state(const RateModel& model) {
  Eigen::MatrixXd a = model.generator;
  const Eigen::Index last = a.rows() - 1;
  a.row(last).setOnes();
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(a.rows());
  rhs(last) = 1.0;
  Eigen::FullPivLU<Eigen::MatrixXd> lu(a);
  if (!lu.isInvertible()) fail(ErrorKind::Validation, "steady state is not unique");
  Eigen::VectorXd p = lu.solve(rhs).cwiseMax(0.0);
  return p / p.sum();
}

/// Uniform (infinite-temperature) distribution.
inline Eigen::VectorXd thermal_populations(std::size_t n_nuclei) {
  const auto dim = static_cast<Eigen::Index>(std::size_t{4} << n_nuclei);
  return Eigen::VectorXd::Constant(dim, 1.0 / static_cast<double>(dim));
}

/// Product distribution: electron populations for mS = +3/2 .. -3/2 and an
/// up-probability per nucleus.
inline Eigen::VectorXd product_populations(const std::array<double, 4>& electron,
                                           const std::vector<double>& nuclear_up) {
  const std::size_t n = nuclear_up.size();
  Eigen::VectorXd p(static_cast<Eigen::Index>(std::size_t{4} << n));
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    const auto l = basis_label(static_cast<std::size_t>(i), n);
    double w = electron[static_cast<std::size_t>(electron_index(l.two_ms))];
    for (std::size_t k = 0; k < n; ++k) w *= l.two_mi[k] > 0 ? nuclear_up[k] : 1.0 - nuclear_up[k];
    p(i) = w;
  }
  return p;
}

/// <Iz_k> / (1/2), optionally conditioned on the electron being in one of
/// `manifold` (2mS values; empty means all sublevels).
inline double nuclear_polarization(const RateModel& model, const Eigen::VectorXd& p, std::size_t k,
                                   const std::vector<int>& manifold = {}) {
  if (k >= model.n_nuclei) fail(ErrorKind::Validation, "target nucleus out of range");
  double weighted = 0.0, total = 0.0;
  for (std::size_t i = 0; i < model.states.size(); ++i) {
    const auto& l = model.states[i];
    if (!manifold.empty() && std::find(manifold.begin(), manifold.end(), l.two_ms) == manifold.end()) continue;
    const double pi = p(static_cast<Eigen::Index>(i));
    weighted += pi * l.two_mi[k];
    total += pi;
  }
  return total > 0.0 ? weighted / total : 0.0;
}

struct PolarizationCurve {
  std::vector<std::pair<double, double>> points;  // (t us, P)
  std::optional<double> fitted_T;                 // us
  double P_inf = 0.0;                             // amplitude of the buildup
  double P0 = 0.0;
  double r_squared = 0.0;
};

struct ExponentialFit {
  std::optional<double> T;
  double amplitude = 0.0, offset = 0.0, r_squared = 0.0;
};

/// Least-squares fit of P(t) = P0 + P_inf (1 - exp(-t/T)). A flat curve
/// yields no time constant.
inline ExponentialFit fit_exponential_buildup(const std::vector<double>& t, const std::vector<double>& y) {
  ExponentialFit out;
  if (t.empty() || t.size() != y.size()) fail(ErrorKind::Validation, "fit needs matching non-empty series");
  out.offset = y.front();
  double span = 0.0;
  for (double v : y) span = std::max(span, std::abs(v - y.front()));
  if (span < 1e-9 || t.size() < 4) return out;

  const double amp0 = y.back() - y.front();
  double t63 = t.back();
  for (std::size_t i = 0; i < t.size(); ++i)
    if (std::abs(y[i] - y.front()) >= 0.632 * std::abs(amp0)) {
      t63 = std::max(t[i] - t.front(), 1e-6);
      break;
    }
  Eigen::Map<const Eigen::VectorXd> tv(t.data(), static_cast<Eigen::Index>(t.size()));
  Eigen::Map<const Eigen::VectorXd> yv(y.data(), static_cast<Eigen::Index>(y.size()));
  auto model = [&](const Eigen::VectorXd& x) -> Eigen::VectorXd {
    return (x(0) + x(1) * (1.0 - (-tv.array() / x(2)).exp())).matrix() - yv;
  };
  Eigen::VectorXd x0(3), lo(3), hi(3);
  x0 << y.front(), amp0, t63;
  const double inf = std::numeric_limits<double>::infinity();
  lo << -inf, -inf, 1e-9;
  hi << inf, inf, inf;
  LmConfig cfg;
  cfg.max_iter = 500;
  cfg.grad_tol = 1e-14;
  const auto res = levenberg_marquardt(model, x0, lo, hi, cfg);
  out.offset = res.x(0);
  out.amplitude = res.x(1);
  out.T = res.x(2);
  const double mean = yv.mean();
  const double ss_tot = (yv.array() - mean).square().sum();
  out.r_squared = ss_tot > 0.0 ? 1.0 - res.cost / ss_tot : 1.0;
  return out;
}

inline PolarizationCurve polarization_curve(const RateModel& model, const Eigen::VectorXd& p0,
                                            const std::vector<double>& times, std::size_t target,
                                            const std::vector<int>& manifold = {}) {
  if (times.empty()) fail(ErrorKind::Validation, "time grid is empty");
  for (std::size_t i = 1; i < times.size(); ++i)
    if (!(times[i] > times[i - 1])) fail(ErrorKind::Validation, "time grid must be strictly ascending");
  PolarizationCurve curve;
  std::vector<double> ys;
  for (double t : times) {
    const double p = nuclear_polarization(model, evolve_populations(model, p0, t), target, manifold);
    curve.points.emplace_back(t, p);
    ys.push_back(p);
  }
  const auto fit = fit_exponential_buildup(times, ys);
  curve.fitted_T = fit.T;
  curve.P_inf = fit.amplitude;
  curve.P0 = fit.offset;
  curve.r_squared = fit.r_squared;
  return curve;
}

}  // namespace v2spin
