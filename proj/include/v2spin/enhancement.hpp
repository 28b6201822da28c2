#pragma once

// Hyperfine enhancement of the nuclear gyromagnetic ratio per electron
// sublevel: a two-level closed form for mS = -3/2 and an exact version from
// drive matrix elements of the diagonalized Hamiltonian.

#include <cmath>
#include <numbers>
#include <vector>

#include "v2spin/transitions.hpp"

namespace v2spin {

struct EnhancementPoint {
  double field_z;
  double alpha;
};

struct EnhancementCurve {
  int two_ms = -3;
  std::vector<EnhancementPoint> points;
};

/// Mixing angle of |-3/2,u> with |-1/2,d>:
///   tan(2 theta) = -(sqrt3/2)(A_xx + A_yy) / (-A_zz + B(gamma_n - gamma_e) + 2D)
/// on the principal branch (-pi/4, pi/4]. A vanishing denominator is the
/// resonant case theta = pi/4 (or 0 when there is no coupling at all).
inline double mixing_angle_m32(const SpinSystem& system, double field_z) {
  if (system.nuclear_count() != 1) fail(ErrorKind::Validation, "closed-form enhancement needs one nucleus");
  const auto& nuc = system.nuclei.front();
  const double num = -0.5 * std::numbers::sqrt3 * (nuc.A.xx + nuc.A.yy);
  const double den = -nuc.A.zz + field_z * (nuc.gamma_n - system.gamma_e) + 2.0 * system.D;
  if (num == 0.0) return 0.0;
  if (den == 0.0) return std::numbers::pi / 4.0;
  return 0.5 * std::atan(num / den);
}

/// alpha = -sqrt3 (gamma_e / gamma_n) sin(theta) + cos(theta)
inline double enhancement_analytic_m32(const SpinSystem& system, double field_z) {
  const double theta = mixing_angle_m32(system, field_z);
  const double gn = system.nuclei.front().gamma_n;
  if (gn == 0.0) fail(ErrorKind::Domain, "gamma_n = 0 has no enhancement");
  return -std::numbers::sqrt3 * (system.gamma_e / gn) * std::sin(theta) + std::cos(theta);
}

/// Enhancement from the exact drive element of the nuclear transition of
/// nucleus `k` inside sublevel `two_ms`. Spectator nuclei (N > 1) are taken
/// in `spectators` ('u'/'d' per nucleus, entry k ignored), default all up.
/// The sign is positive when the element is aligned with the bare
/// gamma_n Ix element.
inline double enhancement_exact(const SpinSystem& system, double field_z, int two_ms, std::size_t k = 0,
                                std::string spectators = "") {
  if (k >= system.nuclear_count()) fail(ErrorKind::Validation, "nucleus index out of range");
  const double gn = system.nuclei[k].gamma_n;
  if (gn == 0.0) fail(ErrorKind::Domain, "gamma_n = 0 has no enhancement");
  const std::size_t n = system.nuclear_count();
  if (spectators.empty()) spectators.assign(n, 'u');
  if (spectators.size() != n) fail(ErrorKind::Validation, "spectator configuration length does not match N");

  const auto eig = solve(system, field_z);
  BasisLabel up;
  up.two_ms = two_ms;
  for (char c : spectators) up.two_mi.push_back(c == 'd' ? -1 : 1);
  up.two_mi[k] = 1;
  BasisLabel down = up;
  down.two_mi[k] = -1;
  const std::size_t a = eig.index_of(up), b = eig.index_of(down);
  if (eig.is_mixed(a) || eig.is_mixed(b))
    fail(ErrorKind::Hybridized, "nuclear transition in mS=" + ms_tag(two_ms) + " at B=" + std::to_string(field_z) +
                                    " G is not identifiable");

  const cplx element = drive_element(eig, a, b, drive_operator(system));
  const double bare = 0.5 * gn;
  const double sign = (element / bare).real() >= 0.0 ? 1.0 : -1.0;
  return sign * std::abs(element) / std::abs(bare);
}

inline EnhancementCurve enhancement_curve(const SpinSystem& system, int two_ms, const std::vector<double>& fields,
                                          bool analytic) {
  EnhancementCurve curve;
  curve.two_ms = two_ms;
  curve.points.reserve(fields.size());
  for (double b : fields) {
    if (analytic) {
      if (two_ms != -3) fail(ErrorKind::Validation, "closed-form enhancement exists only for mS=-3/2");
      curve.points.push_back({b, enhancement_analytic_m32(system, b)});
    } else {
      try {
        curve.points.push_back({b, enhancement_exact(system, b, two_ms)});
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::Hybridized) throw;
        curve.points.push_back({b, std::nan("")});
      }
    }
  }
  return curve;
}

/// On-resonance nutation frequency |alpha gamma_n B1| / 2 for a linear drive
/// of amplitude B1 in the rotating-wave approximation.
inline double rabi_frequency(double alpha, double gamma_n, double b1) {
  if (!(b1 >= 0.0)) fail(ErrorKind::Domain, "B1 must be >= 0");
  return std::abs(alpha * gamma_n * b1) / 2.0;
}

}  // namespace v2spin
