#pragma once

// Electron (L/C/R) and nuclear single-quantum transitions of a labelled
// eigen-solution, their drive moments, and the second-order closed form for
// the L transition of a single nucleus.

#include <array>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "v2spin/spin_core.hpp"

namespace v2spin {

enum class TransitionKind { Electron, Nuclear };

inline std::string kind_name(TransitionKind k) { return k == TransitionKind::Electron ? "electron" : "nuclear"; }

inline TransitionKind parse_kind(const std::string& s) {
  if (s == "electron") return TransitionKind::Electron;
  if (s == "nuclear") return TransitionKind::Nuclear;
  fail(ErrorKind::Parse, "unknown transition kind '" + s + "'");
}

/// Delta mS = 1 electron lines, named by their position in the ODMR spectrum.
enum class ElectronLine { L, C, R };

inline std::string line_name(ElectronLine l) {
  switch (l) {
    case ElectronLine::L: return "L";
    case ElectronLine::C: return "C";
    case ElectronLine::R: return "R";
  }
  return "?";
}

inline ElectronLine parse_line(const std::string& s) {
  if (s == "L") return ElectronLine::L;
  if (s == "C") return ElectronLine::C;
  if (s == "R") return ElectronLine::R;
  fail(ErrorKind::Parse, "unknown electron line '" + s + "' (expected L, C or R)");
}

/// Lower 2mS of the pair: L = -3/2 <-> -1/2, C = -1/2 <-> +1/2, R = +1/2 <-> +3/2.
inline int lower_two_ms(ElectronLine l) {
  switch (l) {
    case ElectronLine::L: return -3;
    case ElectronLine::C: return -1;
    case ElectronLine::R: return 1;
  }
  return -3;
}

inline constexpr std::array<ElectronLine, 3> kElectronLines{ElectronLine::L, ElectronLine::C, ElectronLine::R};
inline constexpr std::array<int, 4> kSublevelsAscending{-3, -1, 1, 3};

struct TransitionEntry {
  TransitionKind kind = TransitionKind::Electron;
  std::string label;     // L/C/R, or the mS tag for nuclear lines
  std::string branch;    // nuclear configuration, or "n/a"
  double freq = 0.0;     // MHz, >= 0
  double moment = 0.0;   // normalized drive amplitude
  std::size_t state_a = 0;
  std::size_t state_b = 0;
  bool allowed = true;   // moment above the visibility threshold

  bool matches(TransitionKind k, const std::string& l, const std::string& b) const {
    return kind == k && label == l && branch == b;
  }
};

struct TransitionTable {
  std::vector<TransitionEntry> entries;

  std::vector<const TransitionEntry*> find_all(TransitionKind k, const std::string& label,
                                               const std::string& branch) const {
    std::vector<const TransitionEntry*> out;
    for (const auto& e : entries)
      if (e.matches(k, label, branch)) out.push_back(&e);
    return out;
  }

  /// Key lookup; several candidates are resolved by nearest frequency.
  const TransitionEntry* match(TransitionKind k, const std::string& label, const std::string& branch,
                               double near_freq) const {
    const TransitionEntry* best = nullptr;
    for (const auto* e : find_all(k, label, branch))
      if (!best || std::abs(e->freq - near_freq) < std::abs(best->freq - near_freq)) best = e;
    return best;
  }

  std::size_t count(TransitionKind k) const {
    std::size_t n = 0;
    for (const auto& e : entries) n += e.kind == k;
    return n;
  }

  void append(const TransitionTable& other) {
    entries.insert(entries.end(), other.entries.begin(), other.entries.end());
  }
};

struct TransitionOptions {
  bool allow_mixed = false;
  double allowed_threshold = 0.01;
};

/// gamma_e Sx (x) 1 + sum_k gamma_n,k Ix,k in the product basis.
inline CMatrix drive_operator(const SpinSystem& system) {
  const std::size_t n = system.nuclear_count();
  const auto nuc_dim = static_cast<Eigen::Index>(std::size_t{1} << n);
  const auto S = spin_operators(constants::kElectronSpin);
  const auto I = spin_operators(0.5);
  CMatrix op = system.gamma_e * kron(S.x, CMatrix::Identity(nuc_dim, nuc_dim));
  for (std::size_t k = 0; k < n; ++k)
    op += system.nuclei[k].gamma_n * kron(CMatrix::Identity(4, 4), nuclear_operator(k, n, I.x));
  return op;
}

/// Drive normalization: the bare nuclear flip element |gamma_n,1|/2. Systems
/// without nuclei fall back to gamma_e/2.
inline double moment_normalization(const SpinSystem& system) {
  if (system.nuclei.empty()) return 0.5 * system.gamma_e;
  return 0.5 * std::abs(system.nuclei.front().gamma_n);
}

inline cplx drive_element(const EigenSolution& eig, std::size_t a, std::size_t b, const CMatrix& drive) {
  const auto ia = static_cast<Eigen::Index>(a), ib = static_cast<Eigen::Index>(b);
  return eig.vectors.col(ia).dot(drive * eig.vectors.col(ib));
}

inline void check_states(const EigenSolution& eig, std::size_t a, std::size_t b) {
  if (a >= eig.size() || b >= eig.size()) fail(ErrorKind::Domain, "state index out of range");
  if (a == b) fail(ErrorKind::Domain, "transition needs two distinct states");
}

inline double transition_moment(const EigenSolution& eig, std::size_t a, std::size_t b, const SpinSystem& system,
                                const CMatrix& drive) {
  check_states(eig, a, b);
  return std::abs(drive_element(eig, a, b, drive)) / moment_normalization(system);
}

inline double transition_moment(const EigenSolution& eig, std::size_t a, std::size_t b, const SpinSystem& system) {
  return transition_moment(eig, a, b, system, drive_operator(system));
}

inline std::string electron_branch(const BasisLabel& l) {
  return l.two_mi.empty() ? "n/a" : l.nuclear_string();
}

/// Nuclear branch key: "n/a" for one nucleus, otherwise the configuration of
/// the spectator nuclei with '*' in place of the flipped one.
inline std::string nuclear_branch(const BasisLabel& l, std::size_t k) {
  if (l.two_mi.size() <= 1) return "n/a";
  std::string s = l.nuclear_string();
  s[k] = '*';
  return s;
}

inline void require_labels(const EigenSolution& eig, const TransitionOptions& opts) {
  if (eig.mixed && !opts.allow_mixed)
    fail(ErrorKind::Labeling, "eigen-solution at B=" + std::to_string(eig.field_z) +
                                  " G is mixed; product labels are not meaningful");
}

inline TransitionTable electron_transitions(const EigenSolution& eig, const SpinSystem& system,
                                            const TransitionOptions& opts = {}) {
  require_labels(eig, opts);
  const CMatrix drive = drive_operator(system);
  const std::size_t n = eig.n_nuclei;
  TransitionTable table;
  for (auto line : kElectronLines) {
    const int lo = lower_two_ms(line);
    for (std::size_t cfg = 0; cfg < (std::size_t{1} << n); ++cfg) {
      BasisLabel la = basis_label(static_cast<std::size_t>(electron_index(lo)) * (std::size_t{1} << n) + cfg, n);
      BasisLabel lb = la;
      lb.two_ms = lo + 2;
      TransitionEntry e;
      e.kind = TransitionKind::Electron;
      e.label = line_name(line);
      e.branch = electron_branch(la);
      e.state_a = eig.index_of(la);
      e.state_b = eig.index_of(lb);
      e.freq = std::abs(eig.energies(static_cast<Eigen::Index>(e.state_b)) -
                        eig.energies(static_cast<Eigen::Index>(e.state_a)));
      e.moment = transition_moment(eig, e.state_a, e.state_b, system, drive);
      e.allowed = e.moment >= opts.allowed_threshold;
      table.entries.push_back(std::move(e));
    }
  }
  return table;
}

inline TransitionTable nuclear_transitions(const EigenSolution& eig, const SpinSystem& system,
                                           const TransitionOptions& opts = {}) {
  TransitionTable table;
  const std::size_t n = eig.n_nuclei;
  if (n == 0) return table;
  require_labels(eig, opts);
  const CMatrix drive = drive_operator(system);
  for (std::size_t k = 0; k < n; ++k) {
    for (int two_ms : kSublevelsAscending) {
      for (std::size_t cfg = 0; cfg < (std::size_t{1} << n); ++cfg) {
        BasisLabel la = basis_label(static_cast<std::size_t>(electron_index(two_ms)) * (std::size_t{1} << n) + cfg, n);
        if (la.two_mi[k] < 0) continue;
        BasisLabel lb = la;
        lb.two_mi[k] = -1;
        TransitionEntry e;
        e.kind = TransitionKind::Nuclear;
        e.label = ms_tag(two_ms);
        e.branch = nuclear_branch(la, k);
        e.state_a = eig.index_of(la);
        e.state_b = eig.index_of(lb);
        e.freq = std::abs(eig.energies(static_cast<Eigen::Index>(e.state_a)) -
                          eig.energies(static_cast<Eigen::Index>(e.state_b)));
        e.moment = transition_moment(eig, e.state_a, e.state_b, system, drive);
        e.allowed = e.moment >= opts.allowed_threshold;
        table.entries.push_back(std::move(e));
      }
    }
  }
  return table;
}

inline TransitionTable all_transitions(const EigenSolution& eig, const SpinSystem& system,
                                       const TransitionOptions& opts = {}) {
  TransitionTable t = electron_transitions(eig, system, opts);
  t.append(nuclear_transitions(eig, system, opts));
  return t;
}

/// Signed gap E(upper mS) - E(lower mS) of an electron line for one nuclear
/// configuration (string of 'u'/'d', empty for N = 0). Negative below a
/// level crossing.
inline double line_gap(const EigenSolution& eig, ElectronLine line, const std::string& config = "") {
  BasisLabel la;
  la.two_ms = lower_two_ms(line);
  for (char c : config) la.two_mi.push_back(c == 'u' ? 1 : -1);
  if (la.two_mi.size() != eig.n_nuclei) fail(ErrorKind::Validation, "configuration length does not match N");
  BasisLabel lb = la;
  lb.two_ms += 2;
  return eig.energies(static_cast<Eigen::Index>(eig.index_of(lb))) -
         eig.energies(static_cast<Eigen::Index>(eig.index_of(la)));
}

/// Bisection for the field where line_gap changes sign.
inline double find_line_zero(const SpinSystem& system, ElectronLine line, double lo, double hi,
                             const std::string& config = "", double tol = 1e-9) {
  auto gap = [&](double b) { return line_gap(solve(system, b), line, config); };
  double glo = gap(lo), ghi = gap(hi);
  if (glo * ghi > 0.0) fail(ErrorKind::Domain, "line gap does not change sign on the bracket");
  for (int it = 0; it < 200 && hi - lo > tol; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double gm = gap(mid);
    if ((gm < 0.0) == (glo < 0.0)) {
      lo = mid;
      glo = gm;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

/// Second-order closed form of the |-1/2,d> <-> |-3/2,d> frequency:
///   gamma_e B - 2D - A_zz/2 - A_zx^2 / (4 A_zz)
///     + (3/16)(A_xx + A_yy)^2 / (gamma_e B - 2D + A_zz)
/// Valid for a contact-dominated tensor (A_xy = A_yz = 0, A_xx ~ A_yy).
inline double perturbative_L_frequency(const SpinSystem& system, double field_z) {
  if (system.nuclear_count() != 1) fail(ErrorKind::Validation, "closed form needs exactly one nucleus");
  const auto& a = system.nuclei.front().A;
  if (a.zz == 0.0) fail(ErrorKind::Domain, "A_zz = 0 makes the A_zx term singular");
  const double mean_perp = 0.5 * (std::abs(a.xx) + std::abs(a.yy));
  if (a.xy != 0.0 || a.yz != 0.0 || std::abs(a.xx - a.yy) > 0.1 * mean_perp)
    warn("hyperfine tensor is not contact-dominated; second-order L frequency is approximate");
  const double bare = system.gamma_e * field_z - 2.0 * system.D;
  const double sum_perp = a.xx + a.yy;
  return bare - 0.5 * a.zz - a.xz * a.xz / (4.0 * a.zz) + (3.0 / 16.0) * sum_perp * sum_perp / (bare + a.zz);
}

}  // namespace v2spin
