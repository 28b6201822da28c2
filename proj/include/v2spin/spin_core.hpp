#pragma once

// Ground-state spin Hamiltonian of an S=3/2 electron coupled to N spin-1/2
// nuclei in a field along the crystal c-axis.
//
// Units: MHz for energies and couplings, Gauss for fields, MHz/G for
// gyromagnetic ratios.
//
// Basis convention. Operators act on electron (x) nucleus_1 (x) ... (x) nucleus_N.
// The electron factor is ordered mS = +3/2, +1/2, -1/2, -3/2 and every nuclear
// factor is ordered up (mI = +1/2) before down (mI = -1/2). The product index
// of |mS, mI_1 ... mI_N> is therefore e * 2^N + sum_k bit_k * 2^(N-1-k) with
// e = 3/2 - mS and bit_k = 1 for down.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "v2spin/errors.hpp"

namespace v2spin {

using cplx = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using RVector = Eigen::VectorXd;

namespace constants {
inline constexpr double kGammaElectron = 2.8025;   // g ~ 2.00
inline constexpr double kGammaSi29 = -8.465e-4;
inline constexpr double kGammaC13 = 1.0705e-3;
inline constexpr double kZeroFieldSplitting = 35.0;
inline constexpr double kElectronSpin = 1.5;
inline constexpr std::size_t kDefaultMaxDimension = 4 * 64;
}  // namespace constants

enum class Isotope { Si29, C13, Custom };

inline std::string isotope_name(Isotope iso) {
  switch (iso) {
    case Isotope::Si29: return "Si29";
    case Isotope::C13: return "C13";
    case Isotope::Custom: return "custom";
  }
  return "custom";
}

inline Isotope parse_isotope(const std::string& s) {
  if (s == "Si29") return Isotope::Si29;
  if (s == "C13") return Isotope::C13;
  if (s == "custom") return Isotope::Custom;
  fail(ErrorKind::Parse, "unknown isotope '" + s + "' (expected Si29, C13 or custom)");
}

inline double default_gamma_n(Isotope iso) {
  switch (iso) {
    case Isotope::Si29: return constants::kGammaSi29;
    case Isotope::C13: return constants::kGammaC13;
    case Isotope::Custom: break;
  }
  fail(ErrorKind::Validation, "custom isotopes need an explicit gamma_n");
}

/// Symmetric 3x3 hyperfine tensor in MHz. Only the upper triangle is stored,
/// so symmetry holds by construction.
struct HyperfineTensor {
  double xx = 0.0, yy = 0.0, zz = 0.0;
  double xy = 0.0, xz = 0.0, yz = 0.0;

  static HyperfineTensor diagonal(double axx, double ayy, double azz) {
    return HyperfineTensor{axx, ayy, azz, 0.0, 0.0, 0.0};
  }
  static HyperfineTensor isotropic(double a) { return diagonal(a, a, a); }
  /// Axial form A_zz = A_iso + 2T, A_xx = A_yy = A_iso - T.
  static HyperfineTensor axial(double a_iso, double t) {
    return diagonal(a_iso - t, a_iso - t, a_iso + 2.0 * t);
  }

  Eigen::Matrix3d matrix() const {
    Eigen::Matrix3d m;
    m << xx, xy, xz, xy, yy, yz, xz, yz, zz;
    return m;
  }

  double isotropic_part() const { return (xx + yy + zz) / 3.0; }
  double axial_dipolar() const { return (zz - isotropic_part()) / 2.0; }
  /// Transverse flip-flop strength of V = A_perp (Sx Ix + Sy Iy).
  double perpendicular() const { return 0.5 * std::abs(xx + yy); }

  HyperfineTensor scaled(double k) const {
    return HyperfineTensor{k * xx, k * yy, k * zz, k * xy, k * xz, k * yz};
  }
  bool is_zero() const {
    return xx == 0.0 && yy == 0.0 && zz == 0.0 && xy == 0.0 && xz == 0.0 && yz == 0.0;
  }
};

struct Nucleus {
  Isotope isotope = Isotope::Si29;
  double gamma_n = constants::kGammaSi29;
  HyperfineTensor A;

  static Nucleus si29(const HyperfineTensor& a) { return {Isotope::Si29, constants::kGammaSi29, a}; }
  static Nucleus c13(const HyperfineTensor& a) { return {Isotope::C13, constants::kGammaC13, a}; }
};

struct SpinSystem {
  double D = constants::kZeroFieldSplitting;
  double gamma_e = constants::kGammaElectron;
  std::vector<Nucleus> nuclei;

  std::size_t nuclear_count() const { return nuclei.size(); }
  std::size_t dimension() const { return std::size_t{4} << nuclei.size(); }

  /// Throws on unusable parameters; warns when a nucleus is not much slower
  /// than the electron.
  void validate() const {
    if (!std::isfinite(D) || D < 0.0) fail(ErrorKind::Validation, "D must be finite and >= 0");
    if (!std::isfinite(gamma_e) || gamma_e <= 0.0) fail(ErrorKind::Validation, "gamma_e must be > 0");
    for (std::size_t k = 0; k < nuclei.size(); ++k) {
      const auto& n = nuclei[k];
      if (!std::isfinite(n.gamma_n)) fail(ErrorKind::Validation, "nucleus " + std::to_string(k) + ": gamma_n not finite");
      if (std::abs(n.gamma_n) > 0.1 * gamma_e)
        warn("nucleus " + std::to_string(k) + ": |gamma_n| is not small compared to gamma_e");
    }
  }
};

struct SpinMatrices {
  CMatrix x, y, z;
};

/// Angular momentum matrices for spin s in the |s, m> basis, m descending.
inline SpinMatrices spin_operators(double s) {
  const double twice = 2.0 * s;
  if (!std::isfinite(s) || s < 0.0 || std::abs(twice - std::round(twice)) > 1e-12)
    fail(ErrorKind::Domain, "spin quantum number must be a non-negative half-integer");
  const auto dim = static_cast<Eigen::Index>(std::lround(twice)) + 1;
  CMatrix plus = CMatrix::Zero(dim, dim);
  CMatrix z = CMatrix::Zero(dim, dim);
  for (Eigen::Index i = 0; i < dim; ++i) {
    const double m = s - static_cast<double>(i);
    z(i, i) = m;
    // <m+1| S+ |m> sits one row above the diagonal.
    if (i > 0) plus(i - 1, i) = std::sqrt(s * (s + 1.0) - m * (m + 1.0));
  }
  const CMatrix minus = plus.adjoint();
  return SpinMatrices{0.5 * (plus + minus), (plus - minus) / cplx(0.0, 2.0), z};
}

inline CMatrix kron(const CMatrix& a, const CMatrix& b) {
  CMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

/// Product-basis label. Quantum numbers are stored doubled so they stay
/// integral: two_ms in {3, 1, -1, -3}, two_mi entries in {1, -1}.
struct BasisLabel {
  int two_ms = 3;
  std::vector<int> two_mi;

  double ms() const { return 0.5 * two_ms; }
  bool operator==(const BasisLabel&) const = default;

  /// Nuclear configuration as a string of 'u'/'d', one per nucleus.
  std::string nuclear_string() const {
    std::string s;
    for (int m : two_mi) s.push_back(m > 0 ? 'u' : 'd');
    return s;
  }
  std::string to_string() const;
};

inline std::string ms_tag(int two_ms) {
  switch (two_ms) {
    case 3: return "+3/2";
    case 1: return "+1/2";
    case -1: return "-1/2";
    case -3: return "-3/2";
  }
  fail(ErrorKind::Domain, "invalid electron projection 2mS=" + std::to_string(two_ms));
}

inline int parse_ms_tag(const std::string& tag) {
  for (int t : {3, 1, -1, -3})
    if (ms_tag(t) == tag) return t;
  fail(ErrorKind::Parse, "invalid mS tag '" + tag + "'");
}

inline std::string BasisLabel::to_string() const {
  std::string s = "|" + ms_tag(two_ms);
  if (!two_mi.empty()) s += "," + nuclear_string();
  return s + ">";
}

inline int electron_index(int two_ms) { return (3 - two_ms) / 2; }

inline BasisLabel basis_label(std::size_t index, std::size_t n_nuclei) {
  BasisLabel label;
  const std::size_t nuc_dim = std::size_t{1} << n_nuclei;
  label.two_ms = 3 - 2 * static_cast<int>(index / nuc_dim);
  const std::size_t rest = index % nuc_dim;
  label.two_mi.resize(n_nuclei);
  for (std::size_t k = 0; k < n_nuclei; ++k) {
    const bool down = (rest >> (n_nuclei - 1 - k)) & 1u;
    label.two_mi[k] = down ? -1 : 1;
  }
  return label;
}

inline std::size_t basis_index(const BasisLabel& label) {
  const std::size_t n = label.two_mi.size();
  std::size_t idx = static_cast<std::size_t>(electron_index(label.two_ms)) << n;
  for (std::size_t k = 0; k < n; ++k)
    if (label.two_mi[k] < 0) idx |= std::size_t{1} << (n - 1 - k);
  return idx;
}

/// Nuclear-space operator acting with `op` on nucleus k and identity elsewhere.
inline CMatrix nuclear_operator(std::size_t k, std::size_t n_nuclei, const CMatrix& op) {
  CMatrix out = CMatrix::Identity(1, 1);
  for (std::size_t j = 0; j < n_nuclei; ++j)
    out = kron(out, j == k ? op : CMatrix::Identity(2, 2));
  return out;
}

struct HamiltonianOptions {
  std::size_t max_dimension = constants::kDefaultMaxDimension;
};

/// H = D(Sz^2 + S(S+1)/3) + gamma_e B Sz + sum_k S.A_k.I_k + sum_k gamma_n,k B Iz,k
///
/// The +S(S+1)/3 offset is a constant shift (5D/4) of every level and drops
/// out of all transition frequencies.
inline CMatrix build_hamiltonian(const SpinSystem& system, double field_z,
                                 const HamiltonianOptions& opts = {}) {
  if (!std::isfinite(field_z)) fail(ErrorKind::Validation, "field must be finite");
  system.validate();
  const std::size_t n = system.nuclear_count();
  if (n > 30 || system.dimension() > opts.max_dimension)
    fail(ErrorKind::Size, "Hilbert dimension " + std::to_string(system.dimension()) + " exceeds cap " +
                              std::to_string(opts.max_dimension));

  const auto S = spin_operators(constants::kElectronSpin);
  const auto I = spin_operators(0.5);
  const auto nuc_dim = static_cast<Eigen::Index>(std::size_t{1} << n);
  const double s = constants::kElectronSpin;

  const CMatrix electron = system.D * (S.z * S.z + (s * (s + 1.0) / 3.0) * CMatrix::Identity(4, 4)) +
                           system.gamma_e * field_z * S.z;
  CMatrix h = kron(electron, CMatrix::Identity(nuc_dim, nuc_dim));

  const CMatrix* electron_ops[3] = {&S.x, &S.y, &S.z};
  const CMatrix* spin_half[3] = {&I.x, &I.y, &I.z};
  for (std::size_t k = 0; k < n; ++k) {
    const auto& nuc = system.nuclei[k];
    const Eigen::Matrix3d a = nuc.A.matrix();
    CMatrix ik[3];
    for (int j = 0; j < 3; ++j) ik[j] = nuclear_operator(k, n, *spin_half[j]);
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
        if (a(i, j) != 0.0) h += a(i, j) * kron(*electron_ops[i], ik[j]);
    h += nuc.gamma_n * field_z * kron(CMatrix::Identity(4, 4), ik[2]);
  }
  // Remove round-off asymmetry so the output is Hermitian to machine precision.
  return 0.5 * (h + h.adjoint());
}

inline double hermiticity_defect(const CMatrix& h) {
  return (h - h.adjoint()).cwiseAbs().maxCoeff();
}

/// Eigen-decomposition with product-basis labels.
struct EigenSolution {
  double field_z = 0.0;
  RVector energies;                 // ascending
  CMatrix vectors;                  // column i belongs to energies[i]
  std::vector<BasisLabel> labels;   // bijective assignment
  std::vector<double> overlaps;     // |<label_i|v_i>|^2
  std::size_t n_nuclei = 0;
  bool mixed = false;               // some overlap < kMixedThreshold

  static constexpr double kMixedThreshold = 0.5;

  std::size_t size() const { return static_cast<std::size_t>(energies.size()); }

  std::optional<std::size_t> find(const BasisLabel& label) const {
    for (std::size_t i = 0; i < labels.size(); ++i)
      if (labels[i] == label) return i;
    return std::nullopt;
  }
  std::size_t index_of(const BasisLabel& label) const {
    if (auto i = find(label)) return *i;
    fail(ErrorKind::Labeling, "no eigenstate carries label " + label.to_string());
  }
  bool is_mixed(std::size_t i) const { return overlaps[i] < kMixedThreshold; }
};

/// Diagonalizes a Hermitian matrix of dimension 4 * 2^N and labels the
/// eigenvectors by a maximum-overlap bijection with the product basis
/// (greedy on descending overlap, ties to the lower-energy state). Each
/// eigenvector's phase is fixed so its labelled component is real positive.
inline EigenSolution diagonalize(const CMatrix& h, double field_z) {
  if (h.rows() != h.cols() || h.rows() < 4) fail(ErrorKind::Validation, "matrix must be square with dimension >= 4");
  const auto dim = static_cast<std::size_t>(h.rows());
  std::size_t n_nuclei = 0;
  while ((std::size_t{4} << n_nuclei) < dim) ++n_nuclei;
  if ((std::size_t{4} << n_nuclei) != dim) fail(ErrorKind::Validation, "dimension must be 4 * 2^N");
  const double scale = std::max(1.0, h.cwiseAbs().maxCoeff());
  if (hermiticity_defect(h) > 1e-10 * scale) fail(ErrorKind::Validation, "matrix is not Hermitian");

  Eigen::SelfAdjointEigenSolver<CMatrix> solver(h);
  if (solver.info() != Eigen::Success) fail(ErrorKind::Validation, "eigen-decomposition did not converge");

  EigenSolution out;
  out.field_z = field_z;
  out.energies = solver.eigenvalues();
  out.vectors = solver.eigenvectors();
  out.n_nuclei = n_nuclei;

  struct Candidate {
    double overlap;
    std::size_t state, basis;
  };
  std::vector<Candidate> cands;
  cands.reserve(dim * dim);
  for (std::size_t i = 0; i < dim; ++i)
    for (std::size_t b = 0; b < dim; ++b)
      cands.push_back({std::norm(out.vectors(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(i))), i, b});
  std::stable_sort(cands.begin(), cands.end(), [](const Candidate& a, const Candidate& b) {
    if (a.overlap != b.overlap) return a.overlap > b.overlap;
    return a.state < b.state;
  });

  std::vector<std::size_t> basis_of(dim, dim);
  std::vector<bool> basis_used(dim, false);
  std::size_t assigned = 0;
  for (const auto& c : cands) {
    if (assigned == dim) break;
    if (basis_of[c.state] != dim || basis_used[c.basis]) continue;
    basis_of[c.state] = c.basis;
    basis_used[c.basis] = true;
    ++assigned;
  }

  out.labels.resize(dim);
  out.overlaps.resize(dim);
  for (std::size_t i = 0; i < dim; ++i) {
    const auto col = static_cast<Eigen::Index>(i);
    const auto row = static_cast<Eigen::Index>(basis_of[i]);
    out.labels[i] = basis_label(basis_of[i], n_nuclei);
    out.overlaps[i] = std::norm(out.vectors(row, col));
    const cplx c = out.vectors(row, col);
    if (std::abs(c) > 0.0) out.vectors.col(col) *= std::conj(c) / std::abs(c);
    if (out.overlaps[i] < EigenSolution::kMixedThreshold) out.mixed = true;
  }
  return out;
}

inline EigenSolution solve(const SpinSystem& system, double field_z, const HamiltonianOptions& opts = {}) {
  return diagonalize(build_hamiltonian(system, field_z, opts), field_z);
}

/// Analytic N = 0 level D(mS^2 + 5/4) + gamma_e B mS.
inline double bare_electron_level(const SpinSystem& system, double field_z, double ms) {
  return system.D * (ms * ms + 1.25) + system.gamma_e * field_z * ms;
}

/// Field at which the mS = -3/2 and -1/2 levels of the bare electron cross.
inline double gslac_field(const SpinSystem& system) { return 2.0 * system.D / system.gamma_e; }

}  // namespace v2spin
