#pragma once

// Forward models for ODMR / ODNMR spectra and Rabi / Ramsey traces, plus
// doublet-splitting extraction from a spectrum.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

#include "v2spin/transitions.hpp"

namespace v2spin {

enum class Lineshape { Lorentzian, Gaussian };

inline std::string lineshape_name(Lineshape l) { return l == Lineshape::Lorentzian ? "lorentzian" : "gaussian"; }

/// Unit-peak line profile at offset x from the centre.
inline double line_profile(Lineshape shape, double x, double fwhm) {
  const double u = 2.0 * x / fwhm;
  if (shape == Lineshape::Lorentzian) return 1.0 / (1.0 + u * u);
  return std::exp(-std::numbers::ln2 * u * u);
}

struct FrequencyGrid {
  double start = 0.0, stop = 0.0, step = 0.02;  // MHz

  std::vector<double> points() const {
    if (!(step > 0.0) || !(stop >= start)) fail(ErrorKind::Validation, "invalid frequency grid");
    const auto n = static_cast<std::size_t>(std::floor((stop - start) / step + 1e-9)) + 1;
    std::vector<double> f(n);
    for (std::size_t i = 0; i < n; ++i) f[i] = start + step * static_cast<double>(i);
    return f;
  }
};

struct SpectrumModel {
  std::vector<double> freq;       // MHz
  std::vector<double> intensity;  // arbitrary units, baseline 0
  Lineshape lineshape = Lineshape::Lorentzian;
  double fwhm = 0.3;

  double spacing() const { return freq.size() > 1 ? freq[1] - freq[0] : 0.0; }
};

struct SpectrumOptions {
  double fwhm = 0.3;
  Lineshape lineshape = Lineshape::Lorentzian;
};

/// Eigenstate populations from product-basis populations, following the
/// eigenstate labels.
inline Eigen::VectorXd populations_by_label(const EigenSolution& eig, const Eigen::VectorXd& basis_populations) {
  if (static_cast<std::size_t>(basis_populations.size()) != eig.size())
    fail(ErrorKind::Validation, "population vector has wrong length");
  Eigen::VectorXd p(basis_populations.size());
  for (std::size_t i = 0; i < eig.size(); ++i)
    p(static_cast<Eigen::Index>(i)) = basis_populations(static_cast<Eigen::Index>(basis_index(eig.labels[i])));
  return p;
}

/// Weight |p_a - p_b| * moment^2 of one line.
inline double line_weight(const TransitionEntry& e, const Eigen::VectorXd& populations) {
  const auto a = static_cast<Eigen::Index>(e.state_a), b = static_cast<Eigen::Index>(e.state_b);
  if (a >= populations.size() || b >= populations.size()) fail(ErrorKind::Validation, "population vector too short");
  return std::abs(populations(a) - populations(b)) * e.moment * e.moment;
}

inline SpectrumModel synthesize_spectrum(const TransitionTable& table, TransitionKind kind,
                                         const Eigen::VectorXd& populations, const FrequencyGrid& grid,
                                         const SpectrumOptions& opts) {
  if (!(opts.fwhm > 0.0)) fail(ErrorKind::Validation, "fwhm must be > 0");
  if (populations.size() > 0) {
    if (populations.minCoeff() < -1e-12 || std::abs(populations.sum() - 1.0) > 1e-9)
      fail(ErrorKind::Validation, "populations must be a normalized distribution");
  }
  SpectrumModel s;
  s.freq = grid.points();
  s.intensity.assign(s.freq.size(), 0.0);
  s.lineshape = opts.lineshape;
  s.fwhm = opts.fwhm;
  for (const auto& e : table.entries) {
    if (e.kind != kind) continue;
    const double w = line_weight(e, populations);
    if (w == 0.0) continue;
    for (std::size_t i = 0; i < s.freq.size(); ++i) s.intensity[i] += w * line_profile(opts.lineshape, s.freq[i] - e.freq, opts.fwhm);
  }
  return s;
}

inline SpectrumModel odmr_spectrum(const TransitionTable& table, const Eigen::VectorXd& populations,
                                   const FrequencyGrid& grid, const SpectrumOptions& opts = {}) {
  return synthesize_spectrum(table, TransitionKind::Electron, populations, grid, opts);
}

/// Nuclear lines only; hyperfine-enhanced lines come out stronger through
/// the moment^2 weight.
inline SpectrumModel odnmr_spectrum(const TransitionTable& table, const Eigen::VectorXd& populations,
                                    const FrequencyGrid& grid, const SpectrumOptions& opts = {}) {
  return synthesize_spectrum(table, TransitionKind::Nuclear, populations, grid, opts);
}

inline void add_gaussian_noise(SpectrumModel& s, double sigma, std::uint64_t seed) {
  if (sigma <= 0.0) return;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, sigma);
  for (double& v : s.intensity) v += noise(rng);
}

/// signal = (W^2 / W_eff^2) sin^2(pi W_eff t) exp(-t / decay), W_eff = sqrt(W^2 + detuning^2).
/// A non-positive decay time disables damping.
inline std::vector<double> rabi_trace(double omega, double detuning, const std::vector<double>& times,
                                      double decay_time) {
  std::vector<double> out;
  out.reserve(times.size());
  const double eff = std::hypot(omega, detuning);
  for (double t : times) {
    if (eff == 0.0) {
      out.push_back(0.0);
      continue;
    }
    const double s = std::sin(std::numbers::pi * eff * t);
    const double damp = decay_time > 0.0 ? std::exp(-t / decay_time) : 1.0;
    out.push_back(omega * omega / (eff * eff) * s * s * damp);
  }
  return out;
}

enum class RamseyEnvelope { Gaussian, Exponential };

/// signal = (1 + cos(2 pi detuning t) envelope(t)) / 2
inline std::vector<double> ramsey_trace(double detuning, double t2star, const std::vector<double>& times,
                                        RamseyEnvelope envelope = RamseyEnvelope::Gaussian) {
  if (!(t2star > 0.0)) fail(ErrorKind::Domain, "T2* must be > 0");
  std::vector<double> out;
  out.reserve(times.size());
  for (double t : times) {
    const double x = t / t2star;
    const double env = envelope == RamseyEnvelope::Gaussian ? std::exp(-x * x) : std::exp(-x);
    out.push_back(0.5 * (1.0 + std::cos(2.0 * std::numbers::pi * detuning * t) * env));
  }
  return out;
}

struct SpectralPeak {
  double freq;
  double height;
};

inline double median_of(std::vector<double> v) {
  if (v.empty()) return 0.0;
  const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  return *mid;
}

/// Local maxima above baseline + 3 * robust noise, refined by a parabola
/// through the three samples around each maximum. Sorted by height, largest
/// first.
inline std::vector<SpectralPeak> find_peaks(const SpectrumModel& s) {
  const auto& y = s.intensity;
  std::vector<SpectralPeak> peaks;
  if (y.size() < 3) return peaks;
  const double baseline = median_of(y);
  std::vector<double> dev(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) dev[i] = std::abs(y[i] - baseline);
  const double noise = 1.4826 * median_of(dev);
  double top = 0.0;
  for (double v : y) top = std::max(top, v - baseline);
  const double threshold = std::max(3.0 * noise, 1e-9 * top);
  if (!(top > 0.0)) return peaks;

  const double h = s.spacing();
  for (std::size_t i = 1; i + 1 < y.size(); ++i) {
    if (!(y[i] > y[i - 1] && y[i] >= y[i + 1])) continue;
    if (y[i] - baseline <= threshold) continue;
    const double denom = y[i - 1] - 2.0 * y[i] + y[i + 1];
    const double shift = denom != 0.0 ? 0.5 * (y[i - 1] - y[i + 1]) / denom : 0.0;
    peaks.push_back({s.freq[i] + shift * h, y[i] - 0.25 * (y[i - 1] - y[i + 1]) * shift});
  }
  std::sort(peaks.begin(), peaks.end(), [](const auto& a, const auto& b) { return a.height > b.height; });
  return peaks;
}

/// Frequency difference of the two dominant peaks. Fails when fewer than two
/// peaks stand out of the noise or the pair is not resolved (closer than one
/// linewidth).
inline double splitting_extract(const SpectrumModel& s) {
  const auto peaks = find_peaks(s);
  if (peaks.size() < 2) fail(ErrorKind::Extraction, "fewer than two resolvable peaks");
  const double split = std::abs(peaks[0].freq - peaks[1].freq);
  if (split < s.fwhm) fail(ErrorKind::Extraction, "doublet is not resolved at this linewidth");
  return split;
}

}  // namespace v2spin
