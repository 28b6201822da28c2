#pragma once

// Lattice-shell hyperfine catalog: predicted ODMR splittings per group,
// assignment of measured splittings, and Monte Carlo occupancy statistics.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "v2spin/transitions.hpp"

namespace v2spin {

struct ShellEntry {
  std::string group;                 // e.g. "Si_II"
  Isotope isotope = Isotope::Si29;
  HyperfineTensor A;                 // MHz
  int multiplicity = 1;              // equivalent lattice sites
  std::string source = "DFT";        // DFT | experimental | placeholder
  std::optional<double> gamma_n;     // overrides the isotope default

  double nuclear_gamma() const { return gamma_n.value_or(default_gamma_n(isotope)); }
};

struct Abundances {
  double si29 = 0.047;
  double c13 = 0.011;

  double of(Isotope iso) const {
    switch (iso) {
      case Isotope::Si29: return si29;
      case Isotope::C13: return c13;
      case Isotope::Custom: break;
    }
    return 0.0;
  }
};

struct ShellCatalog {
  std::vector<ShellEntry> entries;
  Abundances abundances;

  const ShellEntry* find(const std::string& group) const {
    for (const auto& e : entries)
      if (e.group == group) return &e;
    return nullptr;
  }

  void validate() const {
    auto in_unit = [](double a) { return a >= 0.0 && a <= 1.0; };
    if (!in_unit(abundances.si29) || !in_unit(abundances.c13)) fail(ErrorKind::Validation, "abundances must lie in [0, 1]");
    for (const auto& e : entries)
      if (e.multiplicity < 1) fail(ErrorKind::Validation, "entry " + e.group + ": multiplicity must be >= 1");
  }
};

struct SplittingOptions {
  double D = constants::kZeroFieldSplitting;
  double gamma_e = constants::kGammaElectron;
  bool secular = false;  // |A_zz| shortcut instead of diagonalization
};

/// Up/down doublet splitting of an electron line for one shell nucleus.
inline double predicted_splitting(const ShellEntry& entry, double field_z, ElectronLine line = ElectronLine::L,
                                  const SplittingOptions& opts = {}) {
  if (opts.secular) return std::abs(entry.A.zz);
  if (field_z < 100.0) warn("predicted splitting below 100 G: hyperfine mixing makes the doublet field dependent");
  SpinSystem s;
  s.D = opts.D;
  s.gamma_e = opts.gamma_e;
  s.nuclei.push_back(Nucleus{entry.isotope, entry.nuclear_gamma(), entry.A});
  const auto eig = solve(s, field_z);
  return std::abs(std::abs(line_gap(eig, line, "u")) - std::abs(line_gap(eig, line, "d")));
}

struct Assignment {
  std::string group;
  double predicted = 0.0;  // MHz
  double score = 0.0;
};

struct AssignOptions {
  double tolerance = 0.5;     // MHz, candidate filter
  double width = 0.25;        // MHz, Gaussian proximity scale
  ElectronLine line = ElectronLine::L;
  SplittingOptions splitting;
};

/// Candidates within tolerance, ranked by
///   exp(-(d/width)^2 / 2) * abundance * multiplicity.
/// The score does not depend on the tolerance.
inline std::vector<Assignment> assign(double splitting, const ShellCatalog& catalog, double field_z,
                                      const AssignOptions& opts = {}) {
  if (!(opts.tolerance > 0.0) || !(opts.width > 0.0)) fail(ErrorKind::Validation, "tolerance and width must be > 0");
  std::vector<Assignment> out;
  for (const auto& e : catalog.entries) {
    const double pred = predicted_splitting(e, field_z, opts.line, opts.splitting);
    const double d = pred - splitting;
    if (std::abs(d) > opts.tolerance) continue;
    const double prior = catalog.abundances.of(e.isotope) * e.multiplicity;
    out.push_back({e.group, pred, std::exp(-0.5 * (d / opts.width) * (d / opts.width)) * prior});
  }
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.score > b.score; });
  return out;
}

struct OccupancyOptions {
  double field_z = 150.0;
  double detection_floor = 1.0;  // MHz
  double bin_width = 0.5;        // MHz
  ElectronLine line = ElectronLine::L;
  SplittingOptions splitting;
};

struct OccupancyHistogram {
  std::map<std::string, std::size_t> by_group;   // defects whose strongest detected spin is in the group
  std::size_t none = 0;                          // no spin above the floor
  std::map<double, std::size_t> bins;            // lower bin edge (MHz) -> count
  std::vector<double> group_splitting;           // predicted splitting per catalog entry
  std::size_t n_defects = 0;
};

/// Uniform double in [0, 1) from the top 53 bits, identical on every platform.
inline double unit_uniform(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

/// For every simulated defect, each site of every entry is occupied by its
/// spinful isotope with the abundance probability; the largest predicted
/// splitting above the floor is recorded.
inline OccupancyHistogram occupancy_statistics(const ShellCatalog& catalog, std::size_t n_defects, std::uint64_t seed,
                                               const OccupancyOptions& opts = {}) {
  if (n_defects < 1) fail(ErrorKind::Validation, "need at least one defect");
  catalog.validate();
  OccupancyHistogram hist;
  hist.n_defects = n_defects;
  for (const auto& e : catalog.entries) {
    hist.group_splitting.push_back(predicted_splitting(e, opts.field_z, opts.line, opts.splitting));
    hist.by_group[e.group] = 0;
  }
  std::mt19937_64 rng(seed);
  for (std::size_t d = 0; d < n_defects; ++d) {
    double best = -1.0;
    std::size_t best_entry = 0;
    for (std::size_t i = 0; i < catalog.entries.size(); ++i) {
      const auto& e = catalog.entries[i];
      const double p = catalog.abundances.of(e.isotope);
      bool occupied = false;
      // Draw every site so the random stream does not depend on outcomes.
      for (int s = 0; s < e.multiplicity; ++s) occupied = (unit_uniform(rng) < p) || occupied;
      const double split = hist.group_splitting[i];
      if (occupied && split >= opts.detection_floor && split > best) {
        best = split;
        best_entry = i;
      }
    }
    if (best < 0.0) {
      ++hist.none;
      continue;
    }
    ++hist.by_group[catalog.entries[best_entry].group];
    ++hist.bins[std::floor(best / opts.bin_width) * opts.bin_width];
  }
  return hist;
}

/// Reference catalog. Si_II, C_III, Si_IV and C_VI carry the fitted
/// tensors; C_I and C_V stand in for the ~30 MHz and ~4 MHz carbon groups
/// until DFT tensors are supplied. Multiplicities are shell coordination
/// guesses and can be overridden.
inline const char* bundled_catalog_json() {
  return R"json({
  "abundances": {"Si29": 0.047, "C13": 0.011},
  "entries": [
    {"group": "C_I",    "isotope": "C13",  "multiplicity": 4,  "source": "placeholder",
     "A_MHz": {"xx": 30.0, "yy": 30.0, "zz": 30.0, "xy": 0, "xz": 0, "yz": 0}},
    {"group": "Si_II",  "isotope": "Si29", "multiplicity": 12, "source": "experimental",
     "A_MHz": {"xx": 9.00, "yy": 9.03, "zz": 8.660, "xy": 0, "xz": 0, "yz": 0}},
    {"group": "C_III",  "isotope": "C13",  "multiplicity": 12, "source": "experimental",
     "A_MHz": {"xx": 6.4, "yy": 6.4, "zz": 4.9, "xy": 0, "xz": 0, "yz": 0}},
    {"group": "Si_IV",  "isotope": "Si29", "multiplicity": 12, "source": "experimental",
     "A_MHz": {"xx": -2.7, "yy": -2.6, "zz": -2.200, "xy": 0, "xz": 0, "yz": 0}},
    {"group": "C_V",    "isotope": "C13",  "multiplicity": 12, "source": "placeholder",
     "A_MHz": {"xx": 4.0, "yy": 4.0, "zz": 4.0, "xy": 0, "xz": 0, "yz": 0}},
    {"group": "C_VI",   "isotope": "C13",  "multiplicity": 12, "source": "experimental",
     "A_MHz": {"xx": 0.42, "yy": 0.42, "zz": 0.42, "xy": 0, "xz": 0, "yz": 0}}
  ]
})json";
}

}  // namespace v2spin
