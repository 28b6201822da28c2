#pragma once

// JSON and CSV (de)serialization for systems, catalogs, fit problems and
// results, transition tables and rate models. Parse errors name the JSON
// path of the offending field, or the line and column for syntax errors.

#include <nlohmann/json.hpp>

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "v2spin/enhancement.hpp"
#include "v2spin/estimation.hpp"
#include "v2spin/polarization.hpp"
#include "v2spin/shells.hpp"
#include "v2spin/spectra.hpp"

namespace v2spin::io {

using nlohmann::json;

/// Shortest round-trippable-enough representation used in every output file.
inline std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

inline json parse_text(const std::string& text, const std::string& source = "<input>") {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    std::size_t line = 1, col = 1;
    const std::size_t upto = std::min<std::size_t>(e.byte > 0 ? e.byte - 1 : 0, text.size());
    for (std::size_t i = 0; i < upto; ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    fail(ErrorKind::Parse, source + ":" + std::to_string(line) + ":" + std::to_string(col) + ": malformed JSON");
  }
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Validation, "cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline json parse_file(const std::string& path) { return parse_text(read_file(path), path); }

namespace detail {

[[noreturn]] inline void field_error(const std::string& path, const std::string& what) {
  fail(ErrorKind::Parse, path + ": " + what);
}

inline const json& require(const json& j, const std::string& path, const char* key) {
  if (!j.is_object()) field_error(path, "expected an object");
  auto it = j.find(key);
  if (it == j.end()) field_error(path + "." + key, "missing field");
  return *it;
}

inline double number(const json& j, const std::string& path) {
  if (!j.is_number()) field_error(path, "expected a number");
  return j.get<double>();
}

inline double require_number(const json& j, const std::string& path, const char* key) {
  return number(require(j, path, key), path + "." + key);
}

inline double optional_number(const json& j, const std::string& path, const char* key, double fallback) {
  auto it = j.find(key);
  return it == j.end() ? fallback : number(*it, path + "." + key);
}

inline std::string require_string(const json& j, const std::string& path, const char* key) {
  const auto& v = require(j, path, key);
  if (!v.is_string()) field_error(path + "." + key, "expected a string");
  return v.get<std::string>();
}

inline const json& require_array(const json& j, const std::string& path, const char* key) {
  const auto& v = require(j, path, key);
  if (!v.is_array()) field_error(path + "." + key, "expected an array");
  return v;
}

template <class F>
auto rethrow_at(const std::string& path, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const Error& e) {
    std::string what = e.what();
    const std::string prefix = std::string(to_string(e.kind())) + ": ";
    if (what.rfind(prefix, 0) == 0) what.erase(0, prefix.size());
    if (what.rfind("$", 0) == 0) throw;  // already located
    field_error(path, what);
  }
}

}  // namespace detail

inline HyperfineTensor tensor_from_json(const json& j, const std::string& path) {
  using namespace detail;
  HyperfineTensor a;
  a.xx = require_number(j, path, "xx");
  a.yy = require_number(j, path, "yy");
  a.zz = require_number(j, path, "zz");
  a.xy = optional_number(j, path, "xy", 0.0);
  a.xz = optional_number(j, path, "xz", 0.0);
  a.yz = optional_number(j, path, "yz", 0.0);
  return a;
}

inline json to_json(const HyperfineTensor& a) {
  return json{{"xx", a.xx}, {"yy", a.yy}, {"zz", a.zz}, {"xy", a.xy}, {"xz", a.xz}, {"yz", a.yz}};
}

inline SpinSystem spin_system_from_json(const json& j, const std::string& path = "$") {
  using namespace detail;
  SpinSystem s;
  s.D = optional_number(j, path, "D_MHz", constants::kZeroFieldSplitting);
  s.gamma_e = optional_number(j, path, "gamma_e_MHzPerG", constants::kGammaElectron);
  if (j.contains("nuclei")) {
    const auto& arr = require_array(j, path, "nuclei");
    for (std::size_t i = 0; i < arr.size(); ++i) {
      const std::string p = path + ".nuclei[" + std::to_string(i) + "]";
      Nucleus n;
      n.isotope = rethrow_at(p + ".isotope", [&] { return parse_isotope(require_string(arr[i], p, "isotope")); });
      if (arr[i].contains("gamma_n_MHzPerG")) {
        n.gamma_n = require_number(arr[i], p, "gamma_n_MHzPerG");
      } else {
        n.gamma_n = rethrow_at(p + ".gamma_n_MHzPerG", [&] { return default_gamma_n(n.isotope); });
      }
      n.A = tensor_from_json(require(arr[i], p, "A_MHz"), p + ".A_MHz");
      s.nuclei.push_back(n);
    }
  }
  rethrow_at(path, [&] {
    s.validate();
    return 0;
  });
  return s;
}

inline json to_json(const SpinSystem& s) {
  json nuclei = json::array();
  for (const auto& n : s.nuclei)
    nuclei.push_back({{"isotope", isotope_name(n.isotope)}, {"gamma_n_MHzPerG", n.gamma_n}, {"A_MHz", to_json(n.A)}});
  return json{{"D_MHz", s.D}, {"gamma_e_MHzPerG", s.gamma_e}, {"nuclei", nuclei}};
}

inline ShellCatalog catalog_from_json(const json& j, const std::string& path = "$") {
  using namespace detail;
  ShellCatalog c;
  if (!j.is_object()) field_error(path, "expected an object");
  if (j.contains("abundances")) {
    const auto& ab = require(j, path, "abundances");
    c.abundances.si29 = optional_number(ab, path + ".abundances", "Si29", c.abundances.si29);
    c.abundances.c13 = optional_number(ab, path + ".abundances", "C13", c.abundances.c13);
    for (double a : {c.abundances.si29, c.abundances.c13})
      if (a < 0.0 || a > 1.0) field_error(path + ".abundances", "abundance outside [0, 1]");
  }
  const auto& arr = require_array(j, path, "entries");
  for (std::size_t i = 0; i < arr.size(); ++i) {
    const std::string p = path + ".entries[" + std::to_string(i) + "]";
    ShellEntry e;
    e.group = require_string(arr[i], p, "group");
    e.isotope = rethrow_at(p + ".isotope", [&] { return parse_isotope(require_string(arr[i], p, "isotope")); });
    const auto& mult = require(arr[i], p, "multiplicity");
    if (!mult.is_number_integer()) field_error(p + ".multiplicity", "expected an integer");
    e.multiplicity = mult.get<int>();
    if (e.multiplicity < 1) field_error(p + ".multiplicity", "must be >= 1");
    e.A = tensor_from_json(require(arr[i], p, "A_MHz"), p + ".A_MHz");
    if (arr[i].contains("source")) e.source = require_string(arr[i], p, "source");
    if (arr[i].contains("gamma_n_MHzPerG")) e.gamma_n = require_number(arr[i], p, "gamma_n_MHzPerG");
    if (e.isotope == Isotope::Custom && !e.gamma_n) field_error(p + ".gamma_n_MHzPerG", "custom isotope needs gamma_n");
    c.entries.push_back(std::move(e));
  }
  return c;
}

inline ShellCatalog load_catalog(const std::string& text, const std::string& source = "<catalog>") {
  return catalog_from_json(parse_text(text, source));
}

inline ShellCatalog bundled_catalog() { return load_catalog(bundled_catalog_json(), "<bundled catalog>"); }

inline FitProblem fit_problem_from_json(const json& j, const std::string& path = "$") {
  using namespace detail;
  FitProblem p;
  p.system = spin_system_from_json(require(j, path, "system"), path + ".system");
  if (p.system.nuclear_count() != 1) field_error(path + ".system.nuclei", "fit problems need exactly one nucleus");
  p.field_z = require_number(j, path, "B_G");
  const auto& fp = require_array(j, path, "free_params");
  for (std::size_t i = 0; i < fp.size(); ++i) {
    const std::string q = path + ".free_params[" + std::to_string(i) + "]";
    if (!fp[i].is_string()) field_error(q, "expected a string");
    p.free_params.push_back(rethrow_at(q, [&] { return parse_parameter(fp[i].get<std::string>()); }));
  }
  if (j.contains("initial_guess")) {
    ParameterVector guess = p.nominal();
    const auto& g = require(j, path, "initial_guess");
    if (!g.is_object()) field_error(path + ".initial_guess", "expected an object");
    for (auto it = g.begin(); it != g.end(); ++it) {
      const std::string q = path + ".initial_guess." + it.key();
      const auto idx = static_cast<std::size_t>(rethrow_at(q, [&] { return parse_parameter(it.key()); }));
      guess[idx] = number(it.value(), q);
    }
    p.initial_guess = guess;
  }
  if (j.contains("bounds")) {
    const auto& b = require(j, path, "bounds");
    for (const char* side : {"lower", "upper"}) {
      if (!b.contains(side)) continue;
      auto& target = std::string(side) == "lower" ? p.bounds.lower : p.bounds.upper;
      const auto& obj = b.at(side);
      for (auto it = obj.begin(); it != obj.end(); ++it) {
        const std::string q = path + ".bounds." + side + "." + it.key();
        target[static_cast<std::size_t>(rethrow_at(q, [&] { return parse_parameter(it.key()); }))] = number(it.value(), q);
      }
    }
  }
  const auto& ms = require_array(j, path, "measurements");
  for (std::size_t i = 0; i < ms.size(); ++i) {
    const std::string q = path + ".measurements[" + std::to_string(i) + "]";
    Measurement m;
    m.kind = rethrow_at(q + ".kind", [&] { return parse_kind(require_string(ms[i], q, "kind")); });
    m.label = require_string(ms[i], q, "label");
    m.branch = ms[i].contains("branch") ? require_string(ms[i], q, "branch") : "n/a";
    m.freq = require_number(ms[i], q, "freq_MHz");
    m.sigma = optional_number(ms[i], q, "sigma_MHz", 0.01);
    if (!(m.sigma > 0.0)) field_error(q + ".sigma_MHz", "must be > 0");
    p.measurements.push_back(std::move(m));
  }
  return p;
}

inline json to_json(const FitProblem& p) {
  json ms = json::array();
  for (const auto& m : p.measurements)
    ms.push_back({{"kind", kind_name(m.kind)}, {"label", m.label}, {"branch", m.branch}, {"freq_MHz", m.freq}, {"sigma_MHz", m.sigma}});
  json fp = json::array();
  for (auto f : p.free_params) fp.push_back(parameter_name(f));
  json j{{"system", to_json(p.system)}, {"B_G", p.field_z}, {"free_params", fp}, {"measurements", ms}};
  if (p.initial_guess) {
    json g = json::object();
    for (auto f : p.free_params) g[parameter_name(f)] = (*p.initial_guess)[static_cast<std::size_t>(f)];
    j["initial_guess"] = g;
  }
  return j;
}

inline json to_json(const FitResult& r, const FitProblem& p) {
  json params = json::object();
  for (const auto& fp : r.params) {
    json entry{{"value", fp.value}};
    entry["sigma"] = r.covariance ? json(fp.sigma) : json(nullptr);
    params[fp.name] = entry;
  }
  json fixed = json::object();
  for (std::size_t i = 0; i < kFitParameterCount; ++i) {
    const auto f = static_cast<FitParameter>(i);
    if (std::find(p.free_params.begin(), p.free_params.end(), f) == p.free_params.end())
      fixed[kFitParameterNames[i]] = r.theta[i];
  }
  json cov = nullptr;
  if (r.covariance) {
    cov = json::array();
    for (Eigen::Index i = 0; i < r.covariance->rows(); ++i) {
      json row = json::array();
      for (Eigen::Index k = 0; k < r.covariance->cols(); ++k) row.push_back((*r.covariance)(i, k));
      cov.push_back(row);
    }
  }
  json res = json::array();
  for (std::size_t i = 0; i < r.residuals_mhz.size(); ++i)
    res.push_back({{"key", p.measurements[i].key()}, {"residual_MHz", r.residuals_mhz[i]}});
  json out{{"params", params},
           {"fixed", fixed},
           {"covariance", cov},
           {"residuals", res},
           {"rms_residual_MHz", r.rms_residual},
           {"reduced_chi2", r.reduced_chi2},
           {"condition_number", r.condition_number},
           {"converged", r.converged},
           {"iterations", r.iterations},
           {"stop_reason", r.stop_reason}};
  if (!r.null_direction.empty()) out["null_direction"] = r.null_direction;
  return out;
}

inline std::string residuals_csv(const FitResult& r, const FitProblem& p) {
  std::string out = "key,measured_MHz,residual_MHz\n";
  for (std::size_t i = 0; i < r.residuals_mhz.size(); ++i)
    out += p.measurements[i].key() + "," + fmt(p.measurements[i].freq) + "," + fmt(r.residuals_mhz[i]) + "\n";
  return out;
}

inline std::string transitions_csv(const TransitionTable& t) {
  std::string out = "kind,label,branch,freq_MHz,moment\n";
  for (const auto& e : t.entries)
    out += kind_name(e.kind) + "," + e.label + "," + e.branch + "," + fmt(e.freq) + "," + fmt(e.moment) + "\n";
  return out;
}

inline json to_json(const TransitionTable& t) {
  json arr = json::array();
  for (const auto& e : t.entries)
    arr.push_back({{"kind", kind_name(e.kind)},
                   {"label", e.label},
                   {"branch", e.branch},
                   {"freq_MHz", e.freq},
                   {"moment", e.moment},
                   {"allowed", e.allowed},
                   {"state_pair", {e.state_a, e.state_b}}});
  return json{{"entries", arr}};
}

inline std::string spectrum_csv(const SpectrumModel& s) {
  std::string out = "freq_MHz,intensity\n";
  for (std::size_t i = 0; i < s.freq.size(); ++i) out += fmt(s.freq[i]) + "," + fmt(s.intensity[i]) + "\n";
  return out;
}

inline std::string trace_csv(const std::vector<double>& t, const std::vector<double>& y, const char* value_name = "signal") {
  std::string out = std::string("t_us,") + value_name + "\n";
  for (std::size_t i = 0; i < t.size(); ++i) out += fmt(t[i]) + "," + fmt(y[i]) + "\n";
  return out;
}

inline std::string enhancement_csv(const std::vector<EnhancementCurve>& curves) {
  std::string out = "mS,B_G,alpha\n";
  for (const auto& c : curves)
    for (const auto& p : c.points) out += ms_tag(c.two_ms) + "," + fmt(p.field_z) + "," + (std::isnan(p.alpha) ? std::string("nan") : fmt(p.alpha)) + "\n";
  return out;
}

inline json to_json(const RateModel& m) {
  json rates = json::array();
  for (const auto& r : m.rates)
    rates.push_back({{"from", m.states[r.from].to_string()},
                     {"to", m.states[r.to].to_string()},
                     {"rate_per_us", r.rate},
                     {"channel", channel_name(r.channel)}});
  json states = json::array();
  for (const auto& s : m.states) states.push_back(s.to_string());
  return json{{"B_G", m.field_z}, {"line", optical_line_name(m.line)}, {"states", states}, {"rates", rates}};
}

inline std::string histogram_csv(const OccupancyHistogram& h) {
  std::string out = "splitting_bin_MHz,count\n";
  for (const auto& [edge, count] : h.bins) out += fmt(edge) + "," + std::to_string(count) + "\n";
  return out;
}

}  // namespace v2spin::io
