// v2spin: batch front end. Every subcommand reads JSON inputs, writes one
// CSV or JSON artifact (stdout when --out is omitted) and, for file outputs,
// a <out>.manifest.json describing the run.
//
// Exit codes: 0 success, 1 usage / validation / parse error, 2 numerical failure.

#include <CLI11.hpp>

#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "v2spin/v2spin.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace v2spin;

namespace {

constexpr const char* kConstantsEnv = "V2SPIN_CONSTANTS";

std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  std::ostringstream ss;
  ss << std::hex << std::setw(16) << std::setfill('0') << v;
  return ss.str();
}

void atomic_write(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorKind::Validation, "cannot write '" + path + "'");
    out << content;
    if (!out.flush()) fail(ErrorKind::Validation, "write to '" + path + "' failed");
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    fail(ErrorKind::Validation, "cannot move output into place at '" + path + "'");
  }
}

/// Per-run bookkeeping shared by all subcommands.
struct Run {
  std::string command;
  std::vector<std::string> argv;
  json inputs = json::array();
  json settings = json::object();
  std::optional<std::uint64_t> seed;

  std::string read_input(const std::string& path) {
    const std::string text = io::read_file(path);
    inputs.push_back({{"path", path}, {"fnv1a64", hex64(fnv1a(text))}, {"bytes", text.size()}});
    return text;
  }

  void emit(const std::string& out_path, const std::string& content) {
    if (out_path.empty() || out_path == "-") {
      std::cout << content;
      return;
    }
    atomic_write(out_path, content);
    json manifest{{"tool", "v2spin"},
                  {"version", V2SPIN_VERSION},
                  {"command", command},
                  {"arguments", argv},
                  {"inputs", inputs},
                  {"seed", seed ? json(*seed) : json(nullptr)},
                  {"settings", settings},
                  {"output", out_path},
                  {"output_fnv1a64", hex64(fnv1a(content))}};
    atomic_write(out_path + ".manifest.json", manifest.dump(2) + "\n");
  }
};

/// Constants applied to any system document that leaves them out.
struct Constants {
  double gamma_e = constants::kGammaElectron;
  double D = constants::kZeroFieldSplitting;
  double gamma_si29 = constants::kGammaSi29;
  double gamma_c13 = constants::kGammaC13;
  std::string source = "built-in";

  json to_json() const {
    return json{{"source", source},
                {"gamma_e_MHzPerG", gamma_e},
                {"D_MHz", D},
                {"gamma_n_MHzPerG", {{"Si29", gamma_si29}, {"C13", gamma_c13}}}};
  }

  json fill(json system) const {
    if (!system.is_object()) return system;
    if (!system.contains("gamma_e_MHzPerG")) system["gamma_e_MHzPerG"] = gamma_e;
    if (!system.contains("D_MHz")) system["D_MHz"] = D;
    if (system.contains("nuclei") && system["nuclei"].is_array())
      for (auto& n : system["nuclei"]) {
        if (!n.is_object() || n.contains("gamma_n_MHzPerG") || !n.contains("isotope") || !n["isotope"].is_string())
          continue;
        const auto iso = n["isotope"].get<std::string>();
        if (iso == "Si29") n["gamma_n_MHzPerG"] = gamma_si29;
        if (iso == "C13") n["gamma_n_MHzPerG"] = gamma_c13;
      }
    return system;
  }
};

Constants load_constants(Run& run, const std::string& flag_path) {
  Constants c;
  std::string path = flag_path;
  if (path.empty())
    if (const char* env = std::getenv(kConstantsEnv)) path = env;
  if (path.empty()) return c;
  const json j = io::parse_text(run.read_input(path), path);
  const std::string p = "$";
  c.gamma_e = io::detail::optional_number(j, p, "gamma_e_MHzPerG", c.gamma_e);
  c.D = io::detail::optional_number(j, p, "D_MHz", c.D);
  if (j.contains("gamma_n_MHzPerG")) {
    const auto& g = j.at("gamma_n_MHzPerG");
    c.gamma_si29 = io::detail::optional_number(g, p + ".gamma_n_MHzPerG", "Si29", c.gamma_si29);
    c.gamma_c13 = io::detail::optional_number(g, p + ".gamma_n_MHzPerG", "C13", c.gamma_c13);
  }
  c.source = path;
  return c;
}

SpinSystem load_system(Run& run, const Constants& c, const std::string& path) {
  if (path.empty()) {
    SpinSystem s;
    s.D = c.D;
    s.gamma_e = c.gamma_e;
    return s;
  }
  const json j = io::parse_text(run.read_input(path), path);
  try {
    return io::spin_system_from_json(c.fill(j));
  } catch (const Error& e) {
    fail(e.kind(), path + ": " + e.what());
  }
}

std::vector<double> field_range(double start, double stop, double step) {
  if (!(stop > start)) fail(ErrorKind::Validation, "empty B-range: --B-stop must exceed --B-start");
  if (!(step > 0.0)) fail(ErrorKind::Validation, "--B-step must be > 0");
  std::vector<double> out;
  const auto n = static_cast<std::size_t>(std::floor((stop - start) / step + 1e-9));
  for (std::size_t i = 0; i <= n; ++i) out.push_back(start + step * static_cast<double>(i));
  return out;
}

std::vector<double> time_grid(double t_stop, double t_step) {
  if (!(t_stop > 0.0) || !(t_step > 0.0)) fail(ErrorKind::Validation, "--t-stop and --t-step must be > 0");
  std::vector<double> out;
  const auto n = static_cast<std::size_t>(std::floor(t_stop / t_step + 1e-9));
  for (std::size_t i = 0; i <= n; ++i) out.push_back(t_step * static_cast<double>(i));
  return out;
}

std::vector<int> parse_ms_list(const std::string& s) {
  if (s == "all") return {-3, -1, 1, 3};
  std::vector<int> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) out.push_back(parse_ms_tag(tok));
  if (out.empty()) fail(ErrorKind::Validation, "--ms is empty");
  return out;
}

std::array<double, 4> parse_electron_populations(const std::string& s) {
  std::array<double, 4> out{};
  std::stringstream ss(s);
  std::string tok;
  std::size_t i = 0;
  while (std::getline(ss, tok, ',')) {
    if (i >= 4) fail(ErrorKind::Validation, "--electron-pop needs four values");
    try {
      out[i++] = std::stod(tok);
    } catch (const std::exception&) {
      fail(ErrorKind::Validation, "--electron-pop: '" + tok + "' is not a number");
    }
  }
  if (i != 4) fail(ErrorKind::Validation, "--electron-pop needs four values");
  return out;
}

json system_settings(const SpinSystem& s) { return io::to_json(s); }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spin-3/2 defect hyperfine toolkit: levels, spectra, fits, enhancement, polarization, shell assignment"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(V2SPIN_VERSION));

  Run run;
  for (int i = 1; i < argc; ++i) run.argv.emplace_back(argv[i]);

  std::string constants_path, system_path, out_path;
  auto add_common = [&](CLI::App* sub, bool with_system) {
    sub->add_option("--out,-o", out_path, "Output file (stdout when omitted)");
    sub->add_option("--constants", constants_path, std::string("Constants JSON (overrides $") + kConstantsEnv + ")")
        ->check(CLI::ExistingFile);
    if (with_system) sub->add_option("--system,-s", system_path, "System JSON (default: bare electron)")->check(CLI::ExistingFile);
  };

  // levels
  double b_start = 0.0, b_stop = 50.0, b_step = 1.0;
  auto* levels = app.add_subcommand("levels", "Energy levels versus field (CSV B_G,label,E_MHz)");
  add_common(levels, true);
  levels->add_option("--B-start", b_start, "First field (G)")->capture_default_str();
  levels->add_option("--B-stop", b_stop, "Last field (G)")->capture_default_str();
  levels->add_option("--B-step", b_step, "Field step (G)")->capture_default_str();

  // transitions
  double field = 0.0;
  std::string format = "csv";
  bool allow_mixed = false;
  auto* trans = app.add_subcommand("transitions", "Transition table at one field");
  add_common(trans, true);
  trans->add_option("--B", field, "Field (G)")->required();
  trans->add_option("--format", format, "csv or json")->check(CLI::IsMember({"csv", "json"}))->capture_default_str();
  trans->add_flag("--allow-mixed", allow_mixed, "Keep lines between hybridized states");

  // spectrum
  std::string spec_kind = "odmr", lineshape = "lorentzian", electron_pop = "0.5,0,0,0.5";
  double f_start = 0.0, f_stop = 150.0, f_step = 0.02, fwhm = 0.3, noise = 0.0;
  std::uint64_t seed = 1;
  auto* spectrum = app.add_subcommand("spectrum", "ODMR or ODNMR spectrum (CSV freq_MHz,intensity)");
  add_common(spectrum, true);
  spectrum->add_option("--B", field, "Field (G)")->required();
  spectrum->add_option("--kind", spec_kind, "odmr or odnmr")->check(CLI::IsMember({"odmr", "odnmr"}))->capture_default_str();
  spectrum->add_option("--f-start", f_start, "Grid start (MHz)")->capture_default_str();
  spectrum->add_option("--f-stop", f_stop, "Grid stop (MHz)")->capture_default_str();
  spectrum->add_option("--f-step", f_step, "Grid step (MHz)")->capture_default_str();
  spectrum->add_option("--fwhm", fwhm, "Line width (MHz)")->capture_default_str();
  spectrum->add_option("--lineshape", lineshape, "lorentzian or gaussian")
      ->check(CLI::IsMember({"lorentzian", "gaussian"}))
      ->capture_default_str();
  spectrum->add_option("--electron-pop", electron_pop, "Populations of mS=+3/2,+1/2,-1/2,-3/2")->capture_default_str();
  spectrum->add_option("--noise", noise, "Gaussian noise sigma")->capture_default_str();
  spectrum->add_option("--seed", seed, "Noise seed")->capture_default_str();

  // fit
  std::string problem_path, residuals_path;
  int max_iter = 200;
  bool allow_singular = false;
  auto* fit = app.add_subcommand("fit", "Fit B, D and hyperfine components to measured lines (JSON)");
  add_common(fit, false);
  fit->add_option("--problem,-p", problem_path, "Fit problem JSON")->required()->check(CLI::ExistingFile);
  fit->add_option("--residuals-out", residuals_path, "Residual table CSV");
  fit->add_option("--max-iter", max_iter, "Iteration cap")->capture_default_str();
  fit->add_flag("--allow-singular", allow_singular, "Report a singular fit instead of failing");

  // enhance
  std::string ms_list = "-3/2", method = "exact";
  auto* enhance = app.add_subcommand("enhance", "Hyperfine enhancement versus field (CSV mS,B_G,alpha)");
  add_common(enhance, true);
  enhance->add_option("--B-start", b_start, "First field (G)");
  enhance->add_option("--B-stop", b_stop, "Last field (G)");
  enhance->add_option("--B-step", b_step, "Field step (G)");
  enhance->add_option("--ms", ms_list, "Comma-separated sublevels (e.g. -3/2,+1/2) or 'all'")->capture_default_str();
  enhance->add_option("--method", method, "exact or analytic")->check(CLI::IsMember({"exact", "analytic"}))->capture_default_str();

  // dnp
  std::string optical = "A1", manifold = "gslac", rates_out;
  double t_stop = 200.0, t_step = 2.0;
  OpticalParams optical_params;
  std::size_t target = 0;
  auto* dnp = app.add_subcommand("dnp", "Optically pumped nuclear polarization buildup (CSV t_us,P)");
  add_common(dnp, true);
  dnp->add_option("--B", field, "Field (G)")->required();
  dnp->add_option("--line", optical, "A1 or A2")->check(CLI::IsMember({"A1", "A2"}))->capture_default_str();
  dnp->add_option("--t-stop", t_stop, "Last time (us)")->capture_default_str();
  dnp->add_option("--t-step", t_step, "Time step (us)")->capture_default_str();
  dnp->add_option("--target", target, "Nucleus index")->capture_default_str();
  dnp->add_option("--manifold", manifold, "gslac (mS -3/2,-1/2) or all")->check(CLI::IsMember({"gslac", "all"}))->capture_default_str();
  dnp->add_option("--cycling-rate", optical_params.cycling_rate, "Optical cycling rate (1/us)")->capture_default_str();
  dnp->add_option("--electron-relaxation", optical_params.electron_relaxation, "Electron relaxation (1/us)")->capture_default_str();
  dnp->add_option("--nuclear-relaxation", optical_params.nuclear_relaxation, "Nuclear relaxation (1/us)")->capture_default_str();
  dnp->add_option("--format", format, "csv or json")->check(CLI::IsMember({"csv", "json"}))->capture_default_str();
  dnp->add_option("--rates-out", rates_out, "Rate model JSON");

  // assign
  double splitting = 0.0, tolerance = 0.5, width = 0.25;
  std::string catalog_path, histogram_out;
  std::size_t occupancy = 0;
  auto* assign_cmd = app.add_subcommand("assign", "Rank lattice-shell groups for a measured splitting (JSON)");
  add_common(assign_cmd, false);
  assign_cmd->add_option("--splitting", splitting, "Measured doublet splitting (MHz)")->required();
  assign_cmd->add_option("--B", field, "Field (G)")->required();
  assign_cmd->add_option("--catalog", catalog_path, "Catalog JSON (default: bundled)")->check(CLI::ExistingFile);
  assign_cmd->add_option("--tolerance", tolerance, "Candidate window (MHz)")->capture_default_str();
  assign_cmd->add_option("--width", width, "Score width (MHz)")->capture_default_str();
  assign_cmd->add_option("--occupancy", occupancy, "Monte Carlo defects for the occupancy histogram (0 = off)")->capture_default_str();
  assign_cmd->add_option("--seed", seed, "Monte Carlo seed")->capture_default_str();
  assign_cmd->add_option("--histogram-out", histogram_out, "Histogram CSV");

  // rabi
  std::optional<double> omega;
  double alpha = 1.0, gamma_n = constants::kGammaSi29, b1 = 1.0, detuning = 0.0, decay = 0.0;
  auto* rabi = app.add_subcommand("rabi", "Rabi nutation trace (CSV t_us,signal)");
  add_common(rabi, false);
  rabi->add_option("--omega", omega, "Rabi frequency (MHz); otherwise |alpha gamma_n B1|/2");
  rabi->add_option("--alpha", alpha, "Enhancement factor")->capture_default_str();
  rabi->add_option("--gamma-n", gamma_n, "Nuclear gyromagnetic ratio (MHz/G)")->capture_default_str();
  rabi->add_option("--B1", b1, "Drive amplitude (G)")->capture_default_str();
  rabi->add_option("--detuning", detuning, "Detuning (MHz)")->capture_default_str();
  rabi->add_option("--decay", decay, "Damping time (us, <= 0 for none)")->capture_default_str();
  rabi->add_option("--t-stop", t_stop, "Last time (us)");
  rabi->add_option("--t-step", t_step, "Time step (us)");

  // ramsey
  double t2star = 50.0;
  std::string envelope = "gaussian";
  auto* ramsey = app.add_subcommand("ramsey", "Ramsey fringe trace (CSV t_us,signal)");
  add_common(ramsey, false);
  ramsey->add_option("--detuning", detuning, "Detuning (MHz)")->required();
  ramsey->add_option("--t2star", t2star, "Dephasing time (us)")->capture_default_str();
  ramsey->add_option("--envelope", envelope, "gaussian or exponential")
      ->check(CLI::IsMember({"gaussian", "exponential"}))
      ->capture_default_str();
  ramsey->add_option("--t-stop", t_stop, "Last time (us)");
  ramsey->add_option("--t-step", t_step, "Time step (us)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    CLI::App* sub = app.get_subcommands().front();
    run.command = sub->get_name();
    const Constants consts = load_constants(run, constants_path);
    run.settings["constants"] = consts.to_json();

    if (sub == levels) {
      const SpinSystem s = load_system(run, consts, system_path);
      const auto fields = field_range(b_start, b_stop, b_step);
      run.settings["system"] = system_settings(s);
      std::string csv = "B_G,label,E_MHz\n";
      for (double b : fields) {
        const auto eig = solve(s, b);
        for (std::size_t i = 0; i < eig.size(); ++i)
          csv += io::fmt(b) + "," + eig.labels[i].to_string() + "," + io::fmt(eig.energies(static_cast<Eigen::Index>(i))) + "\n";
      }
      run.emit(out_path, csv);
    } else if (sub == trans) {
      const SpinSystem s = load_system(run, consts, system_path);
      run.settings["system"] = system_settings(s);
      TransitionOptions opts;
      opts.allow_mixed = allow_mixed;
      run.settings["allow_mixed"] = allow_mixed;
      run.settings["allowed_threshold"] = opts.allowed_threshold;
      const auto table = all_transitions(solve(s, field), s, opts);
      run.emit(out_path, format == "csv" ? io::transitions_csv(table) : io::to_json(table).dump(2) + "\n");
    } else if (sub == spectrum) {
      const SpinSystem s = load_system(run, consts, system_path);
      const auto eig = solve(s, field);
      TransitionOptions topts;
      topts.allow_mixed = true;
      const auto table = all_transitions(eig, s, topts);
      const Eigen::VectorXd basis =
          product_populations(parse_electron_populations(electron_pop), std::vector<double>(s.nuclear_count(), 0.5));
      SpectrumOptions sopts;
      sopts.fwhm = fwhm;
      sopts.lineshape = lineshape == "gaussian" ? Lineshape::Gaussian : Lineshape::Lorentzian;
      auto model = spec_kind == "odmr"
                       ? odmr_spectrum(table, populations_by_label(eig, basis), {f_start, f_stop, f_step}, sopts)
                       : odnmr_spectrum(table, populations_by_label(eig, basis), {f_start, f_stop, f_step}, sopts);
      if (noise > 0.0) {
        add_gaussian_noise(model, noise, seed);
        run.seed = seed;
      }
      run.settings["system"] = system_settings(s);
      run.settings["spectrum"] = {{"kind", spec_kind}, {"fwhm_MHz", fwhm}, {"lineshape", lineshape},
                                  {"grid_MHz", {f_start, f_stop, f_step}}, {"electron_populations", electron_pop},
                                  {"nuclear_up_probability", 0.5}, {"noise", noise}};
      run.emit(out_path, io::spectrum_csv(model));
    } else if (sub == fit) {
      json pj = io::parse_text(run.read_input(problem_path), problem_path);
      if (pj.is_object() && pj.contains("system")) pj["system"] = consts.fill(pj["system"]);
      FitProblem problem;
      try {
        problem = io::fit_problem_from_json(pj);
      } catch (const Error& e) {
        fail(e.kind(), problem_path + ": " + e.what());
      }
      FitConfig cfg;
      cfg.max_iter = max_iter;
      cfg.throw_on_singular = !allow_singular;
      run.settings["fit"] = {{"max_iter", cfg.max_iter}, {"tol", cfg.tol}, {"singular_condition", cfg.singular_condition},
                             {"throw_on_singular", cfg.throw_on_singular}};
      const FitResult result = fit_hamiltonian(problem, cfg);
      if (!residuals_path.empty()) run.emit(residuals_path, io::residuals_csv(result, problem));
      run.emit(out_path, io::to_json(result, problem).dump(2) + "\n");
    } else if (sub == enhance) {
      if (enhance->count("--B-start") == 0) b_start = 0.0;
      if (enhance->count("--B-stop") == 0) b_stop = 150.0;
      const SpinSystem s = load_system(run, consts, system_path);
      if (s.nuclear_count() == 0) fail(ErrorKind::Validation, "enhancement needs at least one nucleus in the system");
      const auto fields = field_range(b_start, b_stop, b_step);
      std::vector<EnhancementCurve> curves;
      for (int ms : parse_ms_list(ms_list)) curves.push_back(enhancement_curve(s, ms, fields, method == "analytic"));
      run.settings["system"] = system_settings(s);
      run.settings["method"] = method;
      run.emit(out_path, io::enhancement_csv(curves));
    } else if (sub == dnp) {
      const SpinSystem s = load_system(run, consts, system_path);
      if (s.nuclear_count() == 0) fail(ErrorKind::Validation, "polarization needs at least one nucleus in the system");
      const auto model = build_rate_model(s, field, parse_optical_line(optical), optical_params);
      const std::vector<int> mf = manifold == "gslac" ? std::vector<int>{-3, -1} : std::vector<int>{};
      const auto curve = polarization_curve(model, thermal_populations(s.nuclear_count()), time_grid(t_stop, t_step), target, mf);
      run.settings["system"] = system_settings(s);
      run.settings["optical"] = {{"line", optical},
                                 {"cycling_rate_per_us", optical_params.cycling_rate},
                                 {"isc_branching", optical_params.isc_branching},
                                 {"flip_flop", optical_params.flip_flop},
                                 {"electron_relaxation_per_us", optical_params.electron_relaxation},
                                 {"nuclear_relaxation_per_us", optical_params.nuclear_relaxation},
                                 {"initial", "thermal"},
                                 {"manifold", manifold}};
      if (!rates_out.empty()) run.emit(rates_out, io::to_json(model).dump(2) + "\n");
      if (format == "csv") {
        std::string csv = "t_us,P\n";
        for (const auto& [t, p] : curve.points) csv += io::fmt(t) + "," + io::fmt(p) + "\n";
        run.emit(out_path, csv);
      } else {
        json pts = json::array();
        for (const auto& [t, p] : curve.points) pts.push_back({t, p});
        run.emit(out_path, json{{"points", pts},
                                {"T_us", curve.fitted_T ? json(*curve.fitted_T) : json(nullptr)},
                                {"P0", curve.P0},
                                {"P_inf", curve.P_inf},
                                {"r_squared", curve.r_squared}}
                                   .dump(2) + "\n");
      }
    } else if (sub == assign_cmd) {
      const ShellCatalog catalog = catalog_path.empty() ? io::bundled_catalog()
                                                        : io::load_catalog(run.read_input(catalog_path), catalog_path);
      AssignOptions opts;
      opts.tolerance = tolerance;
      opts.width = width;
      opts.splitting.D = consts.D;
      opts.splitting.gamma_e = consts.gamma_e;
      run.settings["assign"] = {{"catalog", catalog_path.empty() ? "bundled" : catalog_path},
                                {"tolerance_MHz", tolerance}, {"width_MHz", width}, {"line", "L"},
                                {"abundances", {{"Si29", catalog.abundances.si29}, {"C13", catalog.abundances.c13}}}};
      json ranked = json::array();
      for (const auto& a : assign(splitting, catalog, field, opts))
        ranked.push_back({{"group", a.group}, {"predicted_MHz", a.predicted}, {"score", a.score}});
      json out{{"splitting_MHz", splitting}, {"B_G", field}, {"candidates", ranked}};
      if (occupancy > 0) {
        OccupancyOptions oo;
        oo.field_z = field;
        oo.splitting = opts.splitting;
        const auto hist = occupancy_statistics(catalog, occupancy, seed, oo);
        run.seed = seed;
        run.settings["occupancy"] = {{"defects", occupancy}, {"detection_floor_MHz", oo.detection_floor},
                                     {"bin_width_MHz", oo.bin_width}};
        json groups = json::object();
        for (const auto& [g, n] : hist.by_group) groups[g] = n;
        out["occupancy"] = {{"defects", occupancy}, {"by_group", groups}, {"none", hist.none}};
        if (!histogram_out.empty()) run.emit(histogram_out, io::histogram_csv(hist));
      }
      run.emit(out_path, out.dump(2) + "\n");
    } else if (sub == rabi) {
      const double w = omega ? *omega : rabi_frequency(alpha, gamma_n, b1);
      if (!(w >= 0.0)) fail(ErrorKind::Validation, "--omega must be >= 0");
      if (rabi->count("--t-stop") == 0) t_stop = 50.0;
      if (rabi->count("--t-step") == 0) t_step = 0.05;
      run.settings["rabi"] = {{"omega_MHz", w}, {"detuning_MHz", detuning}, {"decay_us", decay}};
      const auto times = time_grid(t_stop, t_step);
      run.emit(out_path, io::trace_csv(times, rabi_trace(w, detuning, times, decay)));
    } else if (sub == ramsey) {
      if (ramsey->count("--t-stop") == 0) t_stop = 100.0;
      if (ramsey->count("--t-step") == 0) t_step = 0.05;
      run.settings["ramsey"] = {{"detuning_MHz", detuning}, {"t2star_us", t2star}, {"envelope", envelope}};
      const auto times = time_grid(t_stop, t_step);
      run.emit(out_path, io::trace_csv(times, ramsey_trace(detuning, t2star, times,
                                                           envelope == "gaussian" ? RamseyEnvelope::Gaussian
                                                                                  : RamseyEnvelope::Exponential)));
    }
  } catch (const NonIdentifiableError& e) {
    std::cerr << "v2spin " << run.command << ": " << e.what() << "\n  null direction:";
    for (std::size_t i = 0; i < e.direction().size(); ++i)
      std::cerr << ' ' << e.parameter_names()[i] << '=' << io::fmt(e.direction()[i]);
    std::cerr << '\n';
    return 2;
  } catch (const Error& e) {
    std::cerr << "v2spin " << run.command << ": " << e.what() << '\n';
    return e.is_numerical() ? 2 : 1;
  } catch (const std::exception& e) {
    std::cerr << "v2spin " << run.command << ": " << e.what() << '\n';
    return 1;
  }
  return 0;
}
