// Command-line front end.  Exit codes: 0 success, 1 invalid input or
// configuration, 2 runtime failure.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "susytb/harness.hpp"

using namespace susytb;
using nlohmann::json;

namespace {

struct Common {
  std::string config;
  std::string preset;
  std::string output;
  std::optional<int> nodes;
  std::optional<double> half_width;
  std::optional<std::string> rule;
  std::optional<int> z_points;
  std::optional<int> bpm_nx;
  std::optional<double> bpm_dz;
  bool no_bpm = false;
};

void add_common(CLI::App* app, Common& c, bool source = true) {
  if (source) {
    auto* cfg = app->add_option("-c,--config", c.config, "Scenario configuration file (JSON)");
    auto* pre = app->add_option("-p,--preset", c.preset, "Use a bundled preset instead of a file");
    cfg->excludes(pre);
  }
  app->add_option("-o,--output", c.output, "Output directory (overrides the configuration)");
  app->add_option("--nodes", c.nodes, "Quadrature node count");
  app->add_option("--half-width", c.half_width, "Quadrature half-width (0 = automatic)");
  app->add_option("--rule", c.rule, "Quadrature rule: trapezoid, simpson, gauss_legendre_composite");
  app->add_option("--z-points", c.z_points, "Number of z samples");
  app->add_option("--bpm-nx", c.bpm_nx, "BPM grid nodes");
  app->add_option("--bpm-dz", c.bpm_dz, "BPM z step");
  app->add_flag("--no-bpm", c.no_bpm, "Skip the BPM cross-check");
}

ScenarioConfig load(const Common& c) {
  ScenarioConfig cfg;
  if (!c.preset.empty()) {
    cfg = preset(c.preset);
  } else if (!c.config.empty()) {
    cfg = load_config(c.config);
  } else {
    throw ValidationError("either --config or --preset is required");
  }
  Overrides o;
  o.quadrature_nodes = c.nodes;
  o.quadrature_half_width = c.half_width;
  o.quadrature_rule = c.rule;
  o.z_points = c.z_points;
  o.bpm_nx = c.bpm_nx;
  o.bpm_dz = c.bpm_dz;
  if (c.no_bpm) o.bpm_enabled = false;
  if (!c.output.empty()) o.output_directory = c.output;
  apply_overrides(cfg, o);
  for (const auto& w : cfg.warnings) std::cerr << w.str() << "\n";
  return cfg;
}

json cplx_json(cplx v) { return json::array({v.real(), v.imag()}); }

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_file(const std::filesystem::path& p, const std::string& text) {
  std::filesystem::create_directories(p.parent_path());
  std::ofstream f(p, std::ios::binary);
  if (!f) throw Error("cannot open " + p.string() + " for writing");
  f << text;
  if (!f) throw Error("write to " + p.string() + " failed");
}

std::filesystem::path out_path(const ScenarioConfig& cfg, const std::string& suffix) {
  return std::filesystem::path(cfg.output.directory) / (cfg.output.prefix + suffix);
}

int cmd_validate(const Common& c) {
  std::string text;
  if (!c.preset.empty()) {
    text = preset_text(c.preset);
  } else if (!c.config.empty()) {
    std::ifstream in(c.config, std::ios::binary);
    if (!in) throw ValidationError("cannot read configuration file " + c.config);
    std::ostringstream ss;
    ss << in.rdbuf();
    text = ss.str();
  } else {
    throw ValidationError("either --config or --preset is required");
  }
  const auto v = validate_config(text);
  for (const auto& d : v.diagnostics) std::cout << d.str() << "\n";
  if (!v.ok()) return 1;
  std::cout << "ok " << v.config->name << " hash " << config_hash(*v.config) << "\n";
  return 0;
}

int cmd_potential(const Common& c) {
  const auto cfg = load(c);
  const auto sys = make_system(cfg);
  const auto path = out_path(cfg, "_potential.csv");
  emit_potential_csv(*sys, cfg.potential_map.value_or(PotentialMapSpec{}), path);
  std::cout << path.string() << "\n";
  return 0;
}

int cmd_modes(const Common& c, double z, double x_min, double x_max, int nx) {
  const auto cfg = load(c);
  const auto sys = make_system(cfg);
  const std::vector<ModeKind> kinds =
      sys->is_static() ? std::vector{ModeKind::ground, ModeKind::excited, ModeKind::left, ModeKind::right}
                       : std::vector{ModeKind::floquet1, ModeKind::floquet2, ModeKind::left, ModeKind::right};
  std::string out = "z,x";
  for (auto k : kinds) out += std::string(",") + to_string(k) + "_re," + to_string(k) + "_im";
  out += ",engine\n";
  for (double x : linspace(x_min, x_max, nx)) {
    out += fmt(z) + "," + fmt(x);
    for (auto k : kinds) {
      const cplx v = sys->mode(k, x, z);
      out += "," + fmt(v.real()) + "," + fmt(v.imag());
    }
    out += ",exact\n";
  }
  const auto path = out_path(cfg, "_modes.csv");
  write_file(path, out);
  std::cout << path.string() << "\n";
  return 0;
}

int cmd_calibrate(const Common& c) {
  const auto cfg = load(c);
  const auto sys = make_system(cfg);
  const auto cr = calibrate_scenario(cfg, sys);
  json j;
  j["mode"] = to_string(cfg.calibration.mode);
  if (!cr) {
    const auto& p = *cfg.calibration.explicit_parameters;
    j["calibrated"] = false;
    j["parameters"] = {{"k", p.k}, {"x0", p.x0}, {"alpha_tilde", p.alpha_tilde}};
  } else {
    j["calibrated"] = true;
    j["parameters"] = {{"k", cr->parameters.k}, {"x0", cr->parameters.x0},
                       {"alpha_tilde", cr->parameters.alpha_tilde}};
    j["objective"] = cr->objective_value;
    j["grid_points"] = cr->grid_points;
    j["failed_grid_points"] = cr->failed_grid_points;
    j["alpha_unidentifiable"] = cr->alpha_unidentifiable;
    json e = json::array();
    for (auto v : cr->achieved_energies) e.push_back(cplx_json(v));
    j["achieved_energies"] = e;
    if (cr->achieved_profile_error) j["profile_error"] = *cr->achieved_profile_error;
  }
  std::cout << j.dump(2) << "\n";
  return 0;
}

int cmd_spectrum(const Common& c) {
  const auto cfg = load(c);
  const auto sys = make_system(cfg);
  const auto cr = calibrate_scenario(cfg, sys);
  const TBParameters p = cr ? cr->parameters : *cfg.calibration.explicit_parameters;
  const auto tb = setup_tight_binding(cfg, sys, p, {0.0});
  json j;
  j["parameters"] = {{"k", p.k}, {"x0", p.x0}, {"alpha_tilde", p.alpha_tilde}};
  j["kappa"] = cplx_json(tb.kappa);
  j["exact_energies"] = {sys->energies().first, sys->energies().second};
  j["period"] = sys->periods().T;
  json e = json::array();
  for (auto v : tb.energies) e.push_back(cplx_json(v));
  if (!tb.energies.empty()) j["tb_energies"] = e;
  if (tb.floquet) {
    json m = json::array(), x = json::array(), q = json::array();
    for (auto v : tb.floquet->multipliers) m.push_back(cplx_json(v));
    for (auto v : tb.floquet->exact_multipliers) x.push_back(cplx_json(v));
    for (auto v : tb.floquet->quasi_energies) q.push_back(cplx_json(v));
    j["floquet"] = {{"multipliers", m},
                    {"exact_multipliers", x},
                    {"quasi_energies", q},
                    {"phase_factor_distance", tb.floquet->phase_factor_distance},
                    {"eigenvector_condition", tb.floquet->eigenvector_condition}};
  }
  std::cout << j.dump(2) << "\n";
  return 0;
}

int cmd_propagate(const Common& c, int stride) {
  const auto cfg = load(c);
  const auto sys = make_system(cfg);
  auto zs = z_samples(cfg, *sys);
  if (zs.front() > 0.0) zs.insert(zs.begin(), 0.0);
  const auto& g = cfg.bpm.grid;
  const auto x = g.nodes();
  std::vector<cplx> f0(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) f0[i] = sys->mode(cfg.initial_state, x[i], 0.0);
  const auto snaps = propagate(f0, system_potential(sys, x), g, zs);
  std::string out = "z,x,psi_re,psi_im,engine\n";
  double worst = 0.0;
  std::vector<cplx> ref(x.size());
  for (const auto& s : snaps) {
    for (std::size_t i = 0; i < x.size(); ++i) ref[i] = sys->mode(cfg.initial_state, x[i], s.z);
    worst = std::max(worst, relative_l2_error(s.samples, ref, g.dx()));
    for (int engine = 0; engine < 2; ++engine) {
      const auto& f = engine == 0 ? ref : s.samples;
      for (std::size_t i = 0; i < x.size(); i += static_cast<std::size_t>(stride)) {
        out += fmt(s.z) + "," + fmt(x[i]) + "," + fmt(f[i].real()) + "," + fmt(f[i].imag()) +
               (engine == 0 ? ",exact\n" : ",bpm\n");
      }
    }
  }
  const auto path = out_path(cfg, "_field.csv");
  write_file(path, out);
  std::cout << path.string() << "\nmax relative L2 error vs exact: " << worst << "\n";
  return 0;
}

void print_summary(const RunResult& r) {
  const auto& rep = r.report;
  std::printf("scenario %s (config %s)\n", rep.scenario.c_str(), rep.config_hash.c_str());
  std::printf("TB parameters k=%.6f x0=%.6f alpha_tilde=%.4f (%s), |kappa|=%.4f\n", rep.parameters.k,
              rep.parameters.x0, rep.parameters.alpha_tilde, rep.calibrated ? "calibrated" : "explicit",
              std::abs(rep.kappa));
  for (const auto& m : rep.metrics) {
    std::printf("  %-12s %-2s %-5s rmse=%.4g rel=%.4g amp=%.4g phase=", m.label.c_str(), m.component.c_str(),
                to_string(m.candidate), m.metrics.rmse, m.metrics.relative_rmse, m.metrics.amplitude_ratio);
    if (m.metrics.phase_shift) {
      std::printf("%.4f\n", *m.metrics.phase_shift);
    } else {
      std::printf("n/a\n");
    }
  }
  for (const auto& [k, v] : rep.oracle_residuals) std::printf("  %s = %.3g\n", k.c_str(), v);
  for (const auto& f : r.files) std::printf("wrote %s\n", f.string().c_str());
}

int cmd_compare(const Common& c) {
  const auto cfg = load(c);
  print_summary(run(cfg));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Supersymmetric coupled-waveguide toolkit: exact vs tight-binding vs BPM"};
  app.require_subcommand(1);

  Common c;
  auto* validate = app.add_subcommand("validate", "Validate a configuration and print diagnostics");
  add_common(validate, c);
  auto* potential = app.add_subcommand("potential", "Write Re/Im V(x, z) on the potential map grid");
  add_common(potential, c);
  double mz = 0.0, mxmin = -10.0, mxmax = 10.0;
  int mnx = 401;
  auto* modes = app.add_subcommand("modes", "Write the exact modes at one z");
  add_common(modes, c);
  modes->add_option("--z", mz, "Propagation distance");
  modes->add_option("--x-min", mxmin, "Left end of the x grid");
  modes->add_option("--x-max", mxmax, "Right end of the x grid");
  modes->add_option("--nx", mnx, "Number of x samples")->check(CLI::Range(2, 1000000));
  auto* calib = app.add_subcommand("calibrate", "Fit the tight-binding parameters");
  add_common(calib, c);
  auto* spectrum = app.add_subcommand("spectrum", "TB spectrum (static) or Floquet multipliers (dynamic)");
  add_common(spectrum, c);
  int stride = 8;
  auto* prop = app.add_subcommand("propagate", "BPM propagation of the initial state with the exact reference");
  add_common(prop, c);
  prop->add_option("--stride", stride, "Write every n-th x node")->check(CLI::Range(1, 1000000));
  auto* compare = app.add_subcommand("compare", "Full exact / TB / BPM comparison with CSV output");
  add_common(compare, c);
  auto* pre = app.add_subcommand("preset", "Bundled scenarios");
  pre->require_subcommand(1);
  auto* plist = pre->add_subcommand("list", "List bundled presets");
  std::string pname;
  auto* prun = pre->add_subcommand("run", "Run a bundled preset");
  prun->add_option("name", pname, "Preset name")->required();
  add_common(prun, c, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*validate) return cmd_validate(c);
    if (*potential) return cmd_potential(c);
    if (*modes) return cmd_modes(c, mz, mxmin, mxmax, mnx);
    if (*calib) return cmd_calibrate(c);
    if (*spectrum) return cmd_spectrum(c);
    if (*prop) return cmd_propagate(c, stride);
    if (*compare) return cmd_compare(c);
    if (*plist) {
      for (const auto& n : preset_names()) std::cout << n << "\n";
      return 0;
    }
    if (*prun) {
      c.preset = pname;
      return cmd_compare(c);
    }
  } catch (const ConfigError& e) {
    for (const auto& d : e.diagnostics()) std::cerr << d.str() << "\n";
    return 1;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
