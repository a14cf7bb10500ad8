#include "susytb/harness.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace susytb {

using nlohmann::json;

namespace {

constexpr const char* kLibraryVersion = "susytb 1.0.0";

}  // namespace

std::string Diagnostic::str() const {
  return std::string(severity == Severity::error ? "error" : "warning") + " at " +
         (path.empty() ? std::string("/") : path) + ": " + message;
}

namespace {

std::string join_diagnostics(const std::vector<Diagnostic>& d) {
  std::ostringstream os;
  os << "invalid configuration";
  for (const auto& x : d) {
    if (x.severity == Diagnostic::Severity::error) os << "\n  " << x.str();
  }
  return os.str();
}

}  // namespace

ConfigError::ConfigError(std::vector<Diagnostic> diagnostics)
    : ValidationError(join_diagnostics(diagnostics)), diagnostics_(std::move(diagnostics)) {}

StageError::StageError(std::string stage, const std::string& what)
    : Error("stage '" + stage + "': " + what), stage_(std::move(stage)) {}

const char* to_string(Engine e) {
  switch (e) {
    case Engine::exact: return "exact";
    case Engine::tb: return "tb";
    case Engine::bpm: return "bpm";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// Configuration parsing

namespace {

class Reader {
 public:
  std::vector<Diagnostic> diags;

  void error(const std::string& path, const std::string& msg) {
    diags.push_back({Diagnostic::Severity::error, path, msg});
  }
  void warn(const std::string& path, const std::string& msg) {
    diags.push_back({Diagnostic::Severity::warning, path, msg});
  }
  bool has_errors_under(const std::string& prefix) const {
    return std::any_of(diags.begin(), diags.end(), [&](const Diagnostic& d) {
      return d.severity == Diagnostic::Severity::error && d.path.rfind(prefix, 0) == 0;
    });
  }
  bool has_errors() const { return has_errors_under(""); }

  // Reports keys outside `allowed`.
  void check_keys(const json& obj, const std::string& path,
                  std::initializer_list<const char*> allowed) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
      bool ok = false;
      for (const char* a : allowed) ok = ok || it.key() == a;
      if (!ok) error(path + "/" + it.key(), "unknown field");
    }
  }

  const json* object(const json& parent, const char* key, const std::string& path, bool required) {
    const std::string p = path + "/" + key;
    if (!parent.contains(key)) {
      if (required) error(p, "required field is missing");
      return nullptr;
    }
    const json& v = parent.at(key);
    if (!v.is_object()) {
      error(p, "must be an object");
      return nullptr;
    }
    return &v;
  }

  double number(const json& obj, const char* key, const std::string& path, double def,
                bool required = false) {
    const std::string p = path + "/" + key;
    if (!obj.contains(key)) {
      if (required) error(p, "required field is missing");
      return def;
    }
    const json& v = obj.at(key);
    if (!v.is_number()) {
      error(p, "must be a number");
      return def;
    }
    const double d = v.get<double>();
    if (!std::isfinite(d)) {
      error(p, "must be finite");
      return def;
    }
    return d;
  }

  long long integer(const json& obj, const char* key, const std::string& path, long long def,
                    bool required = false) {
    const std::string p = path + "/" + key;
    if (!obj.contains(key)) {
      if (required) error(p, "required field is missing");
      return def;
    }
    const json& v = obj.at(key);
    if (!v.is_number_integer()) {
      error(p, "must be an integer");
      return def;
    }
    return v.get<long long>();
  }

  bool boolean(const json& obj, const char* key, const std::string& path, bool def) {
    if (!obj.contains(key)) return def;
    const json& v = obj.at(key);
    if (!v.is_boolean()) {
      error(path + "/" + key, "must be true or false");
      return def;
    }
    return v.get<bool>();
  }

  std::string string(const json& obj, const char* key, const std::string& path,
                     const std::string& def, bool required = false) {
    const std::string p = path + "/" + key;
    if (!obj.contains(key)) {
      if (required) error(p, "required field is missing");
      return def;
    }
    const json& v = obj.at(key);
    if (!v.is_string()) {
      error(p, "must be a string");
      return def;
    }
    return v.get<std::string>();
  }

  std::optional<Interval> interval(const json& obj, const char* key, const std::string& path) {
    if (!obj.contains(key)) return std::nullopt;
    const std::string p = path + "/" + key;
    const json& v = obj.at(key);
    if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number()) {
      error(p, "must be a two-element array [lo, hi]");
      return std::nullopt;
    }
    Interval r{v[0].get<double>(), v[1].get<double>()};
    if (!std::isfinite(r.lo) || !std::isfinite(r.hi) || !(r.hi > r.lo)) {
      error(p, "needs finite lo < hi");
      return std::nullopt;
    }
    return r;
  }
};

template <class F>
void guard(Reader& r, const std::string& path, F&& f) {
  try {
    f();
  } catch (const Error& e) {
    r.error(path, e.what());
  }
}

std::pair<int, int> line_column(const std::string& text, std::size_t byte) {
  int line = 1, col = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return {line, col};
}

SystemKind system_kind_from_string(const std::string& s) {
  for (auto k : {SystemKind::hermitian_static, SystemKind::pt_static, SystemKind::pt_dynamic}) {
    if (s == to_string(k)) return k;
  }
  throw ValidationError("unknown system kind '" + s +
                        "' (expected hermitian_static, pt_static or pt_dynamic)");
}

CalibrationMode calibration_mode_from_string(const std::string& s) {
  for (auto m : {CalibrationMode::spectral_hermitian, CalibrationMode::spectral_pt,
                 CalibrationMode::profile_dynamic}) {
    if (s == to_string(m)) return m;
  }
  throw ValidationError("unknown calibration mode '" + s +
                        "' (expected spectral_hermitian, spectral_pt or profile_dynamic)");
}

ModeKind mode_kind_from_string(const std::string& s) {
  for (auto k : {ModeKind::ground, ModeKind::excited, ModeKind::floquet1, ModeKind::floquet2,
                 ModeKind::left, ModeKind::right}) {
    if (s == to_string(k)) return k;
  }
  throw ValidationError("unknown mode '" + s + "'");
}

const char* to_string(QuadratureRule r) {
  switch (r) {
    case QuadratureRule::trapezoid: return "trapezoid";
    case QuadratureRule::simpson: return "simpson";
    case QuadratureRule::gauss_legendre_composite: return "gauss_legendre_composite";
  }
  return "?";
}

QuadratureRule rule_from_string(const std::string& s) {
  for (auto r : {QuadratureRule::trapezoid, QuadratureRule::simpson,
                 QuadratureRule::gauss_legendre_composite}) {
    if (s == to_string(r)) return r;
  }
  throw ValidationError("unknown quadrature rule '" + s +
                        "' (expected trapezoid, simpson or gauss_legendre_composite)");
}

const char* to_string(BoundaryKind b) {
  return b == BoundaryKind::dirichlet_zero ? "dirichlet_zero" : "absorbing_layer";
}

BoundaryKind boundary_from_string(const std::string& s) {
  if (s == "dirichlet_zero") return BoundaryKind::dirichlet_zero;
  if (s == "absorbing_layer") return BoundaryKind::absorbing_layer;
  throw ValidationError("unknown boundary '" + s + "' (expected dirichlet_zero or absorbing_layer)");
}

CalibrationMode default_mode(SystemKind k) {
  switch (k) {
    case SystemKind::hermitian_static: return CalibrationMode::spectral_hermitian;
    case SystemKind::pt_static: return CalibrationMode::spectral_pt;
    case SystemKind::pt_dynamic: return CalibrationMode::profile_dynamic;
  }
  return CalibrationMode::spectral_hermitian;
}

SystemKind kind_of(const WaveguideSystem::Config& c) {
  if (std::holds_alternative<HermitianStaticParams>(c)) return SystemKind::hermitian_static;
  if (std::holds_alternative<PTStaticParams>(c)) return SystemKind::pt_static;
  return SystemKind::pt_dynamic;
}

bool valid_prefix(const std::string& s) {
  if (s.empty()) return false;
  return std::all_of(s.begin(), s.end(), [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.';
  });
}

void parse_system(Reader& r, const json& root, ScenarioConfig& cfg) {
  const json* s = r.object(root, "system", "", true);
  if (!s) return;
  const std::string P = "/system";
  SystemKind kind = SystemKind::hermitian_static;
  try {
    kind = system_kind_from_string(r.string(*s, "kind", P, "", true));
  } catch (const ValidationError& e) {
    if (s->contains("kind")) r.error(P + "/kind", e.what());
    return;
  }
  switch (kind) {
    case SystemKind::hermitian_static: {
      r.check_keys(*s, P, {"kind", "k1", "k2"});
      HermitianStaticParams p;
      p.k1 = r.number(*s, "k1", P, p.k1, true);
      p.k2 = r.number(*s, "k2", P, p.k2, true);
      cfg.system = p;
      break;
    }
    case SystemKind::pt_static: {
      r.check_keys(*s, P, {"kind", "k1", "k2", "alpha"});
      PTStaticParams p;
      p.k1 = r.number(*s, "k1", P, p.k1, true);
      p.k2 = r.number(*s, "k2", P, p.k2, true);
      p.alpha = r.number(*s, "alpha", P, p.alpha, true);
      cfg.system = p;
      break;
    }
    case SystemKind::pt_dynamic: {
      r.check_keys(*s, P, {"kind", "k1", "k2", "k3", "alpha"});
      PTDynamicParams p;
      p.k1 = r.number(*s, "k1", P, p.k1, true);
      p.k2 = r.number(*s, "k2", P, p.k2, true);
      p.k3 = r.number(*s, "k3", P, p.k3, true);
      p.alpha = r.number(*s, "alpha", P, p.alpha, true);
      cfg.system = p;
      break;
    }
  }
  if (r.has_errors_under(P)) return;
  guard(r, P, [&] { std::visit([](const auto& p) { p.validate(); }, cfg.system); });
}

void parse_calibration(Reader& r, const json& root, ScenarioConfig& cfg) {
  auto& c = cfg.calibration;
  c.mode = default_mode(kind_of(cfg.system));
  const json* j = r.object(root, "calibration", "", false);
  if (!j) return;
  const std::string P = "/calibration";
  r.check_keys(*j, P, {"mode", "search_box", "seeds", "refine_best", "profile_depth", "parameters"});
  if (j->contains("mode")) {
    guard(r, P + "/mode", [&] { c.mode = calibration_mode_from_string(r.string(*j, "mode", P, "")); });
  }
  if (const json* b = r.object(*j, "search_box", P, false)) {
    const std::string B = P + "/search_box";
    r.check_keys(*b, B, {"k", "x0", "alpha_tilde"});
    auto k = r.interval(*b, "k", B);
    auto x0 = r.interval(*b, "x0", B);
    auto a = r.interval(*b, "alpha_tilde", B);
    if (!b->contains("k")) r.error(B + "/k", "required field is missing");
    if (!b->contains("x0")) r.error(B + "/x0", "required field is missing");
    if (k && x0) c.box = SearchBox{*k, *x0, a};
  }
  if (const json* s = r.object(*j, "seeds", P, false)) {
    const std::string S = P + "/seeds";
    r.check_keys(*s, S, {"k", "x0", "alpha_tilde"});
    c.seeds_k = static_cast<int>(r.integer(*s, "k", S, c.seeds_k));
    c.seeds_x0 = static_cast<int>(r.integer(*s, "x0", S, c.seeds_x0));
    c.seeds_alpha = static_cast<int>(r.integer(*s, "alpha_tilde", S, c.seeds_alpha));
  }
  c.refine_best = static_cast<int>(r.integer(*j, "refine_best", P, c.refine_best));
  c.profile_depth = r.number(*j, "profile_depth", P, c.profile_depth);
  if (const json* p = r.object(*j, "parameters", P, false)) {
    const std::string Q = P + "/parameters";
    r.check_keys(*p, Q, {"k", "x0", "alpha_tilde"});
    TBParameters t;
    t.k = r.number(*p, "k", Q, t.k, true);
    t.x0 = r.number(*p, "x0", Q, t.x0, true);
    t.alpha_tilde = r.number(*p, "alpha_tilde", Q, 0.0);
    if (!(t.k > 0.0)) r.error(Q + "/k", "must be positive");
    if (!(t.x0 > 0.0)) r.error(Q + "/x0", "must be positive");
    if (!(std::abs(t.alpha_tilde) < 1.0)) r.error(Q + "/alpha_tilde", "must satisfy |alpha_tilde| < 1");
    c.explicit_parameters = t;
  }
}

void parse_observables(Reader& r, const json& root, ScenarioConfig& cfg) {
  const std::string P = "/observables";
  if (!root.contains("observables")) {
    r.error(P, "required field is missing");
    return;
  }
  const json& a = root.at("observables");
  if (!a.is_array() || a.empty()) {
    r.error(P, "must be a non-empty array");
    return;
  }
  for (std::size_t i = 0; i < a.size(); ++i) {
    const std::string E = P + "/" + std::to_string(i);
    const json& e = a[i];
    try {
      if (e.is_string()) {
        cfg.observables.push_back(default_request(observable_from_string(e.get<std::string>())));
      } else if (e.is_object()) {
        r.check_keys(e, E, {"observable", "metric", "normalization"});
        const auto o = observable_from_string(r.string(e, "observable", E, "", true));
        const Metric m = metric_from_string(r.string(e, "metric", E, "dirac"));
        ObservableRequest q = default_request(o, m);
        if (e.contains("normalization")) {
          q.normalization = normalization_from_string(r.string(e, "normalization", E, ""));
        }
        cfg.observables.push_back(q);
      } else {
        r.error(E, "must be an observable name or an object");
      }
    } catch (const ValidationError& ex) {
      r.error(E, ex.what());
    }
  }
  for (std::size_t i = 0; i < cfg.observables.size(); ++i) {
    for (std::size_t j = 0; j < i; ++j) {
      const auto& a1 = cfg.observables[i];
      const auto& b1 = cfg.observables[j];
      if (a1.observable == b1.observable && a1.metric == b1.metric) {
        r.error(P + "/" + std::to_string(i), "duplicates an earlier observable/metric pair");
      }
    }
  }
}

void parse_z_grid(Reader& r, const json& root, ScenarioConfig& cfg) {
  const json* z = r.object(root, "z_grid", "", true);
  if (!z) return;
  const std::string P = "/z_grid";
  r.check_keys(*z, P, {"start", "stop", "points", "unit"});
  auto& g = cfg.z_grid;
  g.start = r.number(*z, "start", P, 0.0);
  g.stop = r.number(*z, "stop", P, g.stop, true);
  g.points = static_cast<int>(r.integer(*z, "points", P, g.points, true));
  const std::string unit = r.string(*z, "unit", P, "period");
  if (unit == "period") {
    g.in_periods = true;
  } else if (unit == "absolute") {
    g.in_periods = false;
  } else {
    r.error(P + "/unit", "must be 'period' or 'absolute'");
  }
  if (g.start < 0.0) r.error(P + "/start", "must be >= 0");
  if (!(g.stop > g.start)) r.error(P + "/stop", "must exceed start");
  if (g.points < 2) r.error(P + "/points", "needs at least 2 points");
}

void parse_numerics(Reader& r, const json& root, ScenarioConfig& cfg) {
  if (const json* q = r.object(root, "quadrature", "", false)) {
    const std::string P = "/quadrature";
    r.check_keys(*q, P, {"half_width", "nodes", "rule", "tail_tolerance"});
    auto& s = cfg.quadrature;
    s.half_width = r.number(*q, "half_width", P, s.half_width);
    s.nodes = static_cast<int>(r.integer(*q, "nodes", P, s.nodes));
    s.tail_tolerance = r.number(*q, "tail_tolerance", P, s.tail_tolerance);
    if (q->contains("rule")) {
      guard(r, P + "/rule", [&] { s.rule = rule_from_string(r.string(*q, "rule", P, "")); });
    }
    if (!r.has_errors_under(P)) guard(r, P, [&] { s.validate(); });
  }
  cfg.ode.step = 0.005;
  if (const json* o = r.object(root, "ode", "", false)) {
    const std::string P = "/ode";
    r.check_keys(*o, P, {"step", "adaptive", "tolerance", "min_step"});
    cfg.ode.step = r.number(*o, "step", P, cfg.ode.step);
    cfg.ode.adaptive = r.boolean(*o, "adaptive", P, cfg.ode.adaptive);
    cfg.ode.tolerance = r.number(*o, "tolerance", P, cfg.ode.tolerance);
    cfg.ode.min_step = r.number(*o, "min_step", P, cfg.ode.min_step);
    if (!(cfg.ode.step > 0.0)) r.error(P + "/step", "must be positive");
    if (!(cfg.ode.tolerance > 0.0)) r.error(P + "/tolerance", "must be positive");
    if (!(cfg.ode.min_step > 0.0)) r.error(P + "/min_step", "must be positive");
  }
  if (const json* b = r.object(root, "bpm", "", false)) {
    const std::string P = "/bpm";
    r.check_keys(*b, P, {"enabled", "half_width", "nx", "dz", "boundary"});
    auto& g = cfg.bpm.grid;
    cfg.bpm.enabled = r.boolean(*b, "enabled", P, true);
    g.half_width = r.number(*b, "half_width", P, g.half_width);
    g.nx = static_cast<int>(r.integer(*b, "nx", P, g.nx));
    g.dz = r.number(*b, "dz", P, g.dz);
    if (const json* bd = r.object(*b, "boundary", P, false)) {
      const std::string B = P + "/boundary";
      r.check_keys(*bd, B, {"kind", "width", "strength"});
      if (bd->contains("kind")) {
        guard(r, B + "/kind", [&] { g.boundary.kind = boundary_from_string(r.string(*bd, "kind", B, "")); });
      }
      g.boundary.width = r.number(*bd, "width", B, g.boundary.width);
      g.boundary.strength = r.number(*bd, "strength", B, g.boundary.strength);
    }
    if (!r.has_errors_under(P)) {
      guard(r, P, [&] { g.validate(); });
      if (!r.has_errors_under(P)) {
        for (const auto& w : g.warnings()) r.warn(P, w);
      }
    }
  }
  if (const json* m = r.object(root, "potential_map", "", false)) {
    const std::string P = "/potential_map";
    r.check_keys(*m, P, {"x_min", "x_max", "nx", "z_periods", "nz"});
    PotentialMapSpec s;
    s.x_min = r.number(*m, "x_min", P, s.x_min);
    s.x_max = r.number(*m, "x_max", P, s.x_max);
    s.nx = static_cast<int>(r.integer(*m, "nx", P, s.nx));
    s.z_periods = r.number(*m, "z_periods", P, s.z_periods);
    s.nz = static_cast<int>(r.integer(*m, "nz", P, s.nz));
    if (!(s.x_max > s.x_min)) r.error(P + "/x_max", "must exceed x_min");
    if (s.nx < 2) r.error(P + "/nx", "needs at least 2 points");
    if (s.nz < 1) r.error(P + "/nz", "needs at least 1 point");
    if (!(s.z_periods >= 0.0)) r.error(P + "/z_periods", "must be >= 0");
    cfg.potential_map = s;
  }
  if (const json* o = r.object(root, "output", "", false)) {
    const std::string P = "/output";
    r.check_keys(*o, P, {"directory", "prefix", "gnuplot"});
    cfg.output.directory = r.string(*o, "directory", P, cfg.output.directory);
    cfg.output.prefix = r.string(*o, "prefix", P, cfg.output.prefix);
    cfg.output.gnuplot = r.boolean(*o, "gnuplot", P, cfg.output.gnuplot);
    if (cfg.output.directory.empty()) r.error(P + "/directory", "must not be empty");
    if (!cfg.output.prefix.empty() && !valid_prefix(cfg.output.prefix)) {
      r.error(P + "/prefix", "may contain only letters, digits, '-', '_' and '.'");
    }
  }
  if (root.contains("seed")) {
    const long long s = r.integer(root, "seed", "", 0);
    if (s < 0) {
      r.error("/seed", "must be a non-negative integer");
    } else {
      cfg.seed = static_cast<std::uint64_t>(s);
    }
  }
}

// Checks that need the parsed system: regularity, mode/system pairing,
// search box and initial state.
void physics_checks(Reader& r, ScenarioConfig& cfg) {
  if (r.has_errors_under("/system")) return;
  const SystemKind kind = kind_of(cfg.system);
  std::shared_ptr<const WaveguideSystem> sys;
  try {
    sys = std::make_shared<const WaveguideSystem>(cfg.system);
  } catch (const Error& e) {
    r.error("/system", std::string("regularity check failed: ") + e.what());
    return;
  }
  if (kind == SystemKind::pt_dynamic && !sys->certified()) {
    r.warn("/system/alpha",
           "certified=false: the sufficient bound (1 - |k1|/|k2|) > |alpha| (1 + |k3|/|k2|) does not hold; "
           "regularity rests on the scan only");
  }
  if (!r.has_errors_under("/calibration/mode") && cfg.calibration.mode != default_mode(kind)) {
    r.error("/calibration/mode", std::string("mode ") + to_string(cfg.calibration.mode) +
                                     " does not match system kind " + to_string(kind) + " (expected " +
                                     to_string(default_mode(kind)) + ")");
  }
  if (cfg.calibration.box && !r.has_errors_under("/calibration")) {
    guard(r, "/calibration/search_box", [&] { cfg.calibration.box->validate(cfg.calibration.mode); });
  }
  const auto& c = cfg.calibration;
  if (c.seeds_k < 2 || c.seeds_x0 < 2 || c.seeds_alpha < 1) {
    r.error("/calibration/seeds", "needs at least 2 seeds in k and x0 and 1 in alpha_tilde");
  }
  if (c.refine_best < 1) r.error("/calibration/refine_best", "must be >= 1");
  if (c.profile_depth < 0.0) r.error("/calibration/profile_depth", "must be >= 0");
  const bool dyn = kind == SystemKind::pt_dynamic;
  const auto m = cfg.initial_state;
  const bool ok = m == ModeKind::left || m == ModeKind::right ||
                  (dyn ? (m == ModeKind::floquet1 || m == ModeKind::floquet2)
                       : (m == ModeKind::ground || m == ModeKind::excited));
  if (!ok) r.error("/initial_state", std::string("mode ") + to_string(m) + " is not defined for this system");
  if (dyn && !r.has_errors_under("/system")) {
    guard(r, "/system", [&] { (void)sys->periods(); });
  }
}

}  // namespace

ValidationOutcome validate_config(const std::string& text) {
  ValidationOutcome out;
  Reader r;
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    const auto [line, col] = line_column(text, e.byte == 0 ? 0 : e.byte - 1);
    std::string msg = e.what();
    const auto pos = msg.find("syntax error");
    if (pos != std::string::npos) msg = msg.substr(pos);
    r.error("line " + std::to_string(line) + ", column " + std::to_string(col), msg);
    out.diagnostics = r.diags;
    return out;
  }
  if (!root.is_object()) {
    r.error("", "top level must be an object");
    out.diagnostics = r.diags;
    return out;
  }
  ScenarioConfig cfg;
  r.check_keys(root, "", {"name", "system", "initial_state", "calibration", "observables", "z_grid",
                          "quadrature", "ode", "bpm", "potential_map", "output", "seed"});
  cfg.name = r.string(root, "name", "", cfg.name);
  if (!valid_prefix(cfg.name)) r.error("/name", "may contain only letters, digits, '-', '_' and '.'");
  parse_system(r, root, cfg);
  if (root.contains("initial_state")) {
    guard(r, "/initial_state", [&] { cfg.initial_state = mode_kind_from_string(r.string(root, "initial_state", "", "left")); });
  }
  parse_calibration(r, root, cfg);
  parse_observables(r, root, cfg);
  parse_z_grid(r, root, cfg);
  parse_numerics(r, root, cfg);
  physics_checks(r, cfg);
  if (cfg.output.prefix.empty()) cfg.output.prefix = cfg.name;

  out.diagnostics = r.diags;
  if (!r.has_errors()) {
    for (const auto& d : r.diags) {
      if (d.severity == Diagnostic::Severity::warning) cfg.warnings.push_back(d);
    }
    out.config = std::move(cfg);
  }
  return out;
}

ScenarioConfig parse_config(const std::string& text) {
  auto v = validate_config(text);
  if (!v.ok()) throw ConfigError(v.diagnostics);
  return std::move(*v.config);
}

ScenarioConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot read configuration file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

// ---------------------------------------------------------------------------
// Canonical form and hash

namespace {

json interval_json(const Interval& i) { return json::array({i.lo, i.hi}); }

json config_json(const ScenarioConfig& c) {
  json j;
  j["name"] = c.name;
  json s;
  std::visit(
      [&](const auto& p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, HermitianStaticParams>) {
          s = {{"kind", "hermitian_static"}, {"k1", p.k1}, {"k2", p.k2}};
        } else if constexpr (std::is_same_v<T, PTStaticParams>) {
          s = {{"kind", "pt_static"}, {"k1", p.k1}, {"k2", p.k2}, {"alpha", p.alpha}};
        } else {
          s = {{"kind", "pt_dynamic"}, {"k1", p.k1}, {"k2", p.k2}, {"k3", p.k3}, {"alpha", p.alpha}};
        }
      },
      c.system);
  j["system"] = s;
  j["initial_state"] = to_string(c.initial_state);
  json cal;
  cal["mode"] = to_string(c.calibration.mode);
  cal["seeds"] = {{"k", c.calibration.seeds_k}, {"x0", c.calibration.seeds_x0},
                  {"alpha_tilde", c.calibration.seeds_alpha}};
  cal["refine_best"] = c.calibration.refine_best;
  cal["profile_depth"] = c.calibration.profile_depth;
  if (c.calibration.box) {
    json b = {{"k", interval_json(c.calibration.box->k)}, {"x0", interval_json(c.calibration.box->x0)}};
    if (c.calibration.box->alpha_tilde) b["alpha_tilde"] = interval_json(*c.calibration.box->alpha_tilde);
    cal["search_box"] = b;
  }
  if (c.calibration.explicit_parameters) {
    const auto& p = *c.calibration.explicit_parameters;
    cal["parameters"] = {{"k", p.k}, {"x0", p.x0}, {"alpha_tilde", p.alpha_tilde}};
  }
  j["calibration"] = cal;
  json obs = json::array();
  for (const auto& o : c.observables) {
    obs.push_back({{"observable", to_string(o.observable)},
                   {"metric", to_string(o.metric)},
                   {"normalization", to_string(o.normalization)}});
  }
  j["observables"] = obs;
  j["z_grid"] = {{"start", c.z_grid.start}, {"stop", c.z_grid.stop}, {"points", c.z_grid.points},
                 {"unit", c.z_grid.in_periods ? "period" : "absolute"}};
  j["quadrature"] = {{"half_width", c.quadrature.half_width}, {"nodes", c.quadrature.nodes},
                     {"rule", to_string(c.quadrature.rule)}, {"tail_tolerance", c.quadrature.tail_tolerance}};
  j["ode"] = {{"step", c.ode.step}, {"adaptive", c.ode.adaptive}, {"tolerance", c.ode.tolerance},
              {"min_step", c.ode.min_step}};
  const auto& g = c.bpm.grid;
  j["bpm"] = {{"enabled", c.bpm.enabled}, {"half_width", g.half_width}, {"nx", g.nx}, {"dz", g.dz},
              {"boundary", {{"kind", to_string(g.boundary.kind)}, {"width", g.boundary.width},
                            {"strength", g.boundary.strength}}}};
  if (c.potential_map) {
    const auto& m = *c.potential_map;
    j["potential_map"] = {{"x_min", m.x_min}, {"x_max", m.x_max}, {"nx", m.nx},
                          {"z_periods", m.z_periods}, {"nz", m.nz}};
  }
  // The directory is left out so relocating the output keeps the hash.
  j["output"] = {{"prefix", c.output.prefix}, {"gnuplot", c.output.gnuplot}};
  j["seed"] = c.seed;
  return j;
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace

std::string canonical_json(const ScenarioConfig& config) { return config_json(config).dump(2) + "\n"; }

std::string config_hash(const ScenarioConfig& config) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a(config_json(config).dump())));
  return buf;
}

void apply_overrides(ScenarioConfig& c, const Overrides& o) {
  if (o.quadrature_nodes) c.quadrature.nodes = *o.quadrature_nodes;
  if (o.quadrature_half_width) c.quadrature.half_width = *o.quadrature_half_width;
  if (o.quadrature_rule) c.quadrature.rule = rule_from_string(*o.quadrature_rule);
  c.quadrature.validate();
  if (o.z_points) {
    if (*o.z_points < 2) throw ValidationError("z grid needs at least 2 points");
    c.z_grid.points = *o.z_points;
  }
  if (o.bpm_nx) c.bpm.grid.nx = *o.bpm_nx;
  if (o.bpm_dz) c.bpm.grid.dz = *o.bpm_dz;
  if (o.bpm_enabled) c.bpm.enabled = *o.bpm_enabled;
  c.bpm.grid.validate();
  if (o.output_directory) c.output.directory = *o.output_directory;
}

// ---------------------------------------------------------------------------
// CSV

bool is_real_valued(const ObservableRequest& r, const WaveguideSystem& s) {
  if (r.metric == Metric::pt) return false;
  if (r.observable == Observable::H_mean || r.observable == Observable::H_std) return s.is_hermitian();
  return true;
}

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::string format_csv(const std::vector<EngineSeries>& series) {
  std::string out;
  if (series.empty()) return "z,engine\n";
  const std::string label = series.front().series.label();
  bool cplx_cols = false;
  for (const auto& s : series) {
    if (s.series.label() != label) throw ValidationError("CSV series must share one observable label");
    if (s.series.z.size() != s.series.values.size()) throw ValidationError("series z and values differ in length");
    cplx_cols = cplx_cols || s.complex_valued;
  }
  out = cplx_cols ? "z," + label + "_re," + label + "_im,engine\n" : "z," + label + ",engine\n";
  struct Row {
    double z;
    int engine;
    std::size_t order;
    cplx v;
  };
  std::vector<Row> rows;
  std::size_t order = 0;
  for (const auto& s : series) {
    for (std::size_t i = 0; i < s.series.z.size(); ++i) {
      rows.push_back({s.series.z[i], static_cast<int>(s.engine), order++, s.series.values[i]});
    }
  }
  std::stable_sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
    if (a.z != b.z) return a.z < b.z;
    return a.engine < b.engine;
  });
  for (const auto& r : rows) {
    out += fmt(r.z);
    out += ',';
    out += fmt(r.v.real());
    if (cplx_cols) {
      out += ',';
      out += fmt(r.v.imag());
    }
    out += ',';
    out += to_string(static_cast<Engine>(r.engine));
    out += '\n';
  }
  return out;
}

namespace {

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error("cannot open " + path.string() + " for writing");
  f.write(text.data(), static_cast<std::streamsize>(text.size()));
  f.close();
  if (!f) throw Error("write to " + path.string() + " failed");
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

}  // namespace

void emit_csv(const std::vector<EngineSeries>& series, const std::filesystem::path& path) {
  write_text(path, format_csv(series));
}

CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path.string());
  CsvTable t;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (first) {
      t.header = split(line, ',');
      first = false;
    } else if (!line.empty()) {
      t.rows.push_back(split(line, ','));
    }
  }
  if (first) throw Error(path.string() + " is empty");
  return t;
}

double parse_double(const std::string& s) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || *end != '\0') throw ValidationError("not a number: '" + s + "'");
  return v;
}

void emit_potential_csv(const WaveguideSystem& system, const PotentialMapSpec& spec,
                        const std::filesystem::path& path) {
  const double T = system.periods().T;
  const auto zs = spec.nz == 1 ? std::vector<double>{0.0} : linspace(0.0, spec.z_periods * T, spec.nz);
  const auto xs = linspace(spec.x_min, spec.x_max, spec.nx);
  std::string out = "z,x,V_re,V_im,engine\n";
  for (double z : zs) {
    for (double x : xs) {
      const cplx v = system.potential(x, z);
      out += fmt(z) + ',' + fmt(x) + ',' + fmt(v.real()) + ',' + fmt(v.imag()) + ",exact\n";
    }
  }
  write_text(path, out);
}

// ---------------------------------------------------------------------------
// Pipeline

namespace {

template <class F>
auto stage(const char* name, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(name, e.what());
  }
}

// Rotates v so the Dirac overlap of its assembled state with `target` is
// real and positive.
VectorC phase_align(const TightBindingModel& m, const VectorC& v,
                    const std::function<cplx(double)>& target, const QuadratureGrid& g) {
  const cplx o = inner_product(target, [&](double x) { return m.assemble_state(v, x); }, Metric::dirac, g);
  if (std::abs(o) == 0.0) throw SolverError("TB state is orthogonal to its exact counterpart");
  return v * (std::conj(o) / std::abs(o));
}

VectorC combine(ModeKind kind, const WaveguideSystem& s, const VectorC& v1, const VectorC& v2) {
  switch (kind) {
    case ModeKind::ground:
    case ModeKind::floquet1: return v1;
    case ModeKind::excited:
    case ModeKind::floquet2: return v2;
    case ModeKind::left: return s.left_coefficients().first * v1 + s.left_coefficients().second * v2;
    case ModeKind::right: return s.right_coefficients().first * v1 + s.right_coefficients().second * v2;
  }
  return v1;
}

ObservableSeries imag_part(const ObservableSeries& s) {
  ObservableSeries r = s;
  for (auto& v : r.values) v = cplx(v.imag(), 0.0);
  return r;
}

json cplx_json(cplx v) { return json::array({v.real(), v.imag()}); }

json metrics_json(const ComparisonMetrics& m) {
  json j = {{"rmse", m.rmse}, {"relative_rmse", m.relative_rmse}, {"amplitude_ratio", m.amplitude_ratio}};
  j["omega"] = m.omega ? json(*m.omega) : json(nullptr);
  j["phase_shift"] = m.phase_shift ? json(*m.phase_shift) : json(nullptr);
  return j;
}

std::string gnuplot_script(const std::vector<std::pair<std::string, bool>>& csvs) {
  std::string s = "set datafile separator ','\nset xlabel 'z'\n";
  for (const auto& [f, cx] : csvs) {
    const std::string eng = cx ? "4" : "3";
    s += "set title '" + f + "'\n";
    s += "plot '" + f + "' every ::1 using 1:(strcol(" + eng + ") eq 'exact' ? $2 : NaN) with lines title 'exact', \\\n";
    s += "     '" + f + "' every ::1 using 1:(strcol(" + eng + ") eq 'tb' ? $2 : NaN) with lines dt 2 title 'tb'\n";
    s += "pause -1\n";
  }
  return s;
}

}  // namespace

std::shared_ptr<const WaveguideSystem> make_system(const ScenarioConfig& config) {
  return std::make_shared<const WaveguideSystem>(config.system);
}

std::vector<double> z_samples(const ScenarioConfig& config, const WaveguideSystem& system) {
  const double scale = config.z_grid.in_periods ? system.periods().T : 1.0;
  return linspace(config.z_grid.start * scale, config.z_grid.stop * scale, config.z_grid.points);
}

QuadratureGrid observable_grid(const ScenarioConfig& config, const WaveguideSystem& system) {
  const double L = config.quadrature.half_width > 0.0 ? config.quadrature.half_width : 14.0 / system.min_k();
  return QuadratureGrid(config.quadrature, L);
}

std::optional<CalibrationResult> calibrate_scenario(const ScenarioConfig& cfg,
                                                    std::shared_ptr<const WaveguideSystem> sys) {
  if (cfg.calibration.explicit_parameters) return std::nullopt;
  CalibrationProblem pb;
  pb.target = std::move(sys);
  pb.mode = cfg.calibration.mode;
  pb.box = cfg.calibration.box;
  pb.seeds_k = cfg.calibration.seeds_k;
  pb.seeds_x0 = cfg.calibration.seeds_x0;
  pb.seeds_alpha = cfg.calibration.seeds_alpha;
  pb.refine_best = cfg.calibration.refine_best;
  pb.profile_depth = cfg.calibration.profile_depth;
  return calibrate(pb);
}

TightBindingSetup setup_tight_binding(const ScenarioConfig& cfg,
                                      std::shared_ptr<const WaveguideSystem> sys,
                                      const TBParameters& p, const std::vector<double>& zprop) {
  if (zprop.empty() || zprop.front() != 0.0) throw ValidationError("TB propagation samples must start at z = 0");
  TightBindingSetup out;
  const QuadratureGrid grid = observable_grid(cfg, *sys);
  const ModeKind m1 = sys->is_static() ? ModeKind::ground : ModeKind::floquet1;
  const ModeKind m2 = sys->is_static() ? ModeKind::excited : ModeKind::floquet2;
  const WellKind wk = cfg.calibration.mode == CalibrationMode::spectral_pt ? WellKind::pt : WellKind::hermitian;
  out.kappa = overlap_kappa(WellBasis{wk, p.k, wk == WellKind::pt ? p.alpha_tilde : 0.0, 0.0}, p.x0);
  auto target = [&](ModeKind k) { return [&, k](double x) { return sys->mode(k, x, 0.0); }; };
  if (sys->is_static()) {
    out.model = std::make_shared<const TightBindingModel>(make_static_model(cfg.calibration.mode, p));
    const Spectrum sp = out.model->solve_spectrum();
    out.energies = sp.energies;
    MatrixC V = sp.vectors;
    V.col(0) = phase_align(*out.model, V.col(0), target(m1), grid);
    V.col(1) = phase_align(*out.model, V.col(1), target(m2), grid);
    VectorC c0 = combine(cfg.initial_state, *sys, V.col(0), V.col(1));
    c0 /= std::sqrt(out.model->power(c0));
    out.initial = c0;
    const VectorC d = V.colPivHouseholderQr().solve(c0);
    const std::vector<cplx> E = sp.energies;
    out.coefficients = [V, d, E](double z) {
      VectorC c = VectorC::Zero(V.rows());
      for (int n = 0; n < V.cols(); ++n) c += d(n) * std::exp(-I * E[n] * z) * V.col(n);
      return c;
    };
    return out;
  }
  const double T = sys->periods().T;
  out.model = std::make_shared<const TightBindingModel>(TightBindingModel::two_well(
      WellKind::hermitian, p.k, p.x0, 0.0, Metric::dirac, PotentialSource::exact_dynamic, sys));
  const auto [e1, e2] = sys->energies();
  const FloquetResult fr = out.model->floquet_monodromy(T, cfg.ode, {e1, e2});
  FloquetReport f;
  f.multipliers = fr.multipliers;
  f.quasi_energies = fr.quasi_energies;
  f.eigenvector_condition = fr.eigenvector_condition;
  f.period = T;
  for (std::size_t i = 0; i < fr.multipliers.size(); ++i) {
    const cplx ex = std::exp(-I * (i == 0 ? e1 : e2) * T);
    f.exact_multipliers.push_back(ex);
    f.phase_factor_distance.push_back(std::abs(fr.multipliers[i] / std::abs(fr.multipliers[i]) - ex));
  }
  out.floquet = f;
  const VectorC v1 = phase_align(*out.model, fr.floquet_vectors.col(0), target(m1), grid);
  const VectorC v2 = phase_align(*out.model, fr.floquet_vectors.col(1), target(m2), grid);
  VectorC c0 = combine(cfg.initial_state, *sys, v1, v2);
  c0 /= std::sqrt(out.model->power(c0));
  out.initial = c0;
  out.coefficients = trajectory_lookup(out.model->propagate_coefficients(c0, zprop, cfg.ode));
  return out;
}

RunResult run(const ScenarioConfig& cfg, const RunOptions& options) {
  RunResult res;
  auto& rep = res.report;
  rep.scenario = cfg.name;
  rep.config_hash = config_hash(cfg);
  for (const auto& w : cfg.warnings) rep.warnings.push_back(w.str());

  // Regularity and exact evaluators.
  auto sys = stage("regularity", [&] { return make_system(cfg); });
  rep.system = sys->name();
  const auto& rv = sys->regularity();
  rep.regularity = {rv.nodeless, sys->certified(), rv.min_relative_W, rv.argmin_x, rv.argmin_z};
  const Periods per = sys->periods();
  rep.period = per.T;
  rep.repetition = per.repetition;
  rep.exact_energies = sys->energies();
  const double T = per.T;
  const auto zs = z_samples(cfg, *sys);
  // Trajectories start from the z = 0 definition of the initial state.
  std::vector<double> zprop = zs;
  if (zprop.front() > 0.0) zprop.insert(zprop.begin(), 0.0);

  const ModeKind m1 = sys->is_static() ? ModeKind::ground : ModeKind::floquet1;
  const ModeKind m2 = sys->is_static() ? ModeKind::excited : ModeKind::floquet2;
  auto exact = stage("exact", [&] {
    ResidualGrid rg;
    rg.z_samples = {0.0, 0.37 * T};
    std::vector<ModeKind> kinds = {m1, m2};
    if (cfg.initial_state != m1 && cfg.initial_state != m2) kinds.push_back(cfg.initial_state);
    for (ModeKind k : kinds) {
      rep.oracle_residuals[std::string("pde_residual/") + to_string(k)] = pde_residual(
          [&](double x, double z) { return sys->mode(k, x, z); },
          [&](double x, double z) { return sys->potential(x, z); }, rg);
    }
    if (!sys->is_static()) {
      const auto [e1, e2] = sys->energies();
      double worst = 0.0;
      for (double x : linspace(-10.0, 10.0, 101)) {
        for (double z : {0.0, 0.3 * T}) {
          for (auto [k, e] : {std::pair{m1, e1}, std::pair{m2, e2}}) {
            const cplx a = sys->mode(k, x, z + T) * std::exp(I * e * (z + T));
            const cplx b = sys->mode(k, x, z) * std::exp(I * e * z);
            worst = std::max(worst, std::abs(a - b));
          }
        }
      }
      rep.oracle_residuals["floquet_periodicity"] = worst;
    }
    return exact_mode_sampler(sys, cfg.initial_state);
  });

  rep.calibration_mode = cfg.calibration.mode;
  stage("calibration", [&] {
    const auto cr = calibrate_scenario(cfg, sys);
    if (!cr) {
      rep.parameters = *cfg.calibration.explicit_parameters;
      rep.calibrated = false;
      return;
    }
    rep.parameters = cr->parameters;
    rep.calibrated = true;
    rep.calibration_objective = cr->objective_value;
    rep.alpha_unidentifiable = cr->alpha_unidentifiable;
    if (cr->alpha_unidentifiable) {
      rep.warnings.push_back("alpha_tilde is flat in the spectral objective; anchored to the target alpha");
    }
  });

  const QuadratureGrid grid = observable_grid(cfg, *sys);
  const TightBindingSetup tb =
      stage("tight_binding", [&] { return setup_tight_binding(cfg, sys, rep.parameters, zprop); });
  rep.kappa = tb.kappa;
  rep.tb_energies = tb.energies;
  rep.floquet = tb.floquet;
  const auto& model = tb.model;
  const auto& coefficients = tb.coefficients;

  // Observables for both models.
  std::vector<ObservableSeries> ex_series, tb_series;
  stage("observables", [&] {
    ex_series = moment_series(*exact, cfg.observables, zs, grid);
    TBSampler tbs(model, coefficients);
    tb_series = moment_series(tbs, cfg.observables, zs, grid);
  });

  // Optional BPM cross-check from the exact initial field.
  std::vector<ObservableSeries> bpm_series;
  if (cfg.bpm.enabled) {
    stage("bpm", [&] {
      const auto& g = cfg.bpm.grid;
      const auto x = g.nodes();
      std::vector<cplx> f0(x.size());
      for (std::size_t i = 0; i < x.size(); ++i) f0[i] = sys->mode(cfg.initial_state, x[i], 0.0);
      auto snaps = std::make_shared<std::vector<FieldSnapshot>>(propagate(f0, system_potential(sys, x), g, zprop));
      double worst = 0.0;
      std::vector<cplx> ref(x.size());
      for (const auto& s : *snaps) {
        for (std::size_t i = 0; i < x.size(); ++i) ref[i] = sys->mode(cfg.initial_state, x[i], s.z);
        worst = std::max(worst, relative_l2_error(s.samples, ref, g.dx()));
      }
      rep.oracle_residuals["bpm_l2_error"] = worst;
      const double h = g.dx(), x0 = -g.half_width;
      const int nx = g.nx;
      auto zkeys = std::make_shared<std::vector<double>>();
      for (const auto& s : *snaps) zkeys->push_back(s.z);
      // CN fields carry grid-scale noise from the wall truncation, so the
      // derivative check only guards against gross under-resolution.
      FiniteDifferenceSpec bpm_fd;
      bpm_fd.richardson_tolerance = 1e-2;
      FunctionSampler bs(
          [snaps, zkeys, h, x0, nx](double xx, double z) {
            const auto it = std::lower_bound(zkeys->begin(), zkeys->end(), z);
            if (it == zkeys->end() || *it != z) throw ValidationError("BPM field not recorded at this z");
            const long i = std::lround((xx - x0) / h);
            if (i < 0 || i >= nx) return cplx{};
            return (*snaps)[static_cast<std::size_t>(it - zkeys->begin())].samples[static_cast<std::size_t>(i)];
          },
          [sys](double xx, double z) { return sys->potential(xx, z); }, bpm_fd);
      QuadratureSpec qs;
      qs.rule = QuadratureRule::trapezoid;
      qs.nodes = nx;
      qs.tail_tolerance = cfg.quadrature.tail_tolerance;
      bpm_series = moment_series(bs, cfg.observables, zs, QuadratureGrid(qs, g.half_width));
    });
  }

  // Metrics.
  stage("metrics", [&] {
    for (std::size_t k = 0; k < cfg.observables.size(); ++k) {
      const bool real = is_real_valued(cfg.observables[k], *sys);
      auto add = [&](Engine cand, const ObservableSeries& a) {
        rep.metrics.push_back({ex_series[k].label(), Engine::exact, cand, "re", comparison_metrics(ex_series[k], a)});
        if (!real) {
          rep.metrics.push_back({ex_series[k].label(), Engine::exact, cand, "im",
                                 comparison_metrics(imag_part(ex_series[k]), imag_part(a))});
        }
      };
      add(Engine::tb, tb_series[k]);
      if (!bpm_series.empty()) add(Engine::bpm, bpm_series[k]);
    }
  });

  for (std::size_t k = 0; k < cfg.observables.size(); ++k) {
    const bool cx = !is_real_valued(cfg.observables[k], *sys);
    res.series.push_back({Engine::exact, ex_series[k], cx});
    res.series.push_back({Engine::tb, tb_series[k], cx});
    if (!bpm_series.empty()) res.series.push_back({Engine::bpm, bpm_series[k], cx});
  }

  stage("files", [&] {
    const std::filesystem::path dir = cfg.output.directory;
    const std::string pre = cfg.output.prefix;
    std::vector<std::pair<std::string, bool>> csvs;
    json files = json::array();
    for (std::size_t k = 0; k < cfg.observables.size(); ++k) {
      std::vector<EngineSeries> group;
      std::vector<std::string> engines;
      for (const auto& s : res.series) {
        if (s.series.label() == ex_series[k].label()) {
          group.push_back(s);
          engines.push_back(to_string(s.engine));
        }
      }
      const std::string name = pre + "_" + ex_series[k].label() + ".csv";
      rep.provenance[name] = engines;
      csvs.emplace_back(name, !is_real_valued(cfg.observables[k], *sys));
      files.push_back({{"file", name}, {"observable", ex_series[k].label()},
                       {"metric", to_string(ex_series[k].metric)},
                       {"normalization", to_string(ex_series[k].normalization)},
                       {"engines", engines}});
      if (options.write_files) {
        emit_csv(group, dir / name);
        res.files.push_back(dir / name);
      }
    }
    if (cfg.potential_map) {
      const std::string name = pre + "_potential.csv";
      rep.provenance[name] = {"exact"};
      files.push_back({{"file", name}, {"observable", "V"}, {"engines", {"exact"}}});
      if (options.write_files) {
        emit_potential_csv(*sys, *cfg.potential_map, dir / name);
        res.files.push_back(dir / name);
      }
    }
    const std::string report_name = pre + "_report.json";
    json report_engines = {"exact", "tb"};
    if (cfg.bpm.enabled) report_engines.push_back("bpm");
    files.push_back({{"file", report_name}, {"observable", "report"}, {"engines", report_engines}});
    if (cfg.output.gnuplot) files.push_back({{"file", pre + ".gp"}, {"observable", "plot script"}});
    if (!options.write_files) return;
    write_text(dir / report_name, report_json(rep));
    res.files.push_back(dir / report_name);
    if (cfg.output.gnuplot) {
      write_text(dir / (pre + ".gp"), gnuplot_script(csvs));
      res.files.push_back(dir / (pre + ".gp"));
    }
    json meta;
    meta["library"] = kLibraryVersion;
    meta["scenario"] = cfg.name;
    meta["config_hash"] = rep.config_hash;
    meta["hash_algorithm"] = "fnv1a-64 over the compact canonical configuration";
    meta["seed"] = cfg.seed;
    meta["config"] = config_json(cfg);
    meta["files"] = files;
    meta["warnings"] = rep.warnings;
    const std::string meta_name = pre + "_metadata.json";
    write_text(dir / meta_name, meta.dump(2) + "\n");
    res.files.push_back(dir / meta_name);
  });
  return res;
}

std::string report_json(const ComparisonReport& r) {
  json j;
  j["scenario"] = r.scenario;
  j["config_hash"] = r.config_hash;
  j["system"] = r.system;
  j["regularity"] = {{"nodeless", r.regularity.nodeless},
                     {"certified", r.regularity.certified},
                     {"min_relative_W", r.regularity.min_relative_W},
                     {"argmin_x", r.regularity.argmin_x},
                     {"argmin_z", r.regularity.argmin_z}};
  j["period"] = r.period;
  if (r.repetition) {
    j["repetition"] = {{"n", r.repetition->n}, {"m", r.repetition->m}, {"q", r.repetition->q},
                       {"T_rep", r.repetition->T_rep},
                       {"intensity_revival_periods", r.repetition->intensity_revival_periods}};
  }
  j["exact_energies"] = {r.exact_energies.first, r.exact_energies.second};
  j["calibration"] = {{"mode", to_string(r.calibration_mode)},
                      {"calibrated", r.calibrated},
                      {"k", r.parameters.k},
                      {"x0", r.parameters.x0},
                      {"alpha_tilde", r.parameters.alpha_tilde},
                      {"alpha_unidentifiable", r.alpha_unidentifiable}};
  j["calibration"]["objective"] = r.calibration_objective ? json(*r.calibration_objective) : json(nullptr);
  j["kappa"] = cplx_json(r.kappa);
  json te = json::array();
  for (auto e : r.tb_energies) te.push_back(cplx_json(e));
  j["tb_energies"] = te;
  if (r.floquet) {
    json f;
    json a = json::array(), b = json::array(), q = json::array();
    for (auto v : r.floquet->multipliers) a.push_back(cplx_json(v));
    for (auto v : r.floquet->exact_multipliers) b.push_back(cplx_json(v));
    for (auto v : r.floquet->quasi_energies) q.push_back(cplx_json(v));
    f["multipliers"] = a;
    f["exact_multipliers"] = b;
    f["quasi_energies"] = q;
    f["phase_factor_distance"] = r.floquet->phase_factor_distance;
    f["eigenvector_condition"] = r.floquet->eigenvector_condition;
    f["period"] = r.floquet->period;
    j["floquet"] = f;
  }
  json ms = json::array();
  for (const auto& m : r.metrics) {
    json e = metrics_json(m.metrics);
    e["observable"] = m.label;
    e["component"] = m.component;
    e["reference"] = to_string(m.reference);
    e["candidate"] = to_string(m.candidate);
    ms.push_back(e);
  }
  j["metrics"] = ms;
  j["oracle_residuals"] = r.oracle_residuals;
  j["warnings"] = r.warnings;
  j["provenance"] = r.provenance;
  return j.dump(2) + "\n";
}

}  // namespace susytb
