#include <pybind11/complex.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "susytb/harness.hpp"

namespace py = pybind11;
using namespace susytb;

namespace {

using SystemPtr = std::shared_ptr<WaveguideSystem>;
using RealArray = py::array_t<double, py::array::c_style | py::array::forcecast>;

py::array_t<cplx> map_xz(const RealArray& x, double z, const std::function<cplx(double, double)>& f) {
  std::vector<py::ssize_t> shape(x.shape(), x.shape() + x.ndim());
  py::array_t<cplx> out(shape);
  cplx* o = out.mutable_data();
  const double* xi = x.data();
  for (py::ssize_t i = 0; i < x.size(); ++i) o[i] = f(xi[i], z);
  return out;
}

py::array_t<cplx> to_array(const std::vector<cplx>& v) {
  py::array_t<cplx> a(static_cast<py::ssize_t>(v.size()));
  std::copy(v.begin(), v.end(), a.mutable_data());
  return a;
}

py::array_t<cplx> to_array(const MatrixC& m) {
  py::array_t<cplx> a({m.rows(), m.cols()});
  auto r = a.mutable_unchecked<2>();
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) r(i, j) = m(i, j);
  return a;
}

py::dict metrics_dict(const ComparisonMetrics& m) {
  py::dict d;
  d["rmse"] = m.rmse;
  d["relative_rmse"] = m.relative_rmse;
  d["amplitude_ratio"] = m.amplitude_ratio;
  d["omega"] = m.omega ? py::cast(*m.omega) : py::none();
  d["phase_shift"] = m.phase_shift ? py::cast(*m.phase_shift) : py::none();
  return d;
}

py::object json_loads(const std::string& s) { return py::module_::import("json").attr("loads")(s); }

std::vector<ObservableRequest> requests(const std::vector<std::pair<std::string, std::string>>& obs) {
  std::vector<ObservableRequest> r;
  for (const auto& [o, m] : obs) r.push_back(default_request(observable_from_string(o), metric_from_string(m)));
  return r;
}

}  // namespace

PYBIND11_MODULE(_susytb, m) {
  m.doc() = "Exact SUSY coupled-waveguide solutions, tight-binding calibration, observables and BPM";

  // Translators run in reverse registration order, so the base class goes first.
  py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
  py::register_exception<SolverError>(m, "SolverError", PyExc_RuntimeError);
  py::register_exception<QuadratureError>(m, "QuadratureError", PyExc_RuntimeError);

  py::enum_<ModeKind>(m, "ModeKind")
      .value("ground", ModeKind::ground)
      .value("excited", ModeKind::excited)
      .value("floquet1", ModeKind::floquet1)
      .value("floquet2", ModeKind::floquet2)
      .value("left", ModeKind::left)
      .value("right", ModeKind::right);
  py::enum_<CalibrationMode>(m, "CalibrationMode")
      .value("spectral_hermitian", CalibrationMode::spectral_hermitian)
      .value("spectral_pt", CalibrationMode::spectral_pt)
      .value("profile_dynamic", CalibrationMode::profile_dynamic);

  py::class_<HermitianStaticParams>(m, "HermitianStaticParams")
      .def(py::init([](double k1, double k2) { return HermitianStaticParams{k1, k2}; }), py::arg("k1") = 0.645,
           py::arg("k2") = 0.865)
      .def_readwrite("k1", &HermitianStaticParams::k1)
      .def_readwrite("k2", &HermitianStaticParams::k2);
  py::class_<PTStaticParams>(m, "PTStaticParams")
      .def(py::init([](double k1, double k2, double a) { return PTStaticParams{k1, k2, a}; }), py::arg("k1") = 1.1,
           py::arg("k2") = 1.2, py::arg("alpha") = 0.2)
      .def_readwrite("k1", &PTStaticParams::k1)
      .def_readwrite("k2", &PTStaticParams::k2)
      .def_readwrite("alpha", &PTStaticParams::alpha);
  py::class_<PTDynamicParams>(m, "PTDynamicParams")
      .def(py::init([](double k1, double k2, double k3, double a) { return PTDynamicParams{k1, k2, k3, a}; }),
           py::arg("k1") = 1.0, py::arg("k2") = 1.1, py::arg("k3") = 0.95, py::arg("alpha") = 0.1)
      .def_readwrite("k1", &PTDynamicParams::k1)
      .def_readwrite("k2", &PTDynamicParams::k2)
      .def_readwrite("k3", &PTDynamicParams::k3)
      .def_readwrite("alpha", &PTDynamicParams::alpha)
      .def("certified", &PTDynamicParams::certified);

  py::class_<WaveguideSystem, SystemPtr>(m, "WaveguideSystem")
      .def(py::init([](const HermitianStaticParams& p) { return std::make_shared<WaveguideSystem>(p); }))
      .def(py::init([](const PTStaticParams& p) { return std::make_shared<WaveguideSystem>(p); }))
      .def(py::init([](const PTDynamicParams& p) { return std::make_shared<WaveguideSystem>(p); }))
      .def_property_readonly("name", &WaveguideSystem::name)
      .def_property_readonly("kind", [](const WaveguideSystem& s) { return std::string(to_string(s.kind())); })
      .def_property_readonly("certified", &WaveguideSystem::certified)
      .def_property_readonly("is_static", &WaveguideSystem::is_static)
      .def_property_readonly("min_k", &WaveguideSystem::min_k)
      .def_property_readonly("energies", &WaveguideSystem::energies)
      .def_property_readonly("period", [](const WaveguideSystem& s) { return s.periods().T; })
      .def_property_readonly("regularity",
                             [](const WaveguideSystem& s) {
                               const auto& r = s.regularity();
                               py::dict d;
                               d["nodeless"] = r.nodeless;
                               d["min_relative_W"] = r.min_relative_W;
                               d["argmin_x"] = r.argmin_x;
                               d["argmin_z"] = r.argmin_z;
                               return d;
                             })
      .def(
          "potential",
          [](const WaveguideSystem& s, const RealArray& x, double z) {
            return map_xz(x, z, [&](double a, double b) { return s.potential(a, b); });
          },
          py::arg("x"), py::arg("z") = 0.0, "Complex V(x, z) on an array of x")
      .def(
          "mode",
          [](const WaveguideSystem& s, ModeKind k, const RealArray& x, double z) {
            return map_xz(x, z, [&](double a, double b) { return s.mode(k, a, b); });
          },
          py::arg("kind"), py::arg("x"), py::arg("z") = 0.0, "Normalized exact mode on an array of x");

  m.def("kappa_hermitian_closed_form", &kappa_hermitian_closed_form, py::arg("k"), py::arg("x0"));
  m.def(
      "overlap_kappa",
      [](double k, double x0, double alpha_tilde, bool pt) {
        return overlap_kappa(WellBasis{pt ? WellKind::pt : WellKind::hermitian, k, alpha_tilde, 0.0}, x0);
      },
      py::arg("k"), py::arg("x0"), py::arg("alpha_tilde") = 0.0, py::arg("pt") = false);

  m.def(
      "calibrate",
      [](const SystemPtr& s, std::optional<CalibrationMode> mode) {
        CalibrationProblem pb;
        pb.target = s;
        pb.mode = mode.value_or(s->kind() == SystemKind::hermitian_static ? CalibrationMode::spectral_hermitian
                                : s->kind() == SystemKind::pt_static      ? CalibrationMode::spectral_pt
                                                                          : CalibrationMode::profile_dynamic);
        const auto r = calibrate(pb);
        py::dict d;
        d["k"] = r.parameters.k;
        d["x0"] = r.parameters.x0;
        d["alpha_tilde"] = r.parameters.alpha_tilde;
        d["objective"] = r.objective_value;
        d["alpha_unidentifiable"] = r.alpha_unidentifiable;
        d["achieved_energies"] = r.achieved_energies;
        return d;
      },
      py::arg("system"), py::arg("mode") = py::none(), "Multistart Nelder-Mead calibration of (k, x0, alpha_tilde)");

  m.def(
      "tb_spectrum",
      [](CalibrationMode mode, double k, double x0, double alpha_tilde) {
        const auto model = make_static_model(mode, TBParameters{k, x0, alpha_tilde});
        const auto sp = model.solve_spectrum();
        py::dict d;
        d["energies"] = to_array(sp.energies);
        d["vectors"] = to_array(sp.vectors);
        d["S"] = to_array(model.S());
        d["H"] = to_array(model.H());
        return d;
      },
      py::arg("mode"), py::arg("k"), py::arg("x0"), py::arg("alpha_tilde") = 0.0,
      "Spectrum of the calibrated static two-well model");

  m.def(
      "tb_floquet",
      [](const SystemPtr& s, double k, double x0, double step) {
        const auto model = TightBindingModel::two_well(WellKind::hermitian, k, x0, 0.0, Metric::dirac,
                                                       PotentialSource::exact_dynamic, s);
        StepControl ctl;
        ctl.step = step;
        const auto [e1, e2] = s->energies();
        const auto fr = model.floquet_monodromy(s->periods().T, ctl, {e1, e2});
        py::dict d;
        d["multipliers"] = to_array(fr.multipliers);
        d["quasi_energies"] = to_array(fr.quasi_energies);
        d["monodromy"] = to_array(fr.monodromy);
        d["period"] = fr.period;
        return d;
      },
      py::arg("system"), py::arg("k"), py::arg("x0"), py::arg("step") = 0.005,
      "One-period monodromy of the dynamic TB model");

  m.def(
      "exact_observables",
      [](const SystemPtr& s, ModeKind kind, const std::vector<std::pair<std::string, std::string>>& obs,
         const std::vector<double>& z) {
        const QuadratureGrid g(QuadratureSpec{}, 14.0 / s->min_k());
        const auto sampler = exact_mode_sampler(s, kind);
        py::dict d;
        for (const auto& series : moment_series(*sampler, requests(obs), z, g)) d[py::str(series.label())] = to_array(series.values);
        return d;
      },
      py::arg("system"), py::arg("kind"), py::arg("observables"), py::arg("z"),
      "Observable series of an exact mode; observables are (name, metric) pairs");

  m.def(
      "comparison_metrics",
      [](const std::vector<double>& z, const std::vector<double>& exact, const std::vector<double>& approx) {
        return metrics_dict(compare_real_series(z, exact, approx));
      },
      py::arg("z"), py::arg("exact"), py::arg("approx"));

  m.def(
      "bpm_propagate",
      [](const SystemPtr& s, ModeKind kind, const std::vector<double>& z_out, double half_width, int nx, double dz) {
        PropagationGrid g;
        g.half_width = half_width;
        g.nx = nx;
        g.dz = dz;
        const auto x = g.nodes();
        std::vector<cplx> f0(x.size());
        for (std::size_t i = 0; i < x.size(); ++i) f0[i] = s->mode(kind, x[i], z_out.empty() ? 0.0 : z_out.front());
        const auto snaps = propagate(f0, system_potential(s, x), g, z_out);
        py::array_t<cplx> fields({static_cast<py::ssize_t>(snaps.size()), static_cast<py::ssize_t>(nx)});
        auto r = fields.mutable_unchecked<2>();
        for (std::size_t k = 0; k < snaps.size(); ++k)
          for (int i = 0; i < nx; ++i) r(k, i) = snaps[k].samples[static_cast<std::size_t>(i)];
        py::array_t<double> xa(static_cast<py::ssize_t>(x.size()));
        std::copy(x.begin(), x.end(), xa.mutable_data());
        return py::make_tuple(xa, fields);
      },
      py::arg("system"), py::arg("kind"), py::arg("z_out"), py::arg("half_width") = 20.0, py::arg("nx") = 2048,
      py::arg("dz") = 0.01, "Crank-Nicolson propagation of an exact mode; returns (x, fields[z, x])");

  m.def(
      "validate_config",
      [](const std::string& text) {
        const auto v = validate_config(text);
        py::list diags;
        for (const auto& d : v.diagnostics) {
          py::dict e;
          e["severity"] = d.severity == Diagnostic::Severity::error ? "error" : "warning";
          e["path"] = d.path;
          e["message"] = d.message;
          diags.append(e);
        }
        return py::make_tuple(v.ok(), diags);
      },
      py::arg("text"), "Returns (ok, diagnostics)");

  m.def("preset_names", &preset_names);
  m.def("preset_text", &preset_text, py::arg("name"));

  m.def(
      "run",
      [](const std::string& text, std::optional<std::string> output_dir, bool write_files) {
        ScenarioConfig cfg = parse_config(text);
        if (output_dir) cfg.output.directory = *output_dir;
        RunOptions opt;
        opt.write_files = write_files;
        RunResult r;
        {
          py::gil_scoped_release release;
          r = run(cfg, opt);
        }
        py::dict series;
        for (const auto& s : r.series) {
          const std::string key = s.series.label() + "/" + to_string(s.engine);
          series[py::str(key)] = to_array(s.series.values);
        }
        py::dict d;
        d["report"] = json_loads(report_json(r.report));
        d["series"] = series;
        d["z"] = r.series.empty() ? std::vector<double>{} : r.series.front().series.z;
        std::vector<std::string> files;
        for (const auto& f : r.files) files.push_back(f.string());
        d["files"] = files;
        return d;
      },
      py::arg("config_text"), py::arg("output_dir") = py::none(), py::arg("write_files") = true,
      "Run a scenario from its JSON text");
}
