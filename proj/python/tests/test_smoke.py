import json
import math

import numpy as np
import pytest

import susytb


def test_hermitian_system_and_modes():
    s = susytb.WaveguideSystem(susytb.HermitianStaticParams(0.645, 0.865))
    eg, ee = s.energies
    assert eg == pytest.approx(-0.865**2)
    assert ee == pytest.approx(-0.645**2)
    x = np.linspace(-20, 20, 8001)
    psi = s.mode(susytb.ModeKind.left, x, 0.0)
    assert psi.shape == x.shape
    assert np.trapezoid(np.abs(psi) ** 2, x) == pytest.approx(1.0, abs=1e-6)
    assert np.max(np.abs(s.potential(x).imag)) == 0.0


def test_ordering_rule_is_enforced():
    with pytest.raises(ValueError):
        susytb.WaveguideSystem(susytb.HermitianStaticParams(0.9, 0.5))


def test_kappa_and_spectrum():
    assert susytb.kappa_hermitian_closed_form(0.7454, 1.66214) == pytest.approx(0.41, abs=0.02)
    assert abs(susytb.overlap_kappa(0.7454, 1.66214)) == pytest.approx(
        susytb.kappa_hermitian_closed_form(0.7454, 1.66214), abs=1e-9)
    sp = susytb.tb_spectrum(susytb.CalibrationMode.spectral_hermitian, 0.745396, 1.662109)
    e = np.sort(sp["energies"].real)
    assert abs(e[0] + 0.865**2) + abs(e[1] + 0.645**2) < 1e-2


def test_exact_observables_conserved():
    s = susytb.WaveguideSystem(susytb.HermitianStaticParams())
    z = np.linspace(0, s.period, 11)
    obs = susytb.exact_observables(s, susytb.ModeKind.left, [("power", "dirac"), ("H_mean", "dirac")], z)
    assert np.ptp(obs["power"].real) < 1e-8
    assert obs["H_mean"][0].real == pytest.approx(-0.582125, abs=1e-7)


def test_bpm_tracks_exact_mode():
    s = susytb.WaveguideSystem(susytb.HermitianStaticParams())
    x, f = susytb.bpm_propagate(s, susytb.ModeKind.ground, [0.0, 2.0])
    exact = s.mode(susytb.ModeKind.ground, x, 2.0)
    err = np.linalg.norm(f[-1] - exact) / np.linalg.norm(exact)
    assert err < 1e-3


def test_comparison_metrics_antiphase():
    z = np.linspace(0, 40, 801)
    m = susytb.comparison_metrics(z, np.sin(0.7 * z), -np.sin(0.7 * z))
    assert abs(abs(m["phase_shift"]) - math.pi) < 0.05


def test_config_validation_diagnostics():
    ok, diags = susytb.validate_config('{"system": {"kind": "hermitian_static", "k1": 0.9, "k2": 0.5}, '
                                      '"observables": ["x_mean"], "z_grid": {"stop": 1, "points": 5}}')
    assert not ok
    assert any(d["path"] == "/system" and "|k2| > |k1|" in d["message"] for d in diags)
    ok, diags = susytb.validate_config('{"system": {"kind": "hermitian_static", "k1": 0.6, "k2": 0.9}, '
                                      '"observables": ["x_mean"]}')
    assert not ok
    assert any(d["path"] == "/z_grid" for d in diags)
    ok, diags = susytb.validate_config("{\n  \"system\": [1,,]\n}")
    assert not ok and diags[0]["path"].startswith("line 2")


def test_presets_listed_and_run(tmp_path):
    names = susytb.preset_names()
    assert {"hermitian-fig2", "pt-static-fig3-4", "pt-dynamic-fig1-5-6"} <= set(names)
    cfg = json.loads(susytb.preset_text("hermitian-fig2"))
    cfg["calibration"]["parameters"] = {"k": 0.745396, "x0": 1.662109}
    cfg["z_grid"]["points"] = 21
    cfg["bpm"]["enabled"] = False
    out = susytb.run(json.dumps(cfg), str(tmp_path))
    rep = out["report"]
    assert rep["calibration"]["calibrated"] is False
    assert len(out["series"]) == 8
    assert (tmp_path / "hermitian-fig2_x_mean.csv").exists()
    assert (tmp_path / "hermitian-fig2_metadata.json").exists()
