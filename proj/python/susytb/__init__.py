"""Exact SUSY coupled-waveguide solutions, tight-binding calibration, observables and BPM."""

from ._susytb import (
    CalibrationMode,
    Error,
    HermitianStaticParams,
    ModeKind,
    PTDynamicParams,
    PTStaticParams,
    QuadratureError,
    SolverError,
    ValidationError,
    WaveguideSystem,
    bpm_propagate,
    calibrate,
    comparison_metrics,
    exact_observables,
    kappa_hermitian_closed_form,
    overlap_kappa,
    preset_names,
    preset_text,
    run,
    tb_floquet,
    tb_spectrum,
    validate_config,
)

__all__ = [
    "CalibrationMode",
    "Error",
    "HermitianStaticParams",
    "ModeKind",
    "PTDynamicParams",
    "PTStaticParams",
    "QuadratureError",
    "SolverError",
    "ValidationError",
    "WaveguideSystem",
    "bpm_propagate",
    "calibrate",
    "comparison_metrics",
    "exact_observables",
    "kappa_hermitian_closed_form",
    "overlap_kappa",
    "preset_names",
    "preset_text",
    "run",
    "tb_floquet",
    "tb_spectrum",
    "validate_config",
]
