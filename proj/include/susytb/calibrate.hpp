#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "susytb/closed_form.hpp"
#include "susytb/quadrature.hpp"
#include "susytb/tight_binding.hpp"

namespace susytb {

struct NelderMeadOptions {
  double diameter_tolerance = 1e-6;
  int max_iterations = 500;
};

struct NelderMeadResult {
  std::vector<double> x;
  double value = 0.0;
  int iterations = 0;
  bool converged = false;
};

// Standard Nelder-Mead (reflection 1, expansion 2, contraction 0.5,
// shrink 0.5).  `steps` gives the initial simplex edge per coordinate.
NelderMeadResult nelder_mead(const std::function<double(const std::vector<double>&)>& f,
                             std::vector<double> start, const std::vector<double>& steps,
                             const NelderMeadOptions& opt = {});

enum class CalibrationMode { spectral_hermitian, spectral_pt, profile_dynamic };

const char* to_string(CalibrationMode m);

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  bool contains(double v) const { return v >= lo && v <= hi; }
  double width() const { return hi - lo; }
};

// Search intervals for k, x0 and (spectral_pt only) alpha_tilde.
struct SearchBox {
  Interval k;
  Interval x0;
  std::optional<Interval> alpha_tilde;
  void validate(CalibrationMode mode) const;
};

struct TBParameters {
  double k = 1.0;
  double x0 = 1.0;
  double alpha_tilde = 0.0;  // used by pt wells only
};

struct CalibrationProblem {
  std::shared_ptr<const WaveguideSystem> target;
  CalibrationMode mode = CalibrationMode::spectral_hermitian;
  std::optional<SearchBox> box;  // defaults to default_search_box()
  int seeds_k = 9;
  int seeds_x0 = 9;
  int seeds_alpha = 5;
  int refine_best = 3;  // number of best grid points refined by Nelder-Mead
  NelderMeadOptions nelder_mead;
  // Profile matching: samples over (-d, 0); d = 0 selects x_d + 3 / k1.
  int profile_samples = 2001;
  double profile_depth = 0.0;
  // Relative objective change below which alpha_tilde is treated as
  // spectrally unidentifiable.
  double flatness_tolerance = 1e-7;
  QuadratureSpec quadrature;

  void validate() const;
};

struct CalibrationTraceEntry {
  std::vector<double> start;
  double start_value = 0.0;
  std::vector<double> end;
  double end_value = 0.0;
  int iterations = 0;
  std::string note;
};

struct CalibrationResult {
  CalibrationMode mode = CalibrationMode::spectral_hermitian;
  TBParameters parameters;
  double objective_value = 0.0;
  double best_grid_value = 0.0;
  int grid_points = 0;
  int failed_grid_points = 0;
  bool alpha_unidentifiable = false;
  SearchBox box;
  std::vector<CalibrationTraceEntry> trace;
  std::vector<cplx> achieved_energies;  // spectral modes
  std::optional<double> achieved_profile_error;  // profile mode
};

// Position of the potential minimum on x > 0 (the well separation x_d).
double well_separation(const WaveguideSystem& s);

SearchBox default_search_box(const WaveguideSystem& s, CalibrationMode mode);

// Default profile depth d = x_d + 3 / k1.
double default_profile_depth(const WaveguideSystem& s);

// Builds the calibrated two-well model: hermitian wells with the Dirac
// metric, or pt wells with the PT metric, with V_TB inside H.
TightBindingModel make_static_model(CalibrationMode mode, const TBParameters& p,
                                    const QuadratureSpec& quad = {});

// Objectives, exposed for tests and diagnostics.  Failures return +inf.
double spectral_objective(const WaveguideSystem& target, CalibrationMode mode,
                          const TBParameters& p, const QuadratureSpec& quad = {});
double profile_objective(std::span<const double> xs, std::span<const double> target_re,
                         const TBParameters& p);

CalibrationResult spectral_match(const CalibrationProblem& problem);
CalibrationResult profile_match(const CalibrationProblem& problem);
CalibrationResult calibrate(const CalibrationProblem& problem);

}  // namespace susytb
