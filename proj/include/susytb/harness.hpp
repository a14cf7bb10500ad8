#pragma once

// Scenario configuration, orchestration of the exact / tight-binding / BPM
// engines, and CSV + metadata emission.
//
// Configuration files are JSON in natural units (hbar = 1, lengths in
// inverse-wavenumber units).  See README.md for the schema.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "susytb/bpm.hpp"
#include "susytb/calibrate.hpp"
#include "susytb/closed_form.hpp"
#include "susytb/observables.hpp"
#include "susytb/tight_binding.hpp"

namespace susytb {

struct Diagnostic {
  enum class Severity { error, warning };
  Severity severity = Severity::error;
  std::string path;  // JSON pointer of the offending field, or "line L, column C"
  std::string message;
  std::string str() const;
};

// Configuration rejected; carries every diagnostic found.
class ConfigError : public ValidationError {
 public:
  explicit ConfigError(std::vector<Diagnostic> diagnostics);
  const std::vector<Diagnostic>& diagnostics() const noexcept { return diagnostics_; }

 private:
  std::vector<Diagnostic> diagnostics_;
};

// Failure inside run(), tagged with the pipeline stage.
class StageError : public Error {
 public:
  StageError(std::string stage, const std::string& what);
  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

enum class Engine { exact, tb, bpm };
const char* to_string(Engine e);

struct ZGridSpec {
  double start = 0.0;
  double stop = 2.0;
  int points = 201;
  bool in_periods = true;  // start/stop in units of the system period
};

struct CalibrationSpec {
  CalibrationMode mode = CalibrationMode::spectral_hermitian;
  std::optional<SearchBox> box;
  int seeds_k = 9;
  int seeds_x0 = 9;
  int seeds_alpha = 5;
  int refine_best = 3;
  double profile_depth = 0.0;
  // When set the calibration stage is skipped.
  std::optional<TBParameters> explicit_parameters;
};

struct BpmSpec {
  bool enabled = false;
  PropagationGrid grid;
};

struct PotentialMapSpec {
  double x_min = -6.0;
  double x_max = 6.0;
  int nx = 121;
  double z_periods = 2.0;
  int nz = 81;
};

struct OutputSpec {
  std::string directory = "out";
  std::string prefix;  // defaults to the scenario name
  bool gnuplot = false;
};

struct ScenarioConfig {
  std::string name = "scenario";
  WaveguideSystem::Config system;
  CalibrationSpec calibration;
  std::vector<ObservableRequest> observables;
  ZGridSpec z_grid;
  ModeKind initial_state = ModeKind::left;
  // Observable quadrature; half_width 0 selects 14 / min(k).
  QuadratureSpec quadrature;
  StepControl ode;
  BpmSpec bpm;
  std::optional<PotentialMapSpec> potential_map;
  OutputSpec output;
  std::uint64_t seed = 0;  // recorded only; every stage is deterministic
  std::vector<Diagnostic> warnings;
};

struct ValidationOutcome {
  std::optional<ScenarioConfig> config;
  std::vector<Diagnostic> diagnostics;  // errors and warnings
  bool ok() const { return config.has_value(); }
};

// Parses and validates, including the parameter orderings and the
// regularity scan.  Never throws for bad input.
ValidationOutcome validate_config(const std::string& text);
// Throws ConfigError with the aggregated diagnostics.
ScenarioConfig parse_config(const std::string& text);
ScenarioConfig load_config(const std::filesystem::path& path);

// Canonical JSON of a validated configuration (sorted keys, every default
// spelled out) and its FNV-1a 64-bit hash in hex.
std::string canonical_json(const ScenarioConfig& config);
std::string config_hash(const ScenarioConfig& config);

// Command-line style overrides of the grid and quadrature settings.
struct Overrides {
  std::optional<int> quadrature_nodes;
  std::optional<double> quadrature_half_width;
  std::optional<std::string> quadrature_rule;
  std::optional<int> z_points;
  std::optional<int> bpm_nx;
  std::optional<double> bpm_dz;
  std::optional<bool> bpm_enabled;
  std::optional<std::string> output_directory;
};
void apply_overrides(ScenarioConfig& config, const Overrides& o);

struct EngineSeries {
  Engine engine = Engine::exact;
  ObservableSeries series;
  bool complex_valued = false;
};

// Series whose values are real by construction get a single column.
bool is_real_valued(const ObservableRequest& r, const WaveguideSystem& s);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

// Header `z,<label>[_re,<label>_im],engine`; rows sorted by z then engine
// (exact, tb, bpm); %.17g values; LF endings.  All series must share one
// label; an empty list writes the header `z,engine` only.
void emit_csv(const std::vector<EngineSeries>& series, const std::filesystem::path& path);
std::string format_csv(const std::vector<EngineSeries>& series);
CsvTable read_csv(const std::filesystem::path& path);
double parse_double(const std::string& s);

struct MetricEntry {
  std::string label;
  Engine reference = Engine::exact;
  Engine candidate = Engine::tb;
  std::string component = "re";
  ComparisonMetrics metrics;
};

struct RegularityReport {
  bool nodeless = false;
  bool certified = true;
  double min_relative_W = 0.0;
  double argmin_x = 0.0;
  double argmin_z = 0.0;
};

struct FloquetReport {
  std::vector<cplx> multipliers;         // TB monodromy eigenvalues
  std::vector<cplx> exact_multipliers;   // exp(-i eps T)
  std::vector<double> phase_factor_distance;  // |lambda/|lambda| - exact|
  std::vector<cplx> quasi_energies;
  double eigenvector_condition = 0.0;
  double period = 0.0;
};

struct ComparisonReport {
  std::string scenario;
  std::string config_hash;
  std::string system;
  RegularityReport regularity;
  double period = 0.0;  // beat length or potential period
  std::optional<Repetition> repetition;
  std::pair<double, double> exact_energies;
  CalibrationMode calibration_mode = CalibrationMode::spectral_hermitian;
  bool calibrated = false;  // false when explicit parameters were given
  TBParameters parameters;
  std::optional<double> calibration_objective;
  bool alpha_unidentifiable = false;
  cplx kappa{};
  std::vector<cplx> tb_energies;  // static models
  std::optional<FloquetReport> floquet;
  std::vector<MetricEntry> metrics;
  // Named oracle residuals, e.g. "pde_residual/left" or "bpm_l2_error".
  std::map<std::string, double> oracle_residuals;
  std::vector<std::string> warnings;
  // Output file name (relative to the output directory) -> engines in it.
  std::map<std::string, std::vector<std::string>> provenance;
};

// Pipeline pieces, shared by run() and the CLI subcommands.
std::shared_ptr<const WaveguideSystem> make_system(const ScenarioConfig& config);
// Output z samples (period units resolved).
std::vector<double> z_samples(const ScenarioConfig& config, const WaveguideSystem& system);
// Observable quadrature grid (half-width 0 resolves to 14 / min(k)).
QuadratureGrid observable_grid(const ScenarioConfig& config, const WaveguideSystem& system);
// Calibrates unless explicit parameters are configured (then nullopt).
std::optional<CalibrationResult> calibrate_scenario(const ScenarioConfig& config,
                                                    std::shared_ptr<const WaveguideSystem> system);

struct TightBindingSetup {
  std::shared_ptr<const TightBindingModel> model;
  VectorC initial;                               // unit power
  std::function<VectorC(double)> coefficients;   // defined on the propagation z samples
  cplx kappa{};
  std::vector<cplx> energies;                    // static models
  std::optional<FloquetReport> floquet;          // dynamic model
};

// Builds the TB model for the calibrated parameters, phase-aligns its
// eigen/Floquet vectors with the exact modes and evolves the TB analogue of
// the configured initial state.  `z_propagation` must start at 0.
TightBindingSetup setup_tight_binding(const ScenarioConfig& config,
                                      std::shared_ptr<const WaveguideSystem> system,
                                      const TBParameters& parameters,
                                      const std::vector<double>& z_propagation);

struct RunOptions {
  bool write_files = true;
};

struct RunResult {
  ComparisonReport report;
  std::vector<EngineSeries> series;
  std::vector<std::filesystem::path> files;
};

// regularity -> exact evaluators -> calibration -> TB spectrum / ODE /
// Floquet -> observables -> optional BPM -> metrics -> files.
RunResult run(const ScenarioConfig& config, const RunOptions& options = {});

std::string report_json(const ComparisonReport& report);

// Re V and Im V over the potential map grid (columns z,x,V_re,V_im,engine).
void emit_potential_csv(const WaveguideSystem& system, const PotentialMapSpec& spec,
                        const std::filesystem::path& path);

// Bundled scenarios.
std::vector<std::string> preset_names();
std::string preset_text(const std::string& name);
ScenarioConfig preset(const std::string& name);

}  // namespace susytb
