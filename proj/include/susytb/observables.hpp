#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "susytb/closed_form.hpp"
#include "susytb/quadrature.hpp"
#include "susytb/tight_binding.hpp"

namespace susytb {

class DerivativeResolutionError : public Error {
 public:
  using Error::Error;
};

enum class Observable { x_mean, p_mean, x_std, p_std, power, H_mean, H_std };
enum class Normalization { instantaneous_power, initial_power, none };

const char* to_string(Observable o);
const char* to_string(Normalization n);
const char* to_string(Metric m);
Observable observable_from_string(const std::string& s);
Normalization normalization_from_string(const std::string& s);
Metric metric_from_string(const std::string& s);

// Value and first two x-derivatives of a state on a node set.
struct StateJet {
  std::vector<cplx> f, d1, d2;
};

// A propagating field psi(x, z) bound to the potential it evolves in.
class StateSampler {
 public:
  virtual ~StateSampler() = default;
  virtual void sample(double z, std::span<const double> x, StateJet& out) const = 0;
  virtual void potential(double z, std::span<const double> x, std::span<cplx> out) const = 0;
};

struct FiniteDifferenceSpec {
  // Stencil step for non-uniform node sets; uniform sets with spacing at
  // most max_node_step use the nodes themselves.
  double step = 1e-3;
  double max_node_step = 0.02;
  // The second derivative is recomputed with a doubled step every
  // check_stride nodes; an estimated error above tolerance * max|psi''|
  // raises DerivativeResolutionError.
  double richardson_tolerance = 1e-6;
  int check_stride = 16;
};

using Field = std::function<cplx(double x, double z)>;

// Fourth-order central differences of a pointwise evaluator.
class FunctionSampler final : public StateSampler {
 public:
  FunctionSampler(Field psi, Field V, FiniteDifferenceSpec fd = {});
  void sample(double z, std::span<const double> x, StateJet& out) const override;
  void potential(double z, std::span<const double> x, std::span<cplx> out) const override;

 private:
  Field psi_, V_;
  FiniteDifferenceSpec fd_;
};

std::unique_ptr<StateSampler> exact_mode_sampler(std::shared_ptr<const WaveguideSystem> system,
                                                 ModeKind kind, FiniteDifferenceSpec fd = {});

// Assembled TB state with analytic derivatives; coefficients(z) supplies c.
class TBSampler final : public StateSampler {
 public:
  TBSampler(std::shared_ptr<const TightBindingModel> model,
            std::function<VectorC(double)> coefficients);
  void sample(double z, std::span<const double> x, StateJet& out) const override;
  void potential(double z, std::span<const double> x, std::span<cplx> out) const override;

 private:
  std::shared_ptr<const TightBindingModel> model_;
  std::function<VectorC(double)> coefficients_;
};

// Coefficient lookup on a precomputed trajectory (exact z match required).
std::function<VectorC(double)> trajectory_lookup(CoefficientTrajectory tr);

struct ObservableRequest {
  Observable observable = Observable::x_mean;
  Metric metric = Metric::dirac;
  Normalization normalization = Normalization::instantaneous_power;
};

// Moments divide by the instantaneous metric self-product, except power
// (none) and the PT-metric Hamiltonian moments (initial Dirac power).
Normalization default_normalization(Observable o, Metric m);
ObservableRequest default_request(Observable o, Metric m = Metric::dirac);

struct ObservableSeries {
  Observable observable = Observable::x_mean;
  Metric metric = Metric::dirac;
  Normalization normalization = Normalization::none;
  std::vector<double> z;
  std::vector<cplx> values;
  std::string label() const;  // e.g. "x_mean" or "H_mean_pt"
};

// Dirac power int |psi|^2 dx at z.
double power(const StateSampler& s, double z, const QuadratureGrid& grid);

std::vector<ObservableSeries> moment_series(const StateSampler& s,
                                            const std::vector<ObservableRequest>& requests,
                                            const std::vector<double>& z,
                                            const QuadratureGrid& grid);
ObservableSeries moment_series(const StateSampler& s, const ObservableRequest& request,
                               const std::vector<double>& z, const QuadratureGrid& grid);

struct ComparisonMetrics {
  double rmse = 0.0;                // complex RMS difference
  double relative_rmse = 0.0;       // rmse / peak-to-peak of the exact real part
  double amplitude_ratio = 0.0;     // peak-to-peak(approx) / peak-to-peak(exact), real parts
  std::optional<double> omega;      // dominant angular frequency of the exact series
  std::optional<double> phase_shift;  // radians in (-pi, pi]; positive when approx lags
};

// Real-part comparison on a common uniform grid; `approx` is resampled onto
// the exact grid by linear interpolation when the grids differ.
ComparisonMetrics comparison_metrics(const ObservableSeries& exact, const ObservableSeries& approx);
ComparisonMetrics compare_real_series(std::span<const double> z, std::span<const double> exact,
                                      std::span<const double> approx);

}  // namespace susytb
