#pragma once

#include <Eigen/Dense>
#include <array>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "susytb/closed_form.hpp"
#include "susytb/common.hpp"
#include "susytb/quadrature.hpp"

namespace susytb {

using MatrixC = Eigen::MatrixXcd;
using VectorC = Eigen::VectorXcd;

enum class WellKind { hermitian, pt };

// Isolated sech-type well centered at `center`:
//   hermitian: phi0 = C k sech(kx),            V0 = -2 k^2 sech^2(kx)
//   pt:        phi0 = C k / (cosh kx + i a sinh kx),
//              V0 = -2 k^2 (1 + a^2) / (cosh kx + i a sinh kx)^2
// with beta = -k^2.  C = 1/sqrt(2k) (Dirac norm) for hermitian wells and
// sqrt((1 + a^2)/(2k)) for pt wells, which makes the centered mode's PT
// self-product int phi0*(x) phi0(-x) dx equal to one.
struct WellBasis {
  WellKind kind = WellKind::hermitian;
  double k = 1.0;
  double alpha_tilde = 0.0;
  double center = 0.0;

  void validate() const;
  double norm_constant() const;
  double beta() const { return -k * k; }
};

cplx single_well_potential(const WellBasis& b, double x);
cplx single_well_mode(const WellBasis& b, double x);
// Value, first and second derivative of the normalized mode.
std::array<cplx, 3> single_well_mode_jet(const WellBasis& b, double x);

// Closed-form Dirac overlap of two unit-norm hermitian wells at +-x0:
// 2a / sinh(2a), a = k x0.
double kappa_hermitian_closed_form(double k, double x0);

// Dirac overlap int phi0*(x + x0) phi0(x - x0) dx of the normalized modes.
cplx overlap_kappa(const WellBasis& b, double x0, const QuadratureGrid& grid);
cplx overlap_kappa(const WellBasis& b, double x0);

enum class PotentialSource {
  tb_sum,         // sum of the isolated wells
  exact_static,   // the exact system potential at z = 0
  exact_dynamic,  // the exact V(x, z)
};

const char* to_string(PotentialSource s);

struct StepControl {
  bool adaptive = false;
  double step = 0.01;       // fixed step, or initial step when adaptive
  double tolerance = 1e-10; // local error tolerance (adaptive)
  double min_step = 1e-9;
};

struct CoefficientTrajectory {
  std::vector<double> z;
  std::vector<VectorC> c;
  long long steps = 0;
};

struct GramSchmidt {
  MatrixC T;                 // columns: orthogonalized vectors in the well basis
  std::vector<cplx> eta;     // (phi~_n, phi~_n) under the active metric
  std::vector<cplx> pseudo_norms;  // (chi_n, chi_n) before normalization
};

struct Spectrum {
  std::vector<cplx> energies;  // ascending real part
  MatrixC vectors;             // columns; unit Dirac norm of the assembled state
  std::vector<cplx> energies_generalized;  // S^-1 H route
  std::optional<std::array<cplx, 2>> energies_quadratic;  // N = 2 only
  GramSchmidt gram_schmidt;
};

struct FloquetResult {
  MatrixC monodromy;
  std::vector<cplx> multipliers;      // eigenvalues of the monodromy
  std::vector<cplx> quasi_energies;   // branch-fixed
  std::vector<long long> branch_shifts;  // integer multiples of 2 pi / T added
  MatrixC floquet_vectors;            // columns, unit Dirac norm
  double eigenvector_condition = 0.0;
  double reconstruction_error = 0.0;
  double period = 0.0;
};

class TightBindingModel {
 public:
  // `system` is required for the exact potential sources and ignored for
  // tb_sum.  The quadrature grid defaults to the automatic half-width.
  TightBindingModel(std::vector<WellBasis> wells, Metric metric, PotentialSource source,
                    std::shared_ptr<const WaveguideSystem> system = nullptr,
                    QuadratureSpec quad = {});

  // Symmetric two-well layout: well 1 at +x0, well 2 at -x0.
  static TightBindingModel two_well(WellKind kind, double k, double x0, double alpha_tilde,
                                    Metric metric, PotentialSource source,
                                    std::shared_ptr<const WaveguideSystem> system = nullptr,
                                    QuadratureSpec quad = {});

  int size() const noexcept { return static_cast<int>(wells_.size()); }
  const std::vector<WellBasis>& wells() const noexcept { return wells_; }
  Metric metric() const noexcept { return metric_; }
  PotentialSource source() const noexcept { return source_; }
  bool z_dependent() const noexcept { return source_ == PotentialSource::exact_dynamic; }
  const QuadratureGrid& grid() const noexcept { return grid_; }

  // Overlap under the model metric, and the Dirac overlap (used for power).
  const MatrixC& S() const noexcept { return S_; }
  const MatrixC& S_dirac() const noexcept { return S_dirac_; }
  MatrixC H(double z = 0.0) const;

  struct Matrices {
    MatrixC S;
    MatrixC H;
  };
  Matrices assemble_matrices(std::optional<double> z = std::nullopt) const;

  // Potential the model's Hamiltonian uses, at (x, z).
  cplx potential(double x, double z = 0.0) const;

  GramSchmidt gram_schmidt(double breakdown = 1e-12) const;
  Spectrum solve_spectrum() const;

  CoefficientTrajectory propagate_coefficients(const VectorC& c0,
                                               const std::vector<double>& z_out,
                                               const StepControl& ctl) const;

  FloquetResult floquet_monodromy(double period, const StepControl& ctl,
                                  std::vector<double> static_estimates = {}) const;

  cplx assemble_state(const VectorC& c, double x) const;
  // Value, first and second x-derivative of the assembled state.
  std::array<cplx, 3> assemble_state_jet(const VectorC& c, double x) const;

  // Dirac power of the assembled state, c^H S_dirac c.
  double power(const VectorC& c) const;

 private:
  void build();
  MatrixC generator(double z) const;
  std::vector<MatrixC> propagate_matrix(const MatrixC& y0, const std::vector<double>& z_out,
                                        const StepControl& ctl, long long& steps) const;

  std::vector<WellBasis> wells_;
  Metric metric_;
  PotentialSource source_;
  std::shared_ptr<const WaveguideSystem> system_;
  QuadratureGrid grid_;
  std::unique_ptr<PotentialTable> table_;
  MatrixC S_, S_dirac_, S_inv_, H_static_;
  // pair_[i * N + j][node] = w conj(phi_i(x)) phi_j(x') with x' = x (dirac)
  // or -x (pt); the z-dependent part of H_ij is sum pair * V(x').
  std::vector<std::vector<cplx>> pair_;
  std::vector<int> source_index_;  // x' node index for each node
};

}  // namespace susytb
