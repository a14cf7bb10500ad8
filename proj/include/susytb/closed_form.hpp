#pragma once

// Hand-coded closed forms for the three two-waveguide systems.  Kept
// independent of the Darboux engine on purpose; the two are cross-checked
// in the tests.

#include <memory>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "susytb/common.hpp"
#include "susytb/quadrature.hpp"
#include "susytb/susy.hpp"

namespace susytb {

struct HermitianStaticParams {
  double k1 = 0.645;
  double k2 = 0.865;
  void validate() const;
};

struct PTStaticParams {
  double k1 = 1.1;
  double k2 = 1.2;
  double alpha = 0.2;
  void validate() const;
};

struct PTDynamicParams {
  double k1 = 1.0;
  double k2 = 1.1;
  double k3 = 0.95;
  double alpha = 0.1;
  // Checks the ordering |k3| < |k1| < |k2|.  The alpha bound is separate.
  void validate() const;
  // Sufficient nodelessness bound (1 - |k1|/|k2|) > |alpha| (1 + |k3|/|k2|).
  bool certified() const;
};

double potential_hermitian_static(const HermitianStaticParams& p, double x);
cplx potential_pt_static(const PTStaticParams& p, double x);
cplx potential_pt_dynamic(const PTDynamicParams& p, double x, double z);

// Wronskians with the real odd seed sinh(k2 x) (the engine's i sinh seed
// differs by the constant factor i).
double wronskian_hermitian_static(const HermitianStaticParams& p, double x);
cplx wronskian_pt_static(const PTStaticParams& p, double x);
cplx wronskian_pt_dynamic(const PTDynamicParams& p, double x, double z);

enum class ModeKind { ground, excited, floquet1, floquet2, left, right };

const char* to_string(ModeKind k);

// Unnormalized closed-form profiles.  Static systems accept ground/excited
// (z-independent profiles), the dynamic one floquet1/floquet2 (with their
// z-dependence).
cplx raw_mode_hermitian_static(const HermitianStaticParams& p, ModeKind kind,
                               double x);
cplx raw_mode_pt_static(const PTStaticParams& p, ModeKind kind, double x);
cplx raw_mode_pt_dynamic(const PTDynamicParams& p, ModeKind kind, double x,
                         double z);

// Variant of the second dynamic mode without the z-phase on the alpha^2
// term; it solves the PDE only at z = 0.  Used only by the tests.
cplx raw_mode_pt_dynamic_printed_psi2(const PTDynamicParams& p, double x,
                                      double z);

struct Repetition {
  long long n = 0;
  long long m = 0;
  long long q = 0;
  double T_rep = 0.0;  // lcm(n, m) T_V
  // Smallest number of potential periods after which |psi_l| revives
  // (relative phase only): q / gcd(q, n - m).
  long long intensity_revival_periods = 0;
};

struct Periods {
  // Beat length (static) or potential period T_V (dynamic).
  double T = 0.0;
  std::optional<Repetition> repetition;
};

Periods periods(const HermitianStaticParams& p);
Periods periods(const PTStaticParams& p);
// Throws ValidationError when k1^2 == k3^2.
Periods periods(const PTDynamicParams& p, double tol = 1e-9,
                long long max_denominator = 1000000);

// Best rational approximation n/q of r with q <= max_denominator and
// |r - n/q| < tol, from the continued-fraction convergents.
std::optional<std::pair<long long, long long>> rational_approximation(
    double r, double tol, long long max_denominator);

enum class SystemKind { hermitian_static, pt_static, pt_dynamic };

const char* to_string(SystemKind k);

// Evaluates V(z) on a fixed node set; the dynamic system caches the
// x-dependent auxiliary functions so each z costs a few complex ops per node.
class PotentialTable {
 public:
  virtual ~PotentialTable() = default;
  virtual void at(double z, std::span<cplx> out) const = 0;
  virtual bool z_dependent() const = 0;
};

class WaveguideSystem {
 public:
  using Config = std::variant<HermitianStaticParams, PTStaticParams, PTDynamicParams>;

  // Validates the parameters, checks regularity (scan over x in
  // [-scan_half_width, scan_half_width] and, for the dynamic system, two
  // potential periods) and fixes mode normalizations by quadrature.
  explicit WaveguideSystem(Config config, double scan_half_width = 10.0);

  SystemKind kind() const noexcept;
  const Config& config() const noexcept { return config_; }
  bool is_static() const noexcept { return kind() != SystemKind::pt_dynamic; }
  bool is_hermitian() const noexcept { return kind() == SystemKind::hermitian_static; }

  // Regularity certificate: analytic bound verdict and the scan result.
  bool certified() const noexcept { return certified_; }
  const RegularityVerdict& regularity() const noexcept { return regularity_; }

  cplx potential(double x, double z = 0.0) const;
  std::unique_ptr<PotentialTable> potential_table(std::span<const double> x) const;

  // Normalized modes.  Static: ground/excited have unit Dirac norm and carry
  // their e^{-iEz} factor; left/right have unit power at z = 0.  Dynamic:
  // floquet1/floquet2 have unit input power; left/right likewise.  Left is
  // the combination whose centroid at z = 0 is negative.
  cplx mode(ModeKind kind, double x, double z) const;

  // Ground/excited energies (static) or the quasi-energies
  // (eps1, eps2) = (-k2^2, -k1^2) (dynamic).
  std::pair<double, double> energies() const;
  Periods periods() const;

  // Smallest wavenumber in the construction, used for default domains.
  double min_k() const;

  // Engine seeds reproducing this system (u1, u2) and the free solutions
  // whose images are the ground/floquet1 and excited/floquet2 modes.
  std::pair<SeedSuperposition, SeedSuperposition> engine_seeds() const;
  std::pair<SeedSuperposition, SeedSuperposition> engine_free_solutions() const;

  // Normalization factors applied to the raw closed forms
  // (ground/floquet1, excited/floquet2) and the left/right superposition
  // coefficients: psi_left = cl.first * m1 + cl.second * m2.
  std::pair<double, double> mode_norms() const noexcept { return norms_; }
  std::pair<cplx, cplx> left_coefficients() const noexcept { return left_; }
  std::pair<cplx, cplx> right_coefficients() const noexcept { return right_; }

  std::string name() const;

 private:
  cplx raw(ModeKind kind, double x, double z) const;
  cplx basis(int j, double x, double z) const;

  Config config_;
  bool certified_ = true;
  RegularityVerdict regularity_;
  std::pair<double, double> norms_{1.0, 1.0};
  std::pair<cplx, cplx> left_{};
  std::pair<cplx, cplx> right_{};
};

}  // namespace susytb
