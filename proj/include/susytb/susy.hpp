#pragma once

// Darboux (SUSY) transformation machinery over hyperbolic seed superpositions.
//
// Seeds are finite sums of free-particle solutions of i u_z + u_xx = 0:
//   even term:  A cosh(k x) exp(i k^2 z)
//   odd term:   i B sinh(k x) exp(i k^2 z)
// Every x-derivative and the z-derivative of a seed is again a hyperbolic
// sum, so all partials below are exact term-wise expressions.  The
// intertwining functions l_1(z), l_2(z) are fixed to 1 throughout.

#include <array>
#include <span>
#include <vector>

#include "susytb/common.hpp"

namespace susytb {

enum class Parity { even, odd };

struct SeedTerm {
  Parity parity = Parity::even;
  double amplitude = 1.0;
  double wavenumber = 1.0;
};

// Value and partials at a point.
struct DerivativeBundle {
  cplx value{};
  cplx d1x{};
  cplx d2x{};
  cplx d3x{};
  cplx d1z{};
};

class SeedSuperposition {
 public:
  explicit SeedSuperposition(std::vector<SeedTerm> terms);

  static SeedSuperposition even(double amplitude, double k);
  static SeedSuperposition odd(double amplitude, double k);

  // Returns a copy with one more term appended.
  SeedSuperposition with(SeedTerm term) const;

  const std::vector<SeedTerm>& terms() const noexcept { return terms_; }

  // x-derivatives of order 0..4 at (x, z).
  std::array<cplx, 5> x_jet(double x, double z) const;
  // z-derivative of the x-derivatives of order 0..2.
  std::array<cplx, 3> z_jet(double x, double z) const;
  // Sum over terms of |A| k^order cosh(kx): an envelope bounding the
  // x-derivative of the given order, used as the local cancellation scale
  // by node detection.
  double magnitude(double x, double z, int order) const;

 private:
  std::vector<SeedTerm> terms_;
};

DerivativeBundle eval_seed(const SeedSuperposition& u, double x, double z);

// W(u1,u2) = u1 u2' - u1' u2 with its x-partials up to third order and its
// first z-partial.
DerivativeBundle wronskian_bundle(const SeedSuperposition& u1,
                                  const SeedSuperposition& u2, double x,
                                  double z);

// Relative node threshold: a point is singular when |f| falls below
// kNodeThreshold times the magnitude of the terms that cancel in f.
inline constexpr double kNodeThreshold = 1e-10;

// V1 = -2 d^2/dx^2 ln v for a stationary seed (evaluated at z = 0).
cplx first_order_potential(const SeedSuperposition& v, double x);

// Time-dependent first-order potential V1(x,z) = -2 d^2/dx^2 ln u(x,z).
cplx first_order_potential(const SeedSuperposition& u, double x, double z);

// V2 = -2 d^2/dx^2 ln W(u1,u2) (initial potential zero).
cplx second_order_potential(const SeedSuperposition& u1,
                            const SeedSuperposition& u2, double x, double z);

// A1 f = f' - (v'/v) f, stationary seeds evaluated at z = 0.
cplx apply_A1(const SeedSuperposition& v, const SeedSuperposition& f, double x);

// L12 f = [W f'' - W' f' + W(u1',u2') f] / W.
cplx apply_L12(const SeedSuperposition& u1, const SeedSuperposition& u2,
               const SeedSuperposition& f, double x, double z);

enum class SymmetryKind {
  hermitian_1st,
  PxT_1st,
  P2T_1st,
  hermitian_2nd,
  P2T_2nd,
  stationary_hermitian,
  stationary_PxT,
};

// Rectangular (x, z) sampling. nz == 1 samples z = z_min only.
struct SampleGrid {
  double x_min = -10.0;
  double x_max = 10.0;
  int nx = 201;
  double z_min = 0.0;
  double z_max = 0.0;
  int nz = 1;
};

struct SymmetryResidual {
  SymmetryKind kind;
  double max_abs_residual = 0.0;
  SampleGrid grid;
};

// Checks the symmetry property on the induced potential: Hermitian ->
// max|Im V|; PxT -> max|V(x,z) - conj V(-x,z)|; P2T -> max|V(x,z) -
// conj V(-x,-z)|.  `seeds` holds one seed (first-order and stationary
// first-order kinds) or two seeds (second-order kinds; stationary kinds
// accept either).  Stationary kinds sample z = 0 only.
SymmetryResidual symmetry_residual(SymmetryKind kind,
                                   std::span<const SeedSuperposition> seeds,
                                   const SampleGrid& grid);

struct RegularityVerdict {
  double min_abs_W = 0.0;       // smallest |W| found (absolute)
  double min_relative_W = 0.0;  // smallest |W| / local cancellation scale
  double argmin_x = 0.0;
  double argmin_z = 0.0;
  bool nodeless = false;
};

// Scans |W(u1,u2)| on the grid, refines the most suspicious grid-local
// minima, and declares a node when the relative magnitude drops below
// `floor`.
RegularityVerdict regularity_scan(const SeedSuperposition& u1,
                                  const SeedSuperposition& u2,
                                  const SampleGrid& grid,
                                  double floor = kNodeThreshold);

}  // namespace susytb
