#pragma once

#include <functional>
#include <span>
#include <vector>

#include "susytb/common.hpp"

namespace susytb {

enum class QuadratureRule { trapezoid, simpson, gauss_legendre_composite };

enum class Metric { dirac, pt };

struct QuadratureSpec {
  // Half-width of the symmetric domain [-L, L]; 0 selects the automatic
  // value 12 / min(k) (plus the outermost well offset where relevant).
  double half_width = 0.0;
  int nodes = 4096;
  QuadratureRule rule = QuadratureRule::simpson;
  // Relative bound on the outer-strip contribution of an integrand.
  double tail_tolerance = 1e-8;

  void validate() const;
};

// Symmetric node set on [-L, L]: x[mirror(i)] == -x[i] exactly, so the PT
// reflection f(-x) is an index reversal.  Simpson needs an odd node count
// and rounds up; the Gauss-Legendre composite rule uses 4-point panels and
// rounds up to a multiple of 4.
class QuadratureGrid {
 public:
  QuadratureGrid(const QuadratureSpec& spec, double half_width);
  // Uses spec.half_width, which must then be positive.
  explicit QuadratureGrid(const QuadratureSpec& spec);

  const std::vector<double>& x() const noexcept { return x_; }
  const std::vector<double>& w() const noexcept { return w_; }
  int size() const noexcept { return static_cast<int>(x_.size()); }
  int mirror(int i) const noexcept { return size() - 1 - i; }
  double half_width() const noexcept { return L_; }
  const QuadratureSpec& spec() const noexcept { return spec_; }

  cplx integrate(std::span<const cplx> integrand) const;
  double integrate(std::span<const double> integrand) const;

  // Sum of w|f| over the outer eighth of the domain on both sides.
  double outer_strip(std::span<const cplx> integrand) const;

 private:
  QuadratureSpec spec_;
  double L_;
  std::vector<double> x_;
  std::vector<double> w_;
};

// (f, g) = sum w conj(f) g (dirac) or sum w conj(f(x)) g(-x) (pt), on
// samples at the grid nodes.  Throws QuadratureError when the outer-strip
// contribution exceeds the tail tolerance relative to ||f|| ||g||.
cplx inner_product(std::span<const cplx> f, std::span<const cplx> g,
                   Metric metric, const QuadratureGrid& grid);

cplx inner_product(const std::function<cplx(double)>& f,
                   const std::function<cplx(double)>& g, Metric metric,
                   const QuadratureGrid& grid);

// Integral of f on [-L, L] and on [-2L, 2L] at the same node density;
// throws QuadratureError when they differ by more than tol relative to the
// larger magnitude (or absolutely when both are below 1).
cplx certify_by_doubling(const std::function<cplx(double)>& f,
                         const QuadratureGrid& grid, double tol);

}  // namespace susytb
