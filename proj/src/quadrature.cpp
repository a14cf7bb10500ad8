#include "susytb/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace susytb {

void QuadratureSpec::validate() const {
  if (!(half_width >= 0.0) || !std::isfinite(half_width)) {
    throw ValidationError("quadrature half_width must be finite and >= 0");
  }
  if (nodes < 64) throw ValidationError("quadrature needs at least 64 nodes");
  if (!(tail_tolerance > 0.0)) {
    throw ValidationError("quadrature tail_tolerance must be positive");
  }
}

QuadratureGrid::QuadratureGrid(const QuadratureSpec& spec)
    : QuadratureGrid(spec, spec.half_width) {}

QuadratureGrid::QuadratureGrid(const QuadratureSpec& spec, double half_width)
    : spec_(spec), L_(half_width) {
  spec.validate();
  if (!(half_width > 0.0) || !std::isfinite(half_width)) {
    throw ValidationError("quadrature half-width must be positive");
  }
  spec_.half_width = half_width;
  int n = spec.nodes;
  switch (spec.rule) {
    case QuadratureRule::trapezoid: {
      x_ = linspace(-L_, L_, n);
      const double h = 2.0 * L_ / (n - 1);
      w_.assign(n, h);
      w_.front() = w_.back() = 0.5 * h;
      break;
    }
    case QuadratureRule::simpson: {
      if (n % 2 == 0) ++n;
      x_ = linspace(-L_, L_, n);
      const double h = 2.0 * L_ / (n - 1);
      w_.resize(n);
      for (int i = 0; i < n; ++i) w_[i] = (i % 2 == 1 ? 4.0 : 2.0) * h / 3.0;
      w_.front() = w_.back() = h / 3.0;
      break;
    }
    case QuadratureRule::gauss_legendre_composite: {
      const int panels = (n + 3) / 4;
      n = 4 * panels;
      const double a = std::sqrt(3.0 / 7.0 - 2.0 / 7.0 * std::sqrt(6.0 / 5.0));
      const double b = std::sqrt(3.0 / 7.0 + 2.0 / 7.0 * std::sqrt(6.0 / 5.0));
      const double wa = (18.0 + std::sqrt(30.0)) / 36.0;
      const double wb = (18.0 - std::sqrt(30.0)) / 36.0;
      const double t[4] = {-b, -a, a, b};
      const double tw[4] = {wb, wa, wa, wb};
      const double ph = 2.0 * L_ / panels;
      x_.resize(n);
      w_.resize(n);
      for (int p = 0; p < panels; ++p) {
        const double c = -L_ + (p + 0.5) * ph;
        for (int j = 0; j < 4; ++j) {
          x_[4 * p + j] = c + 0.5 * ph * t[j];
          w_[4 * p + j] = 0.5 * ph * tw[j];
        }
      }
      break;
    }
  }
  // Enforce exact mirror symmetry of nodes and weights.
  for (int i = 0; i < n / 2; ++i) {
    x_[n - 1 - i] = -x_[i];
    w_[n - 1 - i] = w_[i];
  }
  if (n % 2 == 1) x_[n / 2] = 0.0;
}

cplx QuadratureGrid::integrate(std::span<const cplx> f) const {
  if (f.size() != x_.size()) throw ValidationError("integrand size mismatch");
  cplx s{};
  for (std::size_t i = 0; i < f.size(); ++i) s += w_[i] * f[i];
  return s;
}

double QuadratureGrid::integrate(std::span<const double> f) const {
  if (f.size() != x_.size()) throw ValidationError("integrand size mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) s += w_[i] * f[i];
  return s;
}

double QuadratureGrid::outer_strip(std::span<const cplx> f) const {
  const double edge = 0.875 * L_;
  double s = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) {
    if (std::abs(x_[i]) > edge) s += w_[i] * std::abs(f[i]);
  }
  return s;
}

cplx inner_product(std::span<const cplx> f, std::span<const cplx> g,
                   Metric metric, const QuadratureGrid& grid) {
  const int n = grid.size();
  if (static_cast<int>(f.size()) != n || static_cast<int>(g.size()) != n) {
    throw ValidationError("inner_product: samples do not match the grid");
  }
  const auto& w = grid.w();
  const auto& x = grid.x();
  const double edge = 0.875 * grid.half_width();
  cplx s{};
  double ff = 0.0, gg = 0.0, strip = 0.0;
  for (int i = 0; i < n; ++i) {
    const cplx gi = metric == Metric::dirac ? g[i] : g[grid.mirror(i)];
    const cplx term = std::conj(f[i]) * gi;
    s += w[i] * term;
    ff += w[i] * std::norm(f[i]);
    gg += w[i] * std::norm(g[i]);
    if (std::abs(x[i]) > edge) strip += w[i] * std::abs(term);
  }
  const double scale = std::sqrt(ff * gg);
  if (scale > 0.0 && strip > grid.spec().tail_tolerance * scale) {
    std::ostringstream os;
    os << "inner_product: tail contribution " << strip / scale
       << " exceeds tolerance " << grid.spec().tail_tolerance
       << " at half-width " << grid.half_width();
    throw QuadratureError(os.str());
  }
  return s;
}

cplx inner_product(const std::function<cplx(double)>& f,
                   const std::function<cplx(double)>& g, Metric metric,
                   const QuadratureGrid& grid) {
  std::vector<cplx> fs(grid.size()), gs(grid.size());
  for (int i = 0; i < grid.size(); ++i) {
    fs[i] = f(grid.x()[i]);
    gs[i] = g(grid.x()[i]);
  }
  return inner_product(fs, gs, metric, grid);
}

cplx certify_by_doubling(const std::function<cplx(double)>& f,
                         const QuadratureGrid& grid, double tol) {
  auto integrate_on = [&](const QuadratureGrid& g) {
    std::vector<cplx> v(g.size());
    for (int i = 0; i < g.size(); ++i) v[i] = f(g.x()[i]);
    return g.integrate(v);
  };
  const cplx a = integrate_on(grid);
  QuadratureSpec wide = grid.spec();
  wide.nodes = 2 * grid.size();
  const QuadratureGrid big(wide, 2.0 * grid.half_width());
  const cplx b = integrate_on(big);
  const double scale = std::max({1.0, std::abs(a), std::abs(b)});
  if (std::abs(a - b) > tol * scale) {
    std::ostringstream os;
    os << "quadrature not converged: doubling the half-width changed the "
          "integral by "
       << std::abs(a - b);
    throw QuadratureError(os.str());
  }
  return a;
}

}  // namespace susytb
