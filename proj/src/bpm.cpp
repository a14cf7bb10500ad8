#include "susytb/bpm.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace susytb {

void PropagationGrid::validate() const {
  if (!(half_width > 0.0) || !std::isfinite(half_width)) throw ValidationError("BPM half-width must be positive");
  if (nx < 256) throw ValidationError("BPM grid needs nx >= 256");
  if (!(dz > 0.0) || !std::isfinite(dz)) throw ValidationError("BPM dz must be positive");
  if (boundary.kind == BoundaryKind::absorbing_layer) {
    if (!(boundary.width > 0.0) || boundary.width >= half_width) {
      throw ValidationError("absorbing layer width must lie in (0, half_width)");
    }
    if (!(boundary.strength >= 0.0)) throw ValidationError("absorbing layer strength must be >= 0");
  }
}

std::vector<double> PropagationGrid::nodes() const {
  std::vector<double> x(nx);
  const double h = dx();
  for (int i = 0; i < nx; ++i) x[i] = -half_width + i * h;
  return x;
}

std::vector<std::string> PropagationGrid::warnings() const {
  std::vector<std::string> w;
  if (dz > dx()) {
    std::ostringstream os;
    os << "dz = " << dz << " exceeds dx = " << dx();
    w.push_back(os.str());
  }
  return w;
}

PotentialFn system_potential(std::shared_ptr<const WaveguideSystem> system,
                             std::span<const double> x) {
  if (!system) throw ValidationError("system_potential needs a system");
  std::shared_ptr<PotentialTable> table = system->potential_table(x);
  const std::size_t n = x.size();
  return [table, n](double z, std::span<const double> xs, std::span<cplx> out) {
    if (xs.size() != n) throw ValidationError("potential evaluated on a different node set");
    table->at(z, out);
  };
}

PotentialFn zero_potential() {
  return [](double, std::span<const double>, std::span<cplx> out) {
    std::fill(out.begin(), out.end(), cplx{});
  };
}

namespace {

double absorber(const PropagationGrid& g, double x) {
  if (g.boundary.kind != BoundaryKind::absorbing_layer) return 0.0;
  const double start = g.half_width - g.boundary.width;
  const double a = std::abs(x);
  if (a <= start) return 0.0;
  const double t = (a - start) / g.boundary.width;
  return g.boundary.strength * t * t * t * t;
}

void cn_step_h(std::vector<cplx>& f, std::span<const cplx> v0, std::span<const cplx> v1,
               const PropagationGrid& g, double h, std::span<const double> x) {
  const int n = g.nx;
  const double dx = g.dx();
  const cplx off = -I * h / (2.0 * dx * dx);  // coefficient of neighbours in A
  const int m = n - 2;
  std::vector<cplx> rhs(m), diag(m), cprime(m);
  for (int j = 1; j <= n - 2; ++j) {
    const cplx V = 0.5 * (v0[j] + v1[j]) - I * absorber(g, x[j]);
    const cplx hd = 2.0 / (dx * dx) + V;
    // B = I - i h/2 H, A = I + i h/2 H.
    rhs[j - 1] = (1.0 - 0.5 * I * h * hd) * f[j] - off * (f[j - 1] + f[j + 1]);
    diag[j - 1] = 1.0 + 0.5 * I * h * hd;
  }
  // Thomas algorithm for the constant off-diagonal tridiagonal system.
  cplx beta = diag[0];
  if (std::abs(beta) == 0.0) throw SolverError("Crank-Nicolson tridiagonal solve hit a zero pivot");
  rhs[0] /= beta;
  for (int j = 1; j < m; ++j) {
    cprime[j - 1] = off / beta;
    beta = diag[j] - off * cprime[j - 1];
    if (std::abs(beta) == 0.0) throw SolverError("Crank-Nicolson tridiagonal solve hit a zero pivot");
    rhs[j] = (rhs[j] - off * rhs[j - 1]) / beta;
  }
  for (int j = m - 2; j >= 0; --j) rhs[j] -= cprime[j] * rhs[j + 1];
  f[0] = 0.0;
  f[n - 1] = 0.0;
  for (int j = 0; j < m; ++j) f[j + 1] = rhs[j];
}

}  // namespace

void cn_step(std::vector<cplx>& field, std::span<const cplx> v0, std::span<const cplx> v1,
             const PropagationGrid& grid) {
  grid.validate();
  if (static_cast<int>(field.size()) != grid.nx || static_cast<int>(v0.size()) != grid.nx ||
      static_cast<int>(v1.size()) != grid.nx) {
    throw ValidationError("field and potential arrays must have nx entries");
  }
  const auto x = grid.nodes();
  cn_step_h(field, v0, v1, grid, grid.dz, x);
}

double grid_norm(std::span<const cplx> f, double dx) {
  double s = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) {
    const double w = (i == 0 || i + 1 == f.size()) ? 0.5 : 1.0;
    s += w * std::norm(f[i]);
  }
  return std::sqrt(s * dx);
}

double relative_l2_error(std::span<const cplx> a, std::span<const cplx> b, double dx) {
  if (a.size() != b.size()) throw ValidationError("fields have different lengths");
  std::vector<cplx> d(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
  const double nb = grid_norm(b, dx);
  if (nb == 0.0) throw ValidationError("reference field vanishes");
  return grid_norm(d, dx) / nb;
}

std::vector<FieldSnapshot> propagate(std::vector<cplx> field, const PotentialFn& V,
                                     const PropagationGrid& grid,
                                     const std::vector<double>& z_out) {
  grid.validate();
  if (static_cast<int>(field.size()) != grid.nx) throw ValidationError("initial field must have nx samples");
  if (z_out.empty()) throw ValidationError("propagate needs output z values");
  for (std::size_t i = 1; i < z_out.size(); ++i) {
    if (!(z_out[i] > z_out[i - 1])) throw ValidationError("output z values must be strictly increasing");
  }
  const auto x = grid.nodes();
  const double dx = grid.dx();
  field.front() = 0.0;
  field.back() = 0.0;
  const double p0 = grid_norm(field, dx);
  std::vector<cplx> v0(grid.nx), v1(grid.nx);
  double z = z_out.front();
  V(z, x, v0);
  std::vector<FieldSnapshot> out;
  out.push_back({z, field});
  for (std::size_t k = 1; k < z_out.size(); ++k) {
    const double span = z_out[k] - z;
    const long long nsteps = std::max<long long>(1, static_cast<long long>(std::ceil(span / grid.dz - 1e-9)));
    const double h = span / static_cast<double>(nsteps);
    const double zstart = z;
    for (long long s = 1; s <= nsteps; ++s) {
      const double zn = s == nsteps ? z_out[k] : zstart + static_cast<double>(s) * h;
      V(zn, x, v1);
      cn_step_h(field, v0, v1, grid, h, x);
      std::swap(v0, v1);
    }
    z = z_out[k];
    const double p = grid_norm(field, dx);
    if (!std::isfinite(p) || p > 1e6 * std::max(p0, 1e-300)) {
      std::ostringstream os;
      os << "BPM instability: field norm grew from " << p0 << " to " << p << " by z=" << z;
      throw SolverError(os.str());
    }
    out.push_back({z, field});
  }
  return out;
}

double pde_residual(const std::function<cplx(double, double)>& psi,
                    const std::function<cplx(double, double)>& V, const ResidualGrid& g) {
  if (!(g.x_max > g.x_min) || g.nx < 8) throw ValidationError("residual grid needs x_max > x_min and nx >= 8");
  if (g.z_samples.empty()) throw ValidationError("residual grid needs z samples");
  const double hx = (g.x_max - g.x_min) / (g.nx - 1);
  const double hz = g.hz > 0.0 ? g.hz : hx;
  double worst = 0.0;
  std::vector<cplx> f(g.nx);
  for (double z : g.z_samples) {
    for (int i = 0; i < g.nx; ++i) f[i] = psi(g.x_min + i * hx, z);
    for (int i = 2; i < g.nx - 2; ++i) {
      const double x = g.x_min + i * hx;
      const cplx fxx = (-f[i - 2] + 16.0 * f[i - 1] - 30.0 * f[i] + 16.0 * f[i + 1] - f[i + 2]) / (12.0 * hx * hx);
      const cplx fz = (psi(x, z - 2 * hz) - 8.0 * psi(x, z - hz) + 8.0 * psi(x, z + hz) - psi(x, z + 2 * hz)) / (12.0 * hz);
      worst = std::max(worst, std::abs(I * fz + fxx - V(x, z) * f[i]));
    }
  }
  return worst;
}

}  // namespace susytb
