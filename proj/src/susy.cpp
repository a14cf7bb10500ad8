#include "susytb/susy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace susytb {

std::vector<double> linspace(double a, double b, int n) {
  if (n < 1) return {};
  if (n == 1) return {a};
  std::vector<double> out(static_cast<std::size_t>(n));
  const double h = (b - a) / (n - 1);
  for (int i = 0; i < n; ++i) out[i] = a + h * i;
  out.back() = b;
  return out;
}

SeedSuperposition::SeedSuperposition(std::vector<SeedTerm> terms)
    : terms_(std::move(terms)) {
  if (terms_.empty()) {
    throw ValidationError("seed superposition needs at least one term");
  }
  for (const auto& t : terms_) {
    if (!std::isfinite(t.amplitude) || !std::isfinite(t.wavenumber)) {
      throw ValidationError("seed term amplitude and wavenumber must be finite");
    }
  }
}

SeedSuperposition SeedSuperposition::even(double amplitude, double k) {
  return SeedSuperposition({SeedTerm{Parity::even, amplitude, k}});
}

SeedSuperposition SeedSuperposition::odd(double amplitude, double k) {
  return SeedSuperposition({SeedTerm{Parity::odd, amplitude, k}});
}

SeedSuperposition SeedSuperposition::with(SeedTerm term) const {
  auto terms = terms_;
  terms.push_back(term);
  return SeedSuperposition(std::move(terms));
}

namespace {

// d^n/dx^n of the term's x-profile: even cycles cosh, sinh, ...; odd cycles
// sinh, cosh, ... .  Returns the complex coefficient times profile,
// without the z phase.
cplx term_profile(const SeedTerm& t, double x, int order) {
  const double k = t.wavenumber;
  const double kx = k * x;
  const double scale = std::pow(k, order);
  const bool odd_order = (order % 2) == 1;
  if (t.parity == Parity::even) {
    return t.amplitude * scale * (odd_order ? std::sinh(kx) : std::cosh(kx));
  }
  return I * t.amplitude * scale * (odd_order ? std::cosh(kx) : std::sinh(kx));
}

cplx phase(const SeedTerm& t, double z) {
  const double k2 = t.wavenumber * t.wavenumber;
  return {std::cos(k2 * z), std::sin(k2 * z)};
}

}  // namespace

std::array<cplx, 5> SeedSuperposition::x_jet(double x, double z) const {
  std::array<cplx, 5> out{};
  for (const auto& t : terms_) {
    const cplx ph = phase(t, z);
    for (int n = 0; n < 5; ++n) out[n] += term_profile(t, x, n) * ph;
  }
  return out;
}

std::array<cplx, 3> SeedSuperposition::z_jet(double x, double z) const {
  std::array<cplx, 3> out{};
  for (const auto& t : terms_) {
    const cplx ph = phase(t, z) * I * (t.wavenumber * t.wavenumber);
    for (int n = 0; n < 3; ++n) out[n] += term_profile(t, x, n) * ph;
  }
  return out;
}

double SeedSuperposition::magnitude(double x, double /*z*/, int order) const {
  double s = 0.0;
  for (const auto& t : terms_) {
    const double k = std::abs(t.wavenumber);
    s += std::abs(t.amplitude) * std::pow(k, order) * std::cosh(k * x);
  }
  return s;
}

DerivativeBundle eval_seed(const SeedSuperposition& u, double x, double z) {
  const auto j = u.x_jet(x, z);
  const auto jz = u.z_jet(x, z);
  return {j[0], j[1], j[2], j[3], jz[0]};
}

namespace {

struct WronskianJet {
  cplx w, w1, w2, w3, wz;
  cplx w_prime_pair;  // W(u1', u2') = u1' u2'' - u1'' u2'
  double scale;       // |u1 u2'| + |u1' u2|
};

WronskianJet wronskian_jet(const SeedSuperposition& u1,
                           const SeedSuperposition& u2, double x, double z) {
  const auto a = u1.x_jet(x, z);
  const auto b = u2.x_jet(x, z);
  const auto az = u1.z_jet(x, z);
  const auto bz = u2.z_jet(x, z);
  WronskianJet j{};
  j.w = a[0] * b[1] - a[1] * b[0];
  j.w1 = a[0] * b[2] - a[2] * b[0];
  j.w2 = a[1] * b[2] + a[0] * b[3] - a[3] * b[0] - a[2] * b[1];
  j.w3 = 2.0 * a[1] * b[3] + a[0] * b[4] - a[4] * b[0] - 2.0 * a[3] * b[1];
  j.wz = az[0] * b[1] + a[0] * bz[1] - az[1] * b[0] - a[1] * bz[0];
  j.w_prime_pair = a[1] * b[2] - a[2] * b[1];
  j.scale = u1.magnitude(x, z, 0) * u2.magnitude(x, z, 1) +
            u1.magnitude(x, z, 1) * u2.magnitude(x, z, 0);
  return j;
}

[[noreturn]] void throw_node(const char* what, double x, double z) {
  std::ostringstream os;
  os << what << " vanishes at x=" << x << ", z=" << z;
  throw SingularPointError(os.str(), x, z);
}

}  // namespace

DerivativeBundle wronskian_bundle(const SeedSuperposition& u1,
                                  const SeedSuperposition& u2, double x,
                                  double z) {
  const auto j = wronskian_jet(u1, u2, x, z);
  return {j.w, j.w1, j.w2, j.w3, j.wz};
}

cplx first_order_potential(const SeedSuperposition& u, double x, double z) {
  const auto j = u.x_jet(x, z);
  if (std::abs(j[0]) < kNodeThreshold * u.magnitude(x, z, 0)) {
    throw_node("transformation function", x, z);
  }
  const cplx r = j[1] / j[0];
  return -2.0 * (j[2] / j[0] - r * r);
}

cplx first_order_potential(const SeedSuperposition& v, double x) {
  return first_order_potential(v, x, 0.0);
}

cplx second_order_potential(const SeedSuperposition& u1,
                            const SeedSuperposition& u2, double x, double z) {
  const auto j = wronskian_jet(u1, u2, x, z);
  if (std::abs(j.w) < kNodeThreshold * j.scale) throw_node("Wronskian", x, z);
  const cplx r = j.w1 / j.w;
  return -2.0 * (j.w2 / j.w - r * r);
}

cplx apply_A1(const SeedSuperposition& v, const SeedSuperposition& f,
              double x) {
  const auto jv = v.x_jet(x, 0.0);
  if (std::abs(jv[0]) < kNodeThreshold * v.magnitude(x, 0.0, 0)) {
    throw_node("transformation function", x, 0.0);
  }
  const auto jf = f.x_jet(x, 0.0);
  return jf[1] - (jv[1] / jv[0]) * jf[0];
}

cplx apply_L12(const SeedSuperposition& u1, const SeedSuperposition& u2,
               const SeedSuperposition& f, double x, double z) {
  const auto j = wronskian_jet(u1, u2, x, z);
  if (std::abs(j.w) < kNodeThreshold * j.scale) throw_node("Wronskian", x, z);
  const auto jf = f.x_jet(x, z);
  return (j.w * jf[2] - j.w1 * jf[1] + j.w_prime_pair * jf[0]) / j.w;
}

namespace {

bool is_stationary(SymmetryKind k) {
  return k == SymmetryKind::stationary_hermitian ||
         k == SymmetryKind::stationary_PxT;
}

bool is_first_order(SymmetryKind k) {
  return k == SymmetryKind::hermitian_1st || k == SymmetryKind::PxT_1st ||
         k == SymmetryKind::P2T_1st;
}

}  // namespace

SymmetryResidual symmetry_residual(SymmetryKind kind,
                                   std::span<const SeedSuperposition> seeds,
                                   const SampleGrid& grid) {
  if (seeds.empty() || seeds.size() > 2) {
    throw ValidationError("symmetry_residual expects one or two seeds");
  }
  if (is_first_order(kind) && seeds.size() != 1) {
    throw ValidationError("first-order symmetry kinds take exactly one seed");
  }
  if (!is_first_order(kind) && !is_stationary(kind) && seeds.size() != 2) {
    throw ValidationError("second-order symmetry kinds take two seeds");
  }
  auto potential = [&](double x, double z) -> cplx {
    return seeds.size() == 1 ? first_order_potential(seeds[0], x, z)
                             : second_order_potential(seeds[0], seeds[1], x, z);
  };

  const auto xs = linspace(grid.x_min, grid.x_max, grid.nx);
  const auto zs = is_stationary(kind)
                      ? std::vector<double>{0.0}
                      : linspace(grid.z_min, grid.z_max, std::max(grid.nz, 1));
  double worst = 0.0;
  for (double z : zs) {
    for (double x : xs) {
      const cplx v = potential(x, z);
      double r = 0.0;
      switch (kind) {
        case SymmetryKind::hermitian_1st:
        case SymmetryKind::hermitian_2nd:
        case SymmetryKind::stationary_hermitian:
          r = std::abs(v.imag());
          break;
        case SymmetryKind::PxT_1st:
        case SymmetryKind::stationary_PxT:
          r = std::abs(v - std::conj(potential(-x, z)));
          break;
        case SymmetryKind::P2T_1st:
        case SymmetryKind::P2T_2nd:
          r = std::abs(v - std::conj(potential(-x, -z)));
          break;
      }
      worst = std::max(worst, r);
    }
  }
  SampleGrid used = grid;
  if (is_stationary(kind)) {
    used.z_min = used.z_max = 0.0;
    used.nz = 1;
  }
  return {kind, worst, used};
}

namespace {

struct Probe {
  double rel;
  double abs;
};

Probe probe_W(const SeedSuperposition& u1, const SeedSuperposition& u2,
              double x, double z) {
  const auto j = wronskian_jet(u1, u2, x, z);
  const double a = std::abs(j.w);
  return {j.scale > 0.0 ? a / j.scale : a, a};
}

// Nelder-Mead on the relative |W| inside one grid cell (coordinates
// clamped to the cell).  Small and local; calibrate has the general one.
std::array<double, 2> refine_cell(const SeedSuperposition& u1,
                                  const SeedSuperposition& u2, double x0,
                                  double z0, double hx, double hz, bool two_d) {
  auto f = [&](double x, double z) {
    x = std::clamp(x, x0 - hx, x0 + hx);
    z = two_d ? std::clamp(z, z0 - hz, z0 + hz) : z0;
    return probe_W(u1, u2, x, z).rel;
  };
  if (!two_d) {
    // Golden-section on [x0 - hx, x0 + hx].
    const double g = 0.5 * (std::sqrt(5.0) - 1.0);
    double a = x0 - hx, b = x0 + hx;
    double c = b - g * (b - a), d = a + g * (b - a);
    double fc = f(c, z0), fd = f(d, z0);
    for (int it = 0; it < 200 && (b - a) > 1e-15 * (1.0 + std::abs(x0)); ++it) {
      if (fc < fd) {
        b = d;
        d = c;
        fd = fc;
        c = b - g * (b - a);
        fc = f(c, z0);
      } else {
        a = c;
        c = d;
        fc = fd;
        d = a + g * (b - a);
        fd = f(d, z0);
      }
    }
    return {0.5 * (a + b), z0};
  }
  std::array<std::array<double, 2>, 3> s = {{{x0, z0},
                                             {x0 + 0.5 * hx, z0},
                                             {x0, z0 + 0.5 * hz}}};
  std::array<double, 3> fv{};
  for (int i = 0; i < 3; ++i) fv[i] = f(s[i][0], s[i][1]);
  for (int it = 0; it < 400; ++it) {
    std::array<int, 3> idx = {0, 1, 2};
    std::sort(idx.begin(), idx.end(), [&](int l, int r) { return fv[l] < fv[r]; });
    const auto best = s[idx[0]], mid = s[idx[1]], worst = s[idx[2]];
    const double fb = fv[idx[0]], fm = fv[idx[1]], fw = fv[idx[2]];
    const double span = std::max(std::abs(worst[0] - best[0]) / hx,
                                 std::abs(worst[1] - best[1]) / hz);
    if (span < 1e-13) break;
    const std::array<double, 2> c = {0.5 * (best[0] + mid[0]), 0.5 * (best[1] + mid[1])};
    auto along = [&](double t) {
      return std::array<double, 2>{c[0] + t * (worst[0] - c[0]), c[1] + t * (worst[1] - c[1])};
    };
    auto r = along(-1.0);
    double fr = f(r[0], r[1]);
    std::array<double, 2> next;
    double fnext;
    if (fr < fb) {
      auto e = along(-2.0);
      double fe = f(e[0], e[1]);
      next = fe < fr ? e : r;
      fnext = std::min(fe, fr);
    } else if (fr < fm) {
      next = r;
      fnext = fr;
    } else {
      auto k = along(0.5);
      double fk = f(k[0], k[1]);
      if (fk < fw) {
        next = k;
        fnext = fk;
      } else {
        for (int m : {idx[1], idx[2]}) {
          s[m] = {0.5 * (s[m][0] + best[0]), 0.5 * (s[m][1] + best[1])};
          fv[m] = f(s[m][0], s[m][1]);
        }
        continue;
      }
    }
    s[idx[2]] = next;
    fv[idx[2]] = fnext;
  }
  int b = static_cast<int>(std::min_element(fv.begin(), fv.end()) - fv.begin());
  return {std::clamp(s[b][0], x0 - hx, x0 + hx),
          two_d ? std::clamp(s[b][1], z0 - hz, z0 + hz) : z0};
}

}  // namespace

RegularityVerdict regularity_scan(const SeedSuperposition& u1,
                                  const SeedSuperposition& u2,
                                  const SampleGrid& grid, double floor) {
  if (grid.nx < 2 || !(grid.x_max > grid.x_min) || !std::isfinite(grid.x_min) ||
      !std::isfinite(grid.x_max)) {
    throw ValidationError("regularity_scan needs a finite x-range with >= 2 points");
  }
  const bool two_d = grid.nz >= 2 && grid.z_max > grid.z_min;
  const auto xs = linspace(grid.x_min, grid.x_max, grid.nx);
  const auto zs = two_d ? linspace(grid.z_min, grid.z_max, grid.nz)
                        : std::vector<double>{grid.z_min};
  const int nx = static_cast<int>(xs.size());
  const int nz = static_cast<int>(zs.size());
  std::vector<double> rel(static_cast<std::size_t>(nx) * nz);
  RegularityVerdict v;
  v.min_relative_W = std::numeric_limits<double>::infinity();
  for (int iz = 0; iz < nz; ++iz) {
    for (int ix = 0; ix < nx; ++ix) {
      const auto p = probe_W(u1, u2, xs[ix], zs[iz]);
      rel[iz * nx + ix] = p.rel;
      if (p.rel < v.min_relative_W) {
        v.min_relative_W = p.rel;
        v.min_abs_W = p.abs;
        v.argmin_x = xs[ix];
        v.argmin_z = zs[iz];
      }
    }
  }

  // Grid-local minima are candidates for a node between samples.
  struct Cand {
    double rel;
    int ix, iz;
  };
  std::vector<Cand> cands;
  for (int iz = 0; iz < nz; ++iz) {
    for (int ix = 0; ix < nx; ++ix) {
      const double r = rel[iz * nx + ix];
      bool local = true;
      for (int dz = -1; dz <= 1 && local; ++dz) {
        for (int dx = -1; dx <= 1; ++dx) {
          if (dx == 0 && dz == 0) continue;
          const int jx = ix + dx, jz = iz + dz;
          if (jx < 0 || jx >= nx || jz < 0 || jz >= nz) continue;
          if (rel[jz * nx + jx] < r) {
            local = false;
            break;
          }
        }
      }
      if (local) cands.push_back({r, ix, iz});
    }
  }
  std::sort(cands.begin(), cands.end(),
            [](const Cand& a, const Cand& b) { return a.rel < b.rel; });
  if (cands.size() > 16) cands.resize(16);
  const double hx = (grid.x_max - grid.x_min) / (nx - 1);
  const double hz = two_d ? (grid.z_max - grid.z_min) / (nz - 1) : 0.0;
  for (const auto& c : cands) {
    const auto p = refine_cell(u1, u2, xs[c.ix], zs[c.iz], hx, hz, two_d);
    const auto pr = probe_W(u1, u2, p[0], p[1]);
    if (pr.rel < v.min_relative_W) {
      v.min_relative_W = pr.rel;
      v.min_abs_W = pr.abs;
      v.argmin_x = p[0];
      v.argmin_z = p[1];
    }
  }
  v.nodeless = v.min_relative_W >= floor;
  return v;
}

}  // namespace susytb
