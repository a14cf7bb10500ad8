#include <doctest.h>

#include <cmath>

#include "susytb/bpm.hpp"

using namespace susytb;

namespace {

std::vector<cplx> sample(const std::function<cplx(double)>& f, const std::vector<double>& x) {
  std::vector<cplx> v(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) v[i] = f(x[i]);
  return v;
}

double variance(const std::vector<cplx>& f, const std::vector<double>& x) {
  double p = 0.0, m1 = 0.0, m2 = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) {
    const double w = std::norm(f[i]);
    p += w;
    m1 += w * x[i];
    m2 += w * x[i] * x[i];
  }
  return m2 / p - (m1 / p) * (m1 / p);
}

}  // namespace

TEST_CASE("free Gaussian spreading law") {
  PropagationGrid g;
  g.half_width = 30.0;
  g.nx = 4096;
  g.dz = 0.002;
  const auto x = g.nodes();
  const double s0 = 1.0;
  // |psi|^2 has standard deviation s0; sigma^2(z) = s0^2 + (z / s0)^2.
  auto f0 = sample([&](double xx) { return cplx(std::exp(-xx * xx / (4.0 * s0 * s0)), 0.0); }, x);
  const auto snaps = propagate(f0, zero_potential(), g, {0.0, 0.5, 1.0});
  for (const auto& s : snaps) {
    const double expect = s0 * s0 + (s.z / s0) * (s.z / s0);
    CHECK(std::abs(variance(s.samples, x) - expect) / expect < 1e-4);
  }
}

TEST_CASE("Crank-Nicolson is unitary for real potentials") {
  PropagationGrid g;
  g.nx = 512;
  g.half_width = 10.0;
  g.dz = 0.05;
  const auto x = g.nodes();
  auto f = sample([](double xx) { return std::exp(-(xx - 1.0) * (xx - 1.0) + 2.0 * I * xx); }, x);
  std::vector<cplx> v(g.nx);
  for (int i = 0; i < g.nx; ++i) v[i] = -2.0 / std::cosh(x[i]) / std::cosh(x[i]);
  double p = grid_norm(f, g.dx());
  for (int s = 0; s < 100; ++s) {
    cn_step(f, v, v, g);
    const double q = grid_norm(f, g.dx());
    CHECK(std::abs(q - p) / p < 1e-12);
    p = q;
  }
}

TEST_CASE("second order in dz against a Richardson reference") {
  auto sys = std::make_shared<const WaveguideSystem>(PTStaticParams{});
  PropagationGrid g;
  g.nx = 1024;
  const auto x = g.nodes();
  const auto f0 = sample([&](double xx) { return sys->mode(ModeKind::left, xx, 0.0); }, x);
  auto run = [&](double dz) {
    PropagationGrid gg = g;
    gg.dz = dz;
    return propagate(f0, system_potential(sys, x), gg, {0.0, 2.0}).back().samples;
  };
  const auto a = run(0.04), b = run(0.02), c = run(0.01);
  std::vector<cplx> ref(c.size()), ea(c.size()), eb(c.size());
  for (std::size_t i = 0; i < c.size(); ++i) {
    ref[i] = c[i] + (c[i] - b[i]) / 3.0;
    ea[i] = a[i] - ref[i];
    eb[i] = b[i] - ref[i];
  }
  const double ratio = grid_norm(ea, g.dx()) / grid_norm(eb, g.dx());
  CHECK(ratio > 3.5);
  CHECK(ratio < 4.5);
}

TEST_CASE("analytic oracles") {
  SUBCASE("hermitian left state over one beat") {
    auto sys = std::make_shared<const WaveguideSystem>(HermitianStaticParams{});
    PropagationGrid g;
    const auto x = g.nodes();
    const double T = sys->periods().T;
    const auto f0 = sample([&](double xx) { return sys->mode(ModeKind::left, xx, 0.0); }, x);
    const auto end = propagate(f0, system_potential(sys, x), g, {0.0, T}).back().samples;
    std::vector<cplx> m1(g.nx), m2(g.nx);
    for (int i = 0; i < g.nx; ++i) {
      m1[i] = std::abs(end[i]);
      m2[i] = std::abs(sys->mode(ModeKind::left, x[i], T));
    }
    CHECK(relative_l2_error(m1, m2, g.dx()) < 1e-3);
  }
  SUBCASE("PT static ground mode is shape invariant") {
    auto sys = std::make_shared<const WaveguideSystem>(PTStaticParams{});
    PropagationGrid g;
    const auto x = g.nodes();
    const auto f0 = sample([&](double xx) { return sys->mode(ModeKind::ground, xx, 0.0); }, x);
    const auto end = propagate(f0, system_potential(sys, x), g, {0.0, 10.0}).back().samples;
    std::vector<cplx> a(g.nx), b(g.nx);
    for (int i = 0; i < g.nx; ++i) {
      a[i] = std::abs(end[i]);
      b[i] = std::abs(f0[i]);
    }
    CHECK(relative_l2_error(a, b, g.dx()) < 1e-3);
  }
}

TEST_CASE("dynamic Floquet mode recurs after one potential period") {
  auto sys = std::make_shared<const WaveguideSystem>(PTDynamicParams{});
  PropagationGrid g;
  const auto x = g.nodes();
  const double T = sys->periods().T;
  const auto f0 = sample([&](double xx) { return sys->mode(ModeKind::floquet1, xx, 0.0); }, x);
  const auto end = propagate(f0, system_potential(sys, x), g, {0.0, T}).back().samples;
  std::vector<cplx> a(g.nx), b(g.nx);
  for (int i = 0; i < g.nx; ++i) {
    a[i] = std::norm(end[i]);
    b[i] = std::norm(f0[i]);
  }
  CHECK(relative_l2_error(a, b, g.dx()) < 5e-3);
}

TEST_CASE("pde residual") {
  auto sys = std::make_shared<const WaveguideSystem>(HermitianStaticParams{});
  auto V = [&](double x, double z) { return sys->potential(x, z); };
  auto good = [&](double x, double z) { return sys->mode(ModeKind::left, x, z); };
  const double k1 = 0.645 * 1.05;
  auto bad = [&](double x, double z) {
    return std::exp(I * k1 * k1 * z) * sys->mode(ModeKind::ground, x * 1.05, 0.0);
  };
  ResidualGrid rg;
  rg.z_samples = {0.0, 3.0};
  CHECK(pde_residual(good, V, rg) < 1e-6);
  CHECK(pde_residual(bad, V, rg) > 1e-2);
  ResidualGrid c1 = rg, c2 = rg;
  c1.nx = 256;
  c2.nx = 512;
  CHECK(pde_residual(good, V, c1) / pde_residual(good, V, c2) >= 10.0);
}

TEST_CASE("validation and failure modes") {
  PropagationGrid g;
  g.nx = 100;
  CHECK_THROWS_AS(g.validate(), ValidationError);
  g.nx = 512;
  g.dz = 0.5;
  CHECK_FALSE(g.warnings().empty());
  g.dz = 0.01;
  CHECK(g.warnings().empty());
  g.boundary.kind = BoundaryKind::absorbing_layer;
  g.boundary.width = 30.0;
  CHECK_THROWS_AS(g.validate(), ValidationError);
  g.boundary.width = 4.0;
  const auto x = g.nodes();
  CHECK(x.front() == -g.half_width);
  CHECK(std::abs(x.back() - g.half_width) < 1e-12);
  // Strong gain blows the field up.
  auto gain = [](double, std::span<const double>, std::span<cplx> out) {
    std::fill(out.begin(), out.end(), cplx(0.0, 5.0));
  };
  auto f = sample([](double xx) { return cplx(std::exp(-xx * xx), 0.0); }, x);
  g.boundary.kind = BoundaryKind::dirichlet_zero;
  CHECK_THROWS_AS(propagate(f, gain, g, {0.0, 1.0, 2.0, 3.0, 4.0}), SolverError);
  CHECK_THROWS_AS(propagate(f, zero_potential(), g, {1.0, 0.5}), ValidationError);
}

TEST_CASE("absorbing layer removes outgoing power") {
  PropagationGrid g;
  g.half_width = 20.0;
  g.nx = 2048;
  g.dz = 0.01;
  const auto x = g.nodes();
  auto f0 = sample([](double xx) { return std::exp(-0.25 * xx * xx + 3.0 * I * xx); }, x);
  PropagationGrid a = g;
  a.boundary = {BoundaryKind::absorbing_layer, 5.0, 20.0};
  const auto hard = propagate(f0, zero_potential(), g, {0.0, 8.0}).back().samples;
  const auto soft = propagate(f0, zero_potential(), a, {0.0, 8.0}).back().samples;
  CHECK(grid_norm(soft, g.dx()) < 0.2 * grid_norm(hard, g.dx()));
}
