#include <doctest.h>

#include <Eigen/Eigenvalues>
#include <cmath>

#include "susytb/tight_binding.hpp"
#include "test_util.hpp"

using namespace susytb;
using namespace susytb::test;

TEST_CASE("single-well modes solve their own well equation") {
  for (WellBasis b : {WellBasis{WellKind::hermitian, 0.8, 0.0, 0.3},
                      WellBasis{WellKind::pt, 1.1, 0.21, -0.4}}) {
    auto f = [&](double x) { return single_well_mode(b, x); };
    for (double x : linspace(-5, 5, 41)) {
      const auto jet = single_well_mode_jet(b, x);
      CHECK(std::abs(jet[0] - f(x)) < 1e-14);
      CHECK(std::abs(jet[1] - fd1(f, x, 1e-3)) < 1e-9);
      CHECK(std::abs(jet[2] - fd2_6(f, x, 1e-2)) < 1e-8);
      CHECK(std::abs(jet[2] - (single_well_potential(b, x) - b.beta()) * jet[0]) < 1e-12);
    }
  }
}

TEST_CASE("single-well normalization") {
  QuadratureSpec qs;
  const QuadratureGrid g(qs, 30.0);
  WellBasis h{WellKind::hermitian, 0.7, 0.0, 0.0};
  auto fh = [&](double x) { return single_well_mode(h, x); };
  CHECK(std::abs(inner_product(fh, fh, Metric::dirac, g) - 1.0) < 1e-10);
  WellBasis p{WellKind::pt, 1.2, 0.3, 0.0};
  auto fp = [&](double x) { return single_well_mode(p, x); };
  CHECK(std::abs(inner_product(fp, fp, Metric::pt, g) - 1.0) < 1e-10);
  CHECK_THROWS_AS((WellBasis{WellKind::hermitian, 1.0, 0.2, 0.0}.validate()), ValidationError);
  CHECK_THROWS_AS((WellBasis{WellKind::pt, 0.0, 0.2, 0.0}.validate()), ValidationError);
}

TEST_CASE("overlap kappa") {
  CHECK(kappa_hermitian_closed_form(0.7454, 1.66214) == doctest::Approx(0.419).epsilon(2e-3));
  CHECK(kappa_hermitian_closed_form(1.045, 1.77114) == doctest::Approx(0.18).epsilon(1e-2));
  for (auto [k, x0] : {std::pair{0.7454, 1.66214}, std::pair{1.045, 1.77114}, std::pair{2.0, 0.3}}) {
    const cplx q = overlap_kappa(WellBasis{WellKind::hermitian, k, 0.0, 0.0}, x0);
    CHECK(std::abs(q - kappa_hermitian_closed_form(k, x0)) < 1e-9);
  }
  const cplx kp = overlap_kappa(WellBasis{WellKind::pt, 1.14, 0.21, 0.0}, 1.65);
  CHECK(std::abs(kp) == doctest::Approx(0.16).epsilon(0.125));
}

TEST_CASE("single isolated well has beta as its only level") {
  TightBindingModel m({WellBasis{WellKind::hermitian, 0.9, 0.0, 0.5}}, Metric::dirac,
                      PotentialSource::tb_sum);
  CHECK(std::abs(m.S()(0, 0) - 1.0) < 1e-10);
  CHECK(std::abs(m.H()(0, 0) + 0.81) < 1e-10);
  TightBindingModel p({WellBasis{WellKind::pt, 1.1, 0.2, 0.0}}, Metric::pt, PotentialSource::tb_sum);
  CHECK(std::abs(p.H()(0, 0) + 1.21) < 1e-10);
}

TEST_CASE("hermitian two-well spectrum") {
  const double k = 0.7454, x0 = 1.66214;
  auto m = TightBindingModel::two_well(WellKind::hermitian, k, x0, 0.0, Metric::dirac,
                                       PotentialSource::tb_sum);
  const auto sp = m.solve_spectrum();
  REQUIRE(sp.energies.size() == 2);
  REQUIRE(sp.energies_quadratic);
  for (int i = 0; i < 2; ++i) {
    CHECK(std::abs(sp.energies[i] - sp.energies_generalized[i]) < 1e-10);
    CHECK(std::abs(sp.energies[i] - (*sp.energies_quadratic)[i]) < 1e-10);
    CHECK(std::abs(sp.energies[i].imag()) < 1e-12);
  }
  // Symmetric pair: E = (H11 -+ H12) / (1 -+ S12) in the even/odd basis.
  const cplx s12 = m.S()(0, 1), h11 = m.H()(0, 0), h12 = m.H()(0, 1);
  const cplx e_even = (h11 + h12) / (1.0 + s12), e_odd = (h11 - h12) / (1.0 - s12);
  CHECK(std::abs(sp.energies[0] - std::min(e_even.real(), e_odd.real())) < 1e-10);
  CHECK(std::abs(sp.energies[1] - std::max(e_even.real(), e_odd.real())) < 1e-10);
  CHECK(std::abs(s12 - kappa_hermitian_closed_form(k, x0)) < 1e-9);
  // H is Hermitian; the Gram-Schmidt basis is S-orthonormal.
  CHECK((m.H() - m.H().adjoint()).norm() < 1e-12);
  const auto& T = sp.gram_schmidt.T;
  CHECK((T.adjoint() * m.S() * T - MatrixC::Identity(2, 2)).norm() < 1e-12);
  for (int i = 0; i < 2; ++i) CHECK(m.power(sp.vectors.col(i)) == doctest::Approx(1.0));
  // Eigenvectors solve the generalized problem.
  for (int i = 0; i < 2; ++i) {
    const VectorC c = sp.vectors.col(i);
    CHECK((m.H() * c - sp.energies[i] * (m.S() * c)).norm() < 1e-10);
  }
}

TEST_CASE("PT two-well model under the PT metric") {
  auto m = TightBindingModel::two_well(WellKind::pt, 1.14, 1.65, 0.21, Metric::pt,
                                       PotentialSource::tb_sum);
  // S under the PT metric is Hermitian; off-diagonal close to one.
  CHECK((m.S() - m.S().adjoint()).norm() < 1e-12);
  CHECK(std::abs(m.S()(0, 1) - 1.0) < 0.05);
  const auto sp = m.solve_spectrum();
  REQUIRE(sp.energies_quadratic);
  for (int i = 0; i < 2; ++i) {
    CHECK(std::abs(sp.energies[i] - sp.energies_generalized[i]) < 1e-9);
    CHECK(std::abs(sp.energies[i] - (*sp.energies_quadratic)[i]) < 1e-9);
  }
  // Pseudo-norms carry a sign under the indefinite metric.
  for (auto e : sp.gram_schmidt.eta) CHECK(std::abs(std::abs(e) - 1.0) < 1e-10);
}

TEST_CASE("coincident wells are rejected as ill-conditioned") {
  std::vector<WellBasis> w = {{WellKind::hermitian, 1.0, 0.0, 0.5}, {WellKind::hermitian, 1.0, 0.0, 0.5}};
  CHECK_THROWS_AS(TightBindingModel(w, Metric::dirac, PotentialSource::tb_sum), SolverError);
  CHECK_THROWS_AS(TightBindingModel::two_well(WellKind::hermitian, 1.0, -1.0, 0.0, Metric::dirac,
                                              PotentialSource::tb_sum),
                  ValidationError);
  CHECK_THROWS_AS(TightBindingModel::two_well(WellKind::hermitian, 1.0, 1.0, 0.0, Metric::dirac,
                                              PotentialSource::exact_static),
                  ValidationError);
}

TEST_CASE("coefficient ODE agrees with spectral evolution") {
  auto m = TightBindingModel::two_well(WellKind::hermitian, 0.7454, 1.66214, 0.0, Metric::dirac,
                                       PotentialSource::tb_sum);
  const auto sp = m.solve_spectrum();
  VectorC c0(2);
  c0 << 1.0, 0.0;
  const VectorC d = sp.vectors.colPivHouseholderQr().solve(c0);
  const std::vector<double> zs = linspace(0.0, 20.0, 11);
  StepControl fixed;
  fixed.step = 0.005;
  StepControl adaptive;
  adaptive.adaptive = true;
  adaptive.step = 0.1;
  adaptive.tolerance = 1e-12;
  const auto a = m.propagate_coefficients(c0, zs, fixed);
  const auto b = m.propagate_coefficients(c0, zs, adaptive);
  CHECK(b.steps < a.steps);
  for (std::size_t i = 0; i < zs.size(); ++i) {
    VectorC exact = VectorC::Zero(2);
    for (int n = 0; n < 2; ++n) exact += d(n) * std::exp(-I * sp.energies[n] * zs[i]) * sp.vectors.col(n);
    CHECK((a.c[i] - exact).norm() < 1e-9);
    CHECK((b.c[i] - exact).norm() < 1e-9);
    CHECK(m.power(a.c[i]) == doctest::Approx(m.power(c0)).epsilon(1e-10));
  }
  CHECK_THROWS_AS(m.propagate_coefficients(c0, {1.0, 0.5}, fixed), ValidationError);
  CHECK_THROWS_AS(m.propagate_coefficients(VectorC::Zero(3), zs, fixed), ValidationError);
}

TEST_CASE("Floquet analysis of a static model recovers its eigenvalues") {
  auto m = TightBindingModel::two_well(WellKind::pt, 1.14, 1.65, 0.21, Metric::pt,
                                       PotentialSource::tb_sum);
  const auto sp = m.solve_spectrum();
  StepControl ctl;
  ctl.step = 0.002;
  const double T = 3.7;
  const auto fr = m.floquet_monodromy(T, ctl, {sp.energies[0].real(), sp.energies[1].real()});
  for (int i = 0; i < 2; ++i) {
    CHECK(std::abs(fr.quasi_energies[i] - sp.energies[i]) < 1e-9);
    CHECK(m.power(fr.floquet_vectors.col(i)) == doctest::Approx(1.0));
  }
  CHECK(fr.reconstruction_error < 1e-12);
  CHECK(fr.eigenvector_condition < 1e3);
}

TEST_CASE("dynamic model uses the exact z-dependent potential") {
  auto sys = std::make_shared<const WaveguideSystem>(PTDynamicParams{});
  auto m = TightBindingModel::two_well(WellKind::hermitian, 1.045, 1.77114, 0.0, Metric::dirac,
                                       PotentialSource::exact_dynamic, sys);
  CHECK(m.z_dependent());
  CHECK_THROWS_AS(m.solve_spectrum(), ValidationError);
  CHECK_THROWS_AS(m.assemble_matrices(), ValidationError);
  const double TV = sys->periods().T;
  CHECK((m.H(0.3) - m.H(0.3 + TV)).norm() < 1e-10);
  CHECK((m.H(0.3) - m.H(1.1)).norm() > 1e-4);
  // Direct quadrature of one element.
  const double z = 0.7;
  const auto& w = m.wells();
  auto f = [&](double x) { return std::conj(single_well_mode(w[0], x)); };
  auto g = [&](double x) {
    return (sys->potential(x, z) - single_well_potential(w[1], x) - w[1].k * w[1].k) *
           single_well_mode(w[1], x);
  };
  cplx direct{};
  const auto& grid = m.grid();
  for (int i = 0; i < grid.size(); ++i) direct += grid.w()[i] * f(grid.x()[i]) * g(grid.x()[i]);
  CHECK(std::abs(m.H(z)(0, 1) - direct) < 1e-10);
  StepControl ctl;
  ctl.step = 0.01;
  const auto fr = m.floquet_monodromy(TV, ctl, {-1.21, -1.0});
  CHECK(fr.reconstruction_error < 1e-10);
  for (auto e : fr.quasi_energies) CHECK(std::isfinite(e.real()));
  CHECK(std::abs(fr.quasi_energies[0].real() + 1.21) < std::abs(fr.quasi_energies[0].real() + 1.0));
}

TEST_CASE("assembled states") {
  auto m = TightBindingModel::two_well(WellKind::pt, 1.14, 1.65, 0.21, Metric::pt,
                                       PotentialSource::tb_sum);
  VectorC c(2);
  c << cplx(0.3, 0.1), cplx(-0.2, 0.5);
  auto f = [&](double x) { return m.assemble_state(c, x); };
  for (double x : {-2.0, 0.1, 1.7}) {
    const auto jet = m.assemble_state_jet(c, x);
    CHECK(std::abs(jet[0] - f(x)) < 1e-14);
    CHECK(std::abs(jet[1] - fd1(f, x, 1e-3)) < 1e-9);
    CHECK(std::abs(jet[2] - fd2_6(f, x, 1e-2)) < 1e-8);
  }
  auto g = [&](double x) { return m.assemble_state(c, x); };
  CHECK(m.power(c) == doctest::Approx(inner_product(g, g, Metric::dirac, m.grid()).real()));
}

TEST_CASE("scalar coefficient ODE is a pure exponential") {
  TightBindingModel m({WellBasis{WellKind::hermitian, 0.9, 0.0, 0.0}}, Metric::dirac,
                      PotentialSource::tb_sum);
  VectorC c0(1);
  c0 << cplx(0.6, 0.8);
  StepControl ctl;
  ctl.step = 0.005;
  const auto zs = linspace(0.0, 50.0, 26);
  const auto tr = m.propagate_coefficients(c0, zs, ctl);
  const cplx rate = m.H()(0, 0) / m.S()(0, 0);
  for (std::size_t i = 0; i < zs.size(); ++i) {
    CHECK(std::abs(tr.c[i](0) - c0(0) * std::exp(-I * rate * zs[i])) < 1e-9);
  }
}

TEST_CASE("RK4 convergence and S-weighted power conservation") {
  auto m = TightBindingModel::two_well(WellKind::hermitian, 0.7454, 1.66214, 0.0, Metric::dirac,
                                       PotentialSource::tb_sum);
  VectorC c0(2);
  c0 << 1.0, 0.0;
  const std::vector<double> zs = {0.0, 10.0};
  auto run = [&](double h) {
    StepControl ctl;
    ctl.step = h;
    return m.propagate_coefficients(c0, zs, ctl).c.back();
  };
  const VectorC a = run(0.2), b = run(0.1), c = run(0.05);
  const VectorC ref = c + (c - b) / 15.0;
  CHECK((a - ref).norm() / (b - ref).norm() >= 15.0);
  StepControl ctl;
  ctl.step = 0.01;
  const auto tr = m.propagate_coefficients(c0, linspace(0.0, 40.0, 41), ctl);
  const double s12 = m.S()(0, 1).real();
  for (const auto& ci : tr.c) {
    const double p = std::norm(ci(0)) + std::norm(ci(1)) + 2.0 * (std::conj(ci(0)) * ci(1)).real() * s12;
    CHECK(std::abs(p - 1.0) < 1e-8);
  }
}

TEST_CASE("hermitian layout properties") {
  double prev = 1.0;
  for (double x0 : {0.5, 1.0, 2.0, 3.0, 5.0}) {
    const double kap = kappa_hermitian_closed_form(0.8, x0);
    CHECK(kap < prev);
    prev = kap;
  }
  auto near = TightBindingModel::two_well(WellKind::hermitian, 0.8, 1.5, 0.0, Metric::dirac,
                                          PotentialSource::tb_sum);
  auto far = TightBindingModel::two_well(WellKind::hermitian, 0.8, 12.0, 0.0, Metric::dirac,
                                         PotentialSource::tb_sum);
  const auto en = near.solve_spectrum().energies, ef = far.solve_spectrum().energies;
  CHECK(std::abs(ef[1] - ef[0]) < std::abs(en[1] - en[0]));
  CHECK(std::abs(ef[0] + 0.64) < 1e-5);
  CHECK(std::abs(far.S()(0, 1)) < 1e-5);
  CHECK(std::abs(far.H()(0, 1)) < 1e-5);
  CHECK(std::abs(near.H()(0, 0) - near.H()(1, 1)) < 1e-12);
  CHECK((near.S().imag()).norm() < 1e-14);
  CHECK((near.H() - near.H().transpose()).norm() < 1e-12);

  VectorC e(2), o(2);
  e << 1.0, 1.0;
  o << 1.0, -1.0;
  for (double x : {0.3, 1.1, 2.7}) {
    CHECK(std::abs(near.assemble_state(e, x) - near.assemble_state(e, -x)) < 1e-12);
    CHECK(std::abs(near.assemble_state(o, x) + near.assemble_state(o, -x)) < 1e-12);
  }
  VectorC u(2);
  u << 1.0, 0.0;
  CHECK(std::abs(near.assemble_state(u, 0.4) - single_well_mode(near.wells()[0], 0.4)) < 1e-15);
}

TEST_CASE("PT wells: pseudo-norm sign and two-well PxT symmetry") {
  const WellBasis b{WellKind::pt, 1.14, 0.21, 0.0};
  for (double x : {0.2, 0.9, 2.0}) {
    CHECK(std::abs(single_well_potential(b, x) -
                   single_well_potential({WellKind::hermitian, 1.14, 0.0, 0.0}, x)) > 1e-3);
    CHECK(std::abs(single_well_potential({WellKind::pt, 1.14, 0.0, 0.0}, x) -
                   single_well_potential({WellKind::hermitian, 1.14, 0.0, 0.0}, x)) < 1e-15);
  }
  auto m = TightBindingModel::two_well(WellKind::pt, 1.14, 1.65, 0.21, Metric::pt,
                                       PotentialSource::tb_sum);
  double worst = 0.0;
  for (double x : linspace(-6.0, 6.0, 241)) {
    worst = std::max(worst, std::abs(m.potential(x) - std::conj(m.potential(-x))));
  }
  CHECK(worst < 1e-12);
  const auto gs = m.gram_schmidt();
  for (auto nu : gs.pseudo_norms) CHECK(std::abs(nu) > 1e-3);
  // The diagonal PT products of displaced wells are small but nonzero.
  CHECK(std::abs(m.S()(0, 0)) > 1e-3);
  CHECK(std::abs(m.S()(0, 0)) < 0.5);
}
