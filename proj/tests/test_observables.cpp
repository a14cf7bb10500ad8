#include <doctest.h>

#include <cmath>

#include "susytb/calibrate.hpp"
#include "susytb/observables.hpp"

using namespace susytb;

namespace {

QuadratureGrid grid_for(const WaveguideSystem& s) {
  return QuadratureGrid(QuadratureSpec{}, 14.0 / s.min_k());
}

double spread(const ObservableSeries& s, bool imag = false) {
  double lo = INFINITY, hi = -INFINITY;
  for (auto v : s.values) {
    const double x = imag ? v.imag() : v.real();
    lo = std::min(lo, x);
    hi = std::max(hi, x);
  }
  return hi - lo;
}

}  // namespace

TEST_CASE("parity: even real state has zero means") {
  FunctionSampler s([](double x, double) { return cplx(std::exp(-x * x), 0.0); },
                    [](double, double) { return cplx{}; });
  const QuadratureGrid g(QuadratureSpec{}, 10.0);
  const auto r = moment_series(s, {default_request(Observable::x_mean), default_request(Observable::p_mean),
                                   default_request(Observable::x_std), default_request(Observable::p_std)},
                               {0.0}, g);
  CHECK(std::abs(r[0].values[0]) < 1e-10);
  CHECK(std::abs(r[1].values[0]) < 1e-10);
  // Gaussian e^{-x^2}: |psi|^2 has variance 1/4 and <p^2> = 1.
  CHECK(std::abs(r[2].values[0] - 0.5) < 1e-9);
  CHECK(std::abs(r[3].values[0] - 1.0) < 1e-8);
}

TEST_CASE("moment oracle: boosted displaced Gaussian") {
  const double x0 = 0.7, p0 = 1.3;
  FunctionSampler s([&](double x, double) { return std::exp(-(x - x0) * (x - x0) + I * p0 * x); },
                    [](double x, double) { return cplx(x * x, 0.0); });
  const QuadratureGrid g(QuadratureSpec{}, 10.0);
  const auto r = moment_series(s, {default_request(Observable::x_mean), default_request(Observable::p_mean),
                                   default_request(Observable::H_mean), default_request(Observable::power)},
                               {0.0}, g);
  CHECK(std::abs(r[0].values[0] - x0) < 1e-10);
  CHECK(std::abs(r[1].values[0] - p0) < 1e-8);
  // <H> = <p^2> + <x^2> = (1 + p0^2) + (1/4 + x0^2).
  CHECK(std::abs(r[2].values[0] - (1.0 + p0 * p0 + 0.25 + x0 * x0)) < 1e-8);
  CHECK(std::abs(r[3].values[0] - std::sqrt(kPi / 2.0)) < 1e-10);
}

TEST_CASE("Hermitian static conservation suite") {
  auto sys = std::make_shared<const WaveguideSystem>(HermitianStaticParams{});
  const auto g = grid_for(*sys);
  auto ex = exact_mode_sampler(sys, ModeKind::left);
  const double T = sys->periods().T;
  const auto zs = linspace(0.0, 2.0 * T, 41);
  const auto r = moment_series(*ex, {default_request(Observable::power), default_request(Observable::H_mean),
                                     default_request(Observable::H_std), default_request(Observable::x_std),
                                     default_request(Observable::p_std), default_request(Observable::x_mean)},
                               zs, g);
  CHECK(std::abs(r[0].values[0] - 1.0) < 1e-9);
  CHECK(spread(r[0]) < 1e-8);
  CHECK(spread(r[1]) < 1e-7);
  CHECK(spread(r[2]) < 1e-7);
  CHECK(std::abs(r[1].values[0] + 0.582125) < 1e-7);
  CHECK(std::abs(r[2].values[0] - 0.5 * (0.865 * 0.865 - 0.645 * 0.645)) < 1e-7);
  for (std::size_t i = 0; i < zs.size(); ++i) {
    CHECK((r[3].values[i] * r[4].values[i]).real() >= 0.5 - 1e-6);
  }
  CHECK(r[5].values[0].real() < 0.0);
  CHECK(spread(r[5]) > 2.0);
}

TEST_CASE("quadrature convergence of reported moments") {
  auto sys = std::make_shared<const WaveguideSystem>(PTStaticParams{});
  auto ex = exact_mode_sampler(sys, ModeKind::left);
  QuadratureSpec a, b;
  b.nodes = 8192;
  const double L = 14.0 / sys->min_k();
  const std::vector<ObservableRequest> req = {default_request(Observable::x_mean), default_request(Observable::H_mean),
                                              default_request(Observable::H_mean, Metric::pt),
                                              default_request(Observable::p_std)};
  const auto ra = moment_series(*ex, req, {0.0, 3.0}, QuadratureGrid(a, L));
  const auto rb = moment_series(*ex, req, {0.0, 3.0}, QuadratureGrid(b, L));
  for (std::size_t k = 0; k < req.size(); ++k)
    for (int i = 0; i < 2; ++i) CHECK(std::abs(ra[k].values[i] - rb[k].values[i]) < 1e-8);
}

TEST_CASE("PT static: oscillating power and pseudo-conserved H_P") {
  auto sys = std::make_shared<const WaveguideSystem>(PTStaticParams{});
  const auto g = grid_for(*sys);
  auto ex = exact_mode_sampler(sys, ModeKind::left);
  const double T = sys->periods().T;
  const auto zs = linspace(0.0, 2.0 * T, 41);
  const auto r = moment_series(*ex, {default_request(Observable::power), default_request(Observable::H_mean, Metric::pt),
                                     {Observable::H_mean, Metric::pt, Normalization::instantaneous_power}},
                               zs, g);
  CHECK(spread(r[0]) > 1e-3);
  CHECK(r[1].normalization == Normalization::initial_power);
  CHECK(spread(r[1]) < 1e-4 * std::abs(r[1].values[0]));
  CHECK(spread(r[1], true) < 1e-4 * std::abs(r[1].values[0]));
  // Pseudo-norm-weighted average of the two levels, from an independent quadrature.
  auto fg = [&](double x) { return sys->mode(ModeKind::ground, x, 0.0); };
  auto fe = [&](double x) { return sys->mode(ModeKind::excited, x, 0.0); };
  const cplx wg = inner_product(fg, fg, Metric::pt, g), we = inner_product(fe, fe, Metric::pt, g);
  const auto [Eg, Ee] = sys->energies();
  CHECK(std::abs(r[2].values[5] - (Eg * wg + Ee * we) / (wg + we)) < 1e-6 * std::abs(r[2].values[5]));
  CHECK(std::abs(r[1].values[5] - (Eg * wg + Ee * we) / 2.0) < 1e-7);
}

TEST_CASE("TB sampler matches the coefficient algebra") {
  auto m = std::make_shared<const TightBindingModel>(
      make_static_model(CalibrationMode::spectral_hermitian, {0.745396, 1.662109, 0.0}));
  VectorC c(2);
  c << cplx(0.6, 0.1), cplx(-0.3, 0.4);
  c /= std::sqrt(m->power(c));
  TBSampler s(m, [c](double) { return c; });
  const QuadratureGrid g(QuadratureSpec{}, 14.0 / 0.645);
  const auto r = moment_series(s, {default_request(Observable::power), default_request(Observable::H_mean)}, {0.0}, g);
  CHECK(std::abs(r[0].values[0] - 1.0) < 1e-9);
  CHECK(std::abs(r[1].values[0] - c.dot(m->H() * c)) < 1e-8);
  CHECK_THROWS_AS(trajectory_lookup({{0.0, 1.0}, {c, c}, 0})(0.5), ValidationError);
  CHECK(trajectory_lookup({{0.0, 1.0}, {c, c}, 0})(1.0) == c);
}

TEST_CASE("coarse derivative grids are rejected") {
  FiniteDifferenceSpec fd;
  fd.step = 0.2;
  fd.max_node_step = 1e-9;
  FunctionSampler s([](double x, double) { return cplx(1.0 / std::cosh(4.0 * x), 0.0); },
                    [](double, double) { return cplx{}; }, fd);
  const QuadratureGrid g(QuadratureSpec{}, 10.0);
  CHECK_THROWS_AS(moment_series(s, default_request(Observable::p_std), {0.0}, g), DerivativeResolutionError);
}

TEST_CASE("states leaking past the domain are rejected") {
  FunctionSampler s([](double x, double) { return cplx(std::exp(-0.01 * x * x), 0.0); },
                    [](double, double) { return cplx{}; });
  const QuadratureGrid g(QuadratureSpec{}, 10.0);
  CHECK_THROWS_AS(moment_series(s, default_request(Observable::x_mean), {0.0}, g), QuadratureError);
}

TEST_CASE("comparison metrics") {
  const auto z = linspace(0.0, 40.0, 801);
  const double w = 0.7;
  ObservableSeries a, b, c;
  a.z = b.z = c.z = z;
  for (double zi : z) {
    a.values.emplace_back(std::sin(w * zi), 0.0);
    b.values.emplace_back(-std::sin(w * zi), 0.0);
    c.values.emplace_back(0.5 * std::sin(w * (zi - 0.4)), 0.0);
  }
  const auto self = comparison_metrics(a, a);
  CHECK(self.rmse == 0.0);
  CHECK(self.amplitude_ratio == doctest::Approx(1.0));
  REQUIRE(self.phase_shift);
  CHECK(std::abs(*self.phase_shift) < 1e-9);
  CHECK(*self.omega == doctest::Approx(w).epsilon(1e-3));
  const auto anti = comparison_metrics(a, b);
  REQUIRE(anti.phase_shift);
  CHECK(std::abs(std::abs(*anti.phase_shift) - kPi) < 0.05);
  const auto lag = comparison_metrics(a, c);
  CHECK(*lag.phase_shift == doctest::Approx(w * 0.4).epsilon(0.02));
  CHECK(lag.amplitude_ratio == doctest::Approx(0.5).epsilon(1e-3));
  ObservableSeries flat;
  flat.z = z;
  flat.values.assign(z.size(), cplx(1.0, 0.0));
  CHECK_FALSE(comparison_metrics(flat, flat).phase_shift);
  // Resampling onto the exact grid.
  ObservableSeries coarse;
  coarse.z = linspace(0.0, 40.0, 4001);
  for (double zi : coarse.z) coarse.values.emplace_back(std::sin(w * zi), 0.0);
  CHECK(comparison_metrics(a, coarse).rmse < 1e-4);
}

TEST_CASE("string round trips") {
  for (auto o : {Observable::x_mean, Observable::p_mean, Observable::x_std, Observable::p_std,
                 Observable::power, Observable::H_mean, Observable::H_std}) {
    CHECK(observable_from_string(to_string(o)) == o);
  }
  CHECK(normalization_from_string("initial_power") == Normalization::initial_power);
  CHECK(metric_from_string("pt") == Metric::pt);
  CHECK_THROWS_AS(observable_from_string("bogus"), ValidationError);
  ObservableSeries s;
  s.observable = Observable::H_mean;
  s.metric = Metric::pt;
  CHECK(s.label() == "H_mean_pt");
}
