#include "susytb/observables.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace susytb {

const char* to_string(Observable o) {
  switch (o) {
    case Observable::x_mean: return "x_mean";
    case Observable::p_mean: return "p_mean";
    case Observable::x_std: return "x_std";
    case Observable::p_std: return "p_std";
    case Observable::power: return "power";
    case Observable::H_mean: return "H_mean";
    case Observable::H_std: return "H_std";
  }
  return "?";
}

const char* to_string(Normalization n) {
  switch (n) {
    case Normalization::instantaneous_power: return "instantaneous_power";
    case Normalization::initial_power: return "initial_power";
    case Normalization::none: return "none";
  }
  return "?";
}

const char* to_string(Metric m) { return m == Metric::dirac ? "dirac" : "pt"; }

Observable observable_from_string(const std::string& s) {
  for (auto o : {Observable::x_mean, Observable::p_mean, Observable::x_std, Observable::p_std,
                 Observable::power, Observable::H_mean, Observable::H_std}) {
    if (s == to_string(o)) return o;
  }
  throw ValidationError("unknown observable '" + s + "'");
}

Normalization normalization_from_string(const std::string& s) {
  for (auto n : {Normalization::instantaneous_power, Normalization::initial_power, Normalization::none}) {
    if (s == to_string(n)) return n;
  }
  throw ValidationError("unknown normalization '" + s + "'");
}

Metric metric_from_string(const std::string& s) {
  if (s == "dirac") return Metric::dirac;
  if (s == "pt") return Metric::pt;
  throw ValidationError("unknown metric '" + s + "'");
}

FunctionSampler::FunctionSampler(Field psi, Field V, FiniteDifferenceSpec fd)
    : psi_(std::move(psi)), V_(std::move(V)), fd_(fd) {
  if (!psi_ || !V_) throw ValidationError("FunctionSampler needs a state and a potential");
  if (!(fd_.step > 0.0) || !(fd_.max_node_step > 0.0) || fd_.check_stride < 1 ||
      !(fd_.richardson_tolerance > 0.0)) {
    throw ValidationError("invalid finite-difference settings");
  }
}

namespace {

bool uniform_spacing(std::span<const double> x, double& h) {
  if (x.size() < 5) return false;
  h = x[1] - x[0];
  if (!(h > 0.0)) return false;
  for (std::size_t i = 1; i + 1 < x.size(); ++i) {
    if (std::abs(x[i + 1] - x[i] - h) > 1e-9 * h) return false;
  }
  return true;
}

// Five-point stencil values at offsets -2h..2h (index 0..4).
cplx d1_4(const cplx* s, double h) { return (s[0] - 8.0 * s[1] + 8.0 * s[3] - s[4]) / (12.0 * h); }
cplx d2_4(const cplx* s, double h) {
  return (-s[0] + 16.0 * s[1] - 30.0 * s[2] + 16.0 * s[3] - s[4]) / (12.0 * h * h);
}

void check_resolution(double worst_err, double max_d2, double tol) {
  if (worst_err > tol * std::max(max_d2, 1e-300)) {
    std::ostringstream os;
    os << "derivative resolution too coarse: Richardson estimate " << worst_err
       << " exceeds tolerance relative to max|psi''| = " << max_d2;
    throw DerivativeResolutionError(os.str());
  }
}

}  // namespace

void FunctionSampler::sample(double z, std::span<const double> x, StateJet& out) const {
  const std::size_t n = x.size();
  out.f.resize(n);
  out.d1.resize(n);
  out.d2.resize(n);
  double h = 0.0;
  double worst = 0.0, max_d2 = 0.0;
  if (uniform_spacing(x, h) && h <= fd_.max_node_step) {
    constexpr int pad = 4;
    std::vector<cplx> e(n + 2 * pad);
    for (std::size_t i = 0; i < e.size(); ++i) {
      e[i] = psi_(x[0] + (static_cast<double>(i) - pad) * h, z);
    }
    for (std::size_t i = 0; i < n; ++i) {
      const cplx* s = &e[i + pad - 2];
      out.f[i] = s[2];
      out.d1[i] = d1_4(s, h);
      out.d2[i] = d2_4(s, h);
      max_d2 = std::max(max_d2, std::abs(out.d2[i]));
    }
    for (std::size_t i = 0; i < n; i += fd_.check_stride) {
      const cplx* c = &e[i + pad];
      const cplx wide[5] = {c[-4], c[-2], c[0], c[2], c[4]};
      worst = std::max(worst, std::abs(d2_4(wide, 2.0 * h) - out.d2[i]) / 15.0);
    }
  } else {
    const double s = fd_.step;
    for (std::size_t i = 0; i < n; ++i) {
      cplx v[5];
      for (int k = 0; k < 5; ++k) v[k] = psi_(x[i] + (k - 2) * s, z);
      out.f[i] = v[2];
      out.d1[i] = d1_4(v, s);
      out.d2[i] = d2_4(v, s);
      max_d2 = std::max(max_d2, std::abs(out.d2[i]));
      if (i % fd_.check_stride == 0) {
        cplx w[5];
        for (int k = 0; k < 5; ++k) w[k] = psi_(x[i] + 2.0 * (k - 2) * s, z);
        worst = std::max(worst, std::abs(d2_4(w, 2.0 * s) - out.d2[i]) / 15.0);
      }
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(out.f[i].real()) || !std::isfinite(out.f[i].imag())) {
      throw SingularPointError("state is not finite on the quadrature grid", x[i], z);
    }
  }
  check_resolution(worst, max_d2, fd_.richardson_tolerance);
}

void FunctionSampler::potential(double z, std::span<const double> x, std::span<cplx> out) const {
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = V_(x[i], z);
}

std::unique_ptr<StateSampler> exact_mode_sampler(std::shared_ptr<const WaveguideSystem> system,
                                                 ModeKind kind, FiniteDifferenceSpec fd) {
  if (!system) throw ValidationError("exact_mode_sampler needs a system");
  auto s1 = system;
  auto s2 = system;
  return std::make_unique<FunctionSampler>(
      [s1, kind](double x, double z) { return s1->mode(kind, x, z); },
      [s2](double x, double z) { return s2->potential(x, z); }, fd);
}

TBSampler::TBSampler(std::shared_ptr<const TightBindingModel> model,
                     std::function<VectorC(double)> coefficients)
    : model_(std::move(model)), coefficients_(std::move(coefficients)) {
  if (!model_ || !coefficients_) throw ValidationError("TBSampler needs a model and coefficients");
}

void TBSampler::sample(double z, std::span<const double> x, StateJet& out) const {
  const VectorC c = coefficients_(z);
  out.f.resize(x.size());
  out.d1.resize(x.size());
  out.d2.resize(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const auto j = model_->assemble_state_jet(c, x[i]);
    out.f[i] = j[0];
    out.d1[i] = j[1];
    out.d2[i] = j[2];
  }
}

void TBSampler::potential(double z, std::span<const double> x, std::span<cplx> out) const {
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = model_->potential(x[i], z);
}

std::function<VectorC(double)> trajectory_lookup(CoefficientTrajectory tr) {
  auto shared = std::make_shared<const CoefficientTrajectory>(std::move(tr));
  return [shared](double z) -> VectorC {
    const auto& zs = shared->z;
    auto it = std::lower_bound(zs.begin(), zs.end(), z - 1e-12 * std::max(1.0, std::abs(z)));
    if (it == zs.end() || std::abs(*it - z) > 1e-12 * std::max(1.0, std::abs(z))) {
      std::ostringstream os;
      os << "no coefficient sample at z=" << z;
      throw ValidationError(os.str());
    }
    return shared->c[static_cast<std::size_t>(it - zs.begin())];
  };
}

Normalization default_normalization(Observable o, Metric m) {
  if (o == Observable::power) return Normalization::none;
  if (m == Metric::pt && (o == Observable::H_mean || o == Observable::H_std)) {
    return Normalization::initial_power;
  }
  return Normalization::instantaneous_power;
}

ObservableRequest default_request(Observable o, Metric m) {
  return {o, m, default_normalization(o, m)};
}

std::string ObservableSeries::label() const {
  std::string s = to_string(observable);
  if (metric == Metric::pt) s += "_pt";
  return s;
}

namespace {

// Raw metric sums at one z: (psi, A psi) for the needed operators.
struct Sums {
  cplx norm, x1, x2, p1, p2, h1, h2;
  double dirac_power = 0.0;
};

Sums metric_sums(const StateJet& j, std::span<const cplx> V, Metric metric, const QuadratureGrid& g,
                 bool need_h) {
  const auto& x = g.x();
  const auto& w = g.w();
  const int n = g.size();
  Sums s{};
  double tail = 0.0;
  const double strip = 0.875 * g.half_width();
  for (int i = 0; i < n; ++i) {
    const int k = metric == Metric::dirac ? i : g.mirror(i);
    const cplx a = w[i] * std::conj(j.f[i]);
    const double xs = x[k];
    s.norm += a * j.f[k];
    s.x1 += a * xs * j.f[k];
    s.x2 += a * xs * xs * j.f[k];
    s.p1 += a * (-I) * j.d1[k];
    s.p2 += a * (-j.d2[k]);
    const double pw = w[i] * std::norm(j.f[i]);
    s.dirac_power += pw;
    if (std::abs(x[i]) >= strip) tail += pw;
    if (need_h) {
      const cplx hk = -j.d2[k] + V[k] * j.f[k];
      s.h1 += a * hk;
      // (psi, H H psi) after two integrations by parts.
      const cplx adj = -j.d2[i] + std::conj(V[k]) * j.f[i];
      s.h2 += w[i] * std::conj(adj) * hk;
    }
  }
  if (tail > g.spec().tail_tolerance * s.dirac_power) {
    std::ostringstream os;
    os << "state not contained in [-L, L]: outer-strip power fraction " << tail / s.dirac_power;
    throw QuadratureError(os.str());
  }
  return s;
}

cplx divide(cplx v, cplx n) {
  if (std::abs(n) == 0.0) throw QuadratureError("normalization factor vanishes");
  return v / n;
}

}  // namespace

double power(const StateSampler& s, double z, const QuadratureGrid& grid) {
  StateJet j;
  s.sample(z, grid.x(), j);
  double p = 0.0;
  for (int i = 0; i < grid.size(); ++i) p += grid.w()[i] * std::norm(j.f[i]);
  return p;
}

std::vector<ObservableSeries> moment_series(const StateSampler& s,
                                            const std::vector<ObservableRequest>& requests,
                                            const std::vector<double>& z,
                                            const QuadratureGrid& grid) {
  if (z.empty()) throw ValidationError("moment_series needs a z-grid");
  for (std::size_t i = 1; i < z.size(); ++i) {
    if (!(z[i] > z[i - 1])) throw ValidationError("z-grid must be strictly increasing");
  }
  std::vector<ObservableSeries> out;
  bool need_h = false, need_metric[2] = {false, false};
  for (const auto& r : requests) {
    ObservableSeries ser;
    ser.observable = r.observable;
    ser.metric = r.metric;
    ser.normalization = r.normalization;
    ser.z = z;
    ser.values.reserve(z.size());
    out.push_back(std::move(ser));
    need_h = need_h || r.observable == Observable::H_mean || r.observable == Observable::H_std;
    need_metric[r.metric == Metric::pt] = true;
  }
  StateJet jet;
  std::vector<cplx> V(grid.size());
  double initial_power = 0.0;
  for (std::size_t iz = 0; iz < z.size(); ++iz) {
    s.sample(z[iz], grid.x(), jet);
    if (need_h) s.potential(z[iz], grid.x(), V);
    Sums sums[2];
    for (int m = 0; m < 2; ++m) {
      if (need_metric[m]) sums[m] = metric_sums(jet, V, m ? Metric::pt : Metric::dirac, grid, need_h);
    }
    const double dirac_power = need_metric[0] ? sums[0].dirac_power : sums[1].dirac_power;
    if (iz == 0) initial_power = dirac_power;
    for (std::size_t r = 0; r < requests.size(); ++r) {
      const auto& q = requests[r];
      const Sums& S = sums[q.metric == Metric::pt];
      cplx nf = 1.0;
      if (q.normalization == Normalization::instantaneous_power) nf = S.norm;
      if (q.normalization == Normalization::initial_power) nf = initial_power;
      cplx v;
      switch (q.observable) {
        case Observable::power: v = divide(S.norm, nf); break;
        case Observable::x_mean: v = divide(S.x1, nf); break;
        case Observable::p_mean: v = divide(S.p1, nf); break;
        case Observable::H_mean: v = divide(S.h1, nf); break;
        case Observable::x_std: {
          const cplx m1 = divide(S.x1, nf);
          v = std::sqrt(divide(S.x2, nf) - m1 * m1);
          break;
        }
        case Observable::p_std: {
          const cplx m1 = divide(S.p1, nf);
          v = std::sqrt(divide(S.p2, nf) - m1 * m1);
          break;
        }
        case Observable::H_std: {
          const cplx m1 = divide(S.h1, nf);
          v = std::sqrt(divide(S.h2, nf) - m1 * m1);
          break;
        }
      }
      out[r].values.push_back(v);
    }
  }
  return out;
}

ObservableSeries moment_series(const StateSampler& s, const ObservableRequest& request,
                               const std::vector<double>& z, const QuadratureGrid& grid) {
  return moment_series(s, std::vector<ObservableRequest>{request}, z, grid).front();
}

namespace {

std::vector<double> interpolate(std::span<const double> zs, std::span<const double> v,
                                std::span<const double> at) {
  std::vector<double> out(at.size());
  for (std::size_t i = 0; i < at.size(); ++i) {
    const double z = at[i];
    const double tol = 1e-12 * std::max(1.0, std::abs(z));
    if (z < zs.front() - tol || z > zs.back() + tol) {
      throw ValidationError("comparison grid lies outside the approximate series range");
    }
    auto it = std::upper_bound(zs.begin(), zs.end(), z);
    std::size_t k = it == zs.begin() ? 0 : static_cast<std::size_t>(it - zs.begin()) - 1;
    k = std::min(k, zs.size() - 2);
    const double t = (z - zs[k]) / (zs[k + 1] - zs[k]);
    out[i] = v[k] + std::clamp(t, 0.0, 1.0) * (v[k + 1] - v[k]);
  }
  return out;
}

// Hann-windowed periodogram amplitude at omega.
double spectral_magnitude(std::span<const double> z, std::span<const double> a, double omega) {
  cplx s{};
  const double n1 = static_cast<double>(a.size() - 1);
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double w = 0.5 - 0.5 * std::cos(2.0 * kPi * static_cast<double>(i) / n1);
    s += w * a[i] * std::exp(-I * omega * z[i]);
  }
  return std::abs(s);
}

}  // namespace

ComparisonMetrics compare_real_series(std::span<const double> z, std::span<const double> exact,
                                      std::span<const double> approx) {
  const std::size_t n = z.size();
  if (exact.size() != n || approx.size() != n) throw ValidationError("series lengths differ");
  if (n < 4) throw ValidationError("comparison needs at least four samples");
  ComparisonMetrics m;
  double se = 0.0;
  for (std::size_t i = 0; i < n; ++i) se += (exact[i] - approx[i]) * (exact[i] - approx[i]);
  m.rmse = std::sqrt(se / static_cast<double>(n));
  auto [emin, emax] = std::minmax_element(exact.begin(), exact.end());
  auto [amin, amax] = std::minmax_element(approx.begin(), approx.end());
  const double pe = *emax - *emin, pa = *amax - *amin;
  const double scale = std::max({1.0, std::abs(*emax), std::abs(*emin)});
  m.relative_rmse = pe > 0.0 ? m.rmse / pe : (m.rmse == 0.0 ? 0.0 : INFINITY);
  m.amplitude_ratio = pe > 0.0 ? pa / pe : (pa == 0.0 ? 1.0 : INFINITY);
  if (pe <= 1e-12 * scale || pa <= 1e-12 * std::max({1.0, std::abs(*amax), std::abs(*amin)})) {
    return m;  // flat: no dominant oscillation
  }

  // Uniform working grid for the spectral and correlation estimates.
  const double dz = (z.back() - z.front()) / static_cast<double>(n - 1);
  std::vector<double> zu(n);
  for (std::size_t i = 0; i < n; ++i) zu[i] = z.front() + dz * static_cast<double>(i);
  std::vector<double> a = interpolate(z, exact, zu), b = interpolate(z, approx, zu);
  auto demean = [](std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    s /= static_cast<double>(v.size());
    for (double& x : v) x -= s;
  };
  demean(a);
  demean(b);

  const double span = dz * static_cast<double>(n);
  std::size_t kbest = 1;
  double best = -1.0;
  for (std::size_t k = 1; k <= n / 2; ++k) {
    const double v = spectral_magnitude(zu, a, 2.0 * kPi * static_cast<double>(k) / span);
    if (v > best) {
      best = v;
      kbest = k;
    }
  }
  double lo = 2.0 * kPi * (static_cast<double>(kbest) - 1.0) / span;
  double hi = 2.0 * kPi * (static_cast<double>(kbest) + 1.0) / span;
  const double g = 0.5 * (std::sqrt(5.0) - 1.0);
  double c = hi - g * (hi - lo), d = lo + g * (hi - lo);
  double fc = spectral_magnitude(zu, a, c), fd = spectral_magnitude(zu, a, d);
  for (int it = 0; it < 100 && hi - lo > 1e-12 * hi; ++it) {
    if (fc > fd) {
      hi = d;
      d = c;
      fd = fc;
      c = hi - g * (hi - lo);
      fc = spectral_magnitude(zu, a, c);
    } else {
      lo = c;
      c = d;
      fc = fd;
      d = lo + g * (hi - lo);
      fd = spectral_magnitude(zu, a, d);
    }
  }
  const double omega = 0.5 * (lo + hi);
  if (!(omega > 0.0)) return m;
  m.omega = omega;

  const long long half = static_cast<long long>(std::ceil(kPi / (omega * dz))) + 1;
  const long long maxlag = std::min<long long>(half, static_cast<long long>(n) - 2);
  std::vector<double> corr(2 * maxlag + 1);
  for (long long lag = -maxlag; lag <= maxlag; ++lag) {
    // Pearson coefficient over the overlap, so partial overlaps at large
    // lags cannot outscore the aligned one.
    double s = 0.0, saa = 0.0, sbb = 0.0;
    for (long long i = 0; i < static_cast<long long>(n); ++i) {
      const long long j = i + lag;
      if (j < 0 || j >= static_cast<long long>(n)) continue;
      s += a[i] * b[j];
      saa += a[i] * a[i];
      sbb += b[j] * b[j];
    }
    corr[lag + maxlag] = saa > 0.0 && sbb > 0.0 ? s / std::sqrt(saa * sbb) : 0.0;
  }
  const auto imax = static_cast<long long>(std::max_element(corr.begin(), corr.end()) - corr.begin());
  double shift = static_cast<double>(imax - maxlag);
  if (imax > 0 && imax + 1 < static_cast<long long>(corr.size())) {
    const double y0 = corr[imax - 1], y1 = corr[imax], y2 = corr[imax + 1];
    const double den = y0 - 2.0 * y1 + y2;
    if (den < 0.0) shift += 0.5 * (y0 - y2) / den;
  }
  double phase = std::remainder(omega * shift * dz, 2.0 * kPi);
  if (phase <= -kPi) phase += 2.0 * kPi;
  m.phase_shift = phase;
  return m;
}

ComparisonMetrics comparison_metrics(const ObservableSeries& exact, const ObservableSeries& approx) {
  if (exact.values.size() != exact.z.size() || approx.values.size() != approx.z.size()) {
    throw ValidationError("series z and value lengths differ");
  }
  std::vector<double> er(exact.z.size()), ar, ai, zs = exact.z;
  std::vector<double> ei(exact.z.size());
  for (std::size_t i = 0; i < er.size(); ++i) {
    er[i] = exact.values[i].real();
    ei[i] = exact.values[i].imag();
  }
  std::vector<double> ar_raw(approx.z.size()), ai_raw(approx.z.size());
  for (std::size_t i = 0; i < ar_raw.size(); ++i) {
    ar_raw[i] = approx.values[i].real();
    ai_raw[i] = approx.values[i].imag();
  }
  if (approx.z == exact.z) {
    ar = ar_raw;
    ai = ai_raw;
  } else {
    if (approx.z.size() < 2) throw ValidationError("approximate series too short to resample");
    ar = interpolate(approx.z, ar_raw, zs);
    ai = interpolate(approx.z, ai_raw, zs);
  }
  ComparisonMetrics m = compare_real_series(zs, er, ar);
  double se = 0.0;
  for (std::size_t i = 0; i < zs.size(); ++i) {
    se += std::norm(cplx(er[i] - ar[i], ei[i] - ai[i]));
  }
  m.rmse = std::sqrt(se / static_cast<double>(zs.size()));
  auto [emin, emax] = std::minmax_element(er.begin(), er.end());
  const double pe = *emax - *emin;
  m.relative_rmse = pe > 0.0 ? m.rmse / pe : (m.rmse == 0.0 ? 0.0 : INFINITY);
  return m;
}

}  // namespace susytb
