#include "susytb/closed_form.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace susytb {

namespace {

bool finite_all(std::initializer_list<double> v) {
  return std::all_of(v.begin(), v.end(), [](double d) { return std::isfinite(d); });
}

cplx expi(double phi) { return {std::cos(phi), std::sin(phi)}; }

}  // namespace

void HermitianStaticParams::validate() const {
  if (!finite_all({k1, k2})) throw ValidationError("k1, k2 must be finite");
  if (k1 == 0.0) throw ValidationError("k1 must be nonzero");
  if (!(std::abs(k2) > std::abs(k1))) {
    throw ValidationError("regularity requires |k2| > |k1|");
  }
}

void PTStaticParams::validate() const {
  if (!finite_all({k1, k2, alpha})) throw ValidationError("k1, k2, alpha must be finite");
  if (k1 == 0.0) throw ValidationError("k1 must be nonzero");
  if (!(std::abs(k2) > std::abs(k1))) {
    throw ValidationError("regularity requires |k2| > |k1|");
  }
}

void PTDynamicParams::validate() const {
  if (!finite_all({k1, k2, k3, alpha})) {
    throw ValidationError("k1, k2, k3, alpha must be finite");
  }
  if (k2 == 0.0) throw ValidationError("k2 must be nonzero");
  if (!(std::abs(k3) < std::abs(k1) && std::abs(k1) < std::abs(k2))) {
    throw ValidationError("regularity requires |k3| < |k1| < |k2|");
  }
}

bool PTDynamicParams::certified() const {
  const double a2 = std::abs(k2);
  return (1.0 - std::abs(k1) / a2) > std::abs(alpha) * (1.0 + std::abs(k3) / a2);
}

double wronskian_hermitian_static(const HermitianStaticParams& p, double x) {
  return p.k2 * std::cosh(p.k1 * x) * std::cosh(p.k2 * x) -
         p.k1 * std::sinh(p.k1 * x) * std::sinh(p.k2 * x);
}

cplx wronskian_pt_static(const PTStaticParams& p, double x) {
  const double c1 = std::cosh(p.k1 * x), s1 = std::sinh(p.k1 * x);
  const double c2 = std::cosh(p.k2 * x), s2 = std::sinh(p.k2 * x);
  return p.k2 * c2 * cplx(c1, p.alpha * s1) - p.k1 * s2 * cplx(s1, p.alpha * c1);
}

namespace {

struct DynAux {
  double h1, h2, h3, h4, h8;
};

DynAux dyn_aux(const PTDynamicParams& p, double x) {
  const double k1 = p.k1, k2 = p.k2, k3 = p.k3;
  const double c1 = std::cosh(k1 * x), s1 = std::sinh(k1 * x);
  const double c2 = std::cosh(k2 * x), s2 = std::sinh(k2 * x);
  const double c3 = std::cosh(k3 * x), s3 = std::sinh(k3 * x);
  const double k1s = k1 * k1, k2s = k2 * k2, k3s = k3 * k3;
  DynAux a{};
  a.h1 = k2 * c1 * c2 - k1 * s1 * s2;
  a.h2 = k2 * c2 * s3 - k3 * c3 * s2;
  a.h3 = (k1s - k2s) * (2.0 * k1s * s2 * s2 + k2s * (1.0 + std::cosh(2.0 * k1 * x)));
  a.h4 = 2.0 * (k2s - k3s) * (k2s * s3 * s3 - k3s * s2 * s2);
  const double h5 = 2.0 * k1 * k3 * (k1s - 2.0 * k2s + k3s) * c3 * s1 * s2 * s2;
  const double h6 = (4.0 * k2s * k2s - 4.0 * k1s * k3s * s2 * s2 +
                     k2s * (k1s + k3s) * (std::cosh(2.0 * k2 * x) - 3.0)) *
                    c1 * s3;
  const double h7 = k2 * (k1s - k3s) * (k3 * c1 * c3 - k1 * s1 * s3) *
                    std::sinh(2.0 * k2 * x);
  a.h8 = h5 + h6 + h7;
  return a;
}

cplx dyn_potential(const PTDynamicParams& p, const DynAux& a, double x, double z, cplx e) {
  const cplx ei = std::conj(e);
  const double al = p.alpha;
  const cplx num = a.h3 * e + al * al * a.h4 * ei - I * al * a.h8;
  const cplx den = a.h1 * a.h1 * e - al * al * a.h2 * a.h2 * ei + 2.0 * I * al * a.h1 * a.h2;
  const double scale = a.h1 * a.h1 + al * al * a.h2 * a.h2 + 2.0 * std::abs(al * a.h1 * a.h2);
  if (std::abs(den) < kNodeThreshold * scale) {
    std::ostringstream os;
    os << "dynamic potential denominator vanishes at x=" << x << ", z=" << z;
    throw SingularPointError(os.str(), x, z);
  }
  return num / den;
}

cplx dyn_potential(const PTDynamicParams& p, const DynAux& a, double x, double z) {
  return dyn_potential(p, a, x, z, expi((p.k1 * p.k1 - p.k3 * p.k3) * z));
}

}  // namespace

double potential_hermitian_static(const HermitianStaticParams& p, double x) {
  p.validate();
  const double k1 = p.k1, k2 = p.k2;
  const double den = k1 * std::sinh(k1 * x) * std::sinh(k2 * x) -
                     k2 * std::cosh(k1 * x) * std::cosh(k2 * x);
  const double num = (k1 * k1 - k2 * k2) *
                     (k2 * k2 * (1.0 + std::cosh(2.0 * k1 * x)) -
                      k1 * k1 * (1.0 - std::cosh(2.0 * k2 * x)));
  return num / (den * den);
}

cplx potential_pt_static(const PTStaticParams& p, double x) {
  p.validate();
  const double k1 = p.k1, k2 = p.k2, a = p.alpha;
  const cplx w = wronskian_pt_static(p, x);
  const cplx v1 = cplx(std::cosh(k1 * x), a * std::sinh(k1 * x));
  const double s2 = std::sinh(k2 * x);
  return 2.0 * (k1 * k1 - k2 * k2) / (w * w) *
         (k2 * k2 * v1 * v1 + k1 * k1 * (1.0 + a * a) * s2 * s2);
}

cplx wronskian_pt_dynamic(const PTDynamicParams& p, double x, double z) {
  const auto a = dyn_aux(p, x);
  const double k1s = p.k1 * p.k1, k2s = p.k2 * p.k2, k3s = p.k3 * p.k3;
  return expi((k1s + k2s) * z) * a.h1 + I * p.alpha * expi((k2s + k3s) * z) * a.h2;
}

cplx potential_pt_dynamic(const PTDynamicParams& p, double x, double z) {
  p.validate();
  return dyn_potential(p, dyn_aux(p, x), x, z);
}

const char* to_string(ModeKind k) {
  switch (k) {
    case ModeKind::ground: return "ground";
    case ModeKind::excited: return "excited";
    case ModeKind::floquet1: return "floquet1";
    case ModeKind::floquet2: return "floquet2";
    case ModeKind::left: return "left";
    case ModeKind::right: return "right";
  }
  return "?";
}

const char* to_string(SystemKind k) {
  switch (k) {
    case SystemKind::hermitian_static: return "hermitian_static";
    case SystemKind::pt_static: return "pt_static";
    case SystemKind::pt_dynamic: return "pt_dynamic";
  }
  return "?";
}

cplx raw_mode_hermitian_static(const HermitianStaticParams& p, ModeKind kind,
                               double x) {
  const double k1 = p.k1, k2 = p.k2;
  const double w = wronskian_hermitian_static(p, x);
  const double gap = k2 * k2 - k1 * k1;
  switch (kind) {
    case ModeKind::ground: return k2 * gap * std::cosh(k1 * x) / w;
    case ModeKind::excited: return k1 * gap * std::sinh(k2 * x) / w;
    default: throw ValidationError("static raw modes are ground or excited");
  }
}

cplx raw_mode_pt_static(const PTStaticParams& p, ModeKind kind, double x) {
  const double k1 = p.k1, k2 = p.k2;
  const cplx w = wronskian_pt_static(p, x);
  const double gap = k2 * k2 - k1 * k1;
  switch (kind) {
    case ModeKind::ground:
      return k2 * gap * cplx(std::cosh(k1 * x), p.alpha * std::sinh(k1 * x)) / w;
    case ModeKind::excited: return k1 * gap * std::sinh(k2 * x) / w;
    default: throw ValidationError("static raw modes are ground or excited");
  }
}

namespace {

double K_aux(const PTDynamicParams& p, double x) {
  const double k1 = p.k1, k2 = p.k2, k3 = p.k3;
  return k2 * (k1 * k1 - k3 * k3) * std::cosh(k2 * x) * std::cosh((k1 - k3) * x) +
         (k1 + k3) * (k1 * k3 - k2 * k2) * std::sinh(k2 * x) * std::sinh((k1 - k3) * x);
}

}  // namespace

cplx raw_mode_pt_dynamic(const PTDynamicParams& p, ModeKind kind, double x,
                         double z) {
  const double k1 = p.k1, k2 = p.k2, k3 = p.k3, a = p.alpha;
  const double k1s = k1 * k1, k2s = k2 * k2, k3s = k3 * k3;
  const cplx w = wronskian_pt_dynamic(p, x, z);
  switch (kind) {
    case ModeKind::floquet1:
      return expi(2.0 * k2s * z) * k2 *
             (expi(k1s * z) * (k2s - k1s) * std::cosh(k1 * x) +
              I * a * expi(k3s * z) * (k2s - k3s) * std::sinh(k3 * x)) /
             w;
    case ModeKind::floquet2: {
      const double s2 = std::sinh(k2 * x);
      return expi((k1s + k2s + k3s) * z) *
             (expi((k1s - k3s) * z) * k1 * (k1s - k2s) * s2 +
              expi((k3s - k1s) * z) * a * a * k3 * (k3s - k2s) * s2 -
              I * a * K_aux(p, x)) /
             w;
    }
    default: throw ValidationError("dynamic raw modes are floquet1 or floquet2");
  }
}

cplx raw_mode_pt_dynamic_printed_psi2(const PTDynamicParams& p, double x,
                                      double z) {
  const double k1 = p.k1, k2 = p.k2, k3 = p.k3, a = p.alpha;
  const double k1s = k1 * k1, k2s = k2 * k2, k3s = k3 * k3;
  const double s2 = std::sinh(k2 * x);
  return expi((k1s + k2s + k3s) * z) *
         (expi((k1s - k3s) * z) * k1 * (k1s - k2s) * s2 +
          a * a * k3 * (k3s - k2s) * s2 - I * a * K_aux(p, x)) /
         wronskian_pt_dynamic(p, x, z);
}

std::optional<std::pair<long long, long long>> rational_approximation(
    double r, double tol, long long max_denominator) {
  if (!std::isfinite(r)) return std::nullopt;
  long long h0 = 0, h1 = 1, q0 = 1, q1 = 0;
  double x = r;
  for (int it = 0; it < 64; ++it) {
    const double a = std::floor(x);
    if (std::abs(a) > 9e15) break;
    const long long ai = static_cast<long long>(a);
    const long long h2 = ai * h1 + h0;
    const long long q2 = ai * q1 + q0;
    if (q2 > max_denominator) break;
    if (std::abs(r - static_cast<double>(h2) / static_cast<double>(q2)) < tol) {
      return std::make_pair(h2, q2);
    }
    const double frac = x - a;
    if (frac <= 0.0) break;
    x = 1.0 / frac;
    h0 = h1;
    h1 = h2;
    q0 = q1;
    q1 = q2;
  }
  return std::nullopt;
}

Periods periods(const HermitianStaticParams& p) {
  p.validate();
  return {2.0 * kPi / (p.k2 * p.k2 - p.k1 * p.k1), std::nullopt};
}

Periods periods(const PTStaticParams& p) {
  p.validate();
  return {2.0 * kPi / (p.k2 * p.k2 - p.k1 * p.k1), std::nullopt};
}

Periods periods(const PTDynamicParams& p, double tol, long long max_denominator) {
  const double d = p.k1 * p.k1 - p.k3 * p.k3;
  if (d == 0.0 || !std::isfinite(d)) {
    throw ValidationError("potential period undefined for k1^2 == k3^2");
  }
  Periods out{2.0 * kPi / std::abs(d), std::nullopt};
  const auto r1 = rational_approximation(p.k2 * p.k2 / d, tol, max_denominator);
  const auto r2 = rational_approximation(p.k1 * p.k1 / d, tol, max_denominator);
  if (!r1 || !r2) return out;
  const long long q = std::lcm(r1->second, r2->second);
  if (q > max_denominator) return out;
  Repetition rep;
  rep.q = q;
  rep.n = r1->first * (q / r1->second);
  rep.m = r2->first * (q / r2->second);
  rep.T_rep = static_cast<double>(std::lcm(std::abs(rep.n), std::abs(rep.m))) * out.T;
  rep.intensity_revival_periods = q / std::gcd(q, std::abs(rep.n - rep.m));
  out.repetition = rep;
  return out;
}

namespace {

class StaticTable final : public PotentialTable {
 public:
  explicit StaticTable(std::vector<cplx> v) : v_(std::move(v)) {}
  void at(double, std::span<cplx> out) const override {
    std::copy(v_.begin(), v_.end(), out.begin());
  }
  bool z_dependent() const override { return false; }

 private:
  std::vector<cplx> v_;
};

class DynamicTable final : public PotentialTable {
 public:
  DynamicTable(const PTDynamicParams& p, std::span<const double> x)
      : p_(p), x_(x.begin(), x.end()) {
    aux_.reserve(x_.size());
    for (double xi : x_) aux_.push_back(dyn_aux(p, xi));
  }
  void at(double z, std::span<cplx> out) const override {
    const cplx e = expi((p_.k1 * p_.k1 - p_.k3 * p_.k3) * z);
    for (std::size_t i = 0; i < x_.size(); ++i) {
      out[i] = dyn_potential(p_, aux_[i], x_[i], z, e);
    }
  }
  bool z_dependent() const override { return true; }

 private:
  PTDynamicParams p_;
  std::vector<double> x_;
  std::vector<DynAux> aux_;
};

}  // namespace

WaveguideSystem::WaveguideSystem(Config config, double scan_half_width)
    : config_(std::move(config)) {
  std::visit([](const auto& p) { p.validate(); }, config_);
  if (!(scan_half_width > 0.0)) throw ValidationError("scan half-width must be positive");

  const auto [u1, u2] = engine_seeds();
  SampleGrid g;
  g.x_min = -scan_half_width;
  g.x_max = scan_half_width;
  g.nx = 401;
  if (kind() == SystemKind::pt_dynamic) {
    const auto& p = std::get<PTDynamicParams>(config_);
    certified_ = p.certified();
    g.z_min = 0.0;
    g.z_max = 2.0 * periods().T;
    g.nx = 201;
    g.nz = 101;
  }
  regularity_ = regularity_scan(u1, u2, g);
  if (!regularity_.nodeless) {
    std::ostringstream os;
    os << "Wronskian has a node near x=" << regularity_.argmin_x
       << ", z=" << regularity_.argmin_z;
    throw ValidationError(os.str());
  }

  // Normalizations on a wide Simpson grid.
  QuadratureSpec qs;
  qs.nodes = 8192;
  const QuadratureGrid grid(qs, 14.0 / min_k());
  const int n = grid.size();
  std::vector<cplx> m1(n), m2(n);
  for (int i = 0; i < n; ++i) {
    const double x = grid.x()[i];
    m1[i] = raw(is_static() ? ModeKind::ground : ModeKind::floquet1, x, 0.0);
    m2[i] = raw(is_static() ? ModeKind::excited : ModeKind::floquet2, x, 0.0);
  }
  const double n1 = std::sqrt(susytb::inner_product(m1, m1, Metric::dirac, grid).real());
  const double n2 = std::sqrt(susytb::inner_product(m2, m2, Metric::dirac, grid).real());
  norms_ = {1.0 / n1, 1.0 / n2};
  for (int i = 0; i < n; ++i) {
    m1[i] *= norms_.first;
    m2[i] *= norms_.second;
  }
  // Static l <-> (psi_g - psi_e), dynamic l <-> (psi_1 + psi_2).
  const double s = is_static() ? -1.0 : 1.0;
  auto combo = [&](double sign) {
    std::vector<cplx> v(n);
    double pw = 0.0, xm = 0.0;
    for (int i = 0; i < n; ++i) {
      v[i] = m1[i] + sign * m2[i];
      pw += grid.w()[i] * std::norm(v[i]);
      xm += grid.w()[i] * grid.x()[i] * std::norm(v[i]);
    }
    return std::make_pair(1.0 / std::sqrt(pw), xm / pw);
  };
  const auto [na, xa] = combo(s);
  const auto [nb, xb] = combo(-s);
  std::pair<cplx, cplx> a{na, s * na}, b{nb, -s * nb};
  if (xa <= xb) {
    left_ = a;
    right_ = b;
  } else {
    left_ = b;
    right_ = a;
  }
}

SystemKind WaveguideSystem::kind() const noexcept {
  switch (config_.index()) {
    case 0: return SystemKind::hermitian_static;
    case 1: return SystemKind::pt_static;
    default: return SystemKind::pt_dynamic;
  }
}

cplx WaveguideSystem::potential(double x, double z) const {
  switch (kind()) {
    case SystemKind::hermitian_static:
      return potential_hermitian_static(std::get<HermitianStaticParams>(config_), x);
    case SystemKind::pt_static:
      return potential_pt_static(std::get<PTStaticParams>(config_), x);
    case SystemKind::pt_dynamic:
      return potential_pt_dynamic(std::get<PTDynamicParams>(config_), x, z);
  }
  return {};
}

std::unique_ptr<PotentialTable> WaveguideSystem::potential_table(
    std::span<const double> x) const {
  if (kind() == SystemKind::pt_dynamic) {
    return std::make_unique<DynamicTable>(std::get<PTDynamicParams>(config_), x);
  }
  std::vector<cplx> v(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) v[i] = potential(x[i], 0.0);
  return std::make_unique<StaticTable>(std::move(v));
}

cplx WaveguideSystem::raw(ModeKind kind_, double x, double z) const {
  switch (kind()) {
    case SystemKind::hermitian_static:
      return raw_mode_hermitian_static(std::get<HermitianStaticParams>(config_), kind_, x);
    case SystemKind::pt_static:
      return raw_mode_pt_static(std::get<PTStaticParams>(config_), kind_, x);
    case SystemKind::pt_dynamic:
      return raw_mode_pt_dynamic(std::get<PTDynamicParams>(config_), kind_, x, z);
  }
  return {};
}

cplx WaveguideSystem::basis(int j, double x, double z) const {
  if (is_static()) {
    const auto [eg, ee] = energies();
    if (j == 0) return norms_.first * expi(-eg * z) * raw(ModeKind::ground, x, 0.0);
    return norms_.second * expi(-ee * z) * raw(ModeKind::excited, x, 0.0);
  }
  if (j == 0) return norms_.first * raw(ModeKind::floquet1, x, z);
  return norms_.second * raw(ModeKind::floquet2, x, z);
}

cplx WaveguideSystem::mode(ModeKind k, double x, double z) const {
  switch (k) {
    case ModeKind::ground:
    case ModeKind::floquet1:
      if ((k == ModeKind::ground) != is_static()) break;
      return basis(0, x, z);
    case ModeKind::excited:
    case ModeKind::floquet2:
      if ((k == ModeKind::excited) != is_static()) break;
      return basis(1, x, z);
    case ModeKind::left:
      return left_.first * basis(0, x, z) + left_.second * basis(1, x, z);
    case ModeKind::right:
      return right_.first * basis(0, x, z) + right_.second * basis(1, x, z);
  }
  throw ValidationError(std::string("mode kind '") + to_string(k) +
                        "' is not defined for system " + to_string(kind()));
}

std::pair<double, double> WaveguideSystem::energies() const {
  return std::visit(
      [](const auto& p) { return std::make_pair(-p.k2 * p.k2, -p.k1 * p.k1); },
      config_);
}

Periods WaveguideSystem::periods() const {
  return std::visit([](const auto& p) { return susytb::periods(p); }, config_);
}

double WaveguideSystem::min_k() const {
  switch (kind()) {
    case SystemKind::hermitian_static: {
      const auto& p = std::get<HermitianStaticParams>(config_);
      return std::min(std::abs(p.k1), std::abs(p.k2));
    }
    case SystemKind::pt_static: {
      const auto& p = std::get<PTStaticParams>(config_);
      return std::min(std::abs(p.k1), std::abs(p.k2));
    }
    case SystemKind::pt_dynamic: {
      const auto& p = std::get<PTDynamicParams>(config_);
      double m = std::min(std::abs(p.k1), std::abs(p.k2));
      if (p.alpha != 0.0 && p.k3 != 0.0) m = std::min(m, std::abs(p.k3));
      if (p.alpha != 0.0 && p.k3 == 0.0) m = std::min(m, std::abs(p.k1));
      return m;
    }
  }
  return 1.0;
}

std::pair<SeedSuperposition, SeedSuperposition> WaveguideSystem::engine_seeds() const {
  switch (kind()) {
    case SystemKind::hermitian_static: {
      const auto& p = std::get<HermitianStaticParams>(config_);
      return {SeedSuperposition::even(1.0, p.k1), SeedSuperposition::odd(1.0, p.k2)};
    }
    case SystemKind::pt_static: {
      const auto& p = std::get<PTStaticParams>(config_);
      return {SeedSuperposition::even(1.0, p.k1).with({Parity::odd, p.alpha, p.k1}),
              SeedSuperposition::odd(1.0, p.k2)};
    }
    case SystemKind::pt_dynamic:
    default: {
      const auto& p = std::get<PTDynamicParams>(config_);
      return {SeedSuperposition::even(1.0, p.k1).with({Parity::odd, p.alpha, p.k3}),
              SeedSuperposition::odd(1.0, p.k2)};
    }
  }
}

std::pair<SeedSuperposition, SeedSuperposition> WaveguideSystem::engine_free_solutions()
    const {
  return std::visit(
      [this](const auto& p) -> std::pair<SeedSuperposition, SeedSuperposition> {
        auto f_ground = SeedSuperposition::even(1.0, p.k2);
        auto f_excited = SeedSuperposition::odd(1.0, p.k1);
        if (kind() == SystemKind::pt_dynamic) {
          const auto& d = std::get<PTDynamicParams>(config_);
          f_excited = f_excited.with({Parity::even, -d.alpha, d.k3});
        }
        return {f_ground, f_excited};
      },
      config_);
}

std::string WaveguideSystem::name() const {
  std::ostringstream os;
  os.precision(17);
  os << to_string(kind()) << "(";
  std::visit(
      [&](const auto& p) {
        using T = std::decay_t<decltype(p)>;
        os << "k1=" << p.k1 << ", k2=" << p.k2;
        if constexpr (std::is_same_v<T, PTDynamicParams>) os << ", k3=" << p.k3;
        if constexpr (!std::is_same_v<T, HermitianStaticParams>) os << ", alpha=" << p.alpha;
      },
      config_);
  os << ")";
  return os.str();
}

}  // namespace susytb
