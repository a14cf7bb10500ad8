#include "susytb/tight_binding.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace susytb {

void WellBasis::validate() const {
  if (!std::isfinite(k) || k == 0.0) throw ValidationError("well wavenumber k must be finite and nonzero");
  if (!std::isfinite(alpha_tilde) || !std::isfinite(center)) {
    throw ValidationError("well alpha_tilde and center must be finite");
  }
  if (kind == WellKind::hermitian && alpha_tilde != 0.0) {
    throw ValidationError("hermitian wells require alpha_tilde = 0");
  }
}

double WellBasis::norm_constant() const {
  const double a = kind == WellKind::pt ? alpha_tilde : 0.0;
  return std::sqrt((1.0 + a * a) / (2.0 * std::abs(k)));
}

namespace {

// v = cosh u + i a sinh u with u = k (x - center).
cplx well_denominator(const WellBasis& b, double x) {
  const double u = b.k * (x - b.center);
  const double a = b.kind == WellKind::pt ? b.alpha_tilde : 0.0;
  return {std::cosh(u), a * std::sinh(u)};
}

}  // namespace

cplx single_well_potential(const WellBasis& b, double x) {
  const double a = b.kind == WellKind::pt ? b.alpha_tilde : 0.0;
  const cplx v = well_denominator(b, x);
  return -2.0 * b.k * b.k * (1.0 + a * a) / (v * v);
}

cplx single_well_mode(const WellBasis& b, double x) {
  return b.norm_constant() * b.k / well_denominator(b, x);
}

std::array<cplx, 3> single_well_mode_jet(const WellBasis& b, double x) {
  const double k = b.k;
  const double a = b.kind == WellKind::pt ? b.alpha_tilde : 0.0;
  const double u = k * (x - b.center);
  const cplx v(std::cosh(u), a * std::sinh(u));
  const cplx vp = k * cplx(std::sinh(u), a * std::cosh(u));
  const double ck = b.norm_constant() * k;
  const cplx phi = ck / v;
  const cplx d1 = -ck * vp / (v * v);
  // phi'' = (V0 + k^2) phi.
  const cplx d2 = phi * (k * k - 2.0 * k * k * (1.0 + a * a) / (v * v));
  return {phi, d1, d2};
}

double kappa_hermitian_closed_form(double k, double x0) {
  const double a = std::abs(k * x0);
  if (a == 0.0) return 1.0;
  return 2.0 * a / std::sinh(2.0 * a);
}

cplx overlap_kappa(const WellBasis& b, double x0, const QuadratureGrid& grid) {
  if (!(x0 > 0.0)) throw ValidationError("overlap_kappa requires x0 > 0");
  WellBasis left = b, right = b;
  left.center = -x0;
  right.center = x0;
  return susytb::inner_product([&](double x) { return single_well_mode(left, x); },
                       [&](double x) { return single_well_mode(right, x); }, Metric::dirac, grid);
}

cplx overlap_kappa(const WellBasis& b, double x0) {
  b.validate();
  QuadratureSpec qs;
  return overlap_kappa(b, x0, QuadratureGrid(qs, 12.0 / std::abs(b.k) + x0));
}

const char* to_string(PotentialSource s) {
  switch (s) {
    case PotentialSource::tb_sum: return "tb_sum";
    case PotentialSource::exact_static: return "exact_static";
    case PotentialSource::exact_dynamic: return "exact_dynamic";
  }
  return "?";
}

namespace {

QuadratureGrid make_grid(const std::vector<WellBasis>& wells, QuadratureSpec quad,
                         const WaveguideSystem* system) {
  if (wells.empty()) throw ValidationError("tight-binding model needs at least one well");
  double kmin = std::abs(wells.front().k), cmax = 0.0;
  for (const auto& w : wells) {
    w.validate();
    kmin = std::min(kmin, std::abs(w.k));
    cmax = std::max(cmax, std::abs(w.center));
  }
  if (quad.half_width > 0.0) return QuadratureGrid(quad, quad.half_width);
  if (system) kmin = std::min(kmin, system->min_k());
  return QuadratureGrid(quad, 12.0 / kmin + cmax);
}

}  // namespace

TightBindingModel::TightBindingModel(std::vector<WellBasis> wells, Metric metric,
                                     PotentialSource source,
                                     std::shared_ptr<const WaveguideSystem> system,
                                     QuadratureSpec quad)
    : wells_(std::move(wells)),
      metric_(metric),
      source_(source),
      system_(std::move(system)),
      grid_(make_grid(wells_, quad, system_.get())) {
  if (source_ != PotentialSource::tb_sum && !system_) {
    throw ValidationError("exact potential sources need a WaveguideSystem");
  }
  if (source_ == PotentialSource::exact_static && system_ && !system_->is_static()) {
    throw ValidationError("exact_static source needs a static system");
  }
  if (source_ == PotentialSource::exact_dynamic && system_ && system_->is_static()) {
    throw ValidationError("exact_dynamic source needs the dynamic system");
  }
  build();
}

TightBindingModel TightBindingModel::two_well(WellKind kind, double k, double x0,
                                              double alpha_tilde, Metric metric,
                                              PotentialSource source,
                                              std::shared_ptr<const WaveguideSystem> system,
                                              QuadratureSpec quad) {
  if (!(x0 > 0.0) || !std::isfinite(x0)) throw ValidationError("well offset x0 must be positive");
  const double a = kind == WellKind::pt ? alpha_tilde : 0.0;
  std::vector<WellBasis> wells = {{kind, k, a, x0}, {kind, k, a, -x0}};
  return TightBindingModel(std::move(wells), metric, source, std::move(system), quad);
}

void TightBindingModel::build() {
  const int n = size();
  const int m = grid_.size();
  const auto& x = grid_.x();
  const auto& w = grid_.w();
  std::vector<std::vector<cplx>> phi(n, std::vector<cplx>(m));
  std::vector<std::vector<cplx>> v0(n, std::vector<cplx>(m));
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < m; ++i) {
      phi[j][i] = single_well_mode(wells_[j], x[i]);
      v0[j][i] = single_well_potential(wells_[j], x[i]);
    }
  }
  source_index_.resize(m);
  for (int i = 0; i < m; ++i) source_index_[i] = metric_ == Metric::dirac ? i : grid_.mirror(i);

  S_.resize(n, n);
  S_dirac_.resize(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      S_(i, j) = susytb::inner_product(phi[i], phi[j], metric_, grid_);
      S_dirac_(i, j) = susytb::inner_product(phi[i], phi[j], Metric::dirac, grid_);
    }
  }

  std::vector<cplx> vstatic(m, cplx{});
  if (source_ == PotentialSource::tb_sum) {
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < m; ++i) vstatic[i] += v0[j][i];
  } else {
    table_ = system_->potential_table(x);
    if (source_ == PotentialSource::exact_static) table_->at(0.0, vstatic);
  }

  pair_.assign(static_cast<std::size_t>(n) * n, std::vector<cplx>(m));
  H_static_.resize(n, n);
  for (int a = 0; a < n; ++a) {
    for (int b = 0; b < n; ++b) {
      auto& p = pair_[a * n + b];
      cplx h{};
      const double kb2 = wells_[b].k * wells_[b].k;
      for (int i = 0; i < m; ++i) {
        const int s = source_index_[i];
        p[i] = w[i] * std::conj(phi[a][i]) * phi[b][s];
        h += p[i] * (vstatic[s] - v0[b][s] - kb2);
      }
      H_static_(a, b) = h;
    }
  }

  Eigen::JacobiSVD<MatrixC> svd(S_);
  const auto& sv = svd.singularValues();
  const double cond = sv(0) / sv(sv.size() - 1);
  if (!std::isfinite(cond) || cond > 1e12) {
    std::ostringstream os;
    os << "overlap matrix is ill-conditioned (condition number " << cond << ")";
    throw SolverError(os.str());
  }
  S_inv_ = S_.inverse();
}

MatrixC TightBindingModel::H(double z) const {
  if (!z_dependent()) return H_static_;
  const int n = size();
  const int m = grid_.size();
  std::vector<cplx> v(m);
  table_->at(z, v);
  MatrixC h = H_static_;
  for (int a = 0; a < n; ++a) {
    for (int b = 0; b < n; ++b) {
      const auto& p = pair_[a * n + b];
      cplx s{};
      for (int i = 0; i < m; ++i) s += p[i] * v[source_index_[i]];
      h(a, b) += s;
    }
  }
  return h;
}

TightBindingModel::Matrices TightBindingModel::assemble_matrices(std::optional<double> z) const {
  if (z_dependent() && !z) throw ValidationError("z-dependent model needs a z value");
  return {S_, H(z.value_or(0.0))};
}

cplx TightBindingModel::potential(double x, double z) const {
  if (source_ == PotentialSource::tb_sum) {
    cplx v{};
    for (const auto& w : wells_) v += single_well_potential(w, x);
    return v;
  }
  return system_->potential(x, source_ == PotentialSource::exact_dynamic ? z : 0.0);
}

GramSchmidt TightBindingModel::gram_schmidt(double breakdown) const {
  const int n = size();
  GramSchmidt gs;
  gs.T = MatrixC::Zero(n, n);
  for (int k = 0; k < n; ++k) {
    VectorC chi = VectorC::Unit(n, k);
    for (int mm = 0; mm < k; ++mm) {
      const VectorC t = gs.T.col(mm);
      const cplx proj = t.dot(S_ * chi);  // (phi~_m, chi)
      chi -= (proj / gs.eta[mm]) * t;
    }
    const cplx nu = chi.dot(S_ * chi);
    gs.pseudo_norms.push_back(nu);
    if (std::abs(nu) < breakdown) {
      std::ostringstream os;
      os << "Gram-Schmidt breakdown: pseudo-norm " << std::abs(nu) << " of vector " << k;
      throw SolverError(os.str());
    }
    const cplx s = std::sqrt(nu);
    gs.T.col(k) = chi / s;
    const VectorC t = gs.T.col(k);
    gs.eta.push_back(t.dot(S_ * t));
  }
  return gs;
}

namespace {

std::vector<cplx> sorted_by_real(Eigen::VectorXcd ev) {
  std::vector<cplx> out(ev.data(), ev.data() + ev.size());
  std::sort(out.begin(), out.end(), [](cplx a, cplx b) {
    return a.real() != b.real() ? a.real() < b.real() : a.imag() < b.imag();
  });
  return out;
}

}  // namespace

Spectrum TightBindingModel::solve_spectrum() const {
  if (z_dependent()) throw ValidationError("solve_spectrum needs a static model");
  const int n = size();
  Spectrum sp;
  sp.gram_schmidt = gram_schmidt();
  const auto& T = sp.gram_schmidt.T;
  MatrixC eta_inv = MatrixC::Zero(n, n);
  for (int i = 0; i < n; ++i) eta_inv(i, i) = 1.0 / sp.gram_schmidt.eta[i];
  const MatrixC Ht = eta_inv * T.adjoint() * H_static_ * T;
  Eigen::ComplexEigenSolver<MatrixC> es(Ht);
  if (es.info() != Eigen::Success) throw SolverError("eigensolver failed");
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  const auto& ev = es.eigenvalues();
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    return ev(a).real() != ev(b).real() ? ev(a).real() < ev(b).real() : ev(a).imag() < ev(b).imag();
  });
  sp.vectors.resize(n, n);
  for (int i = 0; i < n; ++i) {
    sp.energies.push_back(ev(order[i]));
    VectorC c = T * es.eigenvectors().col(order[i]);
    c /= std::sqrt(power(c));
    sp.vectors.col(i) = c;
  }
  Eigen::ComplexEigenSolver<MatrixC> gen(S_inv_ * H_static_, false);
  sp.energies_generalized = sorted_by_real(gen.eigenvalues());
  if (n == 2) {
    const MatrixC& S = S_;
    const MatrixC& H = H_static_;
    const cplx a = S(0, 0) * S(1, 1) - S(0, 1) * S(1, 0);
    const cplx b = -(H(0, 0) * S(1, 1) + H(1, 1) * S(0, 0) - H(0, 1) * S(1, 0) - H(1, 0) * S(0, 1));
    const cplx c = H(0, 0) * H(1, 1) - H(0, 1) * H(1, 0);
    const cplx d = std::sqrt(b * b - 4.0 * a * c);
    std::array<cplx, 2> r = {(-b - d) / (2.0 * a), (-b + d) / (2.0 * a)};
    if (r[1].real() < r[0].real()) std::swap(r[0], r[1]);
    sp.energies_quadratic = r;
  }
  return sp;
}

MatrixC TightBindingModel::generator(double z) const {
  return -I * (S_inv_ * H(z));
}

std::vector<MatrixC> TightBindingModel::propagate_matrix(const MatrixC& y0,
                                                         const std::vector<double>& z_out,
                                                         const StepControl& ctl,
                                                         long long& steps) const {
  if (y0.rows() != size()) throw ValidationError("initial coefficient vector has wrong length");
  if (z_out.empty()) throw ValidationError("propagation needs output points");
  for (std::size_t i = 1; i < z_out.size(); ++i) {
    if (!(z_out[i] > z_out[i - 1])) throw ValidationError("output z-grid must be strictly increasing");
  }
  if (!(ctl.step > 0.0)) throw ValidationError("step must be positive");

  // Generators are cached by z so each RK4 step costs two new evaluations
  // and the step-doubling estimate reuses the full step's endpoints.
  std::vector<std::pair<double, MatrixC>> cache;
  auto gen = [&](double z) -> const MatrixC& {
    for (const auto& [zc, g] : cache)
      if (zc == z) return g;
    if (cache.size() >= 8) cache.erase(cache.begin());
    cache.emplace_back(z, generator(z));
    return cache.back().second;
  };
  auto rk4 = [&](double z, const MatrixC& y, double h) {
    const MatrixC g0 = gen(z), gm = gen(z + 0.5 * h), g1 = gen(z + h);
    const MatrixC k1 = g0 * y;
    const MatrixC k2 = gm * (y + 0.5 * h * k1);
    const MatrixC k3 = gm * (y + 0.5 * h * k2);
    const MatrixC k4 = g1 * (y + h * k3);
    return MatrixC(y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4));
  };

  std::vector<MatrixC> out;
  out.reserve(z_out.size());
  MatrixC y = y0;
  double z = z_out.front();
  out.push_back(y);
  double h = ctl.step;
  for (std::size_t k = 1; k < z_out.size(); ++k) {
    const double target = z_out[k];
    if (!ctl.adaptive) {
      const double span = target - z;
      const long long nsteps =
          std::max<long long>(1, static_cast<long long>(std::ceil(span / ctl.step - 1e-9)));
      const double hh = span / static_cast<double>(nsteps);
      for (long long s = 0; s < nsteps; ++s) {
        y = rk4(z + s * hh, y, hh);
        ++steps;
      }
      z = target;
    } else {
      while (z < target) {
        const bool last = z + h >= target;
        const double hh = last ? target - z : h;
        const MatrixC full = rk4(z, y, hh);
        const MatrixC half = rk4(z + 0.5 * hh, rk4(z, y, 0.5 * hh), 0.5 * hh);
        const double err = (half - full).cwiseAbs().maxCoeff() / 15.0;
        const double scale = std::max(1.0, y.cwiseAbs().maxCoeff());
        if (err <= ctl.tolerance * scale) {
          y = half + (half - full) / 15.0;
          z = last ? target : z + hh;
          ++steps;
          const double grow = err > 0.0 ? 0.9 * std::pow(ctl.tolerance * scale / err, 0.2) : 2.0;
          if (!last) h = hh * std::clamp(grow, 0.2, 2.0);
        } else {
          h = hh * std::clamp(0.9 * std::pow(ctl.tolerance * scale / err, 0.2), 0.1, 0.5);
          if (h < ctl.min_step) {
            std::ostringstream os;
            os << "step-size underflow at z=" << z;
            throw SolverError(os.str());
          }
        }
      }
    }
    if (!y.allFinite()) throw SolverError("coefficient integration produced non-finite values");
    out.push_back(y);
  }
  return out;
}

CoefficientTrajectory TightBindingModel::propagate_coefficients(
    const VectorC& c0, const std::vector<double>& z_out, const StepControl& ctl) const {
  CoefficientTrajectory tr;
  tr.z = z_out;
  for (auto& m : propagate_matrix(c0, z_out, ctl, tr.steps)) tr.c.emplace_back(m.col(0));
  return tr;
}

FloquetResult TightBindingModel::floquet_monodromy(double period, const StepControl& ctl,
                                                   std::vector<double> estimates) const {
  if (!(period > 0.0)) throw ValidationError("Floquet period must be positive");
  const int n = size();
  FloquetResult fr;
  fr.period = period;
  long long steps = 0;
  fr.monodromy = propagate_matrix(MatrixC::Identity(n, n), {0.0, period}, ctl, steps).back();
  Eigen::ComplexEigenSolver<MatrixC> es(fr.monodromy);
  if (es.info() != Eigen::Success) throw SolverError("monodromy eigensolver failed");
  MatrixC V = es.eigenvectors();
  for (int j = 0; j < n; ++j) V.col(j).normalize();
  Eigen::JacobiSVD<MatrixC> svd(V);
  const auto& sv = svd.singularValues();
  fr.eigenvector_condition = sv(0) / sv(n - 1);
  if (!std::isfinite(fr.eigenvector_condition) || fr.eigenvector_condition > 1e8) {
    throw SolverError("defective monodromy: eigenvector condition number too large");
  }
  const MatrixC D = es.eigenvalues().asDiagonal();
  fr.reconstruction_error = (V * D * V.inverse() - fr.monodromy).norm() / fr.monodromy.norm();

  if (estimates.empty()) {
    Eigen::ComplexEigenSolver<MatrixC> e0(S_inv_ * H(0.0), false);
    for (const auto& e : sorted_by_real(e0.eigenvalues())) estimates.push_back(e.real());
  }
  if (static_cast<int>(estimates.size()) != n) {
    throw ValidationError("need one static estimate per Floquet mode");
  }
  const double omega = 2.0 * kPi / period;
  std::vector<cplx> raw(n);
  for (int j = 0; j < n; ++j) raw[j] = I * std::log(es.eigenvalues()(j)) / period;
  auto shifted = [&](int j, double est, long long& shift) {
    shift = std::llround((est - raw[j].real()) / omega);
    return raw[j] + static_cast<double>(shift) * omega;
  };
  // Assign eigenvalues to estimates by the permutation of least total distance.
  std::vector<int> perm(n), best;
  std::iota(perm.begin(), perm.end(), 0);
  double best_cost = std::numeric_limits<double>::infinity();
  if (n <= 6) {
    do {
      double cost = 0.0;
      long long s;
      for (int i = 0; i < n; ++i) cost += std::abs(shifted(perm[i], estimates[i], s) - estimates[i]);
      if (cost < best_cost) {
        best_cost = cost;
        best = perm;
      }
    } while (std::next_permutation(perm.begin(), perm.end()));
  } else {
    best = perm;
  }
  fr.floquet_vectors.resize(n, n);
  for (int i = 0; i < n; ++i) {
    long long s = 0;
    const int j = best[i];
    fr.quasi_energies.push_back(shifted(j, estimates[i], s));
    fr.branch_shifts.push_back(s);
    fr.multipliers.push_back(es.eigenvalues()(j));
    VectorC c = es.eigenvectors().col(j);
    c /= std::sqrt(power(c));
    fr.floquet_vectors.col(i) = c;
  }
  return fr;
}

cplx TightBindingModel::assemble_state(const VectorC& c, double x) const {
  if (c.size() != size()) throw ValidationError("coefficient vector has wrong length");
  cplx s{};
  for (int j = 0; j < size(); ++j) s += c(j) * single_well_mode(wells_[j], x);
  return s;
}

std::array<cplx, 3> TightBindingModel::assemble_state_jet(const VectorC& c, double x) const {
  if (c.size() != size()) throw ValidationError("coefficient vector has wrong length");
  std::array<cplx, 3> s{};
  for (int j = 0; j < size(); ++j) {
    const auto jet = single_well_mode_jet(wells_[j], x);
    for (int d = 0; d < 3; ++d) s[d] += c(j) * jet[d];
  }
  return s;
}

double TightBindingModel::power(const VectorC& c) const {
  return c.dot(S_dirac_ * c).real();
}

}  // namespace susytb
