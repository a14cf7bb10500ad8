#include "susytb/calibrate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

namespace susytb {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double simplex_diameter(const std::vector<std::vector<double>>& s) {
  double d = 0.0;
  for (std::size_t i = 1; i < s.size(); ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < s[0].size(); ++j) acc += (s[i][j] - s[0][j]) * (s[i][j] - s[0][j]);
    d = std::max(d, std::sqrt(acc));
  }
  return d;
}

}  // namespace

NelderMeadResult nelder_mead(const std::function<double(const std::vector<double>&)>& f,
                             std::vector<double> start, const std::vector<double>& steps,
                             const NelderMeadOptions& opt) {
  const std::size_t n = start.size();
  if (n == 0 || steps.size() != n) throw ValidationError("nelder_mead: dimension mismatch");
  std::vector<std::vector<double>> s(n + 1, start);
  for (std::size_t i = 0; i < n; ++i) s[i + 1][i] += steps[i];
  std::vector<double> fv(n + 1);
  for (std::size_t i = 0; i <= n; ++i) fv[i] = f(s[i]);

  auto order = [&] {
    std::vector<std::size_t> idx(n + 1);
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return fv[a] < fv[b]; });
    std::vector<std::vector<double>> s2;
    std::vector<double> f2;
    for (auto i : idx) {
      s2.push_back(s[i]);
      f2.push_back(fv[i]);
    }
    s = std::move(s2);
    fv = std::move(f2);
  };
  auto along = [&](const std::vector<double>& c, double t) {
    std::vector<double> p(n);
    for (std::size_t j = 0; j < n; ++j) p[j] = c[j] + t * (s[n][j] - c[j]);
    return p;
  };

  NelderMeadResult r;
  order();
  while (r.iterations < opt.max_iterations) {
    if (simplex_diameter(s) < opt.diameter_tolerance) {
      r.converged = true;
      break;
    }
    ++r.iterations;
    std::vector<double> c(n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) c[j] += s[i][j] / static_cast<double>(n);
    const auto xr = along(c, -1.0);
    const double fr = f(xr);
    if (fr < fv[0]) {
      const auto xe = along(c, -2.0);
      const double fe = f(xe);
      if (fe < fr) {
        s[n] = xe;
        fv[n] = fe;
      } else {
        s[n] = xr;
        fv[n] = fr;
      }
    } else if (fr < fv[n - 1]) {
      s[n] = xr;
      fv[n] = fr;
    } else {
      const bool outside = fr < fv[n];
      const auto xc = along(c, outside ? -0.5 : 0.5);
      const double fc = f(xc);
      if (fc < (outside ? fr : fv[n])) {
        s[n] = xc;
        fv[n] = fc;
      } else {
        for (std::size_t i = 1; i <= n; ++i) {
          for (std::size_t j = 0; j < n; ++j) s[i][j] = s[0][j] + 0.5 * (s[i][j] - s[0][j]);
          fv[i] = f(s[i]);
        }
      }
    }
    order();
  }
  if (!r.converged) r.converged = simplex_diameter(s) < opt.diameter_tolerance;
  r.x = s[0];
  r.value = fv[0];
  return r;
}

const char* to_string(CalibrationMode m) {
  switch (m) {
    case CalibrationMode::spectral_hermitian: return "spectral_hermitian";
    case CalibrationMode::spectral_pt: return "spectral_pt";
    case CalibrationMode::profile_dynamic: return "profile_dynamic";
  }
  return "?";
}

void SearchBox::validate(CalibrationMode mode) const {
  auto check = [](const Interval& iv, const char* name) {
    if (!std::isfinite(iv.lo) || !std::isfinite(iv.hi) || !(iv.lo < iv.hi)) {
      throw ValidationError(std::string("search interval for ") + name + " must be finite with lo < hi");
    }
  };
  check(k, "k");
  check(x0, "x0");
  if (!(k.lo > 0.0)) throw ValidationError("search interval for k must be positive");
  if (!(x0.lo > 0.0)) throw ValidationError("search interval for x0 must be positive");
  if (mode == CalibrationMode::spectral_pt) {
    if (!alpha_tilde) throw ValidationError("spectral_pt calibration needs an alpha_tilde interval");
    check(*alpha_tilde, "alpha_tilde");
  }
}

void CalibrationProblem::validate() const {
  if (!target) throw ValidationError("calibration needs a target system");
  const bool dyn = target->kind() == SystemKind::pt_dynamic;
  if (mode == CalibrationMode::profile_dynamic && !dyn) {
    throw ValidationError("profile_dynamic calibration needs the dynamic system");
  }
  if (mode == CalibrationMode::spectral_hermitian && target->kind() != SystemKind::hermitian_static) {
    throw ValidationError("spectral_hermitian calibration needs the hermitian static system");
  }
  if (mode == CalibrationMode::spectral_pt && target->kind() != SystemKind::pt_static) {
    throw ValidationError("spectral_pt calibration needs the PT static system");
  }
  if (seeds_k < 1 || seeds_x0 < 1 || seeds_alpha < 1) throw ValidationError("seed grid sizes must be >= 1");
  if (refine_best < 1) throw ValidationError("refine_best must be >= 1");
  if (profile_samples < 2) throw ValidationError("profile_samples must be >= 2");
  if (profile_depth < 0.0 || !std::isfinite(profile_depth)) throw ValidationError("profile_depth must be >= 0");
  if (!(nelder_mead.diameter_tolerance > 0.0) || nelder_mead.max_iterations < 1) {
    throw ValidationError("invalid Nelder-Mead options");
  }
  if (box) box->validate(mode);
  quadrature.validate();
}

double well_separation(const WaveguideSystem& s) {
  const double span = 12.0 / s.min_k();
  const int n = 2001;
  auto v = [&](double x) { return s.potential(x, 0.0).real(); };
  int best = 1;
  double fb = kInf;
  for (int i = 1; i < n; ++i) {
    const double x = span * i / (n - 1);
    const double f = v(x);
    if (f < fb) {
      fb = f;
      best = i;
    }
  }
  double a = span * (best - 1) / (n - 1), b = span * std::min(best + 1, n - 1) / (n - 1);
  const double g = 0.5 * (std::sqrt(5.0) - 1.0);
  double c = b - g * (b - a), d = a + g * (b - a);
  double fc = v(c), fd = v(d);
  while (b - a > 1e-12) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - g * (b - a);
      fc = v(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + g * (b - a);
      fd = v(d);
    }
  }
  return 0.5 * (a + b);
}

SearchBox default_search_box(const WaveguideSystem& s, CalibrationMode mode) {
  double kmax = 0.0;
  std::visit([&](const auto& p) { kmax = std::max(std::abs(p.k1), std::abs(p.k2)); }, s.config());
  const double xd = well_separation(s);
  SearchBox box;
  box.k = {0.1, 2.0 * kmax};
  box.x0 = {std::max(0.1, xd - 1.5), xd + 1.5};
  if (mode == CalibrationMode::spectral_pt) box.alpha_tilde = Interval{-0.9, 0.9};
  return box;
}

double default_profile_depth(const WaveguideSystem& s) {
  double k1 = 1.0;
  std::visit([&](const auto& p) { k1 = std::abs(p.k1); }, s.config());
  return well_separation(s) + 3.0 / k1;
}

TightBindingModel make_static_model(CalibrationMode mode, const TBParameters& p,
                                    const QuadratureSpec& quad) {
  if (mode == CalibrationMode::spectral_pt) {
    return TightBindingModel::two_well(WellKind::pt, p.k, p.x0, p.alpha_tilde, Metric::pt,
                                       PotentialSource::tb_sum, nullptr, quad);
  }
  return TightBindingModel::two_well(WellKind::hermitian, p.k, p.x0, 0.0, Metric::dirac,
                                     PotentialSource::tb_sum, nullptr, quad);
}

double spectral_objective(const WaveguideSystem& target, CalibrationMode mode,
                          const TBParameters& p, const QuadratureSpec& quad) {
  try {
    const auto sp = make_static_model(mode, p, quad).solve_spectrum();
    const auto [eg, ee] = target.energies();
    const double f = std::abs(sp.energies[0] - eg) + std::abs(sp.energies[1] - ee);
    return std::isfinite(f) ? f : kInf;
  } catch (const Error&) {
    return kInf;
  }
}

double profile_objective(std::span<const double> xs, std::span<const double> target_re,
                         const TBParameters& p) {
  const WellBasis a{WellKind::hermitian, p.k, 0.0, p.x0};
  const WellBasis b{WellKind::hermitian, p.k, 0.0, -p.x0};
  double worst = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double v = (single_well_potential(a, xs[i]) + single_well_potential(b, xs[i])).real();
    worst = std::max(worst, std::abs(target_re[i] - v));
  }
  return std::isfinite(worst) ? worst : kInf;
}

namespace {

using Objective = std::function<double(const std::vector<double>&)>;

std::vector<double> axis(const Interval& iv, int n) {
  if (n == 1) return {0.5 * (iv.lo + iv.hi)};
  return linspace(iv.lo, iv.hi, n);
}

// Coarse-grid multistart followed by Nelder-Mead from the best grid points.
void multistart(const Objective& raw, const std::vector<Interval>& box,
                const std::vector<int>& seeds, const CalibrationProblem& pb,
                CalibrationResult& res, std::vector<double>& best_x, double& best_f) {
  auto inside = [&](const std::vector<double>& x) {
    for (std::size_t j = 0; j < x.size(); ++j)
      if (!box[j].contains(x[j])) return false;
    return true;
  };
  const Objective f = [&](const std::vector<double>& x) { return inside(x) ? raw(x) : kInf; };

  std::vector<std::vector<double>> axes;
  for (std::size_t j = 0; j < box.size(); ++j) axes.push_back(axis(box[j], seeds[j]));
  std::vector<std::pair<double, std::vector<double>>> pts;
  std::vector<std::size_t> idx(box.size(), 0);
  while (true) {
    std::vector<double> x(box.size());
    for (std::size_t j = 0; j < box.size(); ++j) x[j] = axes[j][idx[j]];
    const double v = f(x);
    ++res.grid_points;
    if (!std::isfinite(v)) ++res.failed_grid_points;
    pts.emplace_back(v, x);
    std::size_t j = 0;
    while (j < box.size() && ++idx[j] == axes[j].size()) idx[j++] = 0;
    if (j == box.size()) break;
  }
  if (res.failed_grid_points == res.grid_points) {
    throw SolverError("calibration failed: objective could not be evaluated at any start point");
  }
  std::stable_sort(pts.begin(), pts.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  res.best_grid_value = pts.front().first;
  best_f = kInf;
  const int nref = std::min<int>(pb.refine_best, static_cast<int>(pts.size()));
  for (int r = 0; r < nref; ++r) {
    if (!std::isfinite(pts[r].first)) break;
    const auto& x0 = pts[r].second;
    std::vector<double> steps(x0.size());
    for (std::size_t j = 0; j < x0.size(); ++j) {
      const double h = 0.05 * box[j].width();
      steps[j] = box[j].contains(x0[j] + h) ? h : -h;
    }
    const auto nm = nelder_mead(f, x0, steps, pb.nelder_mead);
    res.trace.push_back({x0, pts[r].first, nm.x, nm.value, nm.iterations,
                         nm.converged ? "converged" : "iteration limit"});
    if (nm.value < best_f) {
      best_f = nm.value;
      best_x = nm.x;
    }
  }
}

}  // namespace

CalibrationResult spectral_match(const CalibrationProblem& pb) {
  pb.validate();
  if (pb.mode == CalibrationMode::profile_dynamic) throw ValidationError("spectral_match needs a static mode");
  const auto& target = *pb.target;
  CalibrationResult res;
  res.mode = pb.mode;
  res.box = pb.box.value_or(default_search_box(target, pb.mode));
  res.box.validate(pb.mode);
  const bool pt = pb.mode == CalibrationMode::spectral_pt;

  auto params = [&](const std::vector<double>& x) {
    TBParameters p;
    p.k = x[0];
    p.x0 = x[1];
    if (x.size() > 2) p.alpha_tilde = x[2];
    return p;
  };
  const Objective f = [&](const std::vector<double>& x) {
    return spectral_objective(target, pb.mode, params(x), pb.quadrature);
  };
  std::vector<Interval> box = {res.box.k, res.box.x0};
  std::vector<int> seeds = {pb.seeds_k, pb.seeds_x0};
  if (pt) {
    box.push_back(*res.box.alpha_tilde);
    seeds.push_back(pb.seeds_alpha);
  }
  std::vector<double> bx;
  double bf = kInf;
  multistart(f, box, seeds, pb, res, bx, bf);
  if (!std::isfinite(bf)) throw SolverError("calibration failed: no start point could be refined");
  res.parameters = params(bx);
  res.objective_value = bf;

  if (pt) {
    // alpha_tilde does not move the PT-metric spectrum; if the objective is
    // flat along it, anchor it to the target's alpha and refit (k, x0).
    const auto [eg, ee] = target.energies();
    const double scale = std::abs(eg) + std::abs(ee);
    const double delta = 0.1 * res.box.alpha_tilde->width();
    bool flat = true;
    for (double s : {-1.0, 1.0}) {
      auto x = bx;
      x[2] = std::clamp(x[2] + s * delta, res.box.alpha_tilde->lo, res.box.alpha_tilde->hi);
      const double v = f(x);
      if (!(std::abs(v - bf) <= pb.flatness_tolerance * scale)) flat = false;
    }
    res.alpha_unidentifiable = flat;
    if (flat) {
      const double anchor = std::clamp(std::get<PTStaticParams>(target.config()).alpha,
                                       res.box.alpha_tilde->lo, res.box.alpha_tilde->hi);
      const Objective f2 = [&](const std::vector<double>& x) {
        return f({x[0], x[1], anchor});
      };
      const Objective f2b = [&](const std::vector<double>& x) {
        return res.box.k.contains(x[0]) && res.box.x0.contains(x[1]) ? f2(x) : kInf;
      };
      const std::vector<double> start = {bx[0], bx[1]};
      const std::vector<double> steps = {0.01 * res.box.k.width(), 0.01 * res.box.x0.width()};
      auto s2 = steps;
      for (int j = 0; j < 2; ++j)
        if (!box[j].contains(start[j] + steps[j])) s2[j] = -steps[j];
      const auto nm = nelder_mead(f2b, start, s2, pb.nelder_mead);
      res.trace.push_back({{bx[0], bx[1], anchor}, f2(start), {nm.x[0], nm.x[1], anchor}, nm.value,
                           nm.iterations, "alpha_tilde flat; anchored to target alpha"});
      res.parameters = {nm.x[0], nm.x[1], anchor};
      res.objective_value = nm.value;
    }
  }
  const auto sp = make_static_model(pb.mode, res.parameters, pb.quadrature).solve_spectrum();
  res.achieved_energies = sp.energies;
  return res;
}

CalibrationResult profile_match(const CalibrationProblem& pb) {
  pb.validate();
  if (pb.mode != CalibrationMode::profile_dynamic) throw ValidationError("profile_match needs profile_dynamic mode");
  const auto& target = *pb.target;
  CalibrationResult res;
  res.mode = pb.mode;
  res.box = pb.box.value_or(default_search_box(target, pb.mode));
  res.box.validate(pb.mode);
  const double d = pb.profile_depth > 0.0 ? pb.profile_depth : default_profile_depth(target);
  const auto xs = linspace(-d, 0.0, pb.profile_samples);
  std::vector<double> vre(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) vre[i] = target.potential(xs[i], 0.0).real();
  const Objective f = [&](const std::vector<double>& x) {
    return profile_objective(xs, vre, TBParameters{x[0], x[1], 0.0});
  };
  std::vector<double> bx;
  double bf = kInf;
  multistart(f, {res.box.k, res.box.x0}, {pb.seeds_k, pb.seeds_x0}, pb, res, bx, bf);
  if (!std::isfinite(bf)) throw SolverError("calibration failed: no start point could be refined");
  res.parameters = {bx[0], bx[1], 0.0};
  res.objective_value = bf;
  res.achieved_profile_error = bf;
  return res;
}

CalibrationResult calibrate(const CalibrationProblem& pb) {
  return pb.mode == CalibrationMode::profile_dynamic ? profile_match(pb) : spectral_match(pb);
}

}  // namespace susytb
