#include "ordflow/burgers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "ordflow/error.hpp"
#include "ordflow/parallel.hpp"
#include "ordflow/random.hpp"
#include "ordflow/regularize.hpp"

namespace ordflow {

namespace {

double interp(const std::vector<double>& ts, const std::vector<double>& vs, double t) {
  if (t <= ts.front()) return vs.front();
  if (t >= ts.back()) return vs.back();
  const auto it = std::upper_bound(ts.begin(), ts.end(), t);
  const std::size_t k = static_cast<std::size_t>(it - ts.begin()) - 1;
  const double w = (t - ts[k]) / (ts[k + 1] - ts[k]);
  return (1.0 - w) * vs[k] + w * vs[k + 1];
}

std::vector<double> uniform(double T, std::size_t samples) {
  if (samples < 2) throw DomainError("need at least two samples");
  std::vector<double> t(samples);
  for (std::size_t k = 0; k < samples; ++k) t[k] = T * static_cast<double>(k) / static_cast<double>(samples - 1);
  t.back() = T;
  return t;
}

void validate_path(const ShockPath& p) {
  if (!(p.T > 0.0)) throw DomainError("shock path horizon must be positive");
  if (!(p.margin > 0.0 && p.margin < 0.5)) throw DomainError("shock path margin must lie in (0, 1/2)");
  if (std::abs(p.c.back()) > 1e-12) throw DomainError("shock path must end at c(T) = 0");
  for (double d : p.dc)
    if (!(-d > p.margin && -d < 1.0 - p.margin))
      throw DomainError("shock speed " + std::to_string(-d) + " is outside the admissible margin");
}

}  // namespace

ShockPath ShockPath::linear(double speed, double T, std::size_t samples, double margin) {
  return from_function([=](double t) { return speed * (T - t); }, [=](double) { return -speed; }, T, samples, margin);
}

ShockPath ShockPath::from_function(const std::function<double(double)>& c, const std::function<double(double)>& dc,
                                   double T, std::size_t samples, double margin) {
  ShockPath p;
  p.T = T;
  p.margin = margin;
  p.times = uniform(T, samples);
  for (double t : p.times) {
    p.c.push_back(c(t));
    p.dc.push_back(dc(t));
  }
  validate_path(p);
  return p;
}

double ShockPath::operator()(double t) const { return interp(times, c, t); }
double ShockPath::speed(double t) const { return -interp(times, dc, t); }

double ShockPath::curvature_l1() const {
  double s = 0.0;
  for (std::size_t k = 1; k < dc.size(); ++k) s += std::abs(dc[k] - dc[k - 1]);
  return s;
}

double u_c_exact(const ShockPath& c, double t, double x) { return x <= c(t) ? 1.0 : 0.0; }

double xc_exact(const ShockPath& c, double t, double s, double x) {
  const double ct = c(t);
  if (std::abs(x - ct) <= 1e-12) return t < c.T ? x - ct * (s - t) / (c.T - t) : x;
  return x < ct ? x - (s - t) : x;
}

double speed_map_C(double theta) {
  if (std::abs(theta) < 1e-4) {
    const double t2 = theta * theta;
    return 0.5 + theta / 12.0 - theta * t2 / 720.0 + theta * t2 * t2 / 30240.0;
  }
  return 1.0 / (-std::expm1(-theta)) - 1.0 / theta;
}

double speed_map_C_printed(double theta) {
  const double e = std::exp(theta);
  return (theta * e - e - 1.0) / (theta * (e - 1.0));
}

double speed_map_inverse(double speed, double tol) {
  if (!(speed > 0.0 && speed < 1.0)) throw DomainError("speed must lie in (0, 1)");
  double lo = -1.0, hi = 1.0;
  while (speed_map_C(lo) > speed) lo *= 2.0;
  while (speed_map_C(hi) < speed) hi *= 2.0;
  double mid = 0.5 * (lo + hi);
  for (int it = 0; it < 400; ++it) {
    mid = 0.5 * (lo + hi);
    const double r = speed_map_C(mid) - speed;
    if (std::abs(r) < tol || hi - lo < 1e-15 * std::max(1.0, std::abs(mid))) break;
    (r > 0.0 ? hi : lo) = mid;
  }
  return mid;
}

SelectionProfile SelectionProfile::constant(double theta, double T, std::size_t samples) {
  SelectionProfile p;
  p.T = T;
  p.times = uniform(T, samples);
  p.theta.assign(samples, theta);
  p.speed.assign(samples, speed_map_C(theta));
  return p;
}

double SelectionProfile::operator()(double t) const { return interp(times, theta, t); }

double SelectionProfile::derivative(double t) const {
  const std::size_t k = std::min<std::size_t>(
      times.size() - 2, static_cast<std::size_t>(std::max<std::ptrdiff_t>(
                            0, std::upper_bound(times.begin(), times.end(), t) - times.begin() - 1)));
  return (theta[k + 1] - theta[k]) / (times[k + 1] - times[k]);
}

double SelectionProfile::max_abs() const {
  double m = 0.0;
  for (double v : theta) m = std::max(m, std::abs(v));
  return m;
}

SelectionProfile theta_for_path(const ShockPath& c) {
  validate_path(c);
  SelectionProfile p;
  p.T = c.T;
  p.times = c.times;
  for (double d : c.dc) {
    const double s = -d;
    const double th = speed_map_inverse(s);
    p.theta.push_back(th);
    p.speed.push_back(s);
    p.max_residual = std::max(p.max_residual, std::abs(speed_map_C(th) - s));
  }
  return p;
}

double smoothed_heaviside(double x, double eps) {
  // Tabulated normalized CDF of the bump on [-1, 1].
  static const std::vector<double> cdf = [] {
    const std::size_t n = 8000;
    std::vector<double> c(n + 1, 0.0);
    for (std::size_t i = 1; i <= n; ++i) {
      const double a = -1.0 + 2.0 * static_cast<double>(i - 1) / n, b = -1.0 + 2.0 * static_cast<double>(i) / n;
      c[i] = c[i - 1] + (b - a) / 6.0 * (bump(a) + 4.0 * bump(0.5 * (a + b)) + bump(b));
    }
    for (double& v : c) v /= c.back();
    return c;
  }();
  if (!(eps > 0.0)) return x < 0.0 ? 1.0 : 0.0;
  const double z = x / eps;
  if (z <= -1.0) return 1.0;
  if (z >= 1.0) return 0.0;
  const double pos = (z + 1.0) * 0.5 * static_cast<double>(cdf.size() - 1);
  const std::size_t i = std::min(static_cast<std::size_t>(pos), cdf.size() - 2);
  const double w = pos - static_cast<double>(i);
  return 1.0 - ((1.0 - w) * cdf[i] + w * cdf[i + 1]);
}

const GridFunction& ViscousRun::at(double t) const {
  for (std::size_t k = 0; k < times.size(); ++k)
    if (std::abs(times[k] - t) <= 1e-12 * std::max(1.0, std::abs(t))) return slices[k];
  throw DomainError("time " + std::to_string(t) + " is not stored in the run");
}

double locate_shock(const GridFunction& u) {
  const Grid& g = u.grid();
  for (std::size_t i = 0; i + 1 < g.size(); ++i)
    if (u(i) >= 0.5 && u(i + 1) < 0.5) return g.coord(0, i) + g.spacing(0) * (u(i) - 0.5) / (u(i) - u(i + 1));
  return std::numeric_limits<double>::quiet_NaN();
}

double l1_distance(const GridFunction& a, const GridFunction& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.nodes(); ++i) s += std::abs(a(i) - b(i));
  return s * a.grid().cell_volume();
}

namespace {

// Engquist-Osher flux for a convex flux F with its minimum at 0.
template <class Flux>
double eo_flux(const Flux& F, double a, double b) {
  return F(std::max(a, 0.0)) + F(std::min(b, 0.0));
}

struct March {
  const SelectionProfile& profile;
  double eps;
  const Grid& grid;
  const ViscousOptions& opts;
};

double auto_dt(double eps, double h, double umax) {
  const double spec = std::min(h / std::max(umax, 1e-12), h * h / (4.0 * eps));
  const double full = 0.9 / (umax / h + 2.0 * eps / (h * h));
  return std::min(spec, full);
}

// Drives a node update backward from T, storing output slices. step(values, t, dt) -> cfl number.
template <class Step, class Out>
ViscousRun march(const March& m, std::vector<double> w, const Step& step, const Out& out) {
  const double T = m.profile.T;
  const std::size_t n_out = std::max<std::size_t>(m.opts.output_slices, 1);
  double umax = 0.0;
  for (std::size_t i = 0; i < m.grid.size(); ++i) umax = std::max(umax, std::abs(out(w[i], T)));
  const double h = m.grid.spacing(0);
  ViscousRun run;
  run.eps = m.eps;
  run.dt = m.opts.dt > 0.0 ? m.opts.dt : auto_dt(m.eps, h, std::max(umax, 1.0));
  run.times = uniform(T, n_out + 1);
  run.slices.assign(run.times.size(), GridFunction::constant(m.grid, 0.0));
  run.shock.assign(run.times.size(), 0.0);
  auto record = [&](std::size_t k, double t) {
    std::vector<double> u(w.size());
    for (std::size_t i = 0; i < w.size(); ++i) u[i] = out(w[i], t);
    run.slices[k] = GridFunction(m.grid, std::move(u));
    run.shock[k] = locate_shock(run.slices[k]);
  };
  record(n_out, T);
  double t = T;
  for (std::size_t k = n_out; k-- > 0;) {
    const double target = run.times[k];
    while (t > target + 1e-14 * T) {
      const double dt = std::min(run.dt, t - target);
      run.max_cfl = std::max(run.max_cfl, step(w, t, dt));
      t = t - dt <= target + 1e-14 * T ? target : t - dt;
      ++run.steps;
    }
    record(k, target);
  }
  return run;
}

void check_grid(const Grid& g, double eps) {
  if (g.dim() != 1) throw DimensionError("the Burgers lab runs on a one-dimensional grid");
  if (!(eps > 0.0)) throw DomainError("viscosity must be positive");
}

double cfl_guard(double cfl) {
  if (cfl > 1.0 + 1e-12) throw GuardError("CFL violation: number " + std::to_string(cfl) + " exceeds 1");
  return cfl;
}

}  // namespace

ViscousRun viscous_solve(const SelectionProfile& profile, double eps, const Grid& grid, const ViscousOptions& opts) {
  check_grid(grid, eps);
  const std::size_t n = grid.size();
  const double h = grid.spacing(0);
  const auto uT = opts.terminal ? opts.terminal : [eps](double x) { return smoothed_heaviside(x, eps); };
  std::vector<double> u(n), next(n);
  for (std::size_t i = 0; i < n; ++i) u[i] = uT(grid.coord(0, i));
  const auto F = [](double v) { return 0.5 * v * v; };
  auto step = [&](std::vector<double>& w, double t, double dt) {
    const double th = profile(t);
    std::vector<double> local(n, 0.0);
    parallel_for(n, [&](std::size_t i) {
      const double um = w[i == 0 ? 0 : i - 1], uc = w[i], up = w[i + 1 == n ? i : i + 1];
      const double adv = (eo_flux(F, uc, up) - eo_flux(F, um, uc)) / h;
      const double diff = eps * (up - 2.0 * uc + um) / (h * h);
      const double d0 = (up - um) / (2.0 * h);
      const double extra = eps * th * d0 * d0;
      next[i] = uc + dt * (diff - adv + extra);
      local[i] = dt * (std::abs(uc) / h + 2.0 * eps / (h * h));
      if (!std::isfinite(next[i])) throw GuardError("viscous solution blew up");
    });
    w.swap(next);
    return cfl_guard(*std::max_element(local.begin(), local.end()));
  };
  return march({profile, eps, grid, opts}, std::move(u), step, [](double v, double) { return v; });
}

namespace {

double f_of(double th, double v) {
  const double z = th * v;
  if (std::abs(z) < 1e-3) return v * (1.0 - z / 2.0 + z * z / 3.0 - z * z * z / 4.0 + z * z * z * z / 5.0);
  return std::log1p(z) / th;
}

double f_inv(double th, double u) {
  const double z = th * u;
  if (std::abs(z) < 1e-3) return u * (1.0 + z / 2.0 + z * z / 6.0 + z * z * z / 24.0 + z * z * z * z / 120.0);
  return std::expm1(z) / th;
}

double F_of(double th, double v) {
  const double z = th * v;
  if (std::abs(z) < 1e-3)
    return v * v * (0.5 - z / 6.0 + z * z / 12.0 - z * z * z / 20.0 + z * z * z * z / 30.0);
  return ((1.0 + z) * std::log1p(z) - z) / (th * th);
}

// d f / d theta at fixed v.
double f_theta(double th, double v) {
  const double z = th * v;
  if (std::abs(z) < 1e-3) return v * v * (-0.5 + 2.0 * z / 3.0 - 3.0 * z * z / 4.0 + 4.0 * z * z * z / 5.0);
  return v / (th * (1.0 + z)) - std::log1p(z) / (th * th);
}

void domain_guard(double th, double v) {
  if (!(1.0 + th * v > 0.0)) throw GuardError("transformed variable left the domain theta v + 1 > 0");
}

}  // namespace

ViscousRun cole_hopf_reference(const SelectionProfile& profile, double eps, const Grid& grid,
                               const ViscousOptions& opts) {
  check_grid(grid, eps);
  const std::size_t n = grid.size();
  const double h = grid.spacing(0);
  const auto uT = opts.terminal ? opts.terminal : [eps](double x) { return smoothed_heaviside(x, eps); };
  const double thT = profile(profile.T);
  std::vector<double> v(n), next(n);
  for (std::size_t i = 0; i < n; ++i) {
    v[i] = f_inv(thT, uT(grid.coord(0, i)));
    domain_guard(thT, v[i]);
  }
  auto step = [&](std::vector<double>& w, double t, double dt) {
    const double th = profile(t), dth = profile.derivative(t);
    const auto F = [th](double x) { return F_of(th, x); };
    std::vector<double> local(n, 0.0);
    parallel_for(n, [&](std::size_t i) {
      const double vm = w[i == 0 ? 0 : i - 1], vc = w[i], vp = w[i + 1 == n ? i : i + 1];
      domain_guard(th, vc);
      const double adv = (eo_flux(F, vc, vp) - eo_flux(F, vm, vc)) / h;
      const double diff = eps * (vp - 2.0 * vc + vm) / (h * h);
      // f_t / f_v with f_v = 1 / (1 + theta v).
      const double extra = dth == 0.0 ? 0.0 : dth * f_theta(th, vc) * (1.0 + th * vc);
      next[i] = vc + dt * (diff - adv + extra);
      local[i] = dt * (std::abs(f_of(th, vc)) / h + 2.0 * eps / (h * h));
      if (!std::isfinite(next[i])) throw GuardError("transformed solution blew up");
    });
    w.swap(next);
    return cfl_guard(*std::max_element(local.begin(), local.end()));
  };
  return march({profile, eps, grid, opts}, std::move(v), step,
               [&profile](double x, double t) { return f_of(profile(t), x); });
}

ShockFit shock_fit(const ViscousRun& run, const ShockPath& c, double skip_fraction) {
  const double T = run.times.back();
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  std::size_t n = 0;
  ShockFit fit;
  for (std::size_t k = 0; k < run.times.size(); ++k) {
    const double tau = T - run.times[k];
    const double p = run.shock[k];
    if (!std::isfinite(p)) continue;
    fit.max_deviation = std::max(fit.max_deviation, std::abs(p - c(run.times[k])));
    if (tau < skip_fraction * T) continue;
    sx += tau;
    sy += p;
    sxx += tau * tau;
    sxy += tau * p;
    ++n;
  }
  if (n < 2) throw DomainError("too few shock samples to fit a speed");
  const double dn = static_cast<double>(n);
  fit.speed = (dn * sxy - sx * sy) / (dn * sxx - sx * sx);
  return fit;
}

BranchReport branch_constancy(const SelectionProfile& profile, std::size_t substeps) {
  BranchReport r;
  r.times = profile.times;
  const std::size_t K = profile.times.size();
  r.v_lower.assign(K, 0.0);
  r.v_upper.assign(K, 0.0);
  const double thT = profile.theta.back();
  r.v_lower[K - 1] = f_inv(thT, 0.0);
  r.v_upper[K - 1] = f_inv(thT, 1.0);
  // dv/dt = -f_t / f_v = -theta'(t) f_theta (1 + theta v), theta piecewise linear.
  auto rhs = [&](double t, double v, double dth) {
    const double th = profile(t);
    return -dth * f_theta(th, v) * (1.0 + th * v);
  };
  for (std::size_t k = K - 1; k-- > 0;) {
    const double dth = (profile.theta[k + 1] - profile.theta[k]) / (profile.times[k + 1] - profile.times[k]);
    const double dt = (profile.times[k] - profile.times[k + 1]) / static_cast<double>(substeps);
    for (auto* branch : {&r.v_lower, &r.v_upper}) {
      double v = (*branch)[k + 1], t = profile.times[k + 1];
      for (std::size_t s = 0; s < substeps; ++s) {
        const double k1 = rhs(t, v, dth), k2 = rhs(t + dt / 2, v + dt / 2 * k1, dth);
        const double k3 = rhs(t + dt / 2, v + dt / 2 * k2, dth), k4 = rhs(t + dt, v + dt * k3, dth);
        v += dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4);
        t += dt;
      }
      (*branch)[k] = v;
    }
  }
  for (std::size_t k = 0; k < K; ++k) {
    const double th = profile.theta[k];
    r.max_drift = std::max(r.max_drift, std::abs(f_of(th, r.v_lower[k]) - 0.0));
    r.max_drift = std::max(r.max_drift, std::abs(f_of(th, r.v_upper[k]) - 1.0));
  }
  return r;
}

RankineHugoniotReport rankine_hugoniot(const SelectionProfile& profile) {
  RankineHugoniotReport r;
  r.times = profile.times;
  for (std::size_t k = 0; k < profile.times.size(); ++k) {
    const double th = profile.theta[k];
    const double v0 = f_inv(th, 0.0), v1 = f_inv(th, 1.0);
    const double q = (F_of(th, v1) - F_of(th, v0)) / (v1 - v0);
    r.target.push_back(profile.speed[k]);
    r.corrected.push_back(q);
    r.printed.push_back((F_of(th, v0) - F_of(th, v1)) / (v1 - v0));
    r.max_error = std::max(r.max_error, std::abs(q - profile.speed[k]));
  }
  return r;
}

FbsdeReport fbsde_simulate(const SelectionProfile& profile, double eps, const ViscousRun& run, const ShockPath& c,
                           double t, const FbsdeOptions& opts) {
  if (run.slices.empty() || run.grid().dim() != 1) throw DimensionError("run must hold one-dimensional slices");
  if (std::abs(run.eps - eps) > 1e-15) throw DomainError("run viscosity does not match eps");
  std::size_t k0 = run.times.size();
  for (std::size_t k = 0; k < run.times.size(); ++k)
    if (std::abs(run.times[k] - t) <= 1e-12 * std::max(1.0, std::abs(t))) k0 = k;
  if (k0 + 1 >= run.times.size()) throw DomainError("start time must be a stored run time before T");
  FbsdeReport rep;
  rep.t = t;
  rep.times.assign(run.times.begin() + static_cast<std::ptrdiff_t>(k0), run.times.end());
  rep.step = rep.times[1] - rep.times[0];
  if (opts.starts.empty()) {
    for (int j = 0; j <= 40; ++j) rep.starts.push_back(-1.0 + 2.5 * j / 40.0);
  } else {
    rep.starts = opts.starts;
    std::sort(rep.starts.begin(), rep.starts.end());
  }
  const std::size_t J = rep.starts.size(), K = rep.times.size(), P = opts.paths;
  if (P < 2) throw DomainError("need at least two paths");
  const Grid& g = run.grid();
  const double h = g.spacing(0), sig = std::sqrt(2.0 * eps);
  auto slope = [&](const GridFunction& u, double x) {
    const double pos = (x - g.lower(0)) / h;
    if (pos <= 0.0 || pos >= static_cast<double>(g.size() - 1)) return 0.0;
    const std::size_t i = static_cast<std::size_t>(pos);
    return (u(i + 1) - u(i)) / h;
  };
  rep.mean_X.assign(J * K, 0.0);
  rep.mean_U.assign(J * K, 0.0);
  std::vector<double> dev(J * K, 0.0), rsum(J, 0.0), rsq(J, 0.0);
  parallel_for(J, [&](std::size_t j) {
    for (std::size_t p = 0; p < P; ++p) {
      const CounterRng rng(CounterRng::derive(opts.seed, j * P + p));
      double X = rep.starts[j];
      double U0 = 0.0, integral = 0.0, U = 0.0;
      for (std::size_t k = 0; k < K; ++k) {
        const GridFunction& u = run.slices[k0 + k];
        const double xs[1]{X};
        U = u.interpolate(xs);
        if (k == 0) U0 = U;
        rep.mean_X[j * K + k] += X;
        rep.mean_U[j * K + k] += U;
        dev[j * K + k] += std::abs(X - xc_exact(c, t, rep.times[k], rep.starts[j]));
        if (k + 1 == K) break;
        const double ds = rep.times[k + 1] - rep.times[k];
        const double dW = std::sqrt(ds) * rng.normal(k);
        const double Z = sig * slope(u, X);
        // Ito: dU = Z dW - theta Z^2 / 2 ds.
        integral += Z * dW - 0.5 * profile(rep.times[k]) * Z * Z * ds;
        X += -U * ds + sig * dW;
      }
      const double R = U - U0 - integral;
      rsum[j] += R;
      rsq[j] += R * R;
    }
  });
  const double dP = static_cast<double>(P);
  for (double& v : rep.mean_X) v /= dP;
  for (double& v : rep.mean_U) v /= dP;
  // Trapezoid weights over the start points.
  std::vector<double> wts(J, 0.0);
  for (std::size_t j = 0; j + 1 < J; ++j) {
    const double half = 0.5 * (rep.starts[j + 1] - rep.starts[j]);
    wts[j] += half;
    wts[j + 1] += half;
  }
  if (J == 1) wts[0] = 1.0;
  for (std::size_t k = 0; k < K; ++k) {
    double s = 0.0;
    for (std::size_t j = 0; j < J; ++j) s += wts[j] * dev[j * K + k] / dP;
    rep.xc_distance = std::max(rep.xc_distance, s);
  }
  const double N = dP * static_cast<double>(J);
  const double mean = std::accumulate(rsum.begin(), rsum.end(), 0.0) / N;
  const double var = std::max(0.0, std::accumulate(rsq.begin(), rsq.end(), 0.0) / N - mean * mean);
  rep.residual_mean = mean;
  rep.residual_se = std::sqrt(var / N);
  return rep;
}

}  // namespace ordflow
