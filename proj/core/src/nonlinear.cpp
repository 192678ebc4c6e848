#include "ordflow/nonlinear.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

#include "ordflow/error.hpp"
#include "ordflow/monotone.hpp"
#include "ordflow/parallel.hpp"

namespace ordflow {

Nonlinearity Nonlinearity::burgers() {
  Nonlinearity n;
  n.id = "burgers";
  n.f = [](double, std::span<const double>, std::span<const double> u, std::span<double> out) { out[0] = -u[0]; };
  n.c0 = TimeProfile(0.0);
  return n;
}

Nonlinearity Nonlinearity::linear_decay(double a) {
  if (!(a >= 0.0)) throw DomainError("linear-decay rate must be nonnegative");
  Nonlinearity n;
  n.id = "linear-decay";
  n.f = [a](double, std::span<const double> x, std::span<const double> u, std::span<double> out) {
    out[0] = -u[0] - a * x[0];
  };
  n.c0 = TimeProfile(a);
  return n;
}

Nonlinearity Nonlinearity::zero(std::size_t d, std::size_t m) {
  Nonlinearity n;
  n.id = "zero";
  n.dim = d;
  n.width = m;
  n.f = [](double, std::span<const double>, std::span<const double>, std::span<double> out) {
    std::fill(out.begin(), out.end(), 0.0);
  };
  n.c0 = TimeProfile(0.0);
  return n;
}

Nonlinearity make_nonlinearity(const std::string& id, const NonlinearParams& params) {
  if (id == "burgers") return Nonlinearity::burgers();
  if (id == "linear-decay") return Nonlinearity::linear_decay(params.a);
  if (id == "zero") return Nonlinearity::zero(params.dim, params.width);
  throw ConfigError("unknown nonlinearity '" + id + "'");
}

const char* to_string(LatticeDirection d) { return d == LatticeDirection::from_top ? "from_top" : "from_bottom"; }

void validate_nonlinearity(const Nonlinearity& nl, const Grid& grid, double u_lo, double u_hi,
                           std::span<const double> times, double tol) {
  const std::size_t d = nl.dim, m = nl.width;
  if (grid.dim() != d) throw DimensionError("nonlinearity dimension does not match the grid");
  const int levels = 5;
  std::vector<double> x(d), u(m), f0(d), f1(d), g0(m), g1(m);
  auto eval = [&](double t, std::span<const double> xx, std::span<const double> uu, std::span<double> f,
                  std::span<double> g) {
    nl.f(t, xx, uu, f);
    if (nl.g) nl.g(t, xx, uu, g);
    else std::fill(g.begin(), g.end(), 0.0);
  };
  const double du = u_hi > u_lo ? (u_hi - u_lo) / (levels - 1) : 1.0;
  for (double t : times) {
    const double c0 = nl.c0(t);
    for (std::size_t i = 0; i < grid.size(); ++i) {
      grid.coords(i, x);
      for (int l = 0; l < levels; ++l) {
        std::fill(u.begin(), u.end(), u_lo + du * l);
        eval(t, x, u, f0, g0);
        for (std::size_t a = 0; a < d; ++a) {
          if (grid.axis_index(i, a) + 1 >= grid.count(a)) continue;
          const double h = grid.spacing(a);
          std::vector<double> y = x;
          y[a] += h;
          eval(t, y, u, f1, g1);
          for (std::size_t j = 0; j < d; ++j) {
            const double q = (f1[j] - f0[j]) / h;
            if (q < -(j == a ? c0 : 0.0) - tol) throw GuardError("f violates the one-sided bound in x at node " + std::to_string(i));
          }
          for (std::size_t k = 0; k < m; ++k)
            if ((g1[k] - g0[k]) / h > tol) throw GuardError("g is not decreasing in x at node " + std::to_string(i));
        }
        for (std::size_t k = 0; k < m; ++k) {
          std::vector<double> v = u;
          v[k] += du;
          eval(t, x, v, f1, g1);
          for (std::size_t j = 0; j < d; ++j)
            if ((f1[j] - f0[j]) / du > tol) throw GuardError("f is not decreasing in u at node " + std::to_string(i));
          for (std::size_t l2 = 0; l2 < m; ++l2) {
            const double q = (g1[l2] - g0[l2]) / du;
            if (q < -(l2 == k ? c0 : 0.0) - tol) throw GuardError("g violates the one-sided bound in u at node " + std::to_string(i));
          }
        }
      }
    }
  }
}

Nonlinearity reduce_c0(const Nonlinearity& nl, double T) {
  if (nl.c0.is_zero()) return nl;
  Nonlinearity r = nl;
  r.id = nl.id + "~";
  const TimeProfile c0 = nl.c0;
  const CoefficientFn f = nl.f, g = nl.g;
  const std::size_t d = nl.dim, m = nl.width;
  r.f = [=](double t, std::span<const double> x, std::span<const double> u, std::span<double> out) {
    const double E = std::exp(c0.integral(t, T));
    std::vector<double> y(d), v(m);
    for (std::size_t a = 0; a < d; ++a) y[a] = E * x[a];
    for (std::size_t k = 0; k < m; ++k) v[k] = u[k] / E;
    f(t, y, v, out);
    for (std::size_t a = 0; a < d; ++a) out[a] = out[a] / E + c0(t) * x[a];
  };
  r.g = [=](double t, std::span<const double> x, std::span<const double> u, std::span<double> out) {
    const double E = std::exp(c0.integral(t, T));
    std::vector<double> y(d), v(m);
    for (std::size_t a = 0; a < d; ++a) y[a] = E * x[a];
    for (std::size_t k = 0; k < m; ++k) v[k] = u[k] / E;
    if (g) g(t, y, v, out);
    else std::fill(out.begin(), out.end(), 0.0);
    for (std::size_t k = 0; k < m; ++k) out[k] = E * out[k] + c0(t) * u[k];
  };
  r.c0 = TimeProfile(0.0);
  return r;
}

std::size_t LatticeIterate::index_of(double t) const {
  for (std::size_t k = 0; k < times.size(); ++k)
    if (std::abs(times[k] - t) <= 1e-12 * std::max(1.0, std::abs(t))) return k;
  throw DomainError("time " + std::to_string(t) + " is not a lattice slice");
}

namespace {

double growth_of(const std::vector<GridFunction>& slices) {
  double c = 0.0;
  const Grid& g = slices.front().grid();
  Point x(g.dim());
  for (const auto& s : slices)
    for (std::size_t i = 0; i < g.size(); ++i) {
      g.coords(i, x);
      double r = 0.0;
      for (double e : x) r += e * e;
      for (std::size_t k = 0; k < s.width(); ++k) c = std::max(c, std::abs(s(i, k)) / (1.0 + std::sqrt(r)));
    }
  return c;
}

std::size_t held_index(const std::vector<double>& times, double t) {
  auto it = std::upper_bound(times.begin(), times.end(), t);
  return it == times.begin() ? 0 : static_cast<std::size_t>(it - times.begin()) - 1;
}

void check_times(std::span<const double> times) {
  if (times.size() < 2) throw DomainError("a lattice needs at least two time slices");
  for (std::size_t k = 1; k < times.size(); ++k)
    if (!(times[k] > times[k - 1])) throw DomainError("lattice times must increase");
}

}  // namespace

TransportProblem frozen_problem(const LatticeIterate& u, const Nonlinearity& nl, const VectorFn& u_T, double T) {
  const Grid& grid = u.grid();
  const std::size_t d = nl.dim, m = nl.width;
  if (grid.dim() != d || u.slices.front().width() != m) throw DimensionError("iterate does not match the nonlinearity");
  std::vector<GridFunction> bs;
  Point x(d);
  std::vector<double> out(d);
  for (std::size_t k = 0; k < u.times.size(); ++k) {
    std::vector<double> v(grid.size() * d);
    for (std::size_t i = 0; i < grid.size(); ++i) {
      grid.coords(i, x);
      nl.f(u.times[k], x, u.slices[k].at_node(i), std::span<double>(v.data() + i * d, d));
    }
    bs.emplace_back(grid, std::move(v), d);
  }
  TransportProblem p;
  p.b = std::make_shared<GriddedField>("frozen-" + nl.id, u.times, std::move(bs), TimeInterpolation::hold);
  if (nl.g) {
    auto slices = std::make_shared<const std::vector<GridFunction>>(u.slices);
    auto times = std::make_shared<const std::vector<double>>(u.times);
    const CoefficientFn g = nl.g;
    p.d = [slices, times, g, m](double t, std::span<const double> y, std::span<double> o) {
      std::vector<double> uu(m);
      (*slices)[held_index(*times, t)].interpolate(y, uu);
      g(t, y, uu, o);
    };
    p.source_knots = u.times;
  }
  p.terminal = u_T;
  p.width = m;
  p.T = T;
  p.terminal_tag = Monotonicity::decreasing;
  return p;
}

LatticeIterate lattice_start(const Grid& grid, std::span<const double> times, const VectorFn& u_T, std::size_t width,
                             LatticeDirection direction) {
  check_times(times);
  const GridFunction uT = GridFunction::sample(grid, width, u_T);
  LatticeIterate it;
  it.direction = direction;
  it.times.assign(times.begin(), times.end());
  std::vector<double> level(width);
  for (std::size_t k = 0; k < width; ++k) level[k] = direction == LatticeDirection::from_top ? uT.max(k) : uT.min(k);
  for (std::size_t j = 0; j + 1 < times.size(); ++j) {
    std::vector<double> v(grid.size() * width);
    for (std::size_t i = 0; i < grid.size(); ++i)
      for (std::size_t k = 0; k < width; ++k) v[i * width + k] = level[k];
    it.slices.emplace_back(grid, std::move(v), width);
  }
  it.slices.push_back(uT);
  it.growth_bound = growth_of(it.slices);
  return it;
}

LatticeIterate fixed_point_map(const LatticeIterate& u, const Nonlinearity& nl, const VectorFn& u_T,
                               const NonlinearOptions& options) {
  if (!nl.c0.is_zero()) throw DomainError("fixed_point_map needs C0 = 0; reduce the nonlinearity first");
  check_times(u.times);
  for (const auto& s : u.slices)
    if (!is_decreasing(s)) throw DomainError("iterate left the lattice: a slice is not decreasing");
  const double T = u.times.back();
  TransportProblem p = frozen_problem(u, nl, u_T, T);
  TransportOptions o;
  o.side = u.direction == LatticeDirection::from_top ? FlowSide::lower : FlowSide::upper;
  o.eps = options.eps;
  o.cfl = options.cfl;
  o.field_grid = options.field_grid;
  o.validate = options.validate;
  const TransportSolution v = solve_transport(p, u.grid(), u.times, o);
  LatticeIterate out;
  out.times = u.times;
  out.slices = v.slices;
  out.iteration = u.iteration + 1;
  out.direction = u.direction;
  out.growth_bound = growth_of(out.slices);
  return out;
}

double lattice_distance(const LatticeIterate& a, const LatticeIterate& b) {
  if (a.slices.size() != b.slices.size()) throw DimensionError("iterates have different slice counts");
  double worst = 0.0;
  for (std::size_t k = 0; k < a.slices.size(); ++k) worst = std::max(worst, lp_distance(a.slices[k], b.slices[k]));
  return worst;
}

bool lattice_leq(const LatticeIterate& a, const LatticeIterate& b, double tol) {
  if (a.slices.size() != b.slices.size()) throw DimensionError("iterates have different slice counts");
  for (std::size_t k = 0; k < a.slices.size(); ++k) {
    const auto va = a.slices[k].values(), vb = b.slices[k].values();
    for (std::size_t j = 0; j < va.size(); ++j)
      if (va[j] > vb[j] + tol) return false;
  }
  return true;
}

LatticeIterate lattice_from(const Grid& grid, std::span<const double> times, std::size_t width,
                            const std::function<void(double, std::span<const double>, std::span<double>)>& fn,
                            LatticeDirection direction) {
  check_times(times);
  LatticeIterate it;
  it.direction = direction;
  it.times.assign(times.begin(), times.end());
  for (double t : times)
    it.slices.push_back(GridFunction::sample(grid, width, [&](std::span<const double> x, std::span<double> o) { fn(t, x, o); }));
  it.growth_bound = growth_of(it.slices);
  return it;
}

namespace {

// Maps an iterate of the reduced problem back: u(t, y) = e^{-L} u~(t, e^{-L} y).
LatticeIterate expand(const LatticeIterate& red, const TimeProfile& c0) {
  if (c0.is_zero()) return red;
  LatticeIterate out = red;
  const double T = red.times.back();
  const Grid& g = red.grid();
  for (std::size_t k = 0; k < red.times.size(); ++k) {
    const double E = std::exp(c0.integral(red.times[k], T));
    const GridFunction& src = red.slices[k];
    out.slices[k] = GridFunction::sample(g, src.width(), [&](std::span<const double> y, std::span<double> o) {
      std::vector<double> x(y.size());
      for (std::size_t a = 0; a < y.size(); ++a) x[a] = y[a] / E;
      src.interpolate(x, o);
      for (double& v : o) v /= E;
    });
  }
  out.growth_bound = growth_of(out.slices);
  return out;
}

double directional_defect(const LatticeIterate& prev, const LatticeIterate& next) {
  double worst = 0.0;
  const double sign = next.direction == LatticeDirection::from_top ? 1.0 : -1.0;
  for (std::size_t k = 0; k < prev.slices.size(); ++k) {
    const auto a = prev.slices[k].values(), b = next.slices[k].values();
    for (std::size_t j = 0; j < a.size(); ++j) worst = std::max(worst, sign * (b[j] - a[j]));
  }
  return worst;
}

}  // namespace

ExtremalReport solve_extremal(const Nonlinearity& nl, const VectorFn& u_T, const Grid& grid,
                              std::span<const double> times, LatticeDirection direction, std::size_t max_iter,
                              double tol, const NonlinearOptions& options) {
  check_times(times);
  const double T = times.back();
  const Nonlinearity red = reduce_c0(nl, T);
  ExtremalReport rep;
  double vol = 1.0;
  for (std::size_t a = 0; a < grid.dim(); ++a) vol *= grid.upper(a) - grid.lower(a);
  rep.tolerance = tol > 0.0 ? tol : 1e-3 * vol;
  LatticeIterate u = lattice_start(grid, times, u_T, nl.width, direction);
  for (std::size_t it = 0; it < max_iter; ++it) {
    LatticeIterate v = fixed_point_map(u, red, u_T, options);
    const double change = lattice_distance(u, v);
    rep.changes.push_back(change);
    if (it > 0) rep.monotone_defect = std::max(rep.monotone_defect, directional_defect(u, v));
    u = std::move(v);
    rep.iterations = it + 1;
    if (change < rep.tolerance) {
      rep.converged = true;
      break;
    }
  }
  rep.fixed_point_residual = lattice_distance(u, fixed_point_map(u, red, u_T, options));
  rep.solution = expand(u, nl.c0);
  return rep;
}

LatticeMaxReport lattice_max(const LatticeIterate& u, const LatticeIterate& v, const Nonlinearity& nl,
                             const VectorFn& u_T, double eps) {
  if (u.times != v.times) throw DimensionError("iterates have different time slices");
  LatticeMaxReport r;
  r.combined = u;
  for (std::size_t k = 0; k < u.slices.size(); ++k) {
    const auto a = u.slices[k].values(), b = v.slices[k].values();
    std::vector<double> w(a.size());
    for (std::size_t j = 0; j < a.size(); ++j) w[j] = std::max(a[j], b[j]);
    r.combined.slices[k] = GridFunction(u.grid(), std::move(w), u.slices[k].width());
  }
  r.combined.growth_bound = growth_of(r.combined.slices);
  auto residual = [&](const LatticeIterate& w) {
    const TransportProblem p = frozen_problem(w, nl, u_T, w.times.back());
    TransportSolution s;
    s.times = w.times;
    s.slices = w.slices;
    s.eps = eps;
    return subsupersolution_residual(s, p, eps, ResidualSide::sub);
  };
  r.residual_u = residual(u);
  r.residual_v = residual(v);
  r.residual_combined = residual(r.combined);
  r.passed = r.residual_combined.violations == 0;
  return r;
}

CharacteristicsBundle extract_characteristics(const LatticeIterate& u, const Nonlinearity& nl, const VectorFn& u_T,
                                              double t, const NonlinearOptions& options) {
  if (!nl.c0.is_zero()) throw DomainError("characteristics need C0 = 0; reduce the nonlinearity first");
  const std::size_t k0 = u.index_of(t);
  const double T = u.times.back();
  const TransportProblem p = frozen_problem(u, nl, u_T, T);
  const Grid& grid = u.grid();
  const std::size_t d = grid.dim(), m = nl.width;
  std::vector<double> s_times(u.times.begin() + static_cast<std::ptrdiff_t>(k0), u.times.end());
  FlowOptions fo;
  fo.cfl = options.cfl;
  fo.field_grid = options.field_grid;
  fo.validate = options.validate;
  const FlowSide side = u.direction == LatticeDirection::from_top ? FlowSide::lower : FlowSide::upper;
  const double eps = options.eps > 0.0 ? options.eps : grid.max_spacing();
  const FlowMap flow = integrate_regularized_flow(*p.b, side, eps, t, s_times, grid, fo);
  CharacteristicsBundle cb;
  cb.start_time = t;
  cb.times = s_times;
  for (std::size_t j = 0; j < s_times.size(); ++j) {
    const GridFunction& X = flow.slices[j];
    const GridFunction& us = u.slices[k0 + j];
    std::vector<double> U(grid.size() * m);
    for (std::size_t i = 0; i < grid.size(); ++i) us.interpolate(X.at_node(i), std::span<double>(U.data() + i * m, m));
    cb.X.push_back(X);
    cb.U.emplace_back(grid, std::move(U), m);
  }
  std::vector<double> ut(m);
  double defect = 0.0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    u_T(cb.X.back().at_node(i), ut);
    for (std::size_t k = 0; k < m; ++k) defect += std::abs(cb.U.back()(i, k) - ut[k]);
  }
  cb.terminal_defect = defect * grid.cell_volume();
  double res = 0.0;
  std::size_t count = 0;
  std::vector<double> gv(m);
  for (std::size_t j = 1; j + 1 < s_times.size(); ++j) {
    const double span = s_times[j + 1] - s_times[j - 1];
    for (std::size_t i = 0; i < grid.size(); ++i) {
      if (nl.g) nl.g(s_times[j], cb.X[j].at_node(i), cb.U[j].at_node(i), gv);
      else std::fill(gv.begin(), gv.end(), 0.0);
      for (std::size_t k = 0; k < m; ++k) {
        res += std::abs(-(cb.U[j + 1](i, k) - cb.U[j - 1](i, k)) / span - gv[k]);
        ++count;
      }
    }
  }
  cb.backward_residual = count ? res / static_cast<double>(count) : 0.0;
  (void)d;
  return cb;
}

}  // namespace ordflow
