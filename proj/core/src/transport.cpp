#include "ordflow/transport.hpp"

#include <algorithm>
#include <cmath>

#include "ordflow/error.hpp"
#include "ordflow/monotone.hpp"
#include "ordflow/parallel.hpp"
#include "ordflow/regularize.hpp"

namespace ordflow {

std::size_t TransportSolution::index_of(double t) const {
  for (std::size_t k = 0; k < times.size(); ++k)
    if (std::abs(times[k] - t) <= 1e-12 * std::max(1.0, std::abs(t))) return k;
  throw DomainError("time " + std::to_string(t) + " is not stored in the solution");
}

GridFunction sample_terminal(const TransportProblem& p, const Grid& grid) {
  return GridFunction::sample(grid, p.width, p.terminal);
}

namespace {

std::vector<double> sorted_times(std::span<const double> times, double T) {
  std::vector<double> out(times.begin(), times.end());
  if (out.empty()) throw DomainError("no output times requested");
  for (std::size_t k = 0; k < out.size(); ++k) {
    if (out[k] > T + 1e-12) throw DomainError("output time beyond the terminal time");
    if (k > 0 && !(out[k] > out[k - 1])) throw DomainError("output times must be increasing");
  }
  return out;
}

void check_problem(const TransportProblem& p, const Grid& grid, const std::vector<double>& times) {
  if (!p.b) throw DomainError("transport problem has no velocity field");
  if (p.b->dim() != grid.dim()) throw DimensionError("field dimension does not match the grid");
  if (!p.terminal) throw DomainError("transport problem has no terminal datum");
  if (p.terminal_tag != Monotonicity::none) {
    const GridFunction uT = sample_terminal(p, grid);
    if (!has_monotonicity(uT, p.terminal_tag))
      throw DomainError(std::string("terminal datum is not ") + to_string(p.terminal_tag));
  }
  if (p.d) {
    std::vector<double> check = times;
    check.insert(check.end(), p.source_knots.begin(), p.source_knots.end());
    for (double t : check) {
      const GridFunction ds = GridFunction::sample(grid, p.width, [&](std::span<const double> x, std::span<double> out) {
        p.d(t, x, out);
      });
      if (!is_decreasing(ds)) throw DomainError("source term d(t, .) must be decreasing");
    }
  }
}

}  // namespace

TransportSolution solve_transport(const TransportProblem& p, const Grid& grid, std::span<const double> times,
                                  const TransportOptions& options) {
  const std::vector<double> out = sorted_times(times, p.T);
  if (options.validate) check_problem(p, grid, out);
  const double eps = options.eps > 0.0 ? options.eps : grid.max_spacing();
  const Grid& fg = options.field_grid ? *options.field_grid : grid;
  const double t0 = out.front();
  std::vector<double> fallback = out;
  fallback.push_back(p.T);
  if (options.validate) validate_field(*p.b, fg, tabulation_times(*p.b, t0, p.T, fallback));
  const auto field = regularized_field(*p.b, options.side, eps, fg, t0, p.T, fallback);
  double dt = guarded_step(*field, eps, options.cfl);
  if (options.dt > 0.0) {
    if (options.dt > dt * (1.0 + 1e-12)) throw GuardError("time step exceeds the stability limit of the regularized field");
    dt = options.dt;
  }
  dt = std::min(dt, std::max(p.T - t0, 1e-300));

  std::vector<double> breaks = field->time_knots();
  breaks.insert(breaks.end(), p.source_knots.begin(), p.source_knots.end());
  const std::size_t d = grid.dim(), m = p.width;
  TransportSolution sol;
  sol.times = out;
  sol.eps = eps;
  sol.side = options.side;
  sol.provenance = Provenance::flow_composition;
  for (double t : out) {
    const std::vector<double> tg = time_grid(t, p.T, dt, breaks);
    std::vector<double> values(grid.size() * m);
    const double decay_total = std::exp(p.c.integral(t, p.T));
    parallel_for(grid.size(), [&](std::size_t i) {
      std::vector<double> x(d), work, uT(m), ds0(m), ds1(m), acc(m, 0.0);
      grid.coords(i, x);
      for (std::size_t k = 1; k < tg.size(); ++k) {
        const double a = tg[k - 1], h = tg[k] - a;
        if (p.d) p.d(a, x, ds0);
        rk4_step(*field, a, h, x, work);
        if (p.d) {
          p.d(std::nextafter(tg[k], a), x, ds1);
          const double wa = std::exp(p.c.integral(t, a)), wb = std::exp(p.c.integral(t, tg[k]));
          for (std::size_t c = 0; c < m; ++c) acc[c] += 0.5 * h * (wa * ds0[c] + wb * ds1[c]);
        }
      }
      p.terminal(x, uT);
      for (std::size_t c = 0; c < m; ++c) values[i * m + c] = uT[c] * decay_total + acc[c];
    });
    sol.slices.emplace_back(grid, std::move(values), m);
  }
  return sol;
}

namespace {

// Removes C1 by x -> e^{Lambda(t)} x with Lambda(t) = omega1(T) - omega1(t).
struct Reduced {
  std::vector<GridFunction> slices;
  FieldPtr b;
};

Reduced remove_c1(const TransportSolution& u, const TransportProblem& p) {
  if (p.b->c1().is_zero()) return {u.slices, p.b};
  const Grid& g = u.grid();
  const std::size_t d = g.dim();
  Reduced r;
  for (std::size_t k = 0; k < u.times.size(); ++k) {
    const double scale = std::exp(p.b->omega1(u.times[k], p.T));
    const GridFunction& src = u.slices[k];
    r.slices.push_back(GridFunction::sample(g, src.width(), [&](std::span<const double> x, std::span<double> out) {
      std::vector<double> y(d);
      for (std::size_t a = 0; a < d; ++a) y[a] = scale * x[a];
      src.interpolate(y, out);
    }));
  }
  FieldPtr base = p.b;
  const double T = p.T;
  r.b = analytic_field(
      d, base->id() + "~",
      [base, T, d](double t, std::span<const double> x, std::span<double> out) {
        const double scale = std::exp(base->omega1(t, T));
        std::vector<double> y(d);
        for (std::size_t a = 0; a < d; ++a) y[a] = scale * x[a];
        base->evaluate(t, y, out);
        const double c1 = base->c1()(t);
        for (std::size_t a = 0; a < d; ++a) out[a] = out[a] / scale + c1 * x[a];
      },
      TimeProfile(0.0), TimeProfile(0.0), base->autonomous(), base->time_knots());
  return r;
}

}  // namespace

ResidualReport subsupersolution_residual(const TransportSolution& u, const TransportProblem& p, double eps,
                                         ResidualSide side, double tolerance_factor) {
  const Grid& g = u.grid();
  const std::size_t d = g.dim(), m = u.slices.front().width();
  if (u.times.size() < 2) throw DomainError("residual needs at least two time slices");
  const MollifierKernel kernel(g, eps, side == ResidualSide::sub ? KernelSide::upper : KernelSide::lower);
  const Reduced red = remove_c1(u, p);
  std::vector<GridFunction> U;
  for (const auto& s : red.slices) U.push_back(one_sided_mollify(s, kernel));

  ResidualReport rep;
  rep.times = u.times;
  const std::size_t K = u.times.size();
  for (std::size_t k = 0; k < K; ++k) {
    const std::size_t k0 = k == 0 ? 0 : k - 1, k1 = k + 1 == K ? k : k + 1;
    const double dt_span = u.times[k1] - u.times[k0];
    const double dt_local = std::max(k > 0 ? u.times[k] - u.times[k - 1] : 0.0,
                                     k + 1 < K ? u.times[k + 1] - u.times[k] : 0.0);
    const double t = u.times[k];
    std::vector<double> res(g.size() * m), tol(g.size() * m);
    std::vector<double> x(d), bx(d), dx(m);
    for (std::size_t i = 0; i < g.size(); ++i) {
      g.coords(i, x);
      red.b->evaluate(t, x, bx);
      if (p.d) p.d(t, x, dx);
      for (std::size_t c = 0; c < m; ++c) {
        const double ut = (U[k1](i, c) - U[k0](i, c)) / dt_span;
        double adv = 0.0, mag = 0.0;
        for (std::size_t a = 0; a < d; ++a) {
          const std::size_t ia = g.axis_index(i, a);
          const bool has_fwd = ia + 1 < g.count(a), has_bwd = ia > 0;
          const double h = g.spacing(a);
          double grad = 0.0;
          if ((bx[a] < 0.0 && has_fwd) || !has_bwd)
            grad = (U[k](i + g.stride(a), c) - U[k](i, c)) / h;
          else
            grad = (U[k](i, c) - U[k](i - g.stride(a), c)) / h;
          adv += bx[a] * grad;
          mag += std::abs(bx[a] * grad);
        }
        const double cu = p.c(t) * U[k](i, c);
        const double src = p.d ? dx[c] : 0.0;
        res[i * m + c] = -ut - adv - cu - src;
        tol[i * m + c] = tolerance_factor * (g.max_spacing() + dt_local) * (1.0 + std::abs(ut) + mag + std::abs(cu) + std::abs(src));
        const double r = res[i * m + c];
        const double wrong = side == ResidualSide::sub ? r - tol[i * m + c] : -r - tol[i * m + c];
        ++rep.checked;
        if (wrong > 0.0) {
          ++rep.violations;
          rep.max_violation = std::max(rep.max_violation, wrong);
        }
      }
    }
    rep.residual.emplace_back(g, std::move(res), m);
    rep.tolerance.emplace_back(g, std::move(tol), m);
  }
  rep.violation_fraction = rep.checked ? static_cast<double>(rep.violations) / static_cast<double>(rep.checked) : 0.0;
  return rep;
}

namespace {

double positive_part_integral(const GridFunction& u, const GridFunction& v, double R, double p_exp) {
  const Grid& g = u.grid();
  Point x(g.dim());
  double acc = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    g.coords(i, x);
    double r2 = 0.0;
    for (double e : x) r2 += e * e;
    if (r2 > R * R) continue;
    for (std::size_t c = 0; c < u.width(); ++c) acc += std::pow(std::max(0.0, u(i, c) - v(i, c)), p_exp);
  }
  return acc * g.cell_volume();
}

}  // namespace

double comparison_gap(const TransportSolution& u_sub, const TransportSolution& v_super, const TransportProblem& p,
                      double R, double t, double p_exp) {
  const double lhs = positive_part_integral(u_sub.at(t), v_super.at(t), R, p_exp);
  const double R2 = R + (R + 0.5) * (std::exp(4.0 * p.b->omega0(t, p.T)) - 1.0);
  const double factor = std::exp(p_exp * p.c.integral(t, p.T));
  const double rhs = factor * positive_part_integral(u_sub.at(p.T), v_super.at(p.T), R2, p_exp);
  return lhs - rhs;
}

RenormalizationReport renormalize(const TransportSolution& u, const std::function<double(double)>& beta,
                                  const TransportProblem& p, const TransportOptions& options) {
  if (!p.c.is_zero() || p.d) throw DomainError("renormalization identity needs c = 0 and d = 0");
  RenormalizationReport r;
  r.renormalized = u;
  for (auto& s : r.renormalized.slices) s = s.map(beta);
  TransportProblem q = p;
  const VectorFn base = p.terminal;
  q.terminal = [base, beta, m = p.width](std::span<const double> x, std::span<double> out) {
    base(x, out);
    for (std::size_t c = 0; c < m; ++c) out[c] = beta(out[c]);
  };
  q.terminal_tag = Monotonicity::none;
  TransportOptions o = options;
  o.side = u.side;
  if (o.eps == 0.0) o.eps = u.eps;
  r.reference = solve_transport(q, u.grid(), u.times, o);
  for (std::size_t k = 0; k < u.times.size(); ++k)
    r.defect = std::max(r.defect, lp_distance(r.renormalized.slices[k], r.reference.slices[k]));
  return r;
}

LpBoundReport lp_bound(const TransportSolution& u, const TransportProblem& p, double R, double t, double p_exp,
                       double tolerance) {
  const GridFunction& ut = u.at(t);
  const GridFunction uT = sample_terminal(p, u.grid());
  LpBoundReport r;
  r.radius = R + (1.0 + R) * (std::exp(p.b->omega0(t, p.T)) - 1.0);
  auto norm = [&](const GridFunction& f, double radius) {
    const Grid& g = f.grid();
    Point x(g.dim());
    double acc = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
      g.coords(i, x);
      double r2 = 0.0;
      for (double e : x) r2 += e * e;
      if (r2 > radius * radius) continue;
      for (std::size_t c = 0; c < f.width(); ++c) acc += std::pow(std::abs(f(i, c)), p_exp);
    }
    return std::pow(acc * g.cell_volume(), 1.0 / p_exp);
  };
  const double dim = static_cast<double>(u.grid().dim());
  r.lhs = norm(ut, R);
  r.rhs = std::exp(dim * p.b->omega1(t, p.T) / p_exp) * norm(uT, r.radius);
  if (!p.c.is_zero()) r.rhs *= std::exp(p.c.integral(t, p.T));
  r.holds = r.lhs <= r.rhs + tolerance;
  return r;
}

}  // namespace ordflow
