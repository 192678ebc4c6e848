#include "ordflow/flow.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ordflow/error.hpp"
#include "ordflow/monotone.hpp"
#include "ordflow/parallel.hpp"
#include "ordflow/regularize.hpp"

namespace ordflow {

const char* to_string(FlowVariant v) {
  switch (v) {
    case FlowVariant::maximal: return "maximal";
    case FlowVariant::minimal: return "minimal";
    case FlowVariant::regularized: return "regularized";
    case FlowVariant::limit: return "limit";
    case FlowVariant::stochastic: return "stochastic";
  }
  return "unknown";
}

std::size_t FlowMap::index_of(double t) const {
  for (std::size_t k = 0; k < times.size(); ++k)
    if (std::abs(times[k] - t) <= 1e-12 * std::max(1.0, std::abs(t))) return k;
  throw DomainError("time " + std::to_string(t) + " is not stored in the flow map");
}

std::shared_ptr<const GriddedField> regularized_field(const VelocityField& b, FlowSide side, double eps,
                                                      const Grid& field_grid, double s, double t,
                                                      std::span<const double> fallback_times) {
  if (!(eps > 0.0)) throw DomainError("regularization width must be positive");
  if (b.dim() != field_grid.dim()) throw DimensionError("field dimension does not match the grid");
  const std::vector<double> tab = tabulation_times(b, s, t, fallback_times);
  std::vector<GridFunction> slices;
  slices.reserve(tab.size());
  for (double tau : tab) {
    const GridFunction raw = sample_field(b, tau, field_grid);
    slices.push_back(side == FlowSide::upper ? sup_convolution(raw, eps) : inf_convolution(raw, eps));
  }
  TimeInterpolation mode = TimeInterpolation::hold;
  if (const auto* g = dynamic_cast<const GriddedField*>(&b)) mode = g->mode();
  return std::make_shared<GriddedField>(b.id() + (side == FlowSide::upper ? "^eps" : "_eps"), tab,
                                        std::move(slices), mode);
}

std::vector<double> time_grid(double s, double t, double dt_max, std::span<const double> required) {
  if (!(t >= s)) throw DomainError("time grid needs s <= t");
  if (!(dt_max > 0.0)) throw DomainError("time step must be positive");
  std::vector<double> marks{s};
  std::vector<double> req(required.begin(), required.end());
  std::sort(req.begin(), req.end());
  const double tol = 1e-12 * std::max(1.0, std::max(std::abs(s), std::abs(t)));
  for (double r : req)
    if (r > s + tol && r < t - tol && r > marks.back() + tol) marks.push_back(r);
  if (t > s + tol) marks.push_back(t);
  std::vector<double> out{s};
  for (std::size_t k = 1; k < marks.size(); ++k) {
    const double a = marks[k - 1], b = marks[k];
    const auto n = static_cast<std::size_t>(std::ceil((b - a) / dt_max - 1e-9));
    for (std::size_t i = 1; i < n; ++i) out.push_back(a + (b - a) * static_cast<double>(i) / static_cast<double>(n));
    out.push_back(b);
  }
  return out;
}

void rk4_step(const VelocityField& b, double t, double dt, std::span<double> x, std::vector<double>& work) {
  const std::size_t d = x.size();
  work.resize(5 * d);
  std::span<double> k1(work.data(), d), k2(work.data() + d, d), k3(work.data() + 2 * d, d),
      k4(work.data() + 3 * d, d), y(work.data() + 4 * d, d);
  const double t_half = t + 0.5 * dt;
  const double t_end = std::nextafter(t + dt, t);
  b.evaluate(t, x, k1);
  for (std::size_t i = 0; i < d; ++i) y[i] = x[i] + 0.5 * dt * k1[i];
  b.evaluate(t_half, y, k2);
  for (std::size_t i = 0; i < d; ++i) y[i] = x[i] + 0.5 * dt * k2[i];
  b.evaluate(t_half, y, k3);
  for (std::size_t i = 0; i < d; ++i) y[i] = x[i] + dt * k3[i];
  b.evaluate(t_end, y, k4);
  for (std::size_t i = 0; i < d; ++i) x[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
}

double guarded_step(const GriddedField& field, double eps, double cfl) {
  const double sup = field.sup_norm();
  if (sup == 0.0) return std::numeric_limits<double>::infinity();
  return cfl * eps / sup;
}

namespace {

std::vector<double> stored_times(double s, std::span<const double> times) {
  std::vector<double> out{s};
  for (double t : times) {
    if (!(t >= s)) throw DomainError("flow output times must not precede the start time");
    if (t == out.back()) continue;
    if (!(t > out.back())) throw DomainError("flow output times must be increasing");
    out.push_back(t);
  }
  return out;
}

double choose_step(const GriddedField& field, double eps, const FlowOptions& options, double span) {
  const double limit = guarded_step(field, eps, options.cfl);
  if (options.dt > 0.0) {
    if (options.dt > limit * (1.0 + 1e-12))
      throw GuardError("time step " + std::to_string(options.dt) + " exceeds the stability limit " +
                       std::to_string(limit) + " of the regularized field");
    return options.dt;
  }
  return std::min(limit, std::max(span, 1e-300));
}

FlowMap integrate_on(const GriddedField& field, double eps, double dt, double s,
                     const std::vector<double>& out_times, const Grid& grid) {
  std::vector<double> req(out_times.begin(), out_times.end());
  for (double k : field.time_knots()) req.push_back(k);
  const std::vector<double> tg = time_grid(s, out_times.back(), dt, req);
  std::vector<long> store(tg.size(), -1);
  std::size_t next = 0;
  for (std::size_t k = 0; k < tg.size() && next < out_times.size(); ++k)
    if (std::abs(tg[k] - out_times[next]) <= 1e-12 * std::max(1.0, std::abs(tg[k])))
      store[k] = static_cast<long>(next++);
  if (next != out_times.size()) throw DomainError("output times not aligned with the time grid");

  const std::size_t d = grid.dim();
  const std::size_t nt = out_times.size();
  std::vector<std::vector<double>> data(nt, std::vector<double>(grid.size() * d));
  parallel_for(grid.size(), [&](std::size_t i) {
    std::vector<double> x(d), work;
    grid.coords(i, x);
    for (std::size_t k = 0; k < tg.size(); ++k) {
      if (k > 0) rk4_step(field, tg[k - 1], tg[k] - tg[k - 1], x, work);
      if (store[k] >= 0)
        std::copy(x.begin(), x.end(), data[static_cast<std::size_t>(store[k])].begin() + static_cast<long>(i * d));
    }
  });
  FlowMap flow;
  flow.start_time = s;
  flow.times = out_times;
  flow.eps = eps;
  flow.variant = FlowVariant::regularized;
  for (auto& v : data) flow.slices.emplace_back(grid, std::move(v), d);
  return flow;
}

}  // namespace

FlowMap integrate_regularized_flow(const VelocityField& b, FlowSide side, double eps, double s,
                                   std::span<const double> times, const Grid& grid,
                                   const FlowOptions& options) {
  if (b.dim() != grid.dim()) throw DimensionError("field dimension does not match the grid");
  const std::vector<double> out = stored_times(s, times);
  const Grid& fg = options.field_grid ? *options.field_grid : grid;
  if (options.validate) validate_field(b, fg, tabulation_times(b, s, out.back(), out));
  const auto field = regularized_field(b, side, eps, fg, s, out.back(), out);
  const double dt = choose_step(*field, eps, options, out.back() - s);
  return integrate_on(*field, eps, dt, s, out, grid);
}

std::vector<double> default_eps_schedule(double eps0, double floor) {
  if (!(floor > 0.0) || !(eps0 >= floor)) throw DomainError("eps schedule needs eps0 >= floor > 0");
  std::vector<double> out;
  for (double e = eps0; e >= floor * (1.0 - 1e-12); e *= 0.5) out.push_back(e);
  return out;
}

namespace {

GridFunction extrapolate(const GridFunction& fine, const GridFunction& coarse, const GridFunction& lo,
                         const GridFunction& hi) {
  std::vector<double> v(fine.values().size());
  for (std::size_t k = 0; k < v.size(); ++k) {
    const double e = 2.0 * fine.values()[k] - coarse.values()[k];
    v[k] = std::clamp(e, lo.values()[k], std::max(lo.values()[k], hi.values()[k]));
  }
  return GridFunction(fine.grid(), std::move(v), fine.width());
}

// Least increasing majorant (prefix max) or greatest increasing minorant (suffix min), axis by axis.
GridFunction monotone_hull(const GridFunction& f, bool majorant) {
  const Grid& g = f.grid();
  const std::size_t m = f.width();
  std::vector<double> v(f.values().begin(), f.values().end());
  for (std::size_t a = 0; a < g.dim(); ++a) {
    const std::size_t st = g.stride(a);
    if (majorant) {
      for (std::size_t i = 0; i < g.size(); ++i) {
        if (g.axis_index(i, a) == 0) continue;
        for (std::size_t c = 0; c < m; ++c) v[i * m + c] = std::max(v[i * m + c], v[(i - st) * m + c]);
      }
    } else {
      for (std::size_t i = g.size(); i-- > 0;) {
        if (g.axis_index(i, a) + 1 >= g.count(a)) continue;
        for (std::size_t c = 0; c < m; ++c) v[i * m + c] = std::min(v[i * m + c], v[(i + st) * m + c]);
      }
    }
  }
  return GridFunction(g, std::move(v), m, Monotonicity::increasing);
}

}  // namespace

MaxMinFlow maximal_minimal_flow(const VelocityField& b, double s, std::span<const double> times,
                                const Grid& grid, std::span<const double> schedule,
                                const FlowOptions& options, double tolerance) {
  if (schedule.empty()) throw DomainError("eps schedule is empty");
  for (std::size_t k = 1; k < schedule.size(); ++k)
    if (!(schedule[k] < schedule[k - 1])) throw DomainError("eps schedule must be strictly decreasing");
  if (schedule.back() < 2.0 * grid.max_spacing() * (1.0 - 1e-9))
    throw DomainError("eps schedule floor must be at least two grid cells");

  const std::vector<double> out = stored_times(s, times);
  const Grid& fg = options.field_grid ? *options.field_grid : grid;
  if (options.validate) validate_field(b, fg, tabulation_times(b, s, out.back(), out));

  MaxMinFlow r;
  r.schedule.assign(schedule.begin(), schedule.end());
  std::vector<std::shared_ptr<const GriddedField>> up, lo;
  double dt = std::numeric_limits<double>::infinity();
  for (double eps : schedule) {
    up.push_back(regularized_field(b, FlowSide::upper, eps, fg, s, out.back(), out));
    lo.push_back(regularized_field(b, FlowSide::lower, eps, fg, s, out.back(), out));
    dt = std::min({dt, choose_step(*up.back(), eps, options, out.back() - s),
                   choose_step(*lo.back(), eps, options, out.back() - s)});
  }
  // One common step for the whole schedule keeps the discrete flows comparable.
  for (std::size_t k = 0; k < schedule.size(); ++k) {
    r.upper_sequence.push_back(integrate_on(*up[k], schedule[k], dt, s, out, grid));
    r.lower_sequence.push_back(integrate_on(*lo[k], schedule[k], dt, s, out, grid));
  }
  for (std::size_t k = 1; k < schedule.size(); ++k)
    for (std::size_t j = 0; j < out.size(); ++j) {
      const auto& u1 = r.upper_sequence[k].slices[j].values();
      const auto& u0 = r.upper_sequence[k - 1].slices[j].values();
      const auto& l1 = r.lower_sequence[k].slices[j].values();
      const auto& l0 = r.lower_sequence[k - 1].slices[j].values();
      for (std::size_t i = 0; i < u1.size(); ++i) {
        r.monotonicity_defect = std::max(r.monotonicity_defect, u1[i] - u0[i]);
        r.monotonicity_defect = std::max(r.monotonicity_defect, l0[i] - l1[i]);
      }
    }
  if (r.monotonicity_defect > tolerance)
    throw GuardError("regularized flows are not monotone in eps (defect " +
                     std::to_string(r.monotonicity_defect) + "); the field may violate the increasing condition");

  const std::size_t K = schedule.size() - 1;
  r.maximal.start_time = r.minimal.start_time = s;
  r.maximal.times = r.minimal.times = out;
  r.maximal.variant = FlowVariant::maximal;
  r.minimal.variant = FlowVariant::minimal;
  r.maximal.eps = r.minimal.eps = schedule[K];
  for (std::size_t j = 0; j < out.size(); ++j) {
    const GridFunction& uk = r.upper_sequence[K].slices[j];
    const GridFunction& lk = r.lower_sequence[K].slices[j];
    GridFunction upper = uk, lower = lk;
    std::vector<double> gap(grid.size(), 0.0);
    if (K > 0) {
      const GridFunction& uc = r.upper_sequence[K - 1].slices[j];
      const GridFunction& lc = r.lower_sequence[K - 1].slices[j];
      upper = monotone_hull(extrapolate(uk, uc, lk, uk), true);
      lower = monotone_hull(extrapolate(lk, lc, lk, upper), false);
      const std::size_t d = grid.dim();
      for (std::size_t i = 0; i < grid.size(); ++i)
        for (std::size_t c = 0; c < d; ++c)
          gap[i] = std::max({gap[i], std::abs(uk(i, c) - uc(i, c)), std::abs(lk(i, c) - lc(i, c))});
    }
    r.maximal.slices.push_back(upper.with_tag(Monotonicity::increasing));
    r.minimal.slices.push_back(lower.with_tag(Monotonicity::increasing));
    r.gap.emplace_back(grid, std::move(gap), 1);
  }
  return r;
}

ComparisonReport check_comparison(const FlowMap& x, const FlowMap& y, double tol) {
  if (x.times.size() != y.times.size() || x.slices.front().values().size() != y.slices.front().values().size())
    throw DimensionError("compared flows must share stored times and grids");
  ComparisonReport r;
  for (std::size_t k = 0; k < x.times.size(); ++k) {
    const GridFunction& a = x.slices[k];
    const GridFunction& b = y.slices[k];
    for (std::size_t i = 0; i < a.nodes(); ++i)
      for (std::size_t c = 0; c < a.width(); ++c) {
        const double excess = a(i, c) - b(i, c);
        if (excess > tol) {
          if (r.ordered) {
            r.first_time = x.times[k];
            r.first_node = i;
            r.first_component = c;
          }
          r.ordered = false;
          ++r.violations;
          r.worst = std::max(r.worst, excess);
        }
      }
  }
  return r;
}

SemigroupReport semigroup_residual(const FlowMap& from_r, const FlowMap& from_s, double s, double t,
                                   const Box* box) {
  if (std::abs(from_s.start_time - s) > 1e-12 * std::max(1.0, std::abs(s)))
    throw DomainError("second flow must start at the intermediate time");
  const GridFunction& inner = from_r.at(s);
  const GridFunction& direct = from_r.at(t);
  const GridFunction& outer = from_s.at(t);
  const Grid& g = inner.grid();
  const std::size_t d = g.dim();
  SemigroupReport rep;
  Point x(d);
  std::vector<double> z(d);
  double acc = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (box) {
      g.coords(i, x);
      if (!box->contains(x)) continue;
    }
    const auto y = inner.at_node(i);
    if (!outer.grid().contains(y, 1e-12)) {
      ++rep.skipped;
      continue;
    }
    outer.interpolate(y, z);
    double e = 0.0;
    for (std::size_t c = 0; c < d; ++c) e += (z[c] - direct(i, c)) * (z[c] - direct(i, c));
    acc += std::sqrt(e);
  }
  rep.residual = acc * g.cell_volume();
  return rep;
}

MeasureBoundReport measure_bound(const FlowMap& flow, const Box& set, double t, const VelocityField& b,
                                 double tolerance_cells) {
  const GridFunction& phi = flow.at(t);
  const Grid& g = phi.grid();
  const std::size_t d = g.dim();
  if (set.dim() != d) throw DimensionError("mask dimension does not match the flow");
  std::size_t count = 0;
  for (std::size_t i = 0; i < g.size(); ++i)
    if (set.contains(phi.at_node(i))) ++count;
  MeasureBoundReport r;
  r.set = set;
  r.set_measure = set.volume();
  r.preimage_measure = static_cast<double>(count) * g.cell_volume();
  r.bound = std::exp(static_cast<double>(d) * b.omega1(flow.start_time, t)) * r.set_measure;
  double boundary = 0.0;
  for (std::size_t a = 0; a < d; ++a) {
    double face = 1.0;
    for (std::size_t c = 0; c < d; ++c)
      if (c != a) face *= set.upper[c] - set.lower[c];
    boundary += face;
  }
  r.grid_tolerance = tolerance_cells * g.max_spacing() * boundary;
  r.holds = r.preimage_measure <= r.bound + r.grid_tolerance;
  return r;
}

namespace {

double corner_radius(const Grid& g) {
  double r2 = 0.0;
  for (std::size_t a = 0; a < g.dim(); ++a) {
    const double m = std::max(std::abs(g.lower(a)), std::abs(g.upper(a)));
    r2 += m * m;
  }
  return std::sqrt(r2);
}

}  // namespace

Grid reach_grid(const Grid& g, const VelocityField& b, double s, double t, double margin) {
  const double R = corner_radius(g);
  const double reach = (R + 1.0) * std::exp(b.omega0(s, t)) - 1.0 + g.max_spacing() + margin;
  std::vector<double> origin(g.dim()), spacing(g.dim());
  std::vector<std::size_t> counts(g.dim());
  for (std::size_t a = 0; a < g.dim(); ++a) {
    const double h = g.spacing(a);
    const double below = std::max(0.0, std::ceil((reach + g.lower(a)) / h - 1e-9));
    const double above = std::max(0.0, std::ceil((reach - g.upper(a)) / h - 1e-9));
    origin[a] = g.lower(a) - below * h;
    spacing[a] = h;
    counts[a] = g.count(a) + static_cast<std::size_t>(below + above);
  }
  return Grid(origin, spacing, counts);
}

}  // namespace ordflow
