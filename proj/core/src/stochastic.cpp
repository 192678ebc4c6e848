#include "ordflow/stochastic.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ordflow/error.hpp"
#include "ordflow/parallel.hpp"
#include "ordflow/random.hpp"

namespace ordflow {

NoiseSpec NoiseSpec::zero(std::size_t d) {
  NoiseSpec n;
  n.dim = d;
  n.brownian = d;
  for (std::size_t i = 0; i < d; ++i)
    n.rows.push_back([](double, double, std::span<double> out) { std::fill(out.begin(), out.end(), 0.0); });
  n.lipschitz = TimeProfile(0.0);
  return n;
}

NoiseSpec NoiseSpec::additive(std::size_t d, double a) {
  if (!(a >= 0.0) || !std::isfinite(a)) throw DomainError("noise amplitude must be finite and nonnegative");
  NoiseSpec n;
  n.dim = d;
  n.brownian = d;
  for (std::size_t i = 0; i < d; ++i)
    n.rows.push_back([i, a](double, double, std::span<double> out) {
      std::fill(out.begin(), out.end(), 0.0);
      out[i] = a;
    });
  n.lipschitz = TimeProfile(0.0);
  n.sup_bound = a;
  return n;
}

NoiseSpec NoiseSpec::diagonal(std::size_t d, std::function<double(double, double)> s, TimeProfile lipschitz,
                              double sup_bound) {
  NoiseSpec n;
  n.dim = d;
  n.brownian = d;
  for (std::size_t i = 0; i < d; ++i)
    n.rows.push_back([i, s](double t, double xi, std::span<double> out) {
      std::fill(out.begin(), out.end(), 0.0);
      out[i] = s(t, xi);
    });
  n.lipschitz = std::move(lipschitz);
  n.sup_bound = sup_bound;
  return n;
}

double brownian_increment(std::uint64_t seed, std::size_t path, std::size_t step, std::size_t component, double dt) {
  const CounterRng rng(CounterRng::derive(seed, path));
  return std::sqrt(dt) * rng.normal((static_cast<std::uint64_t>(step) << 8) + component);
}

double oscillation_constant(const VelocityField& b, const Grid& grid, std::span<const double> times) {
  const std::size_t d = b.dim(), n = grid.size();
  const std::vector<double> ts = times.empty() ? std::vector<double>{0.0} : std::vector<double>(times.begin(), times.end());
  double c2 = 0.0;
  std::vector<double> vals(n * d);
  Point x(d);
  for (double t : ts) {
    for (std::size_t i = 0; i < n; ++i) {
      grid.coords(i, x);
      b.evaluate(t, x, std::span<double>(vals.data() + i * d, d));
    }
    // Pairs against a sparse set of anchors keep this linear in the grid size.
    const std::size_t stride = std::max<std::size_t>(1, n / 64);
    for (std::size_t a = 0; a < n; a += stride) {
      const Point xa = grid.node(a);
      for (std::size_t i = 0; i < n; ++i) {
        grid.coords(i, x);
        double dx = 0.0, db = 0.0;
        for (std::size_t k = 0; k < d; ++k) {
          dx += (x[k] - xa[k]) * (x[k] - xa[k]);
          const double e = vals[i * d + k] - vals[a * d + k];
          db += e * e;
        }
        c2 = std::max(c2, std::sqrt(db) / (std::sqrt(dx) + 1.0));
      }
    }
  }
  return c2;
}

namespace {

Grid default_field_grid(const VelocityField& b, const NoiseSpec& noise, std::span<const double> points, double s,
                        double t, double h) {
  const std::size_t d = b.dim();
  Point lo(d, 0.0), hi(d, 0.0);
  for (std::size_t p = 0; p * d < points.size(); ++p)
    for (std::size_t a = 0; a < d; ++a) {
      lo[a] = std::min(lo[a], points[p * d + a]);
      hi[a] = std::max(hi[a], points[p * d + a]);
    }
  for (std::size_t a = 0; a < d; ++a) {
    lo[a] = h * std::floor(lo[a] / h) - h;
    hi[a] = h * std::ceil(hi[a] / h) + h;
  }
  std::vector<std::size_t> counts(d);
  for (std::size_t a = 0; a < d; ++a) counts[a] = static_cast<std::size_t>(std::llround((hi[a] - lo[a]) / h)) + 1;
  const Grid box(lo, std::vector<double>(d, h), counts);
  const double margin = 6.0 * noise.sup_bound * std::sqrt(std::max(0.0, t - s)) * std::exp(b.omega0(s, t));
  return reach_grid(box, b, s, t, margin);
}

double raw_sup(const VelocityField& b, const Grid& g, std::span<const double> ts) {
  double sup = 0.0;
  std::vector<double> x(b.dim()), v(b.dim());
  for (double t : ts)
    for (std::size_t i = 0; i < g.size(); ++i) {
      g.coords(i, x);
      b.evaluate(t, x, v);
      double n = 0.0;
      for (double e : v) n += e * e;
      sup = std::max(sup, std::sqrt(n));
    }
  return sup;
}

struct Integrator {
  std::shared_ptr<const GriddedField> field;
  const NoiseSpec* noise;
  std::vector<double> tg;

  // Increments for every step of tg along one path, step-major.
  void increments(std::uint64_t seed, std::size_t key, std::vector<double>& dw) const {
    const std::size_t m = noise->brownian;
    dw.assign((tg.size() - 1) * m, 0.0);
    if (noise->is_zero()) return;
    const CounterRng rng(CounterRng::derive(seed, key));
    for (std::size_t n = 1; n < tg.size(); ++n)
      for (std::size_t k = 0; k < m; ++k)
        dw[(n - 1) * m + k] = std::sqrt(tg[n] - tg[n - 1]) * rng.normal((static_cast<std::uint64_t>(n - 1) << 8) + k);
  }

  // Advances x over tg, calling record(n, x) before the first step and after every step n.
  template <typename Record>
  void run(std::span<double> x, const std::vector<double>& dw, Record&& record) const {
    const std::size_t d = x.size(), m = noise->brownian;
    std::vector<double> drift(d), row(m);
    const bool noisy = !noise->is_zero();
    record(0, x);
    for (std::size_t n = 1; n < tg.size(); ++n) {
      const double t = tg[n - 1], dt = tg[n] - t;
      field->evaluate(t, x, drift);
      for (std::size_t i = 0; i < d; ++i) {
        double step = drift[i] * dt;
        if (noisy) {
          noise->rows[i](t, x[i], row);
          for (std::size_t k = 0; k < m; ++k) step += row[k] * dw[(n - 1) * m + k];
        }
        x[i] += step;
      }
      record(n, x);
    }
  }
};

Integrator make_integrator(const VelocityField& b, const NoiseSpec& noise, FlowSide side, double eps_reg, double s,
                           std::span<const double> times, const Grid& fg, const EmOptions& options) {
  if (noise.dim != b.dim() || noise.rows.size() != b.dim())
    throw DimensionError("noise rows do not match the field dimension");
  if (noise.brownian > 256) throw DomainError("at most 256 Brownian components are supported");
  const double t_end = times.back();
  std::vector<double> fallback(times.begin(), times.end());
  if (options.validate) {
    const auto tt = tabulation_times(b, s, t_end, fallback);
    validate_field(b, fg, tt);
    if (std::isfinite(options.oscillation_limit) && oscillation_constant(b, fg, tt) > options.oscillation_limit)
      throw GuardError("drift violates the bounded oscillation condition");
  }
  Integrator it;
  it.noise = &noise;
  it.field = regularized_field(b, side, eps_reg, fg, s, t_end, fallback);
  double dt = em_step(b, noise, eps_reg, s, t_end, fg, options);
  if (options.dt > 0.0) {
    EmOptions unbounded = options;
    unbounded.max_dt = std::numeric_limits<double>::infinity();
    if (options.dt > em_step(b, noise, eps_reg, s, t_end, fg, unbounded) * (1.0 + 1e-12))
      throw GuardError("time step exceeds the stability limit of the regularized drift");
    dt = options.dt;
  }
  std::vector<double> req = it.field->time_knots();
  req.insert(req.end(), times.begin(), times.end());
  it.tg = time_grid(s, t_end, dt, req);
  return it;
}

std::vector<std::size_t> slots(const std::vector<double>& tg, std::span<const double> times) {
  std::vector<std::size_t> slot(tg.size(), times.size());
  for (std::size_t k = 0, j = 0; k < tg.size() && j < times.size(); ++k)
    if (std::abs(tg[k] - times[j]) <= 1e-12 * std::max(1.0, std::abs(times[j]))) slot[k] = j++;
  return slot;
}

void check_times(double s, std::span<const double> times) {
  if (times.empty()) throw DomainError("no output times requested");
  for (std::size_t k = 0; k < times.size(); ++k)
    if (times[k] < s || (k > 0 && !(times[k] > times[k - 1]))) throw DomainError("times must increase from s");
}

}  // namespace

double em_step(const VelocityField& b, const NoiseSpec&, double eps_reg, double s, double t, const Grid& field_grid,
               const EmOptions& options) {
  if (!(eps_reg > 0.0)) throw DomainError("drift regularization width must be positive");
  std::vector<double> fallback{s, t};
  const double sup = raw_sup(b, field_grid, tabulation_times(b, s, t, fallback));
  double dt = options.max_dt;
  if (sup > 0.0) dt = std::min(dt, options.cfl * eps_reg / sup);
  const double c1 = b.c1().max();
  if (c1 > 0.0) dt = std::min(dt, 0.5 / c1);
  return dt;
}

PathBundle em_flow(const VelocityField& b, const NoiseSpec& noise, FlowSide side, double eps_reg, double s,
                   std::span<const double> times, std::span<const double> start_points, std::size_t paths,
                   std::uint64_t seed, const EmOptions& options) {
  check_times(s, times);
  const std::size_t d = b.dim();
  if (start_points.empty() || start_points.size() % d) throw DimensionError("start points do not match the dimension");
  if (paths == 0) throw DomainError("path count must be positive");
  const Grid fg = options.field_grid ? *options.field_grid
                                     : default_field_grid(b, noise, start_points, s, times.back(), eps_reg / 2.0);
  const Integrator it = make_integrator(b, noise, side, eps_reg, s, times, fg, options);
  PathBundle pb;
  pb.dim = d;
  pb.starts = start_points.size() / d;
  pb.paths = paths;
  pb.seed = seed;
  pb.start_points.assign(start_points.begin(), start_points.end());
  pb.times.assign(times.begin(), times.end());
  pb.steps = it.tg;
  pb.values.assign(times.size(), std::vector<double>(pb.starts * paths * d));
  const auto slot = slots(it.tg, times);
  parallel_for(pb.starts * paths, [&](std::size_t job) {
    const std::size_t start = job / paths, path = job % paths;
    std::vector<double> x(start_points.begin() + start * d, start_points.begin() + (start + 1) * d), dw;
    it.increments(seed, path, dw);
    it.run(x, dw, [&](std::size_t n, std::span<const double> y) {
      if (slot[n] < times.size()) std::copy(y.begin(), y.end(), pb.values[slot[n]].begin() + job * d);
    });
  });
  return pb;
}

OrderReport coupled_order_check(const PathBundle& lo, const PathBundle& hi, double tol) {
  if (lo.seed != hi.seed) throw DomainError("coupled bundles must share a seed");
  if (lo.steps != hi.steps) throw DomainError("coupled bundles must share a time grid");
  if (lo.dim != hi.dim || lo.paths != hi.paths || lo.starts != hi.starts || lo.times != hi.times)
    throw DimensionError("coupled bundles have different shapes");
  OrderReport r;
  for (std::size_t k = 0; k < lo.times.size(); ++k)
    for (std::size_t j = 0; j < lo.values[k].size(); j += lo.dim) {
      ++r.checked;
      double worst = 0.0;
      for (std::size_t a = 0; a < lo.dim; ++a) worst = std::max(worst, lo.values[k][j + a] - hi.values[k][j + a]);
      if (worst > tol) {
        ++r.violations;
        r.worst = std::max(r.worst, worst);
      }
    }
  r.fraction = r.checked ? static_cast<double>(r.violations) / static_cast<double>(r.checked) : 0.0;
  return r;
}

SecondOrderSolution solve_second_order_te(const TransportProblem& p, const NoiseSpec& noise, const Grid& grid,
                                          std::span<const double> times, std::size_t paths, std::uint64_t seed,
                                          FlowSide side, double eps_reg, const EmOptions& options) {
  if (!p.b || !p.terminal) throw DomainError("second-order problem needs a field and terminal datum");
  if (!p.c.is_zero() || p.d) throw DomainError("second-order solver handles c = 0 and d = 0 only");
  if (paths == 0) throw DomainError("path count must be positive");
  const double eps = eps_reg > 0.0 ? eps_reg : grid.max_spacing();
  const std::size_t d = grid.dim(), m = p.width, nodes = grid.size();
  std::vector<double> all_nodes(nodes * d);
  for (std::size_t i = 0; i < nodes; ++i) grid.coords(i, std::span<double>(all_nodes.data() + i * d, d));
  SecondOrderSolution out;
  out.solution.eps = eps;
  out.solution.side = side;
  out.solution.provenance = Provenance::viscous;
  for (std::size_t k = 0; k < times.size(); ++k) {
    const double t = times[k];
    if (t > p.T || (k > 0 && !(t > times[k - 1]))) throw DomainError("output times must increase up to T");
    std::vector<double> mean(nodes * m), se(nodes * m);
    if (t >= p.T) {
      for (std::size_t i = 0; i < nodes; ++i) p.terminal(std::span<const double>(all_nodes.data() + i * d, d),
                                                         std::span<double>(mean.data() + i * m, m));
    } else {
      const Grid fg = options.field_grid ? *options.field_grid : default_field_grid(*p.b, noise, all_nodes, t, p.T, grid.max_spacing());
      const std::vector<double> endt{p.T};
      const Integrator it = make_integrator(*p.b, noise, side, eps, t, endt, fg, options);
      const std::uint64_t key = CounterRng::derive(seed, k);
      const std::size_t chunk = 256, chunks = (paths + chunk - 1) / chunk;
      std::vector<std::vector<double>> sums(chunks), squares(chunks);
      parallel_for(chunks, [&](std::size_t c) {
        std::vector<double> s(nodes * m, 0.0), q(nodes * m, 0.0), x(d), v(m), dw;
        for (std::size_t path = c * chunk; path < std::min(paths, (c + 1) * chunk); ++path) {
          it.increments(key, path, dw);
          for (std::size_t i = 0; i < nodes; ++i) {
            std::copy(all_nodes.begin() + i * d, all_nodes.begin() + (i + 1) * d, x.begin());
            it.run(x, dw, [](std::size_t, std::span<const double>) {});
            p.terminal(x, v);
            for (std::size_t j = 0; j < m; ++j) {
              if (!std::isfinite(v[j])) throw GuardError("terminal datum overflowed along a path");
              s[i * m + j] += v[j];
              q[i * m + j] += v[j] * v[j];
            }
          }
        }
        sums[c] = std::move(s);
        squares[c] = std::move(q);
      });
      std::vector<double> s(nodes * m, 0.0), q(nodes * m, 0.0);
      for (std::size_t c = 0; c < chunks; ++c)
        for (std::size_t j = 0; j < s.size(); ++j) {
          s[j] += sums[c][j];
          q[j] += squares[c][j];
        }
      const double n = static_cast<double>(paths);
      for (std::size_t j = 0; j < s.size(); ++j) {
        mean[j] = s[j] / n;
        const double var = paths > 1 ? std::max(0.0, (q[j] - n * mean[j] * mean[j]) / (n - 1.0)) : 0.0;
        if (!std::isfinite(var)) throw GuardError("sample variance overflowed");
        se[j] = std::sqrt(var / n);
      }
    }
    out.solution.times.push_back(t);
    out.solution.slices.emplace_back(grid, std::move(mean), m);
    out.standard_error.emplace_back(grid, std::move(se), m);
  }
  return out;
}

DensitySolution solve_fokker_planck(const VelocityField& b, const NoiseSpec& noise, const Grid& grid,
                                    const ScalarFn& f0, std::span<const double> times, std::size_t particles,
                                    std::uint64_t seed, const EmOptions& options, double eps_reg) {
  check_times(0.0, times);
  const double eps = eps_reg > 0.0 ? eps_reg : grid.max_spacing();
  const ParticleEnsemble start = sample_particles(grid, f0, particles, seed);
  const Grid fg = options.field_grid ? *options.field_grid : default_field_grid(b, noise, start.positions, 0.0, times.back(), grid.max_spacing());
  const Integrator it = make_integrator(b, noise, FlowSide::upper, eps, 0.0, times, fg, options);
  const auto slot = slots(it.tg, times);
  std::vector<ParticleEnsemble> ens(times.size(), start);
  const std::size_t d = b.dim();
  const std::uint64_t key = CounterRng::derive(seed, 0x66706bULL);
  parallel_for(particles, [&](std::size_t p) {
    std::vector<double> x(start.position(p).begin(), start.position(p).end()), dw;
    it.increments(key, p, dw);
    it.run(x, dw, [&](std::size_t n, std::span<const double> y) {
      if (slot[n] < times.size()) std::copy(y.begin(), y.end(), ens[slot[n]].positions.begin() + p * d);
    });
  });
  return make_density(std::move(ens), std::vector<double>(times.begin(), times.end()), grid);
}

}  // namespace ordflow
