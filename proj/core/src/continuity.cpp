#include "ordflow/continuity.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ordflow/error.hpp"
#include "ordflow/parallel.hpp"
#include "ordflow/random.hpp"
#include "ordflow/regularize.hpp"

namespace ordflow {

std::size_t DensitySolution::index_of(double t) const {
  for (std::size_t k = 0; k < times.size(); ++k)
    if (std::abs(times[k] - t) <= 1e-12 * std::max(1.0, std::abs(t))) return k;
  throw DomainError("time " + std::to_string(t) + " is not stored in the density solution");
}

namespace {

// Cells between adjacent nodes, as (lower corner, widths).
struct Cells {
  std::size_t dim;
  std::vector<std::size_t> counts;
  std::size_t size = 1;
  const Grid* grid;

  explicit Cells(const Grid& g) : dim(g.dim()), grid(&g) {
    for (std::size_t a = 0; a < dim; ++a) {
      if (g.count(a) < 2) throw DomainError("particle sampling needs at least two nodes per axis");
      counts.push_back(g.count(a) - 1);
      size *= counts.back();
    }
  }
  void corner(std::size_t c, std::span<double> x) const {
    for (std::size_t a = 0; a < dim; ++a) {
      x[a] = grid->coord(a, c % counts[a]);
      c /= counts[a];
    }
  }
};

void place(const Cells& cells, const std::vector<double>& cdf, std::size_t n, std::uint64_t seed,
           std::vector<double>& pos) {
  const std::size_t d = cells.dim;
  pos.assign(n * d, 0.0);
  parallel_for(n, [&](std::size_t p) {
    const CounterRng rng(CounterRng::derive(seed, p));
    const double u = (static_cast<double>(p) + rng.uniform(0)) / static_cast<double>(n) * cdf.back();
    auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
    std::size_t c = static_cast<std::size_t>(std::min<std::ptrdiff_t>(it - cdf.begin(), static_cast<std::ptrdiff_t>(cdf.size()) - 1));
    while (c > 0 && cdf[c] == cdf[c - 1]) --c;  // never land in an empty cell
    std::span<double> x(pos.data() + p * d, d);
    cells.corner(c, x);
    // Axis 0 continues the inverse CDF inside the cell so the draw stays stratified.
    const double below = c > 0 ? cdf[c - 1] : 0.0;
    const double frac = std::clamp((u - below) / (cdf[c] - below), 0.0, 1.0);
    x[0] += frac * cells.grid->spacing(0);
    for (std::size_t a = 1; a < d; ++a) x[a] += rng.uniform(1 + a) * cells.grid->spacing(a);
  });
}

double bump_mass() {
  // int_{-1}^{1} bump, by composite Simpson on a fine lattice.
  static const double mass = [] {
    const int n = 20000;
    double acc = 0.0;
    for (int i = 0; i <= n; ++i) {
      const double z = -1.0 + 2.0 * i / n;
      const double w = (i == 0 || i == n) ? 1.0 : (i % 2 ? 4.0 : 2.0);
      acc += w * bump(z);
    }
    return acc * (2.0 / n) / 3.0;
  }();
  return mass;
}

}  // namespace

ParticleEnsemble sample_particles(const Grid& grid, const ScalarFn& f0, std::size_t n, std::uint64_t seed) {
  if (n == 0) throw DomainError("particle count must be positive");
  const Cells cells(grid);
  const std::size_t d = grid.dim();
  std::vector<double> cdf(cells.size);
  Point mid(d);
  double acc = 0.0;
  for (std::size_t c = 0; c < cells.size; ++c) {
    cells.corner(c, mid);
    for (std::size_t a = 0; a < d; ++a) mid[a] += 0.5 * grid.spacing(a);
    const double v = f0(mid);
    if (!std::isfinite(v) || v < 0.0) throw DomainError("particle density must be finite and nonnegative");
    acc += v;
    cdf[c] = acc;
  }
  if (!(acc > 0.0)) throw DomainError("particle density has zero mass");
  ParticleEnsemble e;
  e.dim = d;
  e.seed = seed;
  e.mass = acc * grid.cell_volume();
  place(cells, cdf, n, seed, e.positions);
  e.weights.assign(n, e.mass / static_cast<double>(n));
  return e;
}

ParticleEnsemble weighted_uniform_particles(const Grid& grid, const ScalarFn& f, std::size_t n, std::uint64_t seed) {
  ParticleEnsemble e = sample_particles(grid, [](std::span<const double>) { return 1.0; }, n, seed);
  const double vol = e.mass;
  e.mass = 0.0;
  for (std::size_t p = 0; p < n; ++p) {
    e.weights[p] = f(e.position(p)) * vol / static_cast<double>(n);
    e.mass += e.weights[p];
  }
  return e;
}

std::vector<ParticleEnsemble> advect(const VelocityField& b, const ParticleEnsemble& start, double s,
                                     std::span<const double> times, const Grid& grid,
                                     const PushforwardOptions& options) {
  if (b.dim() != start.dim) throw DimensionError("field dimension does not match the particles");
  std::vector<double> out(times.begin(), times.end());
  for (std::size_t k = 0; k < out.size(); ++k)
    if (out[k] < s || (k > 0 && !(out[k] > out[k - 1]))) throw DomainError("advection times must increase from s");
  std::vector<ParticleEnsemble> result(out.size(), start);
  if (out.empty() || out.back() <= s) return result;
  const Grid fg = options.field_grid ? *options.field_grid : reach_grid(grid, b, s, out.back());
  const double eps = options.eps > 0.0 ? options.eps : grid.max_spacing();
  if (options.validate) validate_field(b, fg, tabulation_times(b, s, out.back(), out));
  const auto field = regularized_field(b, options.side, eps, fg, s, out.back(), out);
  double dt = guarded_step(*field, eps, options.cfl);
  if (options.dt > 0.0) {
    if (options.dt > dt * (1.0 + 1e-12)) throw GuardError("time step exceeds the stability limit of the regularized field");
    dt = options.dt;
  }
  std::vector<double> req = field->time_knots();
  req.insert(req.end(), out.begin(), out.end());
  const std::vector<double> tg = time_grid(s, out.back(), dt, req);
  std::vector<std::size_t> slot(tg.size(), out.size());
  for (std::size_t k = 0, j = 0; k < tg.size() && j < out.size(); ++k)
    if (std::abs(tg[k] - out[j]) <= 1e-12 * std::max(1.0, std::abs(out[j]))) slot[k] = j++;
  const std::size_t d = start.dim;
  parallel_for(start.size(), [&](std::size_t p) {
    std::vector<double> x(start.position(p).begin(), start.position(p).end()), work;
    if (slot[0] < out.size()) std::copy(x.begin(), x.end(), result[slot[0]].positions.begin() + p * d);
    for (std::size_t k = 1; k < tg.size(); ++k) {
      rk4_step(*field, tg[k - 1], tg[k] - tg[k - 1], x, work);
      if (slot[k] < out.size()) std::copy(x.begin(), x.end(), result[slot[k]].positions.begin() + p * d);
    }
  });
  return result;
}

Grid bin_grid(const Grid& grid, double width) {
  if (!(width > 0.0)) throw DomainError("bin width must be positive");
  std::vector<double> spacing(grid.dim(), width);
  std::vector<std::size_t> counts(grid.dim());
  for (std::size_t a = 0; a < grid.dim(); ++a)
    counts[a] = static_cast<std::size_t>(std::floor((grid.upper(a) - grid.lower(a)) / width + 1e-9)) + 1;
  return Grid(grid.lower_corner(), spacing, counts);
}

GridFunction histogram(const ParticleEnsemble& e, const Grid& bins) {
  const std::size_t d = bins.dim();
  if (e.dim != d) throw DimensionError("histogram dimension does not match the particles");
  std::vector<double> v(bins.size(), 0.0);
  std::vector<std::size_t> idx(d);
  for (std::size_t p = 0; p < e.size(); ++p) {
    const auto x = e.position(p);
    bool inside = true;
    for (std::size_t a = 0; a < d && inside; ++a) {
      const double r = std::floor((x[a] - bins.lower(a)) / bins.spacing(a) + 0.5);
      inside = r >= 0.0 && r < static_cast<double>(bins.count(a));
      if (inside) idx[a] = static_cast<std::size_t>(r);
    }
    if (inside) v[bins.flat_index(idx)] += e.weights[p];
  }
  const double vol = bins.cell_volume();
  for (double& x : v) x /= vol;
  return GridFunction(bins, std::move(v));
}

GridFunction smoothed_density(const ParticleEnsemble& e, const Grid& bins, double width) {
  const std::size_t d = bins.dim();
  if (e.dim != d) throw DimensionError("density dimension does not match the particles");
  if (!(width > 0.0)) throw DomainError("smoothing width must be positive");
  const double norm = std::pow(bump_mass() * width, static_cast<double>(d));
  std::vector<double> v(bins.size(), 0.0);
  std::vector<std::size_t> lo(d), hi(d), idx(d);
  for (std::size_t p = 0; p < e.size(); ++p) {
    const auto x = e.position(p);
    bool any = true;
    for (std::size_t a = 0; a < d; ++a) {
      const double l = std::ceil((x[a] - width - bins.lower(a)) / bins.spacing(a));
      const double u = std::floor((x[a] + width - bins.lower(a)) / bins.spacing(a));
      const double top = static_cast<double>(bins.count(a)) - 1.0;
      if (u < 0.0 || l > top) any = false;
      lo[a] = static_cast<std::size_t>(std::max(0.0, l));
      hi[a] = static_cast<std::size_t>(std::max(0.0, std::min(top, u)));
    }
    if (!any) continue;
    idx = lo;
    while (true) {
      double k = 1.0;
      for (std::size_t a = 0; a < d; ++a) k *= bump((bins.coord(a, idx[a]) - x[a]) / width);
      v[bins.flat_index(idx)] += e.weights[p] * k / norm;
      std::size_t a = 0;
      for (; a < d; ++a) {
        if (idx[a] < hi[a]) {
          ++idx[a];
          break;
        }
        idx[a] = lo[a];
      }
      if (a == d) break;
    }
  }
  return GridFunction(bins, std::move(v));
}

DensitySolution make_density(std::vector<ParticleEnsemble> ensembles, std::vector<double> times, const Grid& grid,
                             double bin_width, double smoothing) {
  if (ensembles.empty() || ensembles.size() != times.size()) throw DomainError("one ensemble per time is required");
  DensitySolution sol;
  sol.times = std::move(times);
  sol.bin_width = bin_width > 0.0 ? bin_width : 2.0 * grid.max_spacing();
  sol.smoothing = smoothing > 0.0 ? smoothing : 4.0 * grid.max_spacing();
  const Grid bins = bin_grid(grid, sol.bin_width);
  for (const auto& e : ensembles) {
    sol.slices.push_back(histogram(e, bins));
    sol.smoothed.push_back(smoothed_density(e, bins, sol.smoothing));
  }
  sol.mass = ensembles.front().mass;
  sol.ensembles = std::move(ensembles);
  return sol;
}

DensitySolution pushforward_solve(const VelocityField& b, const Grid& grid, const ScalarFn& f0,
                                  std::span<const double> times, const PushforwardOptions& options) {
  if (times.empty()) throw DomainError("no output times requested");
  const ParticleEnsemble start = sample_particles(grid, f0, options.particles, options.seed);
  auto ens = advect(b, start, 0.0, times, grid, options);
  return make_density(std::move(ens), std::vector<double>(times.begin(), times.end()), grid, options.bin_width,
                      options.smoothing);
}

DensitySolution pushforward_signed(const VelocityField& b, const Grid& grid, const ScalarFn& f_plus,
                                   const ScalarFn& f_minus, std::span<const double> times,
                                   const PushforwardOptions& options) {
  if (times.empty()) throw DomainError("no output times requested");
  const ParticleEnsemble plus = sample_particles(grid, f_plus, options.particles, options.seed);
  const ParticleEnsemble minus =
      sample_particles(grid, f_minus, options.particles, CounterRng::derive(options.seed, 0x6d696e7573ULL));
  auto ep = advect(b, plus, 0.0, times, grid, options);
  auto em = advect(b, minus, 0.0, times, grid, options);
  std::vector<ParticleEnsemble> merged;
  for (std::size_t k = 0; k < ep.size(); ++k) {
    ParticleEnsemble m = ep[k];
    m.positions.insert(m.positions.end(), em[k].positions.begin(), em[k].positions.end());
    for (double w : em[k].weights) m.weights.push_back(-w);
    m.mass = plus.mass - minus.mass;
    merged.push_back(std::move(m));
  }
  return make_density(std::move(merged), std::vector<double>(times.begin(), times.end()), grid, options.bin_width,
                      options.smoothing);
}

DualityReport duality_check(const DensitySolution& density, const FieldPtr& b, const ScalarFn& f0, const Grid& grid,
                            const ScalarFn& ubar, double t0, const TransportOptions& transport) {
  DualityReport r;
  const ParticleEnsemble& e = density.ensembles[density.index_of(t0)];
  for (std::size_t p = 0; p < e.size(); ++p) r.pushed += e.weights[p] * ubar(e.position(p));
  TransportProblem pb;
  pb.b = b;
  pb.T = t0;
  pb.terminal = [ubar](std::span<const double> x, std::span<double> out) { out[0] = ubar(x); };
  const auto u = solve_transport(pb, grid, std::vector<double>{0.0}, transport);
  Point x(grid.dim());
  double acc = 0.0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    grid.coords(i, x);
    double w = 1.0;
    for (std::size_t a = 0; a < grid.dim(); ++a) {
      const std::size_t ia = grid.axis_index(i, a);
      if (ia == 0 || ia + 1 == grid.count(a)) w *= 0.5;
    }
    acc += w * u.slices.front()(i) * f0(x);
  }
  r.pulled = acc * grid.cell_volume();
  r.residual = std::abs(r.pushed - r.pulled);
  return r;
}

namespace {

Grid sampling_grid(const Grid& grid, const VelocityField& b, std::span<const double> times) {
  return times.empty() ? grid : reach_grid(grid, b, 0.0, times.back());
}

}  // namespace

JacobianField jacobian(const VelocityField& b, const Grid& grid, std::span<const double> times,
                       const PushforwardOptions& options) {
  const Grid sg = sampling_grid(grid, b, times);
  const ParticleEnsemble start = sample_particles(sg, [](std::span<const double>) { return 1.0; }, options.particles,
                                                  options.seed);
  PushforwardOptions o = options;
  if (!o.field_grid) o.field_grid = reach_grid(sg, b, 0.0, times.empty() ? 0.0 : times.back());
  const auto ens = advect(b, start, 0.0, times, grid, o);
  JacobianField J;
  J.times.assign(times.begin(), times.end());
  J.sampling_box = Box{sg.lower_corner(), sg.upper_corner()};
  const Grid bins = bin_grid(grid, options.bin_width > 0.0 ? options.bin_width : 2.0 * grid.max_spacing());
  for (const auto& e : ens) J.slices.push_back(histogram(e, bins));
  return J;
}

double domination_excess(const VelocityField& b, const Grid& grid, const ScalarFn& f0, std::span<const double> times,
                         const PushforwardOptions& options) {
  const Grid sg = sampling_grid(grid, b, times);
  const ParticleEnsemble ones = weighted_uniform_particles(sg, [](std::span<const double>) { return 1.0; },
                                                           options.particles, options.seed);
  ParticleEnsemble data = weighted_uniform_particles(sg, f0, options.particles, options.seed);
  double sup = 0.0;
  for (std::size_t p = 0; p < data.size(); ++p) sup = std::max(sup, std::abs(data.weights[p]));
  sup *= static_cast<double>(options.particles) / ones.mass;
  PushforwardOptions o = options;
  if (!o.field_grid) o.field_grid = reach_grid(sg, b, 0.0, times.empty() ? 0.0 : times.back());
  const auto moved = advect(b, ones, 0.0, times, grid, o);
  const Grid bins = bin_grid(grid, options.bin_width > 0.0 ? options.bin_width : 2.0 * grid.max_spacing());
  double excess = -std::numeric_limits<double>::infinity();
  for (const auto& e : moved) {
    const GridFunction J = histogram(e, bins);
    ParticleEnsemble f = e;
    for (std::size_t p = 0; p < f.size(); ++p) f.weights[p] = std::abs(data.weights[p]);
    const GridFunction F = histogram(f, bins);
    for (std::size_t i = 0; i < bins.size(); ++i) excess = std::max(excess, F(i) - sup * J(i));
  }
  return excess;
}

OverlapReport renormalization_overlap(const VelocityField& b, const Grid& grid, const ScalarFn& a_plus,
                                      const ScalarFn& a_minus, double s, double t,
                                      const PushforwardOptions& options) {
  const ParticleEnsemble p0 = sample_particles(grid, a_plus, options.particles, options.seed);
  const ParticleEnsemble m0 =
      sample_particles(grid, a_minus, options.particles, CounterRng::derive(options.seed, 0x6d696e7573ULL));
  const std::vector<double> at{t};
  const auto p1 = advect(b, p0, s, at, grid, options);
  const auto m1 = advect(b, m0, s, at, grid, options);
  const Grid bins = bin_grid(grid, options.bin_width > 0.0 ? options.bin_width : 2.0 * grid.max_spacing());
  const GridFunction hp = histogram(p1.front(), bins), hm = histogram(m1.front(), bins);
  OverlapReport r;
  for (std::size_t i = 0; i < bins.size(); ++i) r.overlap += hp(i) * hm(i);
  r.overlap *= bins.cell_volume();
  r.mass_plus = p0.mass;
  r.mass_minus = m0.mass;
  return r;
}

DensityLpReport density_lp_bound(const DensitySolution& density, const VelocityField& b, const ScalarFn& f0,
                                 const Grid& grid, double R, double t, double p) {
  DensityLpReport r;
  const double s = 0.0;
  r.radius = R + (1.0 + R) * (std::exp(b.omega0(s, t)) - 1.0);
  const GridFunction& f = density.at(t);
  const Grid& bins = f.grid();
  Point x(bins.dim());
  for (std::size_t i = 0; i < bins.size(); ++i) {
    bins.coords(i, x);
    double r2 = 0.0;
    for (double e : x) r2 += e * e;
    if (r2 <= R * R) r.lhs += std::pow(std::abs(f(i)), p);
  }
  r.lhs *= bins.cell_volume();
  Point y(grid.dim());
  double acc = 0.0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    grid.coords(i, y);
    double r2 = 0.0;
    for (double e : y) r2 += e * e;
    if (r2 <= r.radius * r.radius) acc += std::pow(std::abs(f0(y)), p);
  }
  const double d = static_cast<double>(grid.dim());
  r.rhs = std::exp(d * (p - 1.0) * b.omega1(s, t)) * acc * grid.cell_volume();
  return r;
}

}  // namespace ordflow
