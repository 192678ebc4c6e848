#include "ordflow/regularize.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "ordflow/error.hpp"
#include "ordflow/parallel.hpp"

namespace ordflow {

namespace {

struct Offset {
  std::vector<long> steps;
  double penalty;  // |y| / eps
};

double growth_constant(const GridFunction& phi, std::size_t comp) {
  const Grid& g = phi.grid();
  Point x(g.dim());
  double m = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    g.coords(i, x);
    double r = 0.0;
    for (double v : x) r += v * v;
    m = std::max(m, std::abs(phi(i, comp)) / (1.0 + std::sqrt(r)));
  }
  return m;
}

std::vector<Offset> offsets_within(const Grid& g, double radius, double eps) {
  const std::size_t d = g.dim();
  std::vector<long> reach(d);
  std::size_t total = 1;
  for (std::size_t a = 0; a < d; ++a) {
    reach[a] = static_cast<long>(std::floor(radius / g.spacing(a) + 1e-9));
    reach[a] = std::min<long>(reach[a], static_cast<long>(g.count(a)) - 1);
    total *= static_cast<std::size_t>(2 * reach[a] + 1);
  }
  std::vector<Offset> out;
  std::vector<long> k(d);
  for (std::size_t code = 0; code < total; ++code) {
    std::size_t c = code;
    double r2 = 0.0;
    for (std::size_t a = 0; a < d; ++a) {
      const std::size_t w = static_cast<std::size_t>(2 * reach[a] + 1);
      k[a] = static_cast<long>(c % w) - reach[a];
      c /= w;
      const double y = static_cast<double>(k[a]) * g.spacing(a);
      r2 += y * y;
    }
    const double r = std::sqrt(r2);
    if (r > radius * (1.0 + 1e-12)) continue;
    out.push_back({k, r / eps});
  }
  return out;
}

// Flat index of node i shifted by -steps (x - y), clamped axis-wise to the grid.
inline std::size_t shifted_clamped(const Grid& g, std::size_t i, const std::vector<long>& steps,
                                   long sign) {
  std::size_t j = 0;
  for (std::size_t a = 0; a < g.dim(); ++a) {
    long p = static_cast<long>(g.axis_index(i, a)) + sign * steps[a];
    p = std::clamp<long>(p, 0, static_cast<long>(g.count(a)) - 1);
    j += static_cast<std::size_t>(p) * g.stride(a);
  }
  return j;
}

GridFunction convolve_extremal(const GridFunction& phi, double eps, bool upper) {
  if (!(eps > 0.0)) throw DomainError("regularization width must be positive");
  const Grid& g = phi.grid();
  const std::size_t m = phi.width();
  std::vector<double> out(phi.values().begin(), phi.values().end());
  for (std::size_t c = 0; c < m; ++c) {
    const double range = phi.max(c) - phi.min(c);
    if (range == 0.0) continue;
    const double growth = growth_constant(phi, c);
    if (eps * growth >= 1.0)
      throw GuardError("regularization width too large for the growth bound of the data");
    const auto offs = offsets_within(g, eps * range, eps);
    parallel_for(g.size(), [&](std::size_t i) {
      double best = phi(i, c);
      for (const Offset& o : offs) {
        const double v = phi(shifted_clamped(g, i, o.steps, -1), c);
        best = upper ? std::max(best, v - o.penalty) : std::min(best, v + o.penalty);
      }
      out[i * m + c] = best;
    });
  }
  return GridFunction(g, std::move(out), m, phi.tag());
}

}  // namespace

GridFunction sup_convolution(const GridFunction& phi, double eps) {
  return convolve_extremal(phi, eps, true);
}

GridFunction inf_convolution(const GridFunction& phi, double eps) {
  return convolve_extremal(phi, eps, false);
}

double bump(double z) {
  if (!(std::abs(z) < 1.0)) return 0.0;
  return std::exp(-1.0 / (1.0 - z * z));
}

MollifierKernel::MollifierKernel(const Grid& grid, double eps, KernelSide side)
    : eps_(eps), side_(side) {
  if (!(eps > 0.0)) throw DomainError("kernel width must be positive");
  const std::size_t d = grid.dim();
  steps_.resize(d);
  spacing_.resize(d);
  std::vector<std::vector<double>> axis_w(d);
  std::size_t total = 1;
  for (std::size_t a = 0; a < d; ++a) {
    spacing_[a] = grid.spacing(a);
    const long k = std::lround(2.0 * eps / spacing_[a]);
    if (k < 2) throw DomainError("kernel narrower than one grid cell (need 2 eps >= 2 h)");
    steps_[a] = static_cast<std::size_t>(k);
    for (long i = 1; i < k; ++i) {
      const long q = std::min(i, k - i);  // symmetric by construction
      axis_w[a].push_back(bump(2.0 * static_cast<double>(q) / static_cast<double>(k) - 1.0));
    }
    total *= static_cast<std::size_t>(k - 1);
  }
  weights_.assign(total, 1.0);
  for (std::size_t code = 0; code < total; ++code) {
    std::size_t c = code;
    for (std::size_t a = 0; a < d; ++a) {
      const std::size_t n = steps_[a] - 1;
      weights_[code] *= axis_w[a][c % n];
      c /= n;
    }
  }
  const double mass = std::accumulate(weights_.begin(), weights_.end(), 0.0);
  for (double& w : weights_) w /= mass;
}

GridFunction one_sided_mollify(const GridFunction& phi, const MollifierKernel& kernel) {
  const Grid& g = phi.grid();
  const std::size_t d = g.dim(), m = phi.width();
  if (kernel.dim() != d) throw DimensionError("kernel dimension does not match the grid");
  for (std::size_t a = 0; a < d; ++a)
    if (kernel.spacing(a) != g.spacing(a))
      throw DimensionError("kernel was built for a different grid spacing");
  const auto& w = kernel.weights();
  // Offset list in kernel order: i*h for the upper kernel, (i - k)*h for the lower one.
  std::vector<std::vector<long>> offs(w.size(), std::vector<long>(d));
  for (std::size_t code = 0; code < w.size(); ++code) {
    std::size_t c = code;
    for (std::size_t a = 0; a < d; ++a) {
      const std::size_t n = kernel.steps(a) - 1;
      const long i = static_cast<long>(c % n) + 1;
      c /= n;
      offs[code][a] = kernel.side() == KernelSide::upper ? i : i - static_cast<long>(kernel.steps(a));
    }
  }
  std::vector<double> out(phi.values().size());
  parallel_for(g.size(), [&](std::size_t i) {
    for (std::size_t c = 0; c < m; ++c) {
      double acc = 0.0, lo = std::numeric_limits<double>::infinity(), hi = -lo;
      for (std::size_t k = 0; k < w.size(); ++k) {
        const double v = phi(shifted_clamped(g, i, offs[k], 1), c);
        acc += w[k] * v;
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
      // A convex combination; clamping keeps rounding inside the window's range.
      out[i * m + c] = std::clamp(acc, lo, hi);
    }
  });
  return GridFunction(g, std::move(out), m, phi.tag());
}

RegularizedFunction regularize(const GridFunction& phi, RegularizationMethod method, double eps) {
  switch (method) {
    case RegularizationMethod::sup_conv:
      return {phi, method, eps, sup_convolution(phi, eps)};
    case RegularizationMethod::inf_conv:
      return {phi, method, eps, inf_convolution(phi, eps)};
    case RegularizationMethod::mollify_upper:
      return {phi, method, eps, one_sided_mollify(phi, MollifierKernel(phi.grid(), eps, KernelSide::upper))};
    case RegularizationMethod::mollify_lower:
      return {phi, method, eps, one_sided_mollify(phi, MollifierKernel(phi.grid(), eps, KernelSide::lower))};
  }
  throw DomainError("unknown regularization method");
}

}  // namespace ordflow
