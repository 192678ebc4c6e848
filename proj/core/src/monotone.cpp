#include "ordflow/monotone.hpp"

#include <algorithm>
#include <cmath>

#include "ordflow/error.hpp"

namespace ordflow {

bool leq(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw DimensionError("leq: points have different dimensions");
  for (std::size_t i = 0; i < x.size(); ++i)
    if (!(x[i] <= y[i])) return false;
  return true;
}

namespace {

bool monotone_along_axes(const GridFunction& phi, bool increasing) {
  const Grid& g = phi.grid();
  const std::size_t m = phi.width();
  for (std::size_t i = 0; i < g.size(); ++i) {
    for (std::size_t a = 0; a < g.dim(); ++a) {
      if (g.axis_index(i, a) + 1 >= g.count(a)) continue;
      const std::size_t j = i + g.stride(a);
      for (std::size_t c = 0; c < m; ++c) {
        const double lo = phi(i, c), hi = phi(j, c);
        if (increasing ? hi < lo : hi > lo) return false;
      }
    }
  }
  return true;
}

}  // namespace

bool is_increasing(const GridFunction& phi) { return monotone_along_axes(phi, true); }
bool is_decreasing(const GridFunction& phi) { return monotone_along_axes(phi, false); }

bool has_monotonicity(const GridFunction& phi, Monotonicity tag) {
  switch (tag) {
    case Monotonicity::increasing: return is_increasing(phi);
    case Monotonicity::decreasing: return is_decreasing(phi);
    default: return true;
  }
}

GridFunction envelope(const GridFunction& phi, EnvelopeSide side) {
  const Grid& g = phi.grid();
  const std::size_t d = g.dim(), m = phi.width();
  std::size_t neighbourhood = 1;
  for (std::size_t a = 0; a < d; ++a) neighbourhood *= 3;
  std::vector<double> out(phi.values().begin(), phi.values().end());
  std::vector<long> offset(d);
  for (std::size_t i = 0; i < g.size(); ++i) {
    for (std::size_t k = 0; k < neighbourhood; ++k) {
      std::size_t code = k;
      bool inside = true;
      std::size_t j = i;
      for (std::size_t a = 0; a < d; ++a) {
        const long off = static_cast<long>(code % 3) - 1;
        code /= 3;
        const long pos = static_cast<long>(g.axis_index(i, a)) + off;
        if (pos < 0 || pos >= static_cast<long>(g.count(a))) {
          inside = false;
          break;
        }
        j = static_cast<std::size_t>(static_cast<long>(j) + off * static_cast<long>(g.stride(a)));
      }
      if (!inside) continue;
      for (std::size_t c = 0; c < m; ++c) {
        double& v = out[i * m + c];
        v = side == EnvelopeSide::upper ? std::max(v, phi(j, c)) : std::min(v, phi(j, c));
      }
    }
  }
  Monotonicity tag = phi.tag();
  return GridFunction(g, std::move(out), m, tag);
}

namespace {

struct VariationTable {
  Grid sub;
  std::vector<double> values;     // phi restricted to the sub-grid
  std::vector<double> variation;  // V(x) = ABV norm over [lo, x]
  std::vector<std::size_t> parent;
};

VariationTable variation_table(const GridFunction& phi, const Point& lo, const Point& hi) {
  if (phi.width() != 1) throw DimensionError("abv_norm needs a scalar grid function");
  const Grid& g = phi.grid();
  if (lo.size() != g.dim() || hi.size() != g.dim())
    throw DimensionError("abv box corners do not match the grid dimension");
  if (!leq(lo, hi)) throw DomainError("abv box needs lower corner <= upper corner");
  const auto a = g.aligned_node(lo);
  const auto b = g.aligned_node(hi);
  std::vector<std::size_t> counts(g.dim());
  std::vector<double> origin(g.dim()), spacing(g.dim());
  for (std::size_t k = 0; k < g.dim(); ++k) {
    counts[k] = b[k] - a[k] + 1;
    origin[k] = g.coord(k, a[k]);
    spacing[k] = g.spacing(k);
  }
  // Degenerate axes get a phantom second node so Grid stays valid; they are never stepped along.
  std::vector<std::size_t> grid_counts = counts;
  for (auto& n : grid_counts) n = std::max<std::size_t>(n, 2);
  VariationTable t{Grid(origin, spacing, grid_counts), {}, {}, {}};
  const Grid& s = t.sub;
  t.values.assign(s.size(), 0.0);
  t.variation.assign(s.size(), 0.0);
  t.parent.assign(s.size(), s.size());
  std::vector<std::size_t> multi(g.dim());
  for (std::size_t i = 0; i < s.size(); ++i) {
    bool valid = true;
    for (std::size_t k = 0; k < g.dim(); ++k) {
      const std::size_t ik = s.axis_index(i, k);
      if (ik >= counts[k]) valid = false;
      multi[k] = a[k] + std::min(ik, counts[k] - 1);
    }
    t.values[i] = phi(g.flat_index(multi), 0);
    if (!valid) continue;
    double best = 0.0;
    std::size_t best_parent = s.size();
    for (std::size_t k = 0; k < g.dim(); ++k) {
      if (s.axis_index(i, k) == 0) continue;
      const std::size_t p = i - s.stride(k);
      const double cand = t.variation[p] + std::abs(t.values[i] - t.values[p]);
      if (best_parent == s.size() || cand > best) {
        best = cand;
        best_parent = p;
      }
    }
    t.variation[i] = best;
    t.parent[i] = best_parent;
  }
  return t;
}

std::size_t corner_index(const Grid& s, const Point& lo, const Point& hi, const Grid& g) {
  const auto a = g.aligned_node(lo);
  const auto b = g.aligned_node(hi);
  std::vector<std::size_t> m(g.dim());
  for (std::size_t k = 0; k < g.dim(); ++k) m[k] = b[k] - a[k];
  return s.flat_index(m);
}

}  // namespace

double abv_norm(const GridFunction& phi, const Point& lo, const Point& hi) {
  const VariationTable t = variation_table(phi, lo, hi);
  return t.variation[corner_index(t.sub, lo, hi, phi.grid())];
}

ABVReport abv_decompose(const GridFunction& phi, const Point& lo, const Point& hi) {
  VariationTable t = variation_table(phi, lo, hi);
  const Grid& g = phi.grid();
  for (std::size_t k = 0; k < g.dim(); ++k)
    if (std::abs(hi[k] - lo[k]) < 0.5 * g.spacing(k))
      throw DomainError("abv_decompose needs a box spanning at least one cell per axis");
  const Grid& s = t.sub;
  const std::size_t n = s.size();
  // Positive and negative variation accumulated along the maximizing path; the running
  // max over predecessors only absorbs rounding so both parts are increasing exactly.
  std::vector<double> pos(n), neg(n);
  pos[0] = 0.5 * t.values[0];
  neg[0] = -0.5 * t.values[0];
  for (std::size_t i = 1; i < n; ++i) {
    const std::size_t p = t.parent[i];
    const double delta = t.values[i] - t.values[p];
    double up = pos[p] + std::max(0.0, delta);
    double down = neg[p] + std::max(0.0, -delta);
    for (std::size_t k = 0; k < s.dim(); ++k) {
      if (s.axis_index(i, k) == 0) continue;
      up = std::max(up, pos[i - s.stride(k)]);
      down = std::max(down, neg[i - s.stride(k)]);
    }
    pos[i] = up;
    neg[i] = down;
  }
  ABVReport r{t.variation[corner_index(s, lo, hi, g)],
              GridFunction(s, std::move(pos), 1, Monotonicity::increasing),
              GridFunction(s, std::move(neg), 1, Monotonicity::increasing),
              GridFunction(s, std::move(t.variation), 1, Monotonicity::increasing)};
  return r;
}

}  // namespace ordflow
