#include "ordflow/grid.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "ordflow/error.hpp"
#include "ordflow/monotone.hpp"

namespace ordflow {

const char* to_string(Monotonicity tag) {
  switch (tag) {
    case Monotonicity::increasing: return "increasing";
    case Monotonicity::decreasing: return "decreasing";
    default: return "none";
  }
}

Grid::Grid(std::vector<double> origin, std::vector<double> spacing, std::vector<std::size_t> counts)
    : origin_(std::move(origin)), spacing_(std::move(spacing)), counts_(std::move(counts)) {
  const std::size_t d = origin_.size();
  if (d == 0) throw DimensionError("grid dimension must be at least 1");
  if (spacing_.size() != d || counts_.size() != d)
    throw DimensionError("grid origin, spacing and counts must have the same length");
  strides_.resize(d);
  size_ = 1;
  for (std::size_t a = 0; a < d; ++a) {
    if (!(spacing_[a] > 0.0) || !std::isfinite(spacing_[a]) || !std::isfinite(origin_[a]))
      throw DomainError("grid spacing must be positive and finite");
    if (counts_[a] < 2) throw DomainError("grid needs at least two nodes per axis");
    strides_[a] = size_;
    size_ *= counts_[a];
  }
}

Grid Grid::box(const Point& lower, const Point& upper, const std::vector<std::size_t>& counts) {
  if (lower.size() != upper.size() || lower.size() != counts.size())
    throw DimensionError("box corners and counts must have the same length");
  std::vector<double> h(lower.size());
  for (std::size_t a = 0; a < lower.size(); ++a) {
    if (!(upper[a] > lower[a])) throw DomainError("box upper corner must exceed lower corner");
    if (counts[a] < 2) throw DomainError("grid needs at least two nodes per axis");
    h[a] = (upper[a] - lower[a]) / static_cast<double>(counts[a] - 1);
  }
  return Grid(lower, h, counts);
}

Grid Grid::line(double lower, double upper, std::size_t n) {
  return box({lower}, {upper}, {n});
}

Grid Grid::with_spacing(const Point& lower, const Point& upper, double h) {
  if (!(h > 0.0)) throw DomainError("grid spacing must be positive");
  std::vector<std::size_t> counts(lower.size());
  for (std::size_t a = 0; a < lower.size(); ++a) {
    const double cells = (upper.at(a) - lower[a]) / h;
    const double r = std::round(cells);
    if (std::abs(cells - r) > 1e-6 * std::max(1.0, r))
      throw DomainError("box edge is not a multiple of the grid spacing");
    counts[a] = static_cast<std::size_t>(r) + 1;
  }
  return Grid(lower, std::vector<double>(lower.size(), h), counts);
}

double Grid::upper(std::size_t axis) const { return coord(axis, counts_[axis] - 1); }

Point Grid::upper_corner() const {
  Point p(dim());
  for (std::size_t a = 0; a < dim(); ++a) p[a] = upper(a);
  return p;
}

double Grid::cell_volume() const {
  double v = 1.0;
  for (double h : spacing_) v *= h;
  return v;
}

double Grid::min_spacing() const { return *std::min_element(spacing_.begin(), spacing_.end()); }
double Grid::max_spacing() const { return *std::max_element(spacing_.begin(), spacing_.end()); }

void Grid::coords(std::size_t index, std::span<double> out) const {
  for (std::size_t a = 0; a < dim(); ++a) {
    out[a] = coord(a, index % counts_[a]);
    index /= counts_[a];
  }
}

Point Grid::node(std::size_t index) const {
  Point p(dim());
  coords(index, p);
  return p;
}

std::size_t Grid::flat_index(std::span<const std::size_t> multi) const {
  std::size_t idx = 0;
  for (std::size_t a = 0; a < dim(); ++a) idx += multi[a] * strides_[a];
  return idx;
}

bool Grid::contains(std::span<const double> x, double tol) const {
  for (std::size_t a = 0; a < dim(); ++a)
    if (x[a] < lower(a) - tol || x[a] > upper(a) + tol) return false;
  return true;
}

std::size_t Grid::nearest(std::size_t axis, double x) const {
  const double r = std::round((x - origin_[axis]) / spacing_[axis]);
  if (r <= 0.0) return 0;
  if (r >= static_cast<double>(counts_[axis] - 1)) return counts_[axis] - 1;
  return static_cast<std::size_t>(r);
}

std::vector<std::size_t> Grid::aligned_node(const Point& p) const {
  if (p.size() != dim()) throw DimensionError("point dimension does not match grid");
  std::vector<std::size_t> m(dim());
  for (std::size_t a = 0; a < dim(); ++a) {
    const double r = (p[a] - origin_[a]) / spacing_[a];
    const double k = std::round(r);
    if (std::abs(r - k) > 1e-9 || k < 0.0 || k > static_cast<double>(counts_[a] - 1))
      throw DomainError("box corner is not a grid node inside the grid");
    m[a] = static_cast<std::size_t>(k);
  }
  return m;
}

Grid Grid::sub_grid(const Point& lo, const Point& hi) const {
  const auto a = aligned_node(lo);
  const auto b = aligned_node(hi);
  std::vector<double> origin(dim());
  std::vector<std::size_t> counts(dim());
  for (std::size_t k = 0; k < dim(); ++k) {
    if (b[k] <= a[k]) throw DomainError("box must span at least one cell per axis");
    origin[k] = coord(k, a[k]);
    counts[k] = b[k] - a[k] + 1;
  }
  return Grid(origin, spacing_, counts);
}

bool Box::contains(std::span<const double> x) const {
  for (std::size_t a = 0; a < lower.size(); ++a)
    if (!(x[a] > lower[a] && x[a] < upper[a])) return false;
  return true;
}

double Box::volume() const {
  double v = 1.0;
  for (std::size_t a = 0; a < lower.size(); ++a) v *= std::max(0.0, upper[a] - lower[a]);
  return v;
}

GridFunction::GridFunction(Grid grid, std::vector<double> values, std::size_t width, Monotonicity tag)
    : grid_(std::move(grid)), values_(std::move(values)), width_(width), tag_(Monotonicity::none) {
  if (width_ == 0) throw DimensionError("grid function width must be at least 1");
  if (values_.size() != grid_.size() * width_)
    throw DimensionError("grid function has " + std::to_string(values_.size()) +
                         " values, expected " + std::to_string(grid_.size() * width_));
  for (double v : values_)
    if (!std::isfinite(v)) throw DomainError("grid function values must be finite");
  if (tag != Monotonicity::none && !has_monotonicity(*this, tag))
    throw DomainError(std::string("grid function is not ") + to_string(tag));
  tag_ = tag;
}

GridFunction GridFunction::constant(const Grid& grid, double c, std::size_t width) {
  return GridFunction(grid, std::vector<double>(grid.size() * width, c), width);
}

GridFunction GridFunction::sample(const Grid& grid, const ScalarFn& fn, Monotonicity tag) {
  std::vector<double> v(grid.size());
  Point x(grid.dim());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    grid.coords(i, x);
    v[i] = fn(x);
  }
  return GridFunction(grid, std::move(v), 1, tag);
}

GridFunction GridFunction::sample(const Grid& grid, std::size_t width, const VectorFn& fn,
                                  Monotonicity tag) {
  std::vector<double> v(grid.size() * width);
  Point x(grid.dim());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    grid.coords(i, x);
    fn(x, std::span<double>(v).subspan(i * width, width));
  }
  return GridFunction(grid, std::move(v), width, tag);
}

GridFunction GridFunction::identity(const Grid& grid) {
  std::vector<double> v(grid.size() * grid.dim());
  for (std::size_t i = 0; i < grid.size(); ++i)
    grid.coords(i, std::span<double>(v).subspan(i * grid.dim(), grid.dim()));
  return GridFunction(grid, std::move(v), grid.dim(), Monotonicity::increasing);
}

GridFunction GridFunction::component(std::size_t comp) const {
  if (comp >= width_) throw DimensionError("component index out of range");
  std::vector<double> v(nodes());
  for (std::size_t i = 0; i < nodes(); ++i) v[i] = (*this)(i, comp);
  return GridFunction(grid_, std::move(v), 1, tag_);
}

GridFunction GridFunction::with_tag(Monotonicity tag) const {
  return GridFunction(grid_, values_, width_, tag);
}

GridFunction GridFunction::map(const std::function<double(double)>& fn, Monotonicity tag) const {
  std::vector<double> v(values_.size());
  std::transform(values_.begin(), values_.end(), v.begin(), fn);
  return GridFunction(grid_, std::move(v), width_, tag);
}

namespace {

// Cell index and fractional offset along one axis, clamped to the grid.
inline void locate(const Grid& g, std::size_t a, double x, std::size_t& i, double& w) {
  const std::size_t n = g.count(a);
  const double r = (x - g.lower(a)) / g.spacing(a);
  if (!(r > 0.0)) {
    i = 0;
    w = 0.0;
  } else if (r >= static_cast<double>(n - 1)) {
    i = n - 2;
    w = 1.0;
  } else {
    const double f = std::floor(r);
    i = static_cast<std::size_t>(f);
    w = r - f;
  }
}

}  // namespace

double GridFunction::interpolate(std::span<const double> x, std::size_t comp) const {
  const std::size_t d = grid_.dim();
  if (d == 1) {
    std::size_t i;
    double w;
    locate(grid_, 0, x[0], i, w);
    const double a = (*this)(i, comp);
    const double b = (*this)(i + 1, comp);
    return w == 0.0 ? a : (w == 1.0 ? b : a + w * (b - a));
  }
  std::size_t base = 0;
  double wts[8];
  std::size_t cells[8];
  if (d > 8) throw DimensionError("interpolation supports at most 8 dimensions");
  for (std::size_t a = 0; a < d; ++a) {
    locate(grid_, a, x[a], cells[a], wts[a]);
    base += cells[a] * grid_.stride(a);
  }
  double acc = 0.0;
  const std::size_t corners = std::size_t{1} << d;
  for (std::size_t c = 0; c < corners; ++c) {
    double w = 1.0;
    std::size_t off = base;
    for (std::size_t a = 0; a < d; ++a) {
      if (c >> a & 1U) {
        w *= wts[a];
        off += grid_.stride(a);
      } else {
        w *= 1.0 - wts[a];
      }
    }
    if (w != 0.0) acc += w * (*this)(off, comp);
  }
  return acc;
}

void GridFunction::interpolate(std::span<const double> x, std::span<double> out) const {
  for (std::size_t c = 0; c < width_; ++c) out[c] = interpolate(x, c);
}

double GridFunction::min(std::size_t comp) const {
  double m = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < nodes(); ++i) m = std::min(m, (*this)(i, comp));
  return m;
}

double GridFunction::max(std::size_t comp) const {
  double m = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < nodes(); ++i) m = std::max(m, (*this)(i, comp));
  return m;
}

double lp_distance(const GridFunction& f, const GridFunction& g, double p, const Box* box) {
  if (f.width() != g.width() || f.nodes() != g.nodes())
    throw DimensionError("lp_distance needs grid functions of the same shape");
  const Grid& grid = f.grid();
  Point x(grid.dim());
  double acc = 0.0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (box) {
      grid.coords(i, x);
      if (!box->contains(x)) continue;
    }
    for (std::size_t c = 0; c < f.width(); ++c) acc += std::pow(std::abs(f(i, c) - g(i, c)), p);
  }
  return std::pow(acc * grid.cell_volume(), 1.0 / p);
}

double lp_norm(const GridFunction& f, double p, const Box* box) {
  return lp_distance(f, GridFunction::constant(f.grid(), 0.0, f.width()), p, box);
}

}  // namespace ordflow
