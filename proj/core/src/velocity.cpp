#include "ordflow/velocity.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ordflow/error.hpp"
#include "ordflow/monotone.hpp"

namespace ordflow {

namespace {

inline double sgn(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

class LambdaField final : public VelocityField {
 public:
  LambdaField(std::size_t d, std::string id, FieldFn fn, TimeProfile c0, TimeProfile c1,
              bool autonomous, std::vector<double> knots)
      : VelocityField(std::move(c0), std::move(c1)),
        d_(d),
        id_(std::move(id)),
        fn_(std::move(fn)),
        autonomous_(autonomous),
        knots_(std::move(knots)) {}

  std::size_t dim() const override { return d_; }
  std::string id() const override { return id_; }
  void evaluate(double t, std::span<const double> x, std::span<double> out) const override {
    fn_(t, x, out);
  }
  bool autonomous() const override { return autonomous_; }
  std::vector<double> time_knots() const override { return knots_; }

 private:
  std::size_t d_;
  std::string id_;
  FieldFn fn_;
  bool autonomous_;
  std::vector<double> knots_;
};

}  // namespace

FieldPtr analytic_field(std::size_t d, std::string id, FieldFn fn, TimeProfile c0, TimeProfile c1,
                        bool autonomous, std::vector<double> knots) {
  if (d == 0) throw DimensionError("field dimension must be at least 1");
  return std::make_shared<LambdaField>(d, std::move(id), std::move(fn), std::move(c0), std::move(c1),
                                       autonomous, std::move(knots));
}

FieldPtr sign_field() {
  return analytic_field(
      1, "sign", [](double, std::span<const double> x, std::span<double> out) { out[0] = sgn(x[0]); },
      TimeProfile(1.0), TimeProfile(0.0));
}

FieldPtr line_field() {
  return analytic_field(
      2, "line",
      [](double, std::span<const double> x, std::span<double> out) {
        out[0] = out[1] = sgn(x[0]);
      },
      TimeProfile(std::sqrt(2.0)), TimeProfile(0.0));
}

FieldPtr quadrant_field() {
  return analytic_field(
      2, "diagonal",
      [](double, std::span<const double> x, std::span<double> out) {
        const double s1 = sgn(x[0]), s2 = sgn(x[1]);
        const double p1 = 0.5 * (1.0 + s1), p2 = 0.5 * (1.0 + s2);
        out[0] = p2 + (1.0 - p2) * 0.5 * (s1 - 1.0);
        out[1] = p1 + (1.0 - p1) * 0.5 * (s2 - 1.0);
      },
      TimeProfile(std::sqrt(2.0)), TimeProfile(0.0));
}

FieldPtr linear_field(std::size_t d, std::vector<double> matrix, std::vector<double> shift) {
  if (matrix.size() != d * d || shift.size() != d)
    throw DimensionError("linear field needs a d x d matrix and a d-vector");
  double frob = 0.0, c1 = 0.0, vnorm = 0.0;
  for (std::size_t i = 0; i < d; ++i) {
    vnorm += shift[i] * shift[i];
    for (std::size_t j = 0; j < d; ++j) {
      const double a = matrix[i * d + j];
      frob += a * a;
      if (i != j && a < 0.0)
        throw DomainError("linear field needs nonnegative off-diagonal entries");
      if (i == j) c1 = std::max(c1, -a);
    }
  }
  const double c0 = std::max(std::sqrt(frob), std::sqrt(vnorm));
  return analytic_field(
      d, "linear",
      [d, matrix = std::move(matrix), shift = std::move(shift)](double, std::span<const double> x,
                                                               std::span<double> out) {
        for (std::size_t i = 0; i < d; ++i) {
          double acc = shift[i];
          for (std::size_t j = 0; j < d; ++j) acc += matrix[i * d + j] * x[j];
          out[i] = acc;
        }
      },
      TimeProfile(c0), TimeProfile(c1));
}

FieldPtr constant_field(Point v) {
  const std::size_t d = v.size();
  return linear_field(d, std::vector<double>(d * d, 0.0), std::move(v));
}

FieldEstimate estimate_constants(const GridFunction& slice) {
  const Grid& g = slice.grid();
  const std::size_t d = g.dim();
  if (slice.width() != d) throw DimensionError("field slice width must equal the grid dimension");
  FieldEstimate e;
  Point x(d);
  for (std::size_t i = 0; i < g.size(); ++i) {
    g.coords(i, x);
    double bx = 0.0, r = 0.0;
    for (std::size_t a = 0; a < d; ++a) {
      bx += slice(i, a) * slice(i, a);
      r += x[a] * x[a];
    }
    e.c0 = std::max(e.c0, std::sqrt(bx) / (1.0 + std::sqrt(r)));
    for (std::size_t a = 0; a < d; ++a) {
      if (g.axis_index(i, a) + 1 >= g.count(a)) continue;
      const double slope = (slice(i + g.stride(a), a) - slice(i, a)) / g.spacing(a);
      e.c1 = std::max(e.c1, -slope);
    }
  }
  return e;
}

GriddedField::GriddedField(std::string id, std::vector<double> times, std::vector<GridFunction> slices,
                           TimeInterpolation mode, TimeProfile c0, TimeProfile c1)
    : VelocityField(std::move(c0), std::move(c1)),
      id_(std::move(id)),
      times_(std::move(times)),
      slices_(std::move(slices)),
      mode_(mode) {
  if (slices_.empty() || slices_.size() != times_.size())
    throw DimensionError("gridded field needs one slice per time");
  for (std::size_t k = 0; k < slices_.size(); ++k) {
    if (slices_[k].width() != slices_[k].grid().dim())
      throw DimensionError("gridded field slices must have width d");
    if (!(slices_[k].grid() == slices_.front().grid()))
      throw DimensionError("gridded field slices must share one grid");
    if (k > 0 && !(times_[k] > times_[k - 1]))
      throw DomainError("gridded field times must be strictly increasing");
  }
}

namespace {

TimeProfile profile_from(const std::vector<double>& values) {
  return TimeProfile(*std::max_element(values.begin(), values.end()));
}

std::vector<double> estimates(const std::vector<GridFunction>& slices, bool want_c0) {
  std::vector<double> v;
  for (const auto& s : slices) {
    const FieldEstimate e = estimate_constants(s);
    v.push_back(want_c0 ? e.c0 : e.c1);
  }
  return v;
}

}  // namespace

GriddedField::GriddedField(std::string id, std::vector<double> times, std::vector<GridFunction> slices,
                           TimeInterpolation mode)
    : GriddedField(std::move(id), times, slices, mode, profile_from(estimates(slices, true)),
                   profile_from(estimates(slices, false))) {}

void GriddedField::evaluate(double t, std::span<const double> x, std::span<double> out) const {
  if (slices_.size() == 1 || t <= times_.front()) {
    slices_.front().interpolate(x, out);
    return;
  }
  if (t >= times_.back()) {
    slices_.back().interpolate(x, out);
    return;
  }
  const auto it = std::upper_bound(times_.begin(), times_.end(), t);
  const std::size_t j = static_cast<std::size_t>(it - times_.begin()) - 1;
  slices_[j].interpolate(x, out);
  if (mode_ == TimeInterpolation::hold) return;
  const double w = (t - times_[j]) / (times_[j + 1] - times_[j]);
  if (w == 0.0) return;
  for (std::size_t a = 0; a < out.size(); ++a) {
    const double next = slices_[j + 1].interpolate(x, a);
    out[a] += w * (next - out[a]);
  }
}

std::vector<double> GriddedField::time_knots() const {
  if (slices_.size() == 1) return {};
  return times_;
}

double GriddedField::sup_norm() const {
  double m = 0.0;
  for (const auto& s : slices_)
    for (std::size_t i = 0; i < s.nodes(); ++i) {
      double r = 0.0;
      for (std::size_t a = 0; a < s.width(); ++a) r += s(i, a) * s(i, a);
      m = std::max(m, std::sqrt(r));
    }
  return m;
}

GridFunction sample_field(const VelocityField& b, double t, const Grid& grid) {
  if (b.dim() != grid.dim()) throw DimensionError("field dimension does not match the grid");
  return GridFunction::sample(grid, b.dim(), [&](std::span<const double> x, std::span<double> out) {
    b.evaluate(t, x, out);
  });
}

void validate_field(const VelocityField& b, const Grid& grid, std::span<const double> times) {
  const std::size_t d = grid.dim();
  for (double t : times) {
    const GridFunction s = sample_field(b, t, grid);
    const double c0 = b.c0()(t), c1 = b.c1()(t);
    Point x(d);
    std::vector<double> shifted(s.values().begin(), s.values().end());
    for (std::size_t i = 0; i < grid.size(); ++i) {
      grid.coords(i, x);
      double bx = 0.0, r = 0.0;
      for (std::size_t a = 0; a < d; ++a) {
        bx += s(i, a) * s(i, a);
        r += x[a] * x[a];
        shifted[i * d + a] += c1 * x[a];
      }
      if (std::sqrt(bx) > c0 * (1.0 + std::sqrt(r)) * (1.0 + 1e-12) + 1e-12)
        throw GuardError("field '" + b.id() + "' violates its growth bound at t=" + std::to_string(t));
    }
    // One-sided condition up to rounding in the shift.
    const GridFunction sh(grid, std::move(shifted), d);
    for (std::size_t i = 0; i < grid.size(); ++i)
      for (std::size_t a = 0; a < d; ++a) {
        if (grid.axis_index(i, a) + 1 >= grid.count(a)) continue;
        const std::size_t j = i + grid.stride(a);
        for (std::size_t c = 0; c < d; ++c)
          if (sh(j, c) < sh(i, c) - 1e-12 * (1.0 + std::abs(sh(i, c))))
            throw GuardError("field '" + b.id() + "' is not increasing after the C1 shift at t=" +
                             std::to_string(t));
      }
  }
}

std::vector<double> tabulation_times(const VelocityField& b, double s, double t,
                                     std::span<const double> fallback) {
  std::vector<double> out{s};
  if (b.autonomous()) return out;
  std::vector<double> knots = b.time_knots();
  if (knots.empty()) knots.assign(fallback.begin(), fallback.end());
  std::sort(knots.begin(), knots.end());
  // Hold semantics: the slice in force at s is the last knot <= s, evaluated at s itself.
  for (double k : knots)
    if (k > s && k < t) out.push_back(k);
  return out;
}

std::vector<CatalogEntry> catalog() {
  return {
      {"sign", 1, "field", "b(x) = sgn x with sgn(0) = 0", "none", {"1d", "discontinuous"}},
      {"line", 2, "field", "b(x) = sgn(x1) (1, 1)", "none", {"2d", "discontinuous"}},
      {"diagonal", 2, "field", "quadrant field (1,1), (1,0), (0,1), (-1,-1)", "none",
       {"2d", "discontinuous"}},
      {"linear", 0, "field", "b(x) = A x + v, off-diagonal A >= 0",
       "matrix: d*d numbers row-major; shift: d numbers", {"nd", "smooth"}},
      {"constant", 0, "field", "b(x) = v", "shift: d numbers", {"nd", "smooth"}},
      {"user-grid", 0, "field", "vector samples on a grid, held or interpolated in time",
       "grid, times, values", {"1d", "2d", "nd"}},
      {"burgers", 1, "nonlinearity", "f(t,x,u) = -u, g = 0", "none", {"1d"}},
      {"linear-decay", 1, "nonlinearity", "f(t,x,u) = -u - a x, g = 0 (C0 = a)", "a: number",
       {"1d"}},
      {"zero", 0, "nonlinearity", "f = 0, g = 0", "none", {"nd"}},
  };
}

std::vector<CatalogEntry> catalog(const std::string& filter) {
  std::vector<CatalogEntry> out;
  for (auto& e : catalog()) {
    const bool match = filter.empty() || e.id == filter || e.kind == filter ||
                       std::find(e.tags.begin(), e.tags.end(), filter) != e.tags.end();
    if (match) out.push_back(e);
  }
  return out;
}

FieldPtr make_field(const std::string& id, const FieldParams& params) {
  auto get = [&](const std::string& key) -> const std::vector<double>& {
    const auto it = params.find(key);
    if (it == params.end()) throw ConfigError("field '" + id + "' needs parameter '" + key + "'");
    return it->second;
  };
  if (id == "sign") return sign_field();
  if (id == "line") return line_field();
  if (id == "diagonal") return quadrant_field();
  if (id == "constant") return constant_field(get("shift"));
  if (id == "linear") {
    const auto& m = get("matrix");
    const auto d = static_cast<std::size_t>(std::lround(std::sqrt(static_cast<double>(m.size()))));
    if (d * d != m.size()) throw ConfigError("linear field matrix must be square");
    std::vector<double> shift(d, 0.0);
    if (params.count("shift")) shift = get("shift");
    try {
      return linear_field(d, m, shift);
    } catch (const DomainError& e) {
      throw ConfigError(e.what());
    } catch (const DimensionError& e) {
      throw ConfigError(e.what());
    }
  }
  throw ConfigError("unknown field id '" + id + "'");
}

}  // namespace ordflow
