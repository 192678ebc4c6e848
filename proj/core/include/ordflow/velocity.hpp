#pragma once

#include <functional>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "ordflow/grid.hpp"
#include "ordflow/time_profile.hpp"

namespace ordflow {

// A velocity field b(t, x) on R^d with growth constant C0 and one-sided constant C1:
// |b(t,x)| <= C0(t)(1 + |x|) and x -> b(t,x) + C1(t) x is increasing.
class VelocityField {
 public:
  virtual ~VelocityField() = default;

  virtual std::size_t dim() const = 0;
  virtual std::string id() const = 0;
  virtual void evaluate(double t, std::span<const double> x, std::span<double> out) const = 0;
  virtual bool autonomous() const { return true; }
  // Times where the field may jump in t. Integrators align their steps with these.
  virtual std::vector<double> time_knots() const { return {}; }

  const TimeProfile& c0() const { return c0_; }
  const TimeProfile& c1() const { return c1_; }
  double omega0(double s, double t) const { return c0_.integral(s, t); }
  double omega1(double s, double t) const { return c1_.integral(s, t); }

 protected:
  VelocityField(TimeProfile c0, TimeProfile c1) : c0_(std::move(c0)), c1_(std::move(c1)) {}

 private:
  TimeProfile c0_;
  TimeProfile c1_;
};

using FieldPtr = std::shared_ptr<const VelocityField>;
using FieldFn = std::function<void(double, std::span<const double>, std::span<double>)>;

// sgn x in one dimension, sgn(0) = 0.
FieldPtr sign_field();
// sgn(x1) (1, 1) in two dimensions.
FieldPtr line_field();
// Quadrant field: (1,1), (1,0), (0,1), (-1,-1) on the quadrants ++, -+, +-, --,
// multilinear in (sgn x1, sgn x2) on the axes.
FieldPtr quadrant_field();
// b(x) = A x + v with A row-major d x d; off-diagonal entries must be nonnegative.
FieldPtr linear_field(std::size_t d, std::vector<double> matrix, std::vector<double> shift);
FieldPtr constant_field(Point v);
FieldPtr analytic_field(std::size_t d, std::string id, FieldFn fn, TimeProfile c0, TimeProfile c1,
                        bool autonomous = true, std::vector<double> knots = {});

enum class TimeInterpolation {
  hold,   // slice j is used on [t_j, t_{j+1})
  linear
};

// Field given by vector GridFunctions (width d) at a list of times.
class GriddedField final : public VelocityField {
 public:
  GriddedField(std::string id, std::vector<double> times, std::vector<GridFunction> slices,
               TimeInterpolation mode, TimeProfile c0, TimeProfile c1);
  // C0 and C1 estimated from the samples.
  GriddedField(std::string id, std::vector<double> times, std::vector<GridFunction> slices,
               TimeInterpolation mode);

  std::size_t dim() const override { return grid().dim(); }
  std::string id() const override { return id_; }
  void evaluate(double t, std::span<const double> x, std::span<double> out) const override;
  bool autonomous() const override { return slices_.size() == 1; }
  std::vector<double> time_knots() const override;

  const Grid& grid() const { return slices_.front().grid(); }
  const std::vector<double>& times() const { return times_; }
  const std::vector<GridFunction>& slices() const { return slices_; }
  TimeInterpolation mode() const { return mode_; }
  double sup_norm() const;

 private:
  std::string id_;
  std::vector<double> times_;
  std::vector<GridFunction> slices_;
  TimeInterpolation mode_;
};

struct FieldEstimate {
  double c0 = 0.0;
  double c1 = 0.0;
};
// Smallest constants consistent with the samples of one slice.
FieldEstimate estimate_constants(const GridFunction& slice);

// Samples b at time t on the grid (width d).
GridFunction sample_field(const VelocityField& b, double t, const Grid& grid);

// Checks the growth bound and the one-sided monotonicity on grid samples at the given times.
// Throws GuardError on violation.
void validate_field(const VelocityField& b, const Grid& grid, std::span<const double> times);

// Slice times used to tabulate b over [s, t]: s plus the field's knots inside (s, t),
// or the supplied fallback times for non-autonomous fields without knots.
std::vector<double> tabulation_times(const VelocityField& b, double s, double t,
                                     std::span<const double> fallback);

struct CatalogEntry {
  std::string id;
  std::size_t dim;  // 0 means any dimension
  std::string kind;  // "field" or "nonlinearity"
  std::string description;
  std::string parameters;
  std::vector<std::string> tags;
};

std::vector<CatalogEntry> catalog();
std::vector<CatalogEntry> catalog(const std::string& filter);

using FieldParams = std::map<std::string, std::vector<double>>;
// Builds a catalog field; "user-grid" fields are built by the scenario layer instead.
FieldPtr make_field(const std::string& id, const FieldParams& params);

}  // namespace ordflow
