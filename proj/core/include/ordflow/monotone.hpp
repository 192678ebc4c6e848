#pragma once

#include "ordflow/grid.hpp"

namespace ordflow {

// Componentwise order on R^d. Throws DimensionError on mismatched dimensions.
bool leq(std::span<const double> x, std::span<const double> y);

// Nondecreasing (resp. nonincreasing) along every axis, for every component.
bool is_increasing(const GridFunction& phi);
bool is_decreasing(const GridFunction& phi);
bool has_monotonicity(const GridFunction& phi, Monotonicity tag);

enum class EnvelopeSide { upper, lower };

// Max (upper) or min (lower) over each node and its 3^d - 1 neighbours.
GridFunction envelope(const GridFunction& phi, EnvelopeSide side);

// Largest variation sum along monotone single-axis lattice paths from lo to hi.
// lo and hi must be grid nodes with lo <= hi.
double abv_norm(const GridFunction& phi, const Point& lo, const Point& hi);

struct ABVReport {
  double norm = 0.0;
  // Both defined on the sub-grid spanning [lo, hi]; phi = increasing_part - decreasing_part.
  GridFunction increasing_part;
  GridFunction decreasing_part;
  // variation[x] = abv_norm over [lo, x], on the same sub-grid
  GridFunction variation;
};

// Splits phi into two increasing functions using the variation from the lower corner.
ABVReport abv_decompose(const GridFunction& phi, const Point& lo, const Point& hi);

}  // namespace ordflow
