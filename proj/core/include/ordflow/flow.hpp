#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ordflow/grid.hpp"
#include "ordflow/velocity.hpp"

namespace ordflow {

// upper: sup-convolved field (b^eps >= b), approximates the maximal flow.
// lower: inf-convolved field (b_eps <= b), approximates the minimal flow.
enum class FlowSide { upper, lower };

enum class FlowVariant { maximal, minimal, regularized, limit, stochastic };

const char* to_string(FlowVariant v);

// phi_{t,s} sampled at stored times from every node of a start grid.
struct FlowMap {
  double start_time = 0.0;
  std::vector<double> times;          // times.front() == start_time
  std::vector<GridFunction> slices;   // width d, same grid, slices.front() is the identity
  FlowVariant variant = FlowVariant::regularized;
  double eps = 0.0;
  std::uint64_t seed = 0;

  const Grid& grid() const { return slices.front().grid(); }
  std::size_t index_of(double t) const;  // throws DomainError if t is not stored
  const GridFunction& at(double t) const { return slices[index_of(t)]; }
};

struct FlowOptions {
  double dt = 0.0;   // 0 selects the largest step allowed by the guard
  double cfl = 0.5;  // guard: dt <= cfl * eps / sup|b_eps|
  std::optional<Grid> field_grid;  // grid for tabulating the regularized field; default start grid
  bool validate = true;
};

// Sup- or inf-convolution of b tabulated on a grid at the slice times of b over [s, t].
std::shared_ptr<const GriddedField> regularized_field(const VelocityField& b, FlowSide side, double eps,
                                                      const Grid& field_grid, double s, double t,
                                                      std::span<const double> fallback_times = {});

// Merges a uniform partition of [s, t] (steps <= dt_max) with required breakpoints.
std::vector<double> time_grid(double s, double t, double dt_max, std::span<const double> required);

// One RK4 step; the last stage is evaluated at the left limit of t + dt so that fields
// held constant on [t_j, t_{j+1}) are never sampled from the next slice inside a step.
void rk4_step(const VelocityField& b, double t, double dt, std::span<double> x,
              std::vector<double>& work);

// Grid with the spacing of g covering every point reachable from the box of g over [s, t]
// under the growth bound |b| <= C0 (1 + |x|), widened by margin.
Grid reach_grid(const Grid& g, const VelocityField& b, double s, double t, double margin = 0.0);

// Largest stable step for a regularized field: cfl * eps / sup|b_eps|.
double guarded_step(const GriddedField& field, double eps, double cfl);

FlowMap integrate_regularized_flow(const VelocityField& b, FlowSide side, double eps, double s,
                                   std::span<const double> times, const Grid& grid,
                                   const FlowOptions& options = {});

// Default schedule eps_k = 2^-k eps0, stopping at the last value >= floor (floor >= 2h).
std::vector<double> default_eps_schedule(double eps0, double floor);

struct MaxMinFlow {
  FlowMap maximal;
  FlowMap minimal;
  std::vector<FlowMap> upper_sequence;   // regularized flows along the schedule
  std::vector<FlowMap> lower_sequence;
  std::vector<GridFunction> gap;          // per slice, width 1: |phi_K - phi_{K-1}| summed over sides
  double monotonicity_defect = 0.0;       // largest violation of eps-monotonicity seen
  std::vector<double> schedule;
};

// Regularized flows along a decreasing eps schedule, extrapolated to the limit.
// Throws GuardError if the sequences are not monotone in eps beyond tolerance.
MaxMinFlow maximal_minimal_flow(const VelocityField& b, double s, std::span<const double> times,
                                const Grid& grid, std::span<const double> schedule,
                                const FlowOptions& options = {}, double tolerance = 1e-6);

struct ComparisonReport {
  bool ordered = true;
  std::size_t violations = 0;
  double worst = 0.0;  // largest amount by which x exceeds y
  // First violation in (time, node, component) order.
  double first_time = 0.0;
  std::size_t first_node = 0;
  std::size_t first_component = 0;
};

// Checks x <= y + tol at every stored time and node. Both maps must share times and grid.
ComparisonReport check_comparison(const FlowMap& x, const FlowMap& y, double tol = 0.0);

struct SemigroupReport {
  double residual = 0.0;     // L1 over the box (or the whole grid)
  std::size_t skipped = 0;   // nodes whose intermediate point left the grid of from_s
};

// || phi_{t,s} o phi_{s,r} - phi_{t,r} ||_{L1}: from_r starts at r and stores s and t,
// from_s starts at s and stores t. The outer map is interpolated multilinearly.
SemigroupReport semigroup_residual(const FlowMap& from_r, const FlowMap& from_s, double s, double t,
                                   const Box* box = nullptr);

struct MeasureBoundReport {
  Box set;
  double set_measure = 0.0;
  double preimage_measure = 0.0;
  double bound = 0.0;
  double grid_tolerance = 0.0;
  bool holds = true;
};

// |phi_{t,s}^{-1}(A)| estimated by counting nodes, against e^{d (omega1(t) - omega1(s))} |A|.
MeasureBoundReport measure_bound(const FlowMap& flow, const Box& set, double t, const VelocityField& b,
                                 double tolerance_cells = 4.0);

}  // namespace ordflow
