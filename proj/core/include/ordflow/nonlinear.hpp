#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ordflow/flow.hpp"
#include "ordflow/grid.hpp"
#include "ordflow/time_profile.hpp"
#include "ordflow/transport.hpp"
#include "ordflow/velocity.hpp"

namespace ordflow {

// (t, x, u) -> out; f has d outputs, g has m outputs.
using CoefficientFn = std::function<void(double, std::span<const double>, std::span<const double>, std::span<double>)>;

// du/dt + f(t,x,u).grad u + g(t,x,u) = 0 with u(T) = u_T.
struct Nonlinearity {
  std::string id;
  std::size_t dim = 1;
  std::size_t width = 1;
  CoefficientFn f;
  CoefficientFn g;  // empty means zero
  TimeProfile c0;

  static Nonlinearity burgers();                         // f = -u, g = 0
  static Nonlinearity linear_decay(double a);            // f = -u - a x, g = 0, C0 = a
  static Nonlinearity zero(std::size_t d, std::size_t m);
};

struct NonlinearParams {
  double a = 1.0;
  std::size_t dim = 1;
  std::size_t width = 1;
};

// Catalog lookup; throws ConfigError for unknown ids.
Nonlinearity make_nonlinearity(const std::string& id, const NonlinearParams& params = {});

// Sampled one-sided derivative checks on grid x u-lattice; throws GuardError with the first violation.
void validate_nonlinearity(const Nonlinearity& nl, const Grid& grid, double u_lo, double u_hi,
                           std::span<const double> times, double tol = 1e-9);

// Equivalent problem with C0 = 0 in the variables x~ = e^{-L(t)} x, u~ = e^{L(t)} u, L(t) = int_t^T C0.
Nonlinearity reduce_c0(const Nonlinearity& nl, double T);

enum class LatticeDirection { from_top, from_bottom };
const char* to_string(LatticeDirection d);

struct LatticeIterate {
  std::vector<double> times;  // ends at T
  std::vector<GridFunction> slices;
  std::size_t iteration = 0;
  LatticeDirection direction = LatticeDirection::from_top;
  double growth_bound = 0.0;  // max |u| / (1 + |x|)

  const Grid& grid() const { return slices.front().grid(); }
  std::size_t index_of(double t) const;
  const GridFunction& at(double t) const { return slices[index_of(t)]; }
};

struct NonlinearOptions {
  double eps = 0.0;  // transport regularization width, 0: one cell
  double cfl = 0.5;
  std::optional<Grid> field_grid;
  bool validate = true;
};

// Frozen linear problem b = f(t, x, u), d = g(t, x, u), held on [t_k, t_{k+1}).
TransportProblem frozen_problem(const LatticeIterate& u, const Nonlinearity& nl, const VectorFn& u_T, double T);

// Lattice start: constant max (top) or min (bottom) of u_T over the grid, with u(T) = u_T.
LatticeIterate lattice_start(const Grid& grid, std::span<const double> times, const VectorFn& u_T, std::size_t width,
                             LatticeDirection direction);

// One application of the fixed-point map. Top iterations use the minimal flow, bottom iterations the maximal flow.
// The nonlinearity must have C0 = 0 (see reduce_c0); throws DomainError if the input leaves the lattice.
LatticeIterate fixed_point_map(const LatticeIterate& u, const Nonlinearity& nl, const VectorFn& u_T,
                               const NonlinearOptions& options = {});

struct ExtremalReport {
  LatticeIterate solution;  // in the original variables
  std::size_t iterations = 0;
  bool converged = false;
  std::vector<double> changes;       // max over slices of the L1 change per iteration
  double fixed_point_residual = 0.0; // L1 change under one more application
  double monotone_defect = 0.0;      // largest step against the expected direction
  double tolerance = 0.0;
};

// tol <= 0 selects 1e-3 times the box volume.
ExtremalReport solve_extremal(const Nonlinearity& nl, const VectorFn& u_T, const Grid& grid,
                              std::span<const double> times, LatticeDirection direction, std::size_t max_iter = 20,
                              double tol = 0.0, const NonlinearOptions& options = {});

// Max over slices of the L1 distance (times cell volume) between two iterates on one grid.
double lattice_distance(const LatticeIterate& a, const LatticeIterate& b);

// True if a <= b node-wise within tol.
bool lattice_leq(const LatticeIterate& a, const LatticeIterate& b, double tol = 0.0);

// Iterate built from a function of (t, x).
LatticeIterate lattice_from(const Grid& grid, std::span<const double> times, std::size_t width,
                            const std::function<void(double, std::span<const double>, std::span<double>)>& fn,
                            LatticeDirection direction = LatticeDirection::from_top);

struct LatticeMaxReport {
  LatticeIterate combined;
  ResidualReport residual_u;
  ResidualReport residual_v;
  ResidualReport residual_combined;
  bool passed = false;  // no sub-residual violations in the combined function
};

LatticeMaxReport lattice_max(const LatticeIterate& u, const LatticeIterate& v, const Nonlinearity& nl,
                             const VectorFn& u_T, double eps);

struct CharacteristicsBundle {
  double start_time = 0.0;
  std::vector<double> times;     // s values in [t, T]
  std::vector<GridFunction> X;   // width d, on the start grid
  std::vector<GridFunction> U;   // width m, U(s) = u(s, X(s))
  double terminal_defect = 0.0;  // L1 over start nodes of U(T) - u_T(X(T))
  double backward_residual = 0.0;// mean |-dU/ds - g(s, X, U)| over interior s and nodes
};

CharacteristicsBundle extract_characteristics(const LatticeIterate& u, const Nonlinearity& nl, const VectorFn& u_T,
                                              double t, const NonlinearOptions& options = {});

}  // namespace ordflow
