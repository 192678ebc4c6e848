#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "ordflow/continuity.hpp"
#include "ordflow/flow.hpp"
#include "ordflow/grid.hpp"
#include "ordflow/time_profile.hpp"
#include "ordflow/transport.hpp"
#include "ordflow/velocity.hpp"

namespace ordflow {

// Row i of sigma: (t, x_i) -> sigma_{i,0..m-1}. A row only ever sees its own coordinate.
using NoiseRow = std::function<void(double, double, std::span<double>)>;

struct NoiseSpec {
  std::size_t dim = 0;     // rows
  std::size_t brownian = 0;  // m
  std::vector<NoiseRow> rows;
  TimeProfile lipschitz;   // row Lipschitz bound in x_i
  double sup_bound = 0.0;  // declared bound on |sigma|, used to size field grids

  static NoiseSpec zero(std::size_t d);
  // sigma = a I with m = d, the additive noise sqrt(2 eps) dW when a = sqrt(2 eps).
  static NoiseSpec additive(std::size_t d, double a);
  // Diagonal sigma_ii(t, x_i) with m = d.
  static NoiseSpec diagonal(std::size_t d, std::function<double(double, double)> s, TimeProfile lipschitz,
                            double sup_bound);

  bool is_zero() const { return sup_bound == 0.0; }
};

struct EmOptions {
  double dt = 0.0;       // 0: min(cfl eps / sup|b|, 1 / (2 C1), max_dt)
  double max_dt = 0.01;
  double cfl = 0.5;
  std::optional<Grid> field_grid;  // default: growth-bound reach of the start box plus six noise widths
  bool validate = true;
  double oscillation_limit = std::numeric_limits<double>::infinity();
};

// Paths from every start point, per stored time: values[k][(start * paths + path) * dim + i].
struct PathBundle {
  std::size_t dim = 0;
  std::size_t starts = 0;
  std::size_t paths = 0;
  std::uint64_t seed = 0;
  std::vector<double> start_points;  // starts * dim
  std::vector<double> times;
  std::vector<double> steps;         // the integrator time grid, shared by coupled runs
  std::vector<std::vector<double>> values;

  std::span<const double> at(std::size_t k, std::size_t start, std::size_t path) const {
    return {values[k].data() + (start * paths + path) * dim, dim};
  }
};

// Brownian increment component for (seed, path, step); identical across start points and sides.
double brownian_increment(std::uint64_t seed, std::size_t path, std::size_t step, std::size_t component, double dt);

// Measured C2 in |b(t,x) - b(t,y)| <= C2 (|x - y| + 1) over node pairs of the grid.
double oscillation_constant(const VelocityField& b, const Grid& grid, std::span<const double> times);

PathBundle em_flow(const VelocityField& b, const NoiseSpec& noise, FlowSide side, double eps_reg, double s,
                   std::span<const double> times, std::span<const double> start_points, std::size_t paths,
                   std::uint64_t seed, const EmOptions& options = {});

// Step em_flow selects when options.dt is 0; it does not depend on the side.
double em_step(const VelocityField& b, const NoiseSpec& noise, double eps_reg, double s, double t,
               const Grid& field_grid, const EmOptions& options);

struct OrderReport {
  std::size_t checked = 0;
  std::size_t violations = 0;
  double fraction = 0.0;
  double worst = 0.0;
};

// Order X_lo <= X_hi per (time, start, path) beyond tol. Throws DomainError on seed or step mismatch.
OrderReport coupled_order_check(const PathBundle& lo, const PathBundle& hi, double tol = 1e-12);

struct SecondOrderSolution {
  TransportSolution solution;
  std::vector<GridFunction> standard_error;
};

// u(t, x) = E[u_T(Phi_{T,t}(x))] by Monte Carlo; the same increments drive every start node.
SecondOrderSolution solve_second_order_te(const TransportProblem& p, const NoiseSpec& noise, const Grid& grid,
                                          std::span<const double> times, std::size_t paths, std::uint64_t seed,
                                          FlowSide side = FlowSide::lower, double eps_reg = 0.0,
                                          const EmOptions& options = {});

// Particles drawn from f0 and moved by em_flow, one independent path per particle.
DensitySolution solve_fokker_planck(const VelocityField& b, const NoiseSpec& noise, const Grid& grid,
                                    const ScalarFn& f0, std::span<const double> times, std::size_t particles,
                                    std::uint64_t seed, const EmOptions& options = {}, double eps_reg = 0.0);

}  // namespace ordflow
