#pragma once

#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "ordflow/flow.hpp"
#include "ordflow/grid.hpp"
#include "ordflow/time_profile.hpp"
#include "ordflow/velocity.hpp"

namespace ordflow {

using SourceFn = std::function<void(double, std::span<const double>, std::span<double>)>;

// -u_t - b.grad u - c(t) u - d(t,x) = 0 on [0,T), u(T) = u_T.
struct TransportProblem {
  FieldPtr b;
  TimeProfile c;             // zero unless set
  SourceFn d;                // optional; must be decreasing in x
  std::vector<double> source_knots;  // times where d may jump (held on [t_j, t_{j+1}))
  VectorFn terminal;         // u_T: R^d -> R^m
  std::size_t width = 1;
  double T = 1.0;
  Monotonicity terminal_tag = Monotonicity::none;
};

enum class Provenance { flow_composition, viscous, regularized };

struct TransportSolution {
  std::vector<double> times;
  std::vector<GridFunction> slices;
  Provenance provenance = Provenance::flow_composition;
  double eps = 0.0;
  FlowSide side = FlowSide::lower;

  const Grid& grid() const { return slices.front().grid(); }
  std::size_t index_of(double t) const;
  const GridFunction& at(double t) const { return slices[index_of(t)]; }
};

struct TransportOptions {
  // For decreasing data the minimal (lower) flow selects the largest, upper semicontinuous
  // version of the solution; the maximal flow selects the smallest.
  FlowSide side = FlowSide::lower;
  double eps = 0.0;  // coefficient regularization width; 0 means one grid cell
  double dt = 0.0;
  double cfl = 0.5;
  std::optional<Grid> field_grid;
  bool validate = true;
};

// u(t,x) = u_T(X_T) exp(int_t^T c) + int_t^T d(s, X_s) exp(int_t^s c) ds along the
// regularized trajectory X from (t, x).
TransportSolution solve_transport(const TransportProblem& p, const Grid& grid,
                                  std::span<const double> times, const TransportOptions& options = {});

GridFunction sample_terminal(const TransportProblem& p, const Grid& grid);

enum class ResidualSide { sub, super };

struct ResidualReport {
  std::vector<double> times;
  std::vector<GridFunction> residual;  // per slice
  std::vector<GridFunction> tolerance; // per slice, the local violation threshold
  std::size_t checked = 0;
  std::size_t violations = 0;
  double violation_fraction = 0.0;
  double max_violation = 0.0;
};

// Mollifies each slice one-sidedly (sub: upper kernel, super: lower kernel) and evaluates
// -U_t - b.grad U - c U - d with centered time and upwind space differences. Removes C1 first.
ResidualReport subsupersolution_residual(const TransportSolution& u, const TransportProblem& p, double eps,
                                         ResidualSide side, double tolerance_factor = 10.0);

// int_{B_R} (u - v)_+^p at time t minus e^{p int c} int_{B_R'} (u - v)_+^p at time T, with the
// enlarged radius R' = R + (R + 1/2)(e^{4 (omega0(T) - omega0(t))} - 1). Nonpositive certifies.
double comparison_gap(const TransportSolution& u_sub, const TransportSolution& v_super, const TransportProblem& p,
                      double R, double t, double p_exp = 1.0);

struct RenormalizationReport {
  TransportSolution renormalized;  // beta applied node-wise
  TransportSolution reference;     // solved from beta(u_T)
  double defect = 0.0;             // max over slices of the L1 distance
};

RenormalizationReport renormalize(const TransportSolution& u, const std::function<double(double)>& beta,
                                  const TransportProblem& p, const TransportOptions& options = {});

struct LpBoundReport {
  double lhs = 0.0;     // ||u(t)||_{L^p(B_R)}
  double rhs = 0.0;     // e^{d (omega1(T)-omega1(t))/p} ||u_T||_{L^p(B_R')}
  double radius = 0.0;  // R'
  bool holds = true;
};

// A priori L^p bound over the enlarged ball R' = R + (1 + R)(e^{omega0(T) - omega0(t)} - 1).
LpBoundReport lp_bound(const TransportSolution& u, const TransportProblem& p, double R, double t,
                       double p_exp = 1.0, double tolerance = 0.0);

}  // namespace ordflow
