#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "ordflow/grid.hpp"

namespace ordflow {

// Shock path c on [0, T] with c(T) = 0 and speed -c' inside (margin, 1 - margin).
struct ShockPath {
  double T = 1.0;
  double margin = 0.01;
  std::vector<double> times;
  std::vector<double> c;
  std::vector<double> dc;

  // c(t) = speed (T - t).
  static ShockPath linear(double speed, double T = 1.0, std::size_t samples = 201, double margin = 0.01);
  static ShockPath from_function(const std::function<double(double)>& c, const std::function<double(double)>& dc,
                                 double T, std::size_t samples = 201, double margin = 0.01);

  double operator()(double t) const;
  double speed(double t) const;  // -c'(t)
  double curvature_l1() const;   // finite-difference int |c''|
};

// 1{x <= c(t)}.
double u_c_exact(const ShockPath& c, double t, double x);
// Characteristic of u_c started at (t, x), evaluated at s >= t.
double xc_exact(const ShockPath& c, double t, double s, double x);

// Shock speed selected by the squared-gradient weight theta: 1/(1 - e^{-theta}) - 1/theta, C(0) = 1/2.
double speed_map_C(double theta);
// The closed form with numerator theta e^theta - e^theta - 1; kept only to document the discrepancy.
double speed_map_C_printed(double theta);
// Inverse of speed_map_C on (0, 1); throws DomainError outside.
double speed_map_inverse(double speed, double tol = 1e-12);

struct SelectionProfile {
  double T = 1.0;
  std::vector<double> times;
  std::vector<double> theta;
  std::vector<double> speed;
  double max_residual = 0.0;  // max |C(theta) - speed|

  static SelectionProfile constant(double theta, double T = 1.0, std::size_t samples = 2);
  double operator()(double t) const;
  double derivative(double t) const;
  double max_abs() const;
};

SelectionProfile theta_for_path(const ShockPath& c);

// Heaviside 1{x < 0} convolved with the normalized bump of half-width eps.
double smoothed_heaviside(double x, double eps);

struct ViscousOptions {
  double dt = 0.0;                 // 0 picks a step inside the CFL bound
  std::size_t output_slices = 100; // uniform in [0, T], T included
  std::function<double(double)> terminal;  // default: smoothed_heaviside at width eps
};

struct ViscousRun {
  double eps = 0.0;
  double dt = 0.0;
  std::size_t steps = 0;
  double max_cfl = 0.0;
  std::vector<double> times;         // ascending
  std::vector<GridFunction> slices;  // u^eps(t, .)
  std::vector<double> shock;         // first 1/2-crossing per slice

  const Grid& grid() const { return slices.front().grid(); }
  const GridFunction& at(double t) const;
};

// Explicit backward march of -u_t + u u_x = eps (u_xx + theta |u_x|^2): upwind (Engquist-Osher) advection,
// centered diffusion and squared gradient. Throws GuardError on CFL violation or blow-up.
ViscousRun viscous_solve(const SelectionProfile& profile, double eps, const Grid& grid, const ViscousOptions& opts = {});

// Solves the transformed conservative equation for v with u = log(theta v + 1)/theta and maps back.
ViscousRun cole_hopf_reference(const SelectionProfile& profile, double eps, const Grid& grid,
                               const ViscousOptions& opts = {});

// First crossing of 1/2 with linear interpolation; NaN if the profile never crosses.
double locate_shock(const GridFunction& u);

struct ShockFit {
  double speed = 0.0;          // least-squares slope of the shock position against T - t
  double max_deviation = 0.0;  // max |shock(t) - c(t)|
};
ShockFit shock_fit(const ViscousRun& run, const ShockPath& c, double skip_fraction = 0.1);

double l1_distance(const GridFunction& a, const GridFunction& b);

// v' = -f_t / f_v integrated back from v(T) = f^{-1}(T)(0) and f^{-1}(T)(1).
struct BranchReport {
  std::vector<double> times;
  std::vector<double> v_lower;  // branch carrying u = 0
  std::vector<double> v_upper;  // branch carrying u = 1
  double max_drift = 0.0;       // max |f(t, v(t)) - f(T, v(T))| over both branches
};
BranchReport branch_constancy(const SelectionProfile& profile, std::size_t substeps = 8);

struct RankineHugoniotReport {
  std::vector<double> times;
  std::vector<double> target;     // -c'
  std::vector<double> corrected;  // (F(v_1) - F(v_0)) / (v_1 - v_0)
  std::vector<double> printed;    // (F(v_0) - F(v_1)) / (v_1 - v_0)
  double max_error = 0.0;         // max |corrected - target|
};
RankineHugoniotReport rankine_hugoniot(const SelectionProfile& profile);

struct FbsdeOptions {
  std::size_t paths = 1000;
  std::uint64_t seed = 1;
  std::vector<double> starts;  // start points; default 41 points on [-1, 1.5]
};

struct FbsdeReport {
  double t = 0.0;
  std::vector<double> starts;
  std::vector<double> times;   // run times in [t, T]
  std::vector<double> mean_X;  // [start * times.size() + k]
  std::vector<double> mean_U;
  double xc_distance = 0.0;    // max over s of the start-averaged E|X - X^c|, scaled by the start spacing
  double residual_mean = 0.0;  // E[U_T - U_t - int Z dW + int theta Z^2 / 2 ds]
  double residual_se = 0.0;
  double step = 0.0;
};

// Forward dX = -u(s, X) ds + sqrt(2 eps) dW read against the run; U = u(s, X), Z = sqrt(2 eps) u_x(s, X).
FbsdeReport fbsde_simulate(const SelectionProfile& profile, double eps, const ViscousRun& run, const ShockPath& c,
                           double t, const FbsdeOptions& opts = {});

}  // namespace ordflow
