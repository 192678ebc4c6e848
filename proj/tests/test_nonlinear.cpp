#include <gtest/gtest.h>

#include <cmath>

#include "ordflow/error.hpp"
#include "ordflow/monotone.hpp"
#include "ordflow/nonlinear.hpp"

using namespace ordflow;

namespace {

VectorFn step_at(double a) {
  return [a](std::span<const double> x, std::span<double> out) { out[0] = x[0] <= a ? 1.0 : 0.0; };
}

std::vector<double> uniform_times(double T, int n) {
  std::vector<double> t(n + 1);
  for (int k = 0; k <= n; ++k) t[k] = T * k / n;
  return t;
}

// Nodes farther than band from the jump c where the slice differs from 1{x <= c}.
std::size_t step_mismatches(const GridFunction& f, double c, double band) {
  std::size_t n = 0;
  for (std::size_t i = 0; i < f.nodes(); ++i) {
    const double x = f.grid().coord(0, i);
    if (std::abs(x - c) <= band) continue;
    if (std::abs(f(i) - (x <= c ? 1.0 : 0.0)) > 1e-9) ++n;
  }
  return n;
}

double ramp(double x) { return 0.5 * (1.0 - std::tanh(x)); }

// Burgers with u_T = ramp, solved along characteristics: U = ramp(x - U tau).
double ramp_reference(double tau, double x) {
  double lo = 0.0, hi = 1.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid - ramp(x - mid * tau) > 0.0) hi = mid;
    else lo = mid;
  }
  return 0.5 * (lo + hi);
}

double slice_l1(const GridFunction& f, const std::function<double(double)>& exact) {
  double s = 0.0;
  for (std::size_t i = 0; i < f.nodes(); ++i) s += std::abs(f(i) - exact(f.grid().coord(0, i)));
  return s * f.grid().cell_volume();
}

LatticeIterate step_family(const Grid& g, const std::vector<double>& times, const std::function<double(double)>& c) {
  return lattice_from(g, times, 1, [&](double t, std::span<const double> x, std::span<double> o) {
    o[0] = x[0] <= c(t) ? 1.0 : 0.0;
  }, LatticeDirection::from_top);
}

}  // namespace

TEST(Nonlinear, CatalogAndValidation) {
  EXPECT_THROW(make_nonlinearity("nope"), ConfigError);
  const Grid g = Grid::line(-2, 2, 41);
  const std::vector<double> times{0.0, 1.0};
  EXPECT_NO_THROW(validate_nonlinearity(Nonlinearity::burgers(), g, 0.0, 1.0, times, 1e-12));
  EXPECT_NO_THROW(validate_nonlinearity(Nonlinearity::linear_decay(0.5), g, 0.0, 1.0, times, 1e-12));
  Nonlinearity bad = Nonlinearity::burgers();
  bad.f = [](double, std::span<const double>, std::span<const double> u, std::span<double> o) { o[0] = u[0]; };
  EXPECT_THROW(validate_nonlinearity(bad, g, 0.0, 1.0, times, 1e-12), GuardError);
}

TEST(Nonlinear, ReductionRemovesC0) {
  const double a = 0.7, T = 1.0;
  const Nonlinearity r = reduce_c0(Nonlinearity::linear_decay(a), T);
  EXPECT_TRUE(r.c0.is_zero());
  // f~(t, x, u) = -e^{-2 a (T - t)} u exactly.
  for (double t : {0.0, 0.4, 1.0}) {
    const double x[1]{0.8}, u[1]{0.6};
    double out[1];
    r.f(t, x, u, out);
    EXPECT_NEAR(out[0], -std::exp(-2.0 * a * (T - t)) * 0.6, 1e-14);
    r.g(t, x, u, out);
    EXPECT_NEAR(out[0], a * 0.6, 1e-14);
  }
}

TEST(Nonlinear, MapOfConstantOneTranslatesStep) {
  const Grid g = Grid::line(-2, 2, 201);
  const auto times = uniform_times(1.0, 4);
  const auto top = lattice_start(g, times, step_at(0.0), 1, LatticeDirection::from_top);
  const auto v = fixed_point_map(top, Nonlinearity::burgers(), step_at(0.0), {});
  EXPECT_EQ(v.iteration, 1u);
  for (double t : times) EXPECT_EQ(step_mismatches(v.at(t), 1.0 - t, 1e-9), 0u) << t;
}

TEST(Nonlinear, MapOfZeroFreezesStep) {
  const Grid g = Grid::line(-2, 2, 201);
  const auto times = uniform_times(1.0, 4);
  const auto bottom = lattice_start(g, times, step_at(0.0), 1, LatticeDirection::from_bottom);
  const auto v = fixed_point_map(bottom, Nonlinearity::burgers(), step_at(0.0), {});
  for (double t : times) EXPECT_EQ(step_mismatches(v.at(t), 0.0, 1e-9), 0u) << t;
}

TEST(Nonlinear, MapRejectsNonLatticeInput) {
  const Grid g = Grid::line(-1, 1, 21);
  const auto times = uniform_times(1.0, 2);
  auto u = lattice_from(g, times, 1, [](double, std::span<const double> x, std::span<double> o) { o[0] = x[0]; },
                        LatticeDirection::from_top);
  EXPECT_THROW(fixed_point_map(u, Nonlinearity::burgers(), step_at(0.0), {}), DomainError);
  EXPECT_THROW(fixed_point_map(u, Nonlinearity::linear_decay(1.0), step_at(0.0), {}), DomainError);
}

TEST(Nonlinear, MapIsOrderPreserving) {
  const Grid g = Grid::line(-2, 2, 201);
  const auto times = uniform_times(1.0, 5);
  const auto nl = Nonlinearity::burgers();
  for (auto dir : {LatticeDirection::from_top, LatticeDirection::from_bottom}) {
    auto lo = step_family(g, times, [](double t) { return 0.11 * (1.0 - t); });
    auto hi = step_family(g, times, [](double t) { return 0.63 * (1.0 - t); });
    lo.direction = hi.direction = dir;
    ASSERT_TRUE(lattice_leq(lo, hi));
    EXPECT_TRUE(lattice_leq(fixed_point_map(lo, nl, step_at(0.0), {}), fixed_point_map(hi, nl, step_at(0.0), {})))
        << to_string(dir);
  }
}

TEST(Nonlinear, BurgersExtremalSolutions) {
  const Grid g = Grid::line(-2, 2, 201);
  const auto times = uniform_times(1.0, 10);
  const auto nl = Nonlinearity::burgers();
  const auto top = solve_extremal(nl, step_at(0.0), g, times, LatticeDirection::from_top);
  const auto bot = solve_extremal(nl, step_at(0.0), g, times, LatticeDirection::from_bottom);
  const double h = g.spacing(0);
  for (const auto* r : {&top, &bot}) {
    EXPECT_TRUE(r->converged);
    EXPECT_LE(r->iterations, 3u);
    EXPECT_LT(r->fixed_point_residual, r->tolerance);
    EXPECT_LE(r->monotone_defect, 1e-12);
  }
  for (double t : times) {
    EXPECT_EQ(step_mismatches(top.solution.at(t), 1.0 - t, 1.01 * h), 0u) << t;
    EXPECT_EQ(step_mismatches(bot.solution.at(t), 0.0, 1.01 * h), 0u) << t;
    EXPECT_TRUE(is_decreasing(top.solution.at(t)));
  }
  // Sandwich: the entropy solution 1{x <= (T - t)/2} lies between the extremal ones.
  const auto mid = step_family(g, times, [](double t) { return 0.5 * (1.0 - t); });
  EXPECT_TRUE(lattice_leq(bot.solution, mid, 1e-12));
  EXPECT_TRUE(lattice_leq(mid, top.solution, 1e-12));
  // Extremality: u v u- = u.
  const auto joined = lattice_max(mid, bot.solution, nl, step_at(0.0), h);
  EXPECT_LT(lattice_distance(joined.combined, mid), 1e-12);
}

TEST(Nonlinear, ZeroNonlinearityKeepsTerminalData) {
  const Grid g = Grid::line(-1, 1, 41);
  const auto times = uniform_times(1.0, 4);
  for (auto dir : {LatticeDirection::from_top, LatticeDirection::from_bottom}) {
    const auto r = solve_extremal(Nonlinearity::zero(1, 1), step_at(0.3), g, times, dir);
    EXPECT_TRUE(r.converged);
    for (double t : times) EXPECT_EQ(step_mismatches(r.solution.at(t), 0.3, 1e-9), 0u);
  }
}

TEST(Nonlinear, SmoothRampMatchesCharacteristics) {
  const double T = 0.5;
  const Grid g = Grid::line(-4, 4, 401);
  const auto times = uniform_times(T, 20);
  const VectorFn uT = [](std::span<const double> x, std::span<double> o) { o[0] = ramp(x[0]); };
  const auto nl = Nonlinearity::burgers();
  const auto top = solve_extremal(nl, uT, g, times, LatticeDirection::from_top, 40);
  const auto bot = solve_extremal(nl, uT, g, times, LatticeDirection::from_bottom, 40);
  ASSERT_TRUE(top.converged);
  ASSERT_TRUE(bot.converged);
  EXPECT_LT(lattice_distance(top.solution, bot.solution), top.tolerance);
  const double dt = times[1] - times[0];
  for (double t : times) {
    const auto ref = [&](double x) { return ramp_reference(T - t, x); };
    EXPECT_LT(slice_l1(top.solution.at(t), ref), 2.0 * (dt + g.spacing(0))) << t;
    EXPECT_LT(slice_l1(bot.solution.at(t), ref), 2.0 * (dt + g.spacing(0))) << t;
  }
}

TEST(Nonlinear, SmoothComparison) {
  const double T = 0.5;
  const Grid g = Grid::line(-4, 4, 201);
  const auto times = uniform_times(T, 10);
  const VectorFn lo = [](std::span<const double> x, std::span<double> o) { o[0] = 0.8 * ramp(x[0]); };
  const VectorFn hi = [](std::span<const double> x, std::span<double> o) { o[0] = ramp(x[0] - 0.3); };
  const auto nl = Nonlinearity::burgers();
  const auto u = solve_extremal(nl, lo, g, times, LatticeDirection::from_top, 40);
  const auto v = solve_extremal(nl, hi, g, times, LatticeDirection::from_top, 40);
  EXPECT_TRUE(lattice_leq(u.solution, v.solution, 1e-9));
}

TEST(Nonlinear, LinearDecayReducedSolve) {
  const double a = 0.5, T = 0.5;
  const Grid g = Grid::line(-3, 3, 121);
  const auto times = uniform_times(T, 10);
  const VectorFn uT = [](std::span<const double> x, std::span<double> o) { o[0] = ramp(x[0]); };
  const auto nl = Nonlinearity::linear_decay(a);
  const auto top = solve_extremal(nl, uT, g, times, LatticeDirection::from_top, 40);
  const auto bot = solve_extremal(nl, uT, g, times, LatticeDirection::from_bottom, 40);
  EXPECT_TRUE(top.converged);
  EXPECT_TRUE(bot.converged);
  EXPECT_TRUE(lattice_leq(bot.solution, top.solution, 1e-9));
  for (double t : times) EXPECT_TRUE(is_decreasing(top.solution.at(t)));
}

TEST(Nonlinear, LatticeMaxOfShiftedSubsolutions) {
  const Grid g = Grid::line(-2, 2, 201);
  const auto times = uniform_times(1.0, 20);
  const auto nl = Nonlinearity::burgers();
  const double eps = 4.0 * g.spacing(0);
  // Shock paths with speeds in (0, 1) that cross at t = 0.2.
  const auto c1 = [](double t) { return 0.6 * (1.0 - t) - 0.25 * (1.0 - t) * (1.0 - t); };
  const auto c2 = [](double t) { return 0.4 * (1.0 - t); };
  const auto u = step_family(g, times, c1);
  const auto v = step_family(g, times, c2);
  const auto r = lattice_max(u, v, nl, step_at(0.0), eps);
  EXPECT_EQ(r.residual_u.violations, 0u);
  EXPECT_EQ(r.residual_v.violations, 0u);
  EXPECT_TRUE(r.passed);
  const auto expect = step_family(g, times, [&](double t) { return std::max(c1(t), c2(t)); });
  EXPECT_LT(lattice_distance(r.combined, expect), 1e-12);
  EXPECT_GT(lattice_distance(r.combined, u), 0.0);
  EXPECT_GT(lattice_distance(r.combined, v), 0.0);
  const auto same = lattice_max(u, u, nl, step_at(0.0), eps);
  EXPECT_LT(lattice_distance(same.combined, u), 1e-12);
}

TEST(Nonlinear, LatticeMaxFlagsTooFastShock) {
  // A jump moving faster than the characteristics is not a subsolution.
  const Grid g = Grid::line(-2, 2, 201);
  const auto times = uniform_times(1.0, 20);
  const auto fast = step_family(g, times, [](double t) { return 1.5 * (1.0 - t); });
  const auto r = lattice_max(fast, fast, Nonlinearity::burgers(), step_at(0.0), 4.0 * g.spacing(0));
  EXPECT_GT(r.residual_u.violations, 0u);
  EXPECT_FALSE(r.passed);
}

TEST(Nonlinear, CharacteristicsOfShockFamily) {
  const double T = 1.0;
  const Grid g = Grid::line(-2, 2, 201);
  const auto times = uniform_times(T, 10);
  const auto c = [&](double t) { return 0.5 * (T - t); };
  const auto u = step_family(g, times, c);
  const double t0 = 0.2, h = g.spacing(0);
  const auto cb = extract_characteristics(u, Nonlinearity::burgers(), step_at(0.0), t0, {});
  ASSERT_EQ(cb.times.size(), 9u);
  EXPECT_LT(cb.terminal_defect, 4.0 * h);
  for (std::size_t j = 0; j < cb.times.size(); ++j) {
    const double s = cb.times[j];
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double x = g.coord(0, i);
      const double X = cb.X[j](i);
      if (x < c(t0) - 2 * h) {
        EXPECT_NEAR(X, x - (s - t0), 2 * h) << x << " " << s;
        EXPECT_EQ(cb.U[j](i), 1.0);
      } else if (x > c(t0) + 2 * h) {
        EXPECT_NEAR(X, x, 2 * h) << x << " " << s;
        EXPECT_EQ(cb.U[j](i), 0.0);
      } else {
        // Near the shock X lies between the two outer branches.
        EXPECT_GE(X, x - (s - t0) - 2 * h);
        EXPECT_LE(X, x + 2 * h);
      }
    }
  }
}

TEST(Nonlinear, CharacteristicsOfSmoothRamp) {
  const double T = 0.5;
  const Grid g = Grid::line(-4, 4, 401);
  const auto times = uniform_times(T, 20);
  const VectorFn uT = [](std::span<const double> x, std::span<double> o) { o[0] = ramp(x[0]); };
  const auto nl = Nonlinearity::burgers();
  const auto sol = solve_extremal(nl, uT, g, times, LatticeDirection::from_top, 40).solution;
  const auto cb = extract_characteristics(sol, nl, uT, 0.0, {});
  const double tol = 2.0 * ((times[1] - times[0]) + g.spacing(0));
  for (std::size_t i = 0; i < g.size(); i += 10) {
    const double x = g.coord(0, i);
    if (std::abs(x) > 3.0) continue;
    const double U = ramp_reference(T, x);
    EXPECT_NEAR(cb.X.back()(i), x - U * T, tol) << x;
    EXPECT_NEAR(cb.U.front()(i), U, tol) << x;
  }
  EXPECT_LT(cb.backward_residual, 0.05);
}

TEST(Nonlinear, CharacteristicsOfZeroNonlinearity) {
  const Grid g = Grid::line(-1, 1, 41);
  const auto times = uniform_times(1.0, 4);
  const auto r = solve_extremal(Nonlinearity::zero(1, 1), step_at(0.3), g, times, LatticeDirection::from_top);
  const auto cb = extract_characteristics(r.solution, Nonlinearity::zero(1, 1), step_at(0.3), 0.0, {});
  for (std::size_t j = 0; j < cb.times.size(); ++j)
    for (std::size_t i = 0; i < g.size(); ++i) {
      EXPECT_NEAR(cb.X[j](i), g.coord(0, i), 1e-12);
      EXPECT_EQ(cb.U[j](i), g.coord(0, i) <= 0.3 ? 1.0 : 0.0);
    }
  EXPECT_EQ(cb.terminal_defect, 0.0);
  EXPECT_EQ(cb.backward_residual, 0.0);
}
