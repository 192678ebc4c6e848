#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "ordflow/error.hpp"
#include "ordflow/monotone.hpp"
#include "ordflow/regularize.hpp"

using namespace ordflow;

namespace {

double step_le0(double x) { return x <= 0 ? 1.0 : 0.0; }

// Defining extremum evaluated over a fine y-lattice, independent of the grid code.
double brute_sup(double x, double eps, double (*phi)(double), bool upper) {
  double best = phi(x);
  for (int k = -20000; k <= 20000; ++k) {
    const double y = k * 1e-4;
    const double v = upper ? phi(x - y) - std::abs(y) / eps : phi(x - y) + std::abs(y) / eps;
    best = upper ? std::max(best, v) : std::min(best, v);
  }
  return best;
}

GridFunction random_increasing(const Grid& g, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0, 1);
  std::vector<double> v(g.size());
  for (auto& e : v) e = u(rng) < 0.3 ? u(rng) : 0.0;
  // Cumulative sums along every axis give an increasing function with jumps.
  for (std::size_t a = 0; a < g.dim(); ++a)
    for (std::size_t i = 0; i < g.size(); ++i)
      if (g.axis_index(i, a) > 0) v[i] += v[i - g.stride(a)];
  const double top = std::max(1.0, v.back());
  for (auto& e : v) e /= top;  // values in [0, 1]
  return GridFunction(g, v, 1, Monotonicity::increasing);
}

}  // namespace

TEST(SupInf, StepValuesMatchDefinition) {
  // The sup is attained at the closed jump; the inf is not attained and is resolved to one cell.
  const Grid g = Grid::line(-1, 1, 8001);
  const double h = g.spacing(0), eps = 0.25;
  auto phi = GridFunction::sample(g, [](auto x) { return step_le0(x[0]); });
  auto up = sup_convolution(phi, eps);
  auto lo = inf_convolution(phi, eps);
  EXPECT_NEAR(up(g.nearest(0, 0.125)), 0.5, 1e-12);
  EXPECT_NEAR(lo(g.nearest(0, -0.125)), 0.5, h / eps + 1e-12);
  for (std::size_t i = 0; i < g.size(); i += 97) {
    const double x = g.coord(0, i);
    if (std::abs(x) > 0.7) continue;  // away from clamping effects
    EXPECT_NEAR(up(i), brute_sup(x, eps, step_le0, true), 1e-3 / eps + 1e-12);
    EXPECT_NEAR(lo(i), brute_sup(x, eps, step_le0, false), h / eps + 1e-3 / eps);
  }
}

TEST(SupInf, ConstantsAndGrowthGuard) {
  const Grid g = Grid::line(-1, 1, 41);
  auto c = GridFunction::constant(g, 0.7);
  EXPECT_EQ(sup_convolution(c, 0.3).values()[5], 0.7);
  EXPECT_EQ(inf_convolution(c, 0.3).values()[5], 0.7);
  auto big = GridFunction::sample(g, [](auto x) { return 10 * x[0]; });
  EXPECT_THROW(sup_convolution(big, 0.5), GuardError);
}

TEST(SupInf, OrderingMonotonicityAndLipschitz) {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(-1, 1);
  const Grid g = Grid::box({-1, -1}, {1, 1}, {21, 21});
  for (int rep = 0; rep < 5; ++rep) {
    std::vector<double> v(g.size());
    for (auto& e : v) e = u(rng) > 0.2 ? 1.0 : u(rng);
    GridFunction phi(g, v);
    auto up = sup_convolution(phi, 0.2), lo = inf_convolution(phi, 0.2);
    auto up2 = sup_convolution(phi, 0.1), lo2 = inf_convolution(phi, 0.1);
    for (std::size_t i = 0; i < g.size(); ++i) {
      EXPECT_LE(lo(i), phi(i));
      EXPECT_GE(up(i), phi(i));
      EXPECT_LE(up2(i), up(i));
      EXPECT_GE(lo2(i), lo(i));
      for (std::size_t a = 0; a < 2; ++a)
        if (g.axis_index(i, a) + 1 < g.count(a))
          EXPECT_LE(std::abs(up(i + g.stride(a)) - up(i)), g.spacing(a) / 0.2 + 1e-12);
    }
  }
  auto inc = random_increasing(g, rng);
  EXPECT_TRUE(is_increasing(sup_convolution(inc, 0.1)));
  EXPECT_TRUE(is_increasing(inf_convolution(inc, 0.1)));
}

TEST(Mollifier, KernelProperties) {
  const Grid g = Grid::box({0, 0}, {1, 1}, {11, 11});
  MollifierKernel k(g, 0.25, KernelSide::lower);
  EXPECT_EQ(k.steps(0), 5U);
  double mass = 0;
  for (double w : k.weights()) {
    EXPECT_GT(w, 0.0);
    mass += w;
  }
  EXPECT_NEAR(mass, 1.0, 1e-15);
  EXPECT_THROW(MollifierKernel(g, 0.04, KernelSide::upper), DomainError);
}

TEST(Mollifier, LowerSideOfIncreasingStep) {
  const Grid g = Grid::line(-1, 1, 201);
  auto phi = GridFunction::sample(g, [](auto x) { return x[0] >= 0 ? 1.0 : 0.0; }, Monotonicity::increasing);
  for (double eps : {0.02, 0.05, 0.13}) {
    auto lo = one_sided_mollify(phi, MollifierKernel(g, eps, KernelSide::lower));
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double x = g.coord(0, i);
      if (x <= 1e-12) EXPECT_EQ(lo(i), 0.0);
      if (x >= 2 * eps - 1e-12) EXPECT_NEAR(lo(i), 1.0, 1e-14);
    }
  }
}

TEST(Mollifier, ShiftIdentityIsExact) {
  std::mt19937_64 rng(8);
  for (std::size_t d = 1; d <= 2; ++d) {
    const Grid g = d == 1 ? Grid::line(-1, 1, 81) : Grid::box({-1, -1}, {1, 1}, {41, 41});
    auto phi = random_increasing(g, rng);
    const double eps = 0.1;
    const MollifierKernel up(g, eps, KernelSide::upper), lo(g, eps, KernelSide::lower);
    auto fu = one_sided_mollify(phi, up), fl = one_sided_mollify(phi, lo);
    const std::size_t k = up.steps(0);
    for (std::size_t i = 0; i < g.size(); ++i) {
      bool ok = true;
      std::size_t j = i;
      for (std::size_t a = 0; a < d; ++a) {
        if (g.axis_index(i, a) < k) ok = false;
        else j -= k * g.stride(a);
      }
      if (ok) EXPECT_EQ(fu(j), fl(i));
    }
  }
}

TEST(Mollifier, OrderingConstantsAndL1Rate) {
  const Grid g = Grid::line(-2, 2, 801);
  auto inc = GridFunction::sample(g, [](auto x) { return x[0] >= 0.3 ? 1.0 : (x[0] > -0.5 ? 0.4 : 0.0); },
                                  Monotonicity::increasing);
  auto dec = inc.map([](double s) { return -s; }, Monotonicity::decreasing);
  std::vector<double> errs;
  for (double eps : {0.08, 0.04, 0.02}) {
    auto u = one_sided_mollify(inc, MollifierKernel(g, eps, KernelSide::upper));
    auto l = one_sided_mollify(inc, MollifierKernel(g, eps, KernelSide::lower));
    auto ud = one_sided_mollify(dec, MollifierKernel(g, eps, KernelSide::upper));
    for (std::size_t i = 0; i < g.size(); ++i) {
      EXPECT_LE(l(i), inc(i));
      EXPECT_GE(u(i), inc(i));
      EXPECT_LE(ud(i), dec(i));
    }
    errs.push_back(lp_distance(u, inc));
  }
  EXPECT_NEAR(errs[0] / errs[1], 2.0, 0.3);
  EXPECT_NEAR(errs[1] / errs[2], 2.0, 0.3);
  auto c = GridFunction::constant(g, -1.25);
  auto cm = one_sided_mollify(c, MollifierKernel(g, 0.05, KernelSide::upper));
  for (std::size_t i = 0; i < g.size(); ++i) EXPECT_NEAR(cm(i), -1.25, 1e-15);
}
