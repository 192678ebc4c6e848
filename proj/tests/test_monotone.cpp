#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "ordflow/error.hpp"
#include "ordflow/monotone.hpp"

using namespace ordflow;

namespace {

// Exhaustive search over monotone unit-step paths from node a to node b,
// accumulating each path sum from the start corner.
double brute_force_abv(const GridFunction& phi, std::vector<std::size_t> cur,
                       const std::vector<std::size_t>& end, double acc = 0.0) {
  const Grid& g = phi.grid();
  double best = acc;
  const double here = phi(g.flat_index(cur));
  for (std::size_t a = 0; a < g.dim(); ++a) {
    if (cur[a] >= end[a]) continue;
    auto next = cur;
    ++next[a];
    const double step = std::abs(phi(g.flat_index(next)) - here);
    best = std::max(best, brute_force_abv(phi, next, end, acc + step));
  }
  return best;
}

}  // namespace

TEST(Order, ComponentwiseComparison) {
  EXPECT_TRUE(leq(Point{0, 0}, Point{1, 1}));
  EXPECT_FALSE(leq(Point{0, 1}, Point{1, 0}));
  EXPECT_FALSE(leq(Point{1, 0}, Point{0, 1}));
  EXPECT_TRUE(leq(Point{0.3, -2}, Point{0.3, -2}));
  EXPECT_THROW(leq(Point{0}, Point{0, 1}), DimensionError);
}

TEST(Order, PartialOrderAxiomsOnRandomPoints) {
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<int> pick(-2, 2);
  std::vector<Point> pts;
  for (int i = 0; i < 40; ++i) pts.push_back({double(pick(rng)), double(pick(rng)), double(pick(rng))});
  for (const auto& x : pts) {
    EXPECT_TRUE(leq(x, x));
    for (const auto& y : pts) {
      if (leq(x, y) && leq(y, x)) EXPECT_EQ(x, y);
      for (const auto& z : pts)
        if (leq(x, y) && leq(y, z)) EXPECT_TRUE(leq(x, z));
    }
  }
}

TEST(Monotone, TaggedFunctions) {
  const Grid g = Grid::box({-1, -1}, {1, 1}, {9, 9});
  auto sum = GridFunction::sample(g, [](auto x) { return x[0] + x[1]; });
  auto diff = GridFunction::sample(g, [](auto x) { return x[0] - x[1]; });
  auto half = GridFunction::sample(g, [](auto x) { return x[0] + x[1] <= 0 ? 1.0 : 0.0; });
  EXPECT_TRUE(is_increasing(sum));
  EXPECT_FALSE(is_increasing(diff));
  EXPECT_FALSE(is_increasing(half));
  EXPECT_TRUE(is_decreasing(half));
  EXPECT_THROW(diff.with_tag(Monotonicity::increasing), DomainError);
  EXPECT_NO_THROW(half.with_tag(Monotonicity::decreasing));
}

TEST(Envelope, StepAndOrdering) {
  const Grid g = Grid::line(-1, 1, 9);  // node at 0 and at 0.25
  auto step = GridFunction::sample(g, [](auto x) { return x[0] <= 0 ? 1.0 : 0.0; });
  auto up = envelope(step, EnvelopeSide::upper);
  auto lo = envelope(step, EnvelopeSide::lower);
  EXPECT_EQ(up(4), 1.0);
  EXPECT_EQ(up(5), 1.0);
  EXPECT_EQ(up(6), 0.0);
  EXPECT_EQ(lo(4), 0.0);
  EXPECT_EQ(lo(3), 1.0);
  auto c = GridFunction::constant(g, 2.5);
  for (std::size_t i = 0; i < g.size(); ++i) EXPECT_EQ(envelope(c, EnvelopeSide::upper)(i), 2.5);

  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1, 1);
  const Grid g2 = Grid::box({0, 0}, {1, 1}, {6, 5});
  std::vector<double> v(g2.size() * 2);
  for (auto& e : v) e = u(rng);
  GridFunction f(g2, v, 2);
  auto f_up = envelope(f, EnvelopeSide::upper), f_lo = envelope(f, EnvelopeSide::lower);
  for (std::size_t k = 0; k < v.size(); ++k) {
    EXPECT_LE(f_lo.values()[k], v[k]);
    EXPECT_GE(f_up.values()[k], v[k]);
  }
}

TEST(ABV, MatchesExhaustiveEnumerationOnSmallGrids) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-1, 1);
  for (std::size_t nx = 2; nx <= 4; ++nx)
    for (std::size_t ny = 2; ny <= 4; ++ny) {
      const Grid g = Grid::box({0, 0}, {1, 1}, {nx, ny});
      for (int rep = 0; rep < 5; ++rep) {
        std::vector<double> v(g.size());
        for (auto& e : v) e = u(rng);
        GridFunction f(g, v);
        const double dp = abv_norm(f, {0, 0}, {1, 1});
        const double bf = brute_force_abv(f, {0, 0}, {nx - 1, ny - 1});
        EXPECT_EQ(dp, bf);
      }
    }
}

TEST(ABV, ClosedFormCases) {
  const Grid g = Grid::box({-1, -1}, {1, 1}, {21, 21});
  auto inc = GridFunction::sample(g, [](auto x) { return std::exp(x[0]) + x[1] * x[1] * x[1]; });
  EXPECT_NEAR(abv_norm(inc, {-1, -1}, {1, 1}), inc(g.size() - 1) - inc(0), 1e-12);
  const Grid unit = Grid::box({0, 0}, {1, 1}, {11, 11});
  auto diff = GridFunction::sample(unit, [](auto x) { return x[0] - x[1]; });
  EXPECT_NEAR(abv_norm(diff, {0, 0}, {1, 1}), 2.0, 1e-12);
  auto half = GridFunction::sample(g, [](auto x) { return x[0] + x[1] <= 0 ? 1.0 : 0.0; });
  EXPECT_EQ(abv_norm(half, {-1, -1}, {1, 1}), 1.0);
  EXPECT_THROW(abv_norm(half, {-1, -1}, {1.5, 1}), DomainError);
  EXPECT_THROW(abv_norm(half, {-1, -1}, {0.05, 1}), DomainError);
}

TEST(ABV, DecompositionIsExactAndIncreasing) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-1, 1);
  const Grid g = Grid::box({0, 0}, {1, 1}, {7, 6});
  for (int rep = 0; rep < 10; ++rep) {
    std::vector<double> v(g.size());
    for (auto& e : v) e = u(rng);
    GridFunction f(g, v);
    const ABVReport r = abv_decompose(f, {0, 0}, {1, 1});
    EXPECT_TRUE(is_increasing(r.increasing_part));
    EXPECT_TRUE(is_increasing(r.decreasing_part));
    for (std::size_t i = 0; i < g.size(); ++i)
      EXPECT_NEAR(r.increasing_part(i) - r.decreasing_part(i), f(i), 1e-12);
    EXPECT_EQ(r.norm, abv_norm(f, {0, 0}, {1, 1}));
  }
}

TEST(ABV, DecompositionOfMonotoneAndConstantData) {
  const Grid g = Grid::box({0, 0}, {1, 1}, {6, 6});
  auto inc = GridFunction::sample(g, [](auto x) { return 2 * x[0] + x[1]; });
  auto r = abv_decompose(inc, {0, 0}, {1, 1});
  for (std::size_t i = 0; i < g.size(); ++i) EXPECT_NEAR(r.decreasing_part(i), 0.0, 1e-12);
  auto dec = inc.map([](double s) { return -s; });
  auto q = abv_decompose(dec, {0, 0}, {1, 1});
  for (std::size_t i = 0; i < g.size(); ++i) {
    EXPECT_NEAR(q.increasing_part(i), 0.0, 1e-12);
    EXPECT_NEAR(q.increasing_part(i) - q.decreasing_part(i), dec(i), 1e-12);
  }
  auto c = GridFunction::constant(g, 3.0);
  auto k = abv_decompose(c, {0, 0}, {1, 1});
  for (std::size_t i = 0; i < g.size(); ++i) {
    EXPECT_EQ(k.increasing_part(i), 1.5);
    EXPECT_EQ(k.decreasing_part(i), -1.5);
  }
}
